#include "mvs/config.hpp"

#include "mvs/io.hpp"

#include <charconv>
#include <set>
#include <sstream>

namespace mvs {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
std::string num(T v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Typed access to one section; remembers which keys were read so leftovers
// can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const IniSection* sec, std::string name, std::string source)
      : sec_(sec), name_(std::move(name)), source_(std::move(source)) {}

  bool has(const std::string& key) const { return sec_ && sec_->count(key); }

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return sec_->at(key).value;
  }

  void real(const std::string& key, double& out) {
    if (auto v = text(key)) out = parse_real(key, *v);
  }

  void integer(const std::string& key, int& out) {
    if (auto v = text(key)) {
      int r = 0;
      auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), r);
      if (ec != std::errc() || p != v->data() + v->size()) error(key, "expected an integer, got '" + *v + "'");
      out = r;
    }
  }

  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (auto v = text(key)) {
      std::uint64_t r = 0;
      auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), r);
      if (ec != std::errc() || p != v->data() + v->size()) {
        error(key, "expected a non-negative integer, got '" + *v + "'");
      }
      out = r;
    }
  }

  std::vector<double> list(const std::string& key, std::size_t expected = 0) {
    std::vector<double> out;
    auto v = text(key);
    if (!v) return out;
    std::string s = *v;
    for (char& c : s) {
      if (c == ',') c = ' ';
    }
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(parse_real(key, tok));
    if (expected && out.size() != expected) {
      error(key, "expected " + std::to_string(expected) + " numbers, got " + std::to_string(out.size()));
    }
    if (out.empty()) error(key, "expected a list of numbers");
    return out;
  }

  void finish() const {
    if (!sec_) return;
    for (const auto& [key, entry] : *sec_) {
      if (!used_.count(key)) error(key, "unknown key");
    }
  }

  [[noreturn]] void error(const std::string& key, const std::string& what) const {
    std::string where = source_;
    if (has(key)) where += ":" + std::to_string(sec_->at(key).line);
    throw ConfigError(where + ": [" + name_ + "] " + key + ": " + what);
  }

 private:
  double parse_real(const std::string& key, const std::string& v) const {
    double r = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), r);
    if (ec != std::errc() || p != v.data() + v.size()) error(key, "expected a number, got '" + v + "'");
    return r;
  }

  const IniSection* sec_;
  std::string name_;
  std::string source_;
  std::set<std::string> used_;
};

const IniSection* find(const IniDocument& doc, const std::string& name) {
  auto it = doc.find(name);
  return it == doc.end() ? nullptr : &it->second;
}

CameraModel read_view(SectionReader& r, const SceneSpec& scene) {
  CameraModel cam;
  auto& k = cam.intrinsics;
  k.width = scene.width;
  k.height = scene.height;
  k.cx = (scene.width - 1) / 2.0;
  k.cy = (scene.height - 1) / 2.0;
  if (!r.has("fx")) r.error("fx", "missing");
  if (!r.has("fy")) r.error("fy", "missing");
  r.real("fx", k.fx);
  r.real("fy", k.fy);
  r.real("cx", k.cx);
  r.real("cy", k.cy);
  if (r.has("rotation")) {
    const auto rot = r.list("rotation", 9);
    for (int i = 0; i < 9; ++i) cam.world_to_camera.rotation(i / 3, i % 3) = rot[static_cast<std::size_t>(i)];
  }
  if (r.has("translation") && r.has("center")) r.error("center", "give either translation or center, not both");
  if (r.has("translation")) {
    const auto t = r.list("translation", 3);
    cam.world_to_camera.translation = Point3(t[0], t[1], t[2]);
  } else if (r.has("center")) {
    const auto c = r.list("center", 3);
    cam.world_to_camera.translation = -(cam.world_to_camera.rotation * Point3(c[0], c[1], c[2]));
  }
  return cam;
}

SceneSpec read_scene(const IniDocument& doc, const std::string& source, const std::filesystem::path& base_dir,
                     const DepthRange& range) {
  SceneSpec spec;
  spec.range = range;
  SectionReader r(find(doc, "scene"), "scene", source);
  r.integer("width", spec.width);
  r.integer("height", spec.height);
  r.real("image_noise", spec.image_noise);

  const std::string geometry = r.text("geometry").value_or("plane");
  if (geometry == "plane") {
    PlaneGeometry g;
    if (r.has("plane_normal")) {
      const auto n = r.list("plane_normal", 3);
      g.normal = Point3(n[0], n[1], n[2]);
    }
    r.real("plane_offset", g.offset);
    spec.geometry = g;
  } else if (geometry == "sphere") {
    SphereGeometry g;
    if (r.has("sphere_center")) {
      const auto c = r.list("sphere_center", 3);
      g.center = Point3(c[0], c[1], c[2]);
    }
    r.real("sphere_radius", g.radius);
    spec.geometry = g;
  } else {
    r.error("geometry", "expected 'plane' or 'sphere', got '" + geometry + "'");
  }
  for (const char* k : {"plane_normal", "plane_offset", "sphere_center", "sphere_radius"}) {
    const bool plane_key = std::string(k).rfind("plane", 0) == 0;
    if (r.has(k) && plane_key != (geometry == "plane")) r.error(k, "does not apply to geometry '" + geometry + "'");
  }

  const std::string texture = r.text("texture").value_or("noise");
  if (texture == "checker") {
    CheckerTexture t;
    r.real("checker_period", t.period);
    spec.texture = t;
  } else if (texture == "noise") {
    NoiseTexture t;
    r.unsigned64("noise_seed", t.seed);
    r.integer("noise_octaves", t.octaves);
    r.real("noise_scale", t.scale);
    spec.texture = t;
  } else if (texture == "image") {
    ImageTexture t;
    auto path = r.text("texture_image");
    if (!path) r.error("texture_image", "missing (required for texture = image)");
    t.path = *path;
    std::filesystem::path p(*path);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    try {
      t.image = read_pnm(p);
    } catch (const FormatError& e) {
      r.error("texture_image", e.what());
    }
    spec.texture = t;
  } else {
    r.error("texture", "expected 'checker', 'noise' or 'image', got '" + texture + "'");
  }
  const std::map<std::string, std::string> owner{{"checker_period", "checker"}, {"noise_seed", "noise"},
                                                 {"noise_octaves", "noise"},    {"noise_scale", "noise"},
                                                 {"texture_image", "image"}};
  for (const auto& [k, kind] : owner) {
    if (r.has(k) && kind != texture) r.error(k, "does not apply to texture '" + texture + "'");
  }
  r.finish();

  for (int i = 0;; ++i) {
    const std::string name = "view." + std::to_string(i);
    const IniSection* sec = find(doc, name);
    if (!sec) break;
    SectionReader vr(sec, name, source);
    spec.views.push_back(read_view(vr, spec));
    vr.finish();
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return spec;
}

}  // namespace

void DepthConfig::validate() const {
  if (!(min > 0) || !(max > min)) throw ConfigError("[depth] min/max: need 0 < min < max");
  if (samples < 2) throw ConfigError("[depth] samples: need at least 2 hypotheses");
  if (level < 0 || level > 3) throw ConfigError("[depth] level: must be in 0..3");
  if (!(temperature > 0)) throw ConfigError("[depth] temperature: must be positive");
  if (regularize_radius < 0 || regularize_passes < 0) throw ConfigError("[depth] regularize_*: must be >= 0");
  if (probability_window < 1) throw ConfigError("[depth] probability_window: must be >= 1");
  if (!(invalid_cost > 0)) throw ConfigError("[depth] invalid_cost: must be positive");
}

void PipelineConfig::validate() const {
  depth.validate();
  auto wrap = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[") + section + "] " + e.what());
    }
  };
  wrap("features", [&] { features.validate(); });
  wrap("loss", [&] { loss.validate(); });
  wrap("fusion", [&] { fusion.validate(); });
  wrap("refine", [&] { refine.validate(); });
  if (!(normal_depth.alpha1 >= 0)) throw ConfigError("[normal_depth] alpha1: must be >= 0");
  if (normal_depth.iterations < 0) throw ConfigError("[normal_depth] iterations: must be >= 0");
  if (eval.thresholds.empty()) throw ConfigError("[eval] thresholds: need at least one");
  for (double t : eval.thresholds) {
    if (!(t > 0)) throw ConfigError("[eval] thresholds: must be positive");
  }
  if (!(eval.max_distance > 0)) throw ConfigError("[eval] max_distance: must be positive");
  if (eval.border < 0) throw ConfigError("[eval] border: must be >= 0");
}

IniDocument parse_ini(const std::string& text, const std::string& source) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    const std::string where = source + ":" + std::to_string(line);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      if (doc.count(section)) throw ConfigError(where + ": [" + section + "] appears twice");
      doc[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + s + "'");
    const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": " + key + ": key outside any [section]");
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (value.empty()) throw ConfigError(where + ": [" + section + "] " + key + ": empty value");
    if (doc[section].count(key)) throw ConfigError(where + ": [" + section + "] " + key + ": duplicate key");
    doc[section][key] = {value, line};
  }
  return doc;
}

PipelineConfig config_from_ini(const IniDocument& doc, const std::string& source,
                               const std::filesystem::path& base_dir) {
  static const std::set<std::string> known{"scene", "depth", "features", "loss", "normal_depth",
                                           "fusion", "refine", "eval"};
  for (const auto& [name, sec] : doc) {
    if (known.count(name)) continue;
    if (name.rfind("view.", 0) == 0) {
      const std::string idx = name.substr(5);
      int i = -1;
      auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), i);
      if (ec == std::errc() && p == idx.data() + idx.size() && i >= 0 && std::to_string(i) == idx) {
        if (i == 0 || doc.count("view." + std::to_string(i - 1))) continue;
        throw ConfigError(source + ": [" + name + "]: views must be numbered consecutively from 0");
      }
    }
    const int line = sec.empty() ? 0 : sec.begin()->second.line;
    throw ConfigError(source + (line ? ":" + std::to_string(line) : "") + ": [" + name + "]: unknown section");
  }

  PipelineConfig cfg;
  {
    SectionReader r(find(doc, "depth"), "depth", source);
    r.real("min", cfg.depth.min);
    r.real("max", cfg.depth.max);
    r.integer("samples", cfg.depth.samples);
    r.integer("level", cfg.depth.level);
    r.real("temperature", cfg.depth.temperature);
    r.integer("regularize_radius", cfg.depth.regularize_radius);
    r.integer("regularize_passes", cfg.depth.regularize_passes);
    r.integer("probability_window", cfg.depth.probability_window);
    r.real("invalid_cost", cfg.depth.invalid_cost);
    r.finish();
  }
  {
    SectionReader r(find(doc, "features"), "features", source);
    r.integer("channels", cfg.features.channels);
    r.integer("window", cfg.features.window);
    r.real("epsilon", cfg.features.epsilon);
    r.finish();
  }
  {
    SectionReader r(find(doc, "loss"), "loss", source);
    auto& w = cfg.loss;
    r.real("gamma1", w.gamma1);
    r.real("gamma2", w.gamma2);
    r.real("lambda1", w.lambda1);
    r.real("lambda2", w.lambda2);
    r.real("lambda3", w.lambda3);
    r.real("beta1", w.beta1);
    r.real("beta2", w.beta2);
    r.real("beta3", w.beta3);
    r.real("alpha2", w.alpha2);
    r.real("alpha3", w.alpha3);
    r.finish();
  }
  {
    SectionReader r(find(doc, "normal_depth"), "normal_depth", source);
    r.real("alpha1", cfg.normal_depth.alpha1);
    r.integer("iterations", cfg.normal_depth.iterations);
    r.finish();
  }
  {
    SectionReader r(find(doc, "fusion"), "fusion", source);
    r.real("photometric_threshold", cfg.fusion.photometric_threshold);
    r.real("pixel_threshold", cfg.fusion.pixel_threshold);
    r.real("relative_depth_threshold", cfg.fusion.relative_depth_threshold);
    r.integer("min_consistent_views", cfg.fusion.min_consistent_views);
    r.finish();
  }
  {
    SectionReader r(find(doc, "refine"), "refine", source);
    if (auto m = r.text("method")) {
      if (*m == "adaptive") {
        cfg.refine.method = RefineMethod::adaptive;
      } else if (*m == "gradient") {
        cfg.refine.method = RefineMethod::gradient;
      } else {
        r.error("method", "expected 'adaptive' or 'gradient', got '" + *m + "'");
      }
    }
    r.real("step", cfg.refine.step);
    r.real("pixel_step", cfg.refine.pixel_step);
    r.real("max_pixel_step", cfg.refine.max_pixel_step);
    r.integer("max_iterations", cfg.refine.max_iterations);
    r.real("tolerance", cfg.refine.tolerance);
    r.integer("max_halvings", cfg.refine.max_halvings);
    r.finish();
  }
  {
    SectionReader r(find(doc, "eval"), "eval", source);
    if (r.has("thresholds")) cfg.eval.thresholds = r.list("thresholds");
    r.real("max_distance", cfg.eval.max_distance);
    r.integer("border", cfg.eval.border);
    r.finish();
  }
  cfg.refine.clamp = cfg.depth.range();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (find(doc, "scene") || find(doc, "view.0")) cfg.scene = read_scene(doc, source, base_dir, cfg.depth.range());
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return config_from_ini(parse_ini(text, path.string()), path.string(), path.parent_path());
}

std::string dump_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  // A value is "published" when it equals the hyperparameter the method
  // reports; everything else is our own choice and flagged as such.
  auto line = [&](const std::string& key, const std::string& value, bool published) {
    out << key << " = " << value << (published ? "" : "  # substituted") << "\n";
  };
  auto real = [&](const std::string& key, double v, std::optional<double> reported = std::nullopt) {
    line(key, num(v), reported && *reported == v);
  };
  auto integer = [&](const std::string& key, int v, std::optional<int> reported = std::nullopt) {
    line(key, std::to_string(v), reported && *reported == v);
  };

  out << "[depth]\n";
  real("min", cfg.depth.min, 425.0);
  real("max", cfg.depth.max, 935.0);
  integer("samples", cfg.depth.samples, 192);
  integer("level", cfg.depth.level);
  real("temperature", cfg.depth.temperature);
  integer("regularize_radius", cfg.depth.regularize_radius);
  integer("regularize_passes", cfg.depth.regularize_passes);
  integer("probability_window", cfg.depth.probability_window);
  real("invalid_cost", cfg.depth.invalid_cost);

  out << "\n[features]\n";
  integer("channels", cfg.features.channels);
  integer("window", cfg.features.window);
  real("epsilon", cfg.features.epsilon);

  const LossWeights defaults;
  const auto& w = cfg.loss;
  out << "\n[loss]\n";
  real("gamma1", w.gamma1, defaults.gamma1);
  real("gamma2", w.gamma2, defaults.gamma2);
  real("lambda1", w.lambda1, defaults.lambda1);
  real("lambda2", w.lambda2, defaults.lambda2);
  real("lambda3", w.lambda3, defaults.lambda3);
  real("beta1", w.beta1, defaults.beta1);
  real("beta2", w.beta2, defaults.beta2);
  real("beta3", w.beta3, defaults.beta3);
  real("alpha2", w.alpha2, defaults.alpha2);
  real("alpha3", w.alpha3, defaults.alpha3);

  out << "\n[normal_depth]\n";
  real("alpha1", cfg.normal_depth.alpha1, 0.1);
  integer("iterations", cfg.normal_depth.iterations, 1);

  out << "\n[fusion]\n";
  real("photometric_threshold", cfg.fusion.photometric_threshold, 0.6);
  real("pixel_threshold", cfg.fusion.pixel_threshold);
  real("relative_depth_threshold", cfg.fusion.relative_depth_threshold);
  integer("min_consistent_views", cfg.fusion.min_consistent_views);

  out << "\n[refine]\n";
  line("method", cfg.refine.method == RefineMethod::adaptive ? "adaptive" : "gradient", false);
  real("step", cfg.refine.step);
  real("pixel_step", cfg.refine.pixel_step);
  real("max_pixel_step", cfg.refine.max_pixel_step);
  integer("max_iterations", cfg.refine.max_iterations);
  real("tolerance", cfg.refine.tolerance);
  integer("max_halvings", cfg.refine.max_halvings);

  out << "\n[eval]\n";
  std::string th;
  for (std::size_t i = 0; i < cfg.eval.thresholds.size(); ++i) th += (i ? ", " : "") + num(cfg.eval.thresholds[i]);
  line("thresholds", th, cfg.eval.thresholds == std::vector<double>{2, 4, 8});
  real("max_distance", cfg.eval.max_distance);
  integer("border", cfg.eval.border);

  if (!cfg.scene) return out.str();
  // Scene values describe the synthetic oracle, not method hyperparameters,
  // so they carry no flag.
  const SceneSpec& s = *cfg.scene;
  auto vec = [](const Point3& p) { return num(p.x()) + ", " + num(p.y()) + ", " + num(p.z()); };
  out << "\n[scene]\n";
  out << "width = " << s.width << "\nheight = " << s.height << "\nimage_noise = " << num(s.image_noise) << "\n";
  if (const auto* p = std::get_if<PlaneGeometry>(&s.geometry)) {
    out << "geometry = plane\nplane_normal = " << vec(p->normal) << "\nplane_offset = " << num(p->offset) << "\n";
  } else {
    const auto& sp = std::get<SphereGeometry>(s.geometry);
    out << "geometry = sphere\nsphere_center = " << vec(sp.center) << "\nsphere_radius = " << num(sp.radius) << "\n";
  }
  if (const auto* c = std::get_if<CheckerTexture>(&s.texture)) {
    out << "texture = checker\nchecker_period = " << num(c->period) << "\n";
  } else if (const auto* n = std::get_if<NoiseTexture>(&s.texture)) {
    out << "texture = noise\nnoise_seed = " << n->seed << "\nnoise_octaves = " << n->octaves
        << "\nnoise_scale = " << num(n->scale) << "\n";
  } else {
    out << "texture = image\ntexture_image = " << std::get<ImageTexture>(s.texture).path << "\n";
  }
  for (std::size_t i = 0; i < s.views.size(); ++i) {
    const auto& k = s.views[i].intrinsics;
    const auto& t = s.views[i].world_to_camera;
    out << "\n[view." << i << "]\n";
    out << "fx = " << num(k.fx) << "\nfy = " << num(k.fy) << "\ncx = " << num(k.cx) << "\ncy = " << num(k.cy) << "\n";
    out << "rotation = ";
    for (int j = 0; j < 9; ++j) out << (j ? ", " : "") << num(t.rotation(j / 3, j % 3));
    out << "\ntranslation = " << vec(t.translation) << "\n";
  }
  return out.str();
}

}  // namespace mvs
