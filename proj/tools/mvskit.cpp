#include "mvs/config.hpp"
#include "mvs/fusion.hpp"
#include "mvs/io.hpp"
#include "mvs/parallel.hpp"
#include "mvs/pipeline.hpp"
#include "mvs/refine.hpp"
#include "mvs/scene.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::string in;
  int threads = 1;
  std::uint64_t seed = 0;
  std::vector<int> views;
  std::string depth;

  fs::path input_dir() const { return in.empty() ? fs::path(out) : fs::path(in); }
};

std::string indexed(const std::string& stem, int view, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03d", view);
  return stem + buf + ext;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

mvs::PipelineConfig load(const Common& c) {
  if (c.config.empty()) return {};
  return mvs::load_config(c.config);
}

struct Dataset {
  std::vector<int> ids;  // reference first
  std::vector<mvs::CameraModel> cams;
  std::vector<mvs::ImageGrid> images;
};

Dataset load_dataset(const Common& c, std::size_t min_views) {
  const fs::path dir = c.input_dir();
  const auto all = mvs::read_cameras(dir / "cameras.txt");
  Dataset d;
  d.ids = c.views;
  if (d.ids.empty()) {
    for (std::size_t i = 0; i < all.size(); ++i) d.ids.push_back(static_cast<int>(i));
  }
  if (d.ids.size() < min_views) {
    throw UsageError("--views: need at least " + std::to_string(min_views) + " views, got " +
                     std::to_string(d.ids.size()));
  }
  for (int id : d.ids) {
    if (id < 0 || id >= static_cast<int>(all.size())) {
      throw UsageError("--views: view " + std::to_string(id) + " not in " + (dir / "cameras.txt").string());
    }
    d.cams.push_back(all[static_cast<std::size_t>(id)]);
    d.images.push_back(mvs::read_pnm(dir / indexed("image", id, ".ppm")));
    const auto& k = d.cams.back().intrinsics;
    if (d.images.back().width() != k.width || d.images.back().height() != k.height) {
      throw mvs::FormatError((dir / indexed("image", id, ".ppm")).string() +
                             ": dimensions: do not match the intrinsics in cameras.txt");
    }
  }
  return d;
}

fs::path depth_input(const Common& c, int ref) {
  return c.depth.empty() ? c.input_dir() / indexed("depth", ref, ".pfm") : fs::path(c.depth);
}

mvs::DepthMap read_depth(const fs::path& path, const mvs::CameraModel& cam) {
  mvs::DepthMap d = mvs::read_pfm(path);
  if (d.channels() != 1) throw mvs::FormatError(path.string() + ": channels: depth maps have one channel");
  if (d.width() != cam.intrinsics.width || d.height() != cam.intrinsics.height) {
    throw mvs::FormatError(path.string() + ": dimensions: do not match the reference camera");
  }
  return d;
}

json loss_json(const mvs::LossBreakdown& b) {
  json j;
  j["total"] = b.total;
  j["pixel"] = b.pixel;
  j["photometric"] = b.photo;
  j["ssim"] = b.ssim;
  j["smoothness"] = b.smooth;
  j["feature"] = b.feature;
  j["feature_per_scale"] = b.feature_per_scale;
  j["valid_pixels"] = b.m;
  j["reference_pixels"] = b.n;
  json views = json::array();
  for (const auto& v : b.views) {
    views.push_back({{"total", v.total},
                     {"pixel", v.pixel},
                     {"photometric", v.photo},
                     {"ssim", v.ssim},
                     {"smoothness", v.smooth},
                     {"feature", v.feature},
                     {"feature_per_scale", v.feature_per_scale},
                     {"valid_pixels", v.m}});
  }
  j["views"] = views;
  return j;
}

void emit(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  mvs::write_text(path, text);
  std::cout << text;
}

int cmd_gen_scene(const Common& c) {
  const auto cfg = load(c);
  if (!cfg.scene) throw mvs::ConfigError(c.config + ": [scene]: missing, gen-scene needs a scene description");
  const auto views = mvs::render_scene(*cfg.scene, c.seed);
  const fs::path out(c.out);
  for (std::size_t i = 0; i < views.size(); ++i) {
    mvs::write_pnm(out / indexed("image", static_cast<int>(i), ".ppm"), views[i].image);
    mvs::write_pfm(out / indexed("depth_gt", static_cast<int>(i), ".pfm"), views[i].depth);
  }
  mvs::write_cameras(out / "cameras.txt", cfg.scene->views);
  mvs::write_text(out / "effective.cfg", mvs::dump_config(cfg));
  mvs::log(mvs::LogLevel::info, "wrote " + std::to_string(views.size()) + " views to " + out.string());
  return 0;
}

void depth_for(const Dataset& d, const mvs::PipelineConfig& cfg, const fs::path& out) {
  const auto est = mvs::estimate_depth(d.images, d.cams, cfg);
  mvs::write_pfm(out / indexed("depth", d.ids[0], ".pfm"), est.depth);
  mvs::write_pfm(out / indexed("prob", d.ids[0], ".pfm"), est.probability);
  mvs::log(mvs::LogLevel::info, "depth for view " + std::to_string(d.ids[0]) + " written");
}

int cmd_depth(const Common& c, bool each) {
  const auto cfg = load(c);
  const Dataset d = load_dataset(c, 2);
  if (!each) {
    depth_for(d, cfg, c.out);
    return 0;
  }
  // Every listed view in turn as reference, the others in listed order as sources.
  for (std::size_t r = 0; r < d.ids.size(); ++r) {
    Dataset rot;
    for (std::size_t k = 0; k < d.ids.size(); ++k) {
      const std::size_t i = (r + k) % d.ids.size();
      rot.ids.push_back(d.ids[i]);
      rot.cams.push_back(d.cams[i]);
      rot.images.push_back(d.images[i]);
    }
    depth_for(rot, cfg, c.out);
  }
  return 0;
}

int cmd_refine_nd(const Common& c) {
  const auto cfg = load(c);
  const Dataset d = load_dataset(c, 1);
  const auto depth = read_depth(depth_input(c, d.ids[0]), d.cams[0]);
  const auto refined = mvs::refine_normal_depth(depth, d.cams[0], d.images[0], cfg);
  mvs::write_pfm(fs::path(c.out) / indexed("depth_nd", d.ids[0], ".pfm"), refined);
  return 0;
}

int cmd_refine_gd(const Common& c) {
  const auto cfg = load(c);
  const Dataset d = load_dataset(c, 2);
  const auto depth = read_depth(depth_input(c, d.ids[0]), d.cams[0]);
  const auto views = mvs::make_views(d.images, d.cams, cfg.features);
  const auto res = mvs::refine_depth_gd(depth, views[0], std::span(views).subspan(1), cfg.loss, cfg.refine);
  const fs::path out(c.out);
  mvs::write_pfm(out / indexed("depth_gd", d.ids[0], ".pfm"), res.depth);
  json j;
  j["iterations"] = res.iterations;
  j["converged"] = res.converged;
  j["trace"] = res.trace;
  emit(out / indexed("refine_gd", d.ids[0], ".json"), j);
  return 0;
}

int cmd_loss_report(const Common& c) {
  const auto cfg = load(c);
  const Dataset d = load_dataset(c, 2);
  const auto depth = read_depth(depth_input(c, d.ids[0]), d.cams[0]);
  const auto views = mvs::make_views(d.images, d.cams, cfg.features);
  const auto b = mvs::total_loss(views[0], std::span(views).subspan(1), depth, cfg.loss, cfg.depth.range());
  emit(fs::path(c.out) / indexed("loss", d.ids[0], ".json"), loss_json(b));
  return 0;
}

int cmd_fuse(const Common& c, const std::string& prefix) {
  const auto cfg = load(c);
  const Dataset d = load_dataset(c, 1);
  const fs::path dir = c.input_dir();
  std::vector<mvs::DepthMap> depths;
  std::vector<mvs::ProbabilityMap> probs;
  for (std::size_t i = 0; i < d.ids.size(); ++i) {
    depths.push_back(read_depth(dir / indexed(prefix, d.ids[i], ".pfm"), d.cams[i]));
    const fs::path prob_path = dir / indexed("prob", d.ids[i], ".pfm");
    if (fs::exists(prob_path)) {
      probs.push_back(read_depth(prob_path, d.cams[i]));
    } else {
      mvs::log(mvs::LogLevel::info, prob_path.string() + " not found; skipping the photometric filter");
      probs.emplace_back();
    }
  }
  const auto [cloud, surviving] = mvs::filter_and_fuse(depths, probs, d.cams, d.images, cfg.fusion);
  const fs::path out(c.out);
  mvs::write_ply(out / "fused.ply", cloud);
  json j;
  j["photometric_threshold"] = cfg.fusion.photometric_threshold;
  j["surviving_pixels"] = surviving;
  j["points"] = cloud.size();
  emit(out / "fusion.json", j);
  return 0;
}

int cmd_eval(const Common& c, const std::string& cloud_path) {
  const auto cfg = load(c);
  const Dataset d = load_dataset(c, 1);
  const fs::path dir = c.input_dir();
  json j;
  const fs::path depth_path = depth_input(c, d.ids[0]);
  if (fs::exists(depth_path) || !c.depth.empty()) {
    const auto est = read_depth(depth_path, d.cams[0]);
    const auto gt = read_depth(dir / indexed("depth_gt", d.ids[0], ".pfm"), d.cams[0]);
    const auto region = mvs::interior_mask(gt, d.cams[0], std::span(d.cams).subspan(1), cfg.eval.border);
    const auto pct = mvs::depth_error_percentages(est, gt, cfg.eval.thresholds, &region);
    j["depth"] = {{"file", depth_path.string()}, {"thresholds_mm", cfg.eval.thresholds}, {"percentages", pct}};
  }
  if (!cloud_path.empty()) {
    const auto est = mvs::read_ply(cloud_path);
    std::vector<mvs::DepthMap> gts;
    for (std::size_t i = 0; i < d.ids.size(); ++i) {
      gts.push_back(read_depth(dir / indexed("depth_gt", d.ids[i], ".pfm"), d.cams[i]));
    }
    const auto ref = mvs::ground_truth_cloud(gts, d.cams);
    const auto m = mvs::cloud_metrics(est, ref, cfg.eval.max_distance);
    j["cloud"] = {{"file", cloud_path},
                  {"accuracy_mm", m.accuracy},
                  {"completeness_mm", m.completeness},
                  {"overall_mm", m.overall}};
  }
  if (j.empty()) throw UsageError("eval: nothing to evaluate; " + depth_path.string() + " is missing and no --cloud given");
  emit(fs::path(c.out) / "eval.json", j);
  return 0;
}

int cmd_gradcheck(const Common& c, int size) {
  const auto cfg = load(c);
  const auto inst = mvs::random_instance(c.seed, size, cfg.features);
  std::vector<mvs::PixelIndex> samples;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) samples.push_back({y, x});
  }
  const auto rep = mvs::finite_difference_gradient(inst.depth, inst.views[0], std::span(inst.views).subspan(1),
                                                   cfg.loss, cfg.depth.range(), 1e-3, samples);
  const bool ok = rep.admissible > 0 && rep.max_relative_error < 1e-3 && rep.mean_relative_error < 1e-4;
  json j;
  j["seed"] = c.seed;
  j["size"] = size;
  j["step_mm"] = 1e-3;
  j["samples"] = rep.samples.size();
  j["admissible"] = rep.admissible;
  j["max_relative_error"] = rep.max_relative_error;
  j["mean_relative_error"] = rep.mean_relative_error;
  j["pass"] = ok;
  emit(fs::path(c.out) / "gradcheck.json", j);
  return ok ? 0 : 1;
}

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config, "pipeline configuration file");
  if (needs_config) opt->required();
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--in", c.in, "input directory (defaults to --out)");
  sub->add_option("--threads", c.threads, "worker threads; 1 is the bit reference")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  sub->add_option("--views", c.views, "view indices, reference first")->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvskit: unsupervised multi-metric multi-view stereo toolkit"};
  app.require_subcommand(1);
  Common c;
  bool each = false;
  std::string prefix = "depth", cloud;
  int size = 8;

  auto* gen = app.add_subcommand("gen-scene", "render a synthetic scene with ground truth");
  add_common(gen, c, true);
  auto* depth = app.add_subcommand("depth", "plane-sweep depth and probability for the reference view");
  add_common(depth, c, false);
  depth->add_flag("--each", each, "use every listed view as reference in turn");
  auto* nd = app.add_subcommand("refine-nd", "normal-depth consistency refinement");
  add_common(nd, c, false);
  nd->add_option("--depth", c.depth, "input depth map");
  auto* gd = app.add_subcommand("refine-gd", "direct gradient-descent refinement on the loss");
  add_common(gd, c, false);
  gd->add_option("--depth", c.depth, "input depth map");
  auto* lr = app.add_subcommand("loss-report", "full loss breakdown for a depth map");
  add_common(lr, c, false);
  lr->add_option("--depth", c.depth, "input depth map");
  auto* fu = app.add_subcommand("fuse", "filter and fuse depth maps into a point cloud");
  add_common(fu, c, false);
  fu->add_option("--prefix", prefix, "depth map file prefix")->capture_default_str();
  auto* ev = app.add_subcommand("eval", "depth error percentages and cloud metrics");
  add_common(ev, c, false);
  ev->add_option("--depth", c.depth, "estimated depth map");
  ev->add_option("--cloud", cloud, "fused point cloud (PLY)");
  auto* gc = app.add_subcommand("gradcheck", "analytic vs finite-difference loss gradient");
  add_common(gc, c, false);
  gc->add_option("--size", size, "image side length")->check(CLI::Range(8, 256))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    mvs::set_num_threads(c.threads);
    if (!fs::is_directory(c.out)) {
      std::error_code ec;
      fs::create_directories(c.out, ec);
      if (ec) throw UsageError("--out: cannot create directory " + c.out + ": " + ec.message());
    }
    if (*gen) return cmd_gen_scene(c);
    if (*depth) return cmd_depth(c, each);
    if (*nd) return cmd_refine_nd(c);
    if (*gd) return cmd_refine_gd(c);
    if (*lr) return cmd_loss_report(c);
    if (*fu) return cmd_fuse(c, prefix);
    if (*ev) return cmd_eval(c, cloud);
    if (*gc) return cmd_gradcheck(c, size);
  } catch (const UsageError& e) {
    mvs::log(mvs::LogLevel::error, e.what());
    return 2;
  } catch (const std::exception& e) {
    mvs::log(mvs::LogLevel::error, e.what());
    return 1;
  }
  return 0;
}
