#pragma once

#include "mvs/features.hpp"
#include "mvs/fusion.hpp"
#include "mvs/loss.hpp"
#include "mvs/refine.hpp"
#include "mvs/scene.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mvs {

/// Plane-sweep and probability settings.
struct DepthConfig {
  double min = 425;
  double max = 935;
  int samples = 192;
  int level = 0;  // feature level the sweep runs at, 0 = full resolution
  double temperature = 1.0;
  int regularize_radius = 1;
  int regularize_passes = 1;
  int probability_window = 4;
  double invalid_cost = 1e3;

  DepthRange range() const { return {min, max}; }
  void validate() const;
};

struct NormalDepthConfig {
  double alpha1 = 0.1;
  int iterations = 1;
};

struct EvalConfig {
  std::vector<double> thresholds{2, 4, 8};  // mm
  double max_distance = 20;                 // mm
  int border = 4;                           // px excluded from depth statistics
};

struct PipelineConfig {
  DepthConfig depth;
  FeatureConfig features;
  LossWeights loss;
  NormalDepthConfig normal_depth;
  FusionConfig fusion;
  RefineConfig refine;  // clamp follows the depth range
  EvalConfig eval;
  std::optional<SceneSpec> scene;

  void validate() const;
};

/// `key = value` lines under `[section]` headers; '#' and ';' start comments.
struct IniEntry {
  std::string value;
  int line = 0;
};
using IniSection = std::map<std::string, IniEntry>;
using IniDocument = std::map<std::string, IniSection>;

/// Parse errors name the source, the line and the offending field.
IniDocument parse_ini(const std::string& text, const std::string& source);

/// Unknown sections or keys are errors. Relative texture paths resolve
/// against `base_dir`.
PipelineConfig config_from_ini(const IniDocument& doc, const std::string& source,
                               const std::filesystem::path& base_dir = {});

PipelineConfig load_config(const std::filesystem::path& path);

/// Every effective value, one `key = value` per line. Values that are not the
/// published hyperparameters carry a trailing `# substituted`.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace mvs
