#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segattack/attacks.hpp"
#include "segattack/detection.hpp"
#include "segattack/model.hpp"
#include "segattack/scenegen.hpp"

namespace segattack {

enum class AttackSetting {
  global,          // perturb anywhere, fool everything (untargeted)
  universal_patch, // shared center-patch perturbation, fool everything
  full_static,     // M = predicted static, F = predicted dynamic, targeted
  adaptive_patch,  // full_static masks with the two-stage group-sparse attack
  distance_sweep   // full_static at a list of mask distances d
};

std::string setting_name(AttackSetting s);
AttackSetting setting_from_name(const std::string& name);

struct ExperimentConfig {
  std::string dataset_dir;            // existing dataset, or
  std::optional<SceneConfig> scene;   // generate one on the fly
  std::size_t scene_count = 40;
  std::string model_path;             // trained checkpoint, or
  std::optional<ModelSpec> model_spec;  // train from scratch
  TrainConfig train;
  AttackSetting setting = AttackSetting::full_static;
  AttackConfig attack;
  AdaptiveConfig adaptive;
  UniversalConfig universal;
  std::vector<double> distances;      // distance_sweep
  bool run_detection = false;
  std::string output_dir;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ImageRecord {
  std::size_t index = 0;
  bool skipped = false;
  std::string skip_reason;
  RegionMetrics metrics;
  int iterations_used = 0;
  bool terminated_early = false;
  double sweep_value = 0.0;  // d for distance sweeps, else unset
};

struct Aggregates {
  double mean_miou_u = 0.0;
  std::optional<double> mean_asr_t;
  double mean_asr_u = 0.0;
  std::optional<double> mean_preserved_rate;
  double mean_linf = 0.0;
  double mean_l2 = 0.0;
  double mean_sparsity = 0.0;
  std::size_t images = 0;
  std::size_t skipped = 0;
};

struct RunRecord {
  std::string config_json;
  std::vector<ImageRecord> per_image;
  std::vector<Aggregates> aggregates;       // one per sweep value (one otherwise)
  std::vector<double> sweep_values;
  std::optional<double> image_auroc;        // detection enabled
  std::optional<double> pixel_auroc;
  std::vector<std::string> artifact_paths;  // relative to the run directory
  double wall_clock_seconds = 0.0;
  std::string version;
};

ExperimentConfig experiment_config_from_json(const std::string& json_text);
std::string experiment_config_to_json(const ExperimentConfig& config);

/// Executes the configured pipeline and writes a complete RunRecord (plus
/// artifacts) under config.output_dir. Deterministic given (config, seed).
RunRecord run(const ExperimentConfig& config);

/// Reads run directories, emits CSV tables (per run, and per sweep axis)
/// and per-image overlay images into `out_dir`. Corrupt run directories are
/// reported and skipped.
void report(const std::vector<std::filesystem::path>& run_dirs,
            const std::filesystem::path& out_dir);

struct DetectReport {
  double pixel_auroc = 0.0;
  double image_auroc = 0.0;
  std::size_t images = 0;
};

/// Fits a Gaussian profile on the dataset's clean train split and both
/// detectors on the clean/adversarial pairs of a completed attack run;
/// writes profile.ckpt, pixel_detector.json, image_detector.json and
/// detect_report.json under out_dir.
DetectReport detect_fit_pipeline(const Model& model, const Dataset& dataset,
                                 const std::filesystem::path& attack_run_dir,
                                 const std::filesystem::path& out_dir);

/// Scores a completed attack run with fitted components; emits per-image
/// 16-bit heatmaps plus detect_eval.json, and returns evaluation AUROCs.
DetectReport detect_eval_pipeline(const Model& model, const Dataset& dataset,
                                  const std::filesystem::path& attack_run_dir,
                                  const GaussianProfile& profile,
                                  const PixelDetector& pixel_detector,
                                  const ImageDetector& image_detector,
                                  const std::filesystem::path& out_dir);

/// Worker-pool size: SEGATTACK_DETERMINISTIC=1 forces 1, otherwise
/// hardware concurrency (results are index-ordered either way).
int worker_threads();

/// Per-image parallel map with deterministic index-ordered results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace segattack
