#include "segattack/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "segattack/image_io.hpp"
#include "segattack/serialize.hpp"
#include "segattack/version.hpp"

namespace segattack {

namespace {

using nlohmann::json;

json region_metrics_to_json(const RegionMetrics& m) {
  json j{{"miou_u", m.miou_u},
         {"asr_u", m.asr_u},
         {"sparsity", m.sparsity},
         {"perceptibility_linf", m.perceptibility.linf},
         {"perceptibility_l2", m.perceptibility.l2}};
  if (m.asr_t) j["asr_t"] = *m.asr_t;
  if (m.preserved_rate) j["preserved_rate"] = *m.preserved_rate;
  return j;
}

RegionMetrics region_metrics_from_json(const json& j) {
  RegionMetrics m;
  m.miou_u = j.at("miou_u").get<double>();
  m.asr_u = j.at("asr_u").get<double>();
  m.sparsity = j.at("sparsity").get<double>();
  m.perceptibility.linf = j.at("perceptibility_linf").get<double>();
  m.perceptibility.l2 = j.at("perceptibility_l2").get<double>();
  if (j.contains("asr_t")) m.asr_t = j.at("asr_t").get<double>();
  if (j.contains("preserved_rate"))
    m.preserved_rate = j.at("preserved_rate").get<double>();
  return m;
}

json aggregates_to_json(const Aggregates& a) {
  json j{{"mean_miou_u", a.mean_miou_u},
         {"mean_asr_u", a.mean_asr_u},
         {"mean_linf", a.mean_linf},
         {"mean_l2", a.mean_l2},
         {"mean_sparsity", a.mean_sparsity},
         {"images", a.images},
         {"skipped", a.skipped}};
  if (a.mean_asr_t) j["mean_asr_t"] = *a.mean_asr_t;
  if (a.mean_preserved_rate) j["mean_preserved_rate"] = *a.mean_preserved_rate;
  return j;
}

Aggregates aggregates_from_json(const json& j) {
  Aggregates a;
  a.mean_miou_u = j.at("mean_miou_u").get<double>();
  a.mean_asr_u = j.at("mean_asr_u").get<double>();
  a.mean_linf = j.at("mean_linf").get<double>();
  a.mean_l2 = j.at("mean_l2").get<double>();
  a.mean_sparsity = j.at("mean_sparsity").get<double>();
  a.images = j.at("images").get<std::size_t>();
  a.skipped = j.at("skipped").get<std::size_t>();
  if (j.contains("mean_asr_t")) a.mean_asr_t = j.at("mean_asr_t").get<double>();
  if (j.contains("mean_preserved_rate"))
    a.mean_preserved_rate = j.at("mean_preserved_rate").get<double>();
  return a;
}

Aggregates aggregate(const std::vector<ImageRecord>& records) {
  Aggregates a;
  double asr_t_sum = 0.0, preserved_sum = 0.0;
  std::size_t asr_t_n = 0, preserved_n = 0;
  for (const auto& r : records) {
    if (r.skipped) {
      ++a.skipped;
      continue;
    }
    ++a.images;
    a.mean_miou_u += r.metrics.miou_u;
    a.mean_asr_u += r.metrics.asr_u;
    a.mean_linf += r.metrics.perceptibility.linf;
    a.mean_l2 += r.metrics.perceptibility.l2;
    a.mean_sparsity += r.metrics.sparsity;
    if (r.metrics.asr_t) {
      asr_t_sum += *r.metrics.asr_t;
      ++asr_t_n;
    }
    if (r.metrics.preserved_rate) {
      preserved_sum += *r.metrics.preserved_rate;
      ++preserved_n;
    }
  }
  if (a.images > 0) {
    double inv = 1.0 / static_cast<double>(a.images);
    a.mean_miou_u *= inv;
    a.mean_asr_u *= inv;
    a.mean_linf *= inv;
    a.mean_l2 *= inv;
    a.mean_sparsity *= inv;
  }
  if (asr_t_n > 0) a.mean_asr_t = asr_t_sum / static_cast<double>(asr_t_n);
  if (preserved_n > 0)
    a.mean_preserved_rate = preserved_sum / static_cast<double>(preserved_n);
  return a;
}

std::set<int> static_class_set(const SceneConfig& cfg) {
  std::set<int> s;
  for (int c = 0; c < cfg.num_static(); ++c) s.insert(c);
  return s;
}

std::set<int> dynamic_class_set(const SceneConfig& cfg) {
  std::set<int> s;
  for (int c = cfg.num_static(); c < cfg.num_classes(); ++c) s.insert(c);
  return s;
}

json attack_config_to_json(const AttackConfig& c) {
  json j{{"mode", attack_mode_name(c.mode)},
         {"norm", norm_name(c.p)},
         {"step_size", c.step_size},
         {"max_iters", c.max_iters},
         {"early_stop_asr", c.early_stop_asr},
         {"confidence_threshold", c.confidence_threshold},
         {"clamp_to_valid_range", c.clamp_to_valid_range}};
  if (c.budget) j["budget"] = *c.budget;
  return j;
}

AttackConfig attack_config_from_json(const json& j) {
  AttackConfig c;
  c.mode = j.at("mode").get<std::string>() == "targeted" ? AttackMode::targeted
                                                         : AttackMode::untargeted;
  c.p = j.at("norm").get<std::string>() == "two" ? Norm::two : Norm::inf;
  c.step_size = j.at("step_size").get<double>();
  if (j.contains("budget")) c.budget = j.at("budget").get<double>();
  c.max_iters = j.at("max_iters").get<int>();
  c.early_stop_asr = j.at("early_stop_asr").get<double>();
  c.confidence_threshold = j.at("confidence_threshold").get<double>();
  c.clamp_to_valid_range = j.at("clamp_to_valid_range").get<bool>();
  return c;
}

json adaptive_config_to_json(const AdaptiveConfig& c) {
  return json{{"lambda1", c.lambda1},
              {"lambda2_stage1", c.lambda2_stage1},
              {"patch_h", c.patch_h},
              {"patch_w", c.patch_w},
              {"sparsity_target", c.sparsity_target},
              {"optimizer_lr", c.optimizer_lr},
              {"iters_stage1", c.iters_stage1},
              {"iters_stage2", c.iters_stage2},
              {"clip_threshold", c.clip_threshold},
              {"confidence_threshold", c.confidence_threshold},
              {"warm_start_stage2", c.warm_start_stage2}};
}

AdaptiveConfig adaptive_config_from_json(const json& j) {
  AdaptiveConfig c;
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2_stage1 = j.at("lambda2_stage1").get<double>();
  c.patch_h = j.at("patch_h").get<int>();
  c.patch_w = j.at("patch_w").get<int>();
  c.sparsity_target = j.at("sparsity_target").get<double>();
  c.optimizer_lr = j.at("optimizer_lr").get<double>();
  c.iters_stage1 = j.at("iters_stage1").get<int>();
  c.iters_stage2 = j.at("iters_stage2").get<int>();
  c.clip_threshold = j.at("clip_threshold").get<double>();
  c.confidence_threshold = j.at("confidence_threshold").get<double>();
  c.warm_start_stage2 = j.at("warm_start_stage2").get<bool>();
  return c;
}

json universal_config_to_json(const UniversalConfig& c) {
  json j{{"epochs", c.epochs},
         {"step_size", c.step_size},
         {"patch_h", c.patch_h},
         {"patch_w", c.patch_w}};
  if (c.budget) j["budget"] = *c.budget;
  return j;
}

UniversalConfig universal_config_from_json(const json& j) {
  UniversalConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.step_size = j.at("step_size").get<double>();
  c.patch_h = j.at("patch_h").get<int>();
  c.patch_w = j.at("patch_w").get<int>();
  if (j.contains("budget")) c.budget = j.at("budget").get<double>();
  return c;
}

json model_spec_to_json(const ModelSpec& s) {
  return json{{"variant", variant_name(s.variant)},
              {"num_classes", s.num_classes},
              {"channel_widths", s.channel_widths},
              {"kernel_size", s.kernel_size},
              {"dilations", s.dilations},
              {"seed", s.seed}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  s.variant = variant_from_name(j.at("variant").get<std::string>());
  s.num_classes = j.at("num_classes").get<int>();
  s.channel_widths = j.at("channel_widths").get<std::vector<int>>();
  s.kernel_size = j.at("kernel_size").get<int>();
  s.dilations = j.at("dilations").get<std::vector<int>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

LabelMap labels_from_pgm(const Grid<std::uint8_t>& g) {
  LabelMap m(g.h, g.w);
  for (std::size_t i = 0; i < g.v.size(); ++i) m.v[i] = g.v[i];
  return m;
}

Grid<std::uint8_t> labels_to_pgm(const LabelMap& m) {
  Grid<std::uint8_t> g(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i)
    g.v[i] = static_cast<std::uint8_t>(m.v[i]);
  return g;
}

}  // namespace

std::string setting_name(AttackSetting s) {
  switch (s) {
    case AttackSetting::global: return "global";
    case AttackSetting::universal_patch: return "universal_patch";
    case AttackSetting::full_static: return "full_static";
    case AttackSetting::adaptive_patch: return "adaptive_patch";
    case AttackSetting::distance_sweep: return "distance_sweep";
  }
  fail("unknown setting");
}

AttackSetting setting_from_name(const std::string& name) {
  if (name == "global") return AttackSetting::global;
  if (name == "universal_patch") return AttackSetting::universal_patch;
  if (name == "full_static") return AttackSetting::full_static;
  if (name == "adaptive_patch") return AttackSetting::adaptive_patch;
  if (name == "distance_sweep") return AttackSetting::distance_sweep;
  fail("unknown attack setting: " + name);
}

void ExperimentConfig::validate() const {
  require(!output_dir.empty(), "output_dir is required");
  require(!dataset_dir.empty() || scene.has_value(),
          "either dataset_dir or an inline scene config is required");
  require(!model_path.empty() || model_spec.has_value(),
          "either model_path or a model spec is required");
  if (setting == AttackSetting::universal_patch || setting == AttackSetting::global)
    require(attack.mode == AttackMode::untargeted,
            setting_name(setting) + " setting must be untargeted");
  if (setting == AttackSetting::distance_sweep)
    require(!distances.empty(), "distance_sweep requires a non-empty distance list");
  if (setting == AttackSetting::adaptive_patch) adaptive.validate();
  if (setting == AttackSetting::universal_patch) universal.validate();
  attack.validate();
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j{{"schema_version", kManifestSchemaVersion},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"setting", setting_name(c.setting)},
         {"attack", attack_config_to_json(c.attack)},
         {"adaptive", adaptive_config_to_json(c.adaptive)},
         {"universal", universal_config_to_json(c.universal)},
         {"distances", c.distances},
         {"detection", c.run_detection},
         {"train", {{"epochs", c.train.epochs},
                    {"batch_size", c.train.batch_size},
                    {"learning_rate", c.train.learning_rate},
                    {"seed", c.train.seed}}}};
  if (!c.dataset_dir.empty()) j["dataset_dir"] = c.dataset_dir;
  if (c.scene) {
    j["scene"] = json::parse(scene_config_to_json(*c.scene));
    j["scene_count"] = c.scene_count;
  }
  if (!c.model_path.empty()) j["model_path"] = c.model_path;
  if (c.model_spec) j["model_spec"] = model_spec_to_json(*c.model_spec);
  return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ExperimentConfig c;
  require(j.contains("seed"), "config is missing the mandatory seed");
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.value("output_dir", "");
  c.setting = setting_from_name(j.at("setting").get<std::string>());
  if (j.contains("attack")) c.attack = attack_config_from_json(j.at("attack"));
  if (j.contains("adaptive")) c.adaptive = adaptive_config_from_json(j.at("adaptive"));
  if (j.contains("universal"))
    c.universal = universal_config_from_json(j.at("universal"));
  if (j.contains("distances")) c.distances = j.at("distances").get<std::vector<double>>();
  c.run_detection = j.value("detection", false);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
  }
  c.dataset_dir = j.value("dataset_dir", "");
  if (j.contains("scene")) {
    c.scene = scene_config_from_json(j.at("scene").dump());
    c.scene_count = j.value("scene_count", std::size_t{40});
  }
  c.model_path = j.value("model_path", "");
  if (j.contains("model_spec")) c.model_spec = model_spec_from_json(j.at("model_spec"));
  return c;
}

int worker_threads() {
  const char* env = std::getenv("SEGATTACK_DETERMINISTIC");
  if (env && env[0] == '1') return 1;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int threads = std::min<std::size_t>(worker_threads(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct WorkItem {
  std::size_t dataset_index = 0;
  double sweep_value = 0.0;
};

// One attacked image: everything the record, report and detection need.
struct ImageOutput {
  ImageRecord record;
  LabelMap pred_clean;
  LabelMap pred_adv;
  BinaryMask fooled;
  Tensor adversarial_image;
  bool have_attack = false;
};

void save_image_artifacts(const std::filesystem::path& dir, const ImageOutput& out,
                          const AttackResult* result) {
  std::filesystem::create_directories(dir);
  write_pgm(dir / "pred_clean.pgm", labels_to_pgm(out.pred_clean));
  if (!out.have_attack) return;
  write_pgm(dir / "pred_adv.pgm", labels_to_pgm(out.pred_adv));
  write_mask(dir / "fooled.pgm", out.fooled);
  if (result) {
    write_ppm(dir / "adversarial.ppm", result->adversarial_image);
    write_mask(dir / "support.pgm", result->perturbation.support_mask);
    save_tensor(dir / "delta.tensor", result->perturbation.delta);
    json metrics = region_metrics_to_json(result->metrics);
    metrics["iterations_used"] = result->iterations_used;
    metrics["terminated_early"] = result->terminated_early;
    if (!result->selected_patches.empty())
      metrics["selected_patches"] = result->selected_patches;
    write_text_file(dir / "metrics.json", metrics.dump(2));
  }
}

BinaryMask fooled_mask(const LabelMap& pred_clean, const LabelMap& pred_adv) {
  BinaryMask m(pred_clean.h, pred_clean.w);
  for (std::size_t i = 0; i < m.v.size(); ++i)
    m.v[i] = pred_clean.v[i] != pred_adv.v[i] ? 1 : 0;
  return m;
}

}  // namespace

RunRecord run(const ExperimentConfig& config) {
  auto t0 = std::chrono::steady_clock::now();
  config.validate();
  std::filesystem::path out_dir(config.output_dir);
  std::filesystem::create_directories(out_dir);

  RunRecord record;
  record.version = kVersion;
  record.config_json = experiment_config_to_json(config);
  write_text_file(out_dir / "config.json", record.config_json);
  record.artifact_paths.push_back("config.json");

  // data
  Dataset dataset;
  if (!config.dataset_dir.empty()) {
    dataset = load_dataset(config.dataset_dir);
  } else {
    dataset = generate_dataset(*config.scene, config.scene_count, {0.7, 0.15, 0.15});
  }
  const SceneConfig& scene_cfg = dataset.config;
  const int num_classes = scene_cfg.num_classes();
  auto statics = static_class_set(scene_cfg);
  auto dynamics = dynamic_class_set(scene_cfg);

  // model
  Model model;
  if (!config.model_path.empty()) {
    model = Model::load(config.model_path);
  } else {
    model = build_model(*config.model_spec);
    TrainReport tr = train_model(model, dataset, config.train);
    json train_json{{"epoch_mean_loss", tr.epoch_mean_loss},
                    {"final_val_miou", tr.final_val_miou},
                    {"epochs", tr.epochs}};
    model.save(out_dir / "model.ckpt", train_json.dump());
    write_text_file(out_dir / "train_report.json", train_json.dump(2));
    record.artifact_paths.push_back("model.ckpt");
    record.artifact_paths.push_back("train_report.json");
  }
  require(model.spec().num_classes == num_classes,
          "model num_classes does not match the dataset");

  // work set: attacks run on the test split (fallback val, then train)
  const std::vector<std::size_t>& work =
      !dataset.splits.test.empty()
          ? dataset.splits.test
          : (!dataset.splits.val.empty() ? dataset.splits.val : dataset.splits.train);

  std::vector<WorkItem> items;
  if (config.setting == AttackSetting::distance_sweep) {
    for (double d : config.distances)
      for (auto idx : work) items.push_back({idx, d});
  } else {
    for (auto idx : work) items.push_back({idx, 0.0});
  }

  std::vector<ImageOutput> outputs(items.size());

  Perturbation universal_delta;
  if (config.setting == AttackSetting::universal_patch) {
    std::vector<Tensor> train_images;
    for (auto idx : dataset.splits.train)
      train_images.push_back(dataset.samples[idx].image);
    require(!train_images.empty(), "universal attack needs a train split");
    const Sample& first = dataset.samples[0];
    BinaryMask patch = center_patch_mask(first.labels.h, first.labels.w,
                                         config.universal.patch_h,
                                         config.universal.patch_w);
    universal_delta = universal_attack(model, train_images, patch, config.universal);
    save_tensor(out_dir / "universal_delta.tensor", universal_delta.delta);
    write_mask(out_dir / "universal_support.pgm", universal_delta.support_mask);
    record.artifact_paths.push_back("universal_delta.tensor");
    record.artifact_paths.push_back("universal_support.pgm");
  }

  parallel_for(items.size(), [&](std::size_t slot) {
    const WorkItem& item = items[slot];
    const Sample& sample = dataset.samples[item.dataset_index];
    ImageOutput& out = outputs[slot];
    out.record.index = item.dataset_index;
    out.record.sweep_value = item.sweep_value;

    Prediction clean = predict(model, sample.image);
    out.pred_clean = clean.labels;

    BinaryMask all_ones(sample.labels.h, sample.labels.w, 1);
    std::optional<AttackResult> result;

    switch (config.setting) {
      case AttackSetting::global: {
        result = pgd_attack(model, sample.image, all_ones, all_ones, config.attack);
        break;
      }
      case AttackSetting::universal_patch: {
        Tensor x_adv = apply_perturbation(sample.image, universal_delta, true);
        LabelMap pred_adv =
            argmax_labels(softmax_per_pixel(model.forward(x_adv).logits));
        AttackResult r;
        r.perturbation = universal_delta;
        r.adversarial_image = std::move(x_adv);
        r.adversarial_labels = pred_adv;
        r.metrics = evaluate_attack(clean.labels, pred_adv, all_ones, std::nullopt,
                                    universal_delta.delta,
                                    universal_delta.support_mask, num_classes);
        result = std::move(r);
        break;
      }
      case AttackSetting::full_static:
      case AttackSetting::adaptive_patch:
      case AttackSetting::distance_sweep: {
        BinaryMask fooling = class_mask(clean.labels, dynamics);
        if (mask_count(fooling) == 0) {
          out.record.skipped = true;
          out.record.skip_reason = "no predicted dynamic pixels";
          return;
        }
        double d = config.setting == AttackSetting::distance_sweep ? item.sweep_value
                                                                   : 0.0;
        BinaryMask m = distance_mask(clean.labels, dynamics, d);
        if (mask_count(m) == 0) {
          out.record.skipped = true;
          out.record.skip_reason = "perturbation mask empty at d=" + std::to_string(d);
          return;
        }
        std::optional<TargetMap> target;
        if (config.attack.mode == AttackMode::targeted ||
            config.setting == AttackSetting::adaptive_patch) {
          target = nearest_static_target(clean.labels, statics, dynamics);
        }
        if (config.setting == AttackSetting::adaptive_patch) {
          result = adaptive_attack(model, sample.image, m, fooling, *target,
                                   config.adaptive);
        } else {
          result = pgd_attack(model, sample.image, m, fooling, config.attack, target);
        }
        break;
      }
    }

    if (result) {
      out.have_attack = true;
      out.pred_adv = result->adversarial_labels;
      out.fooled = fooled_mask(out.pred_clean, out.pred_adv);
      out.adversarial_image = result->adversarial_image;
      out.record.metrics = result->metrics;
      out.record.iterations_used = result->iterations_used;
      out.record.terminated_early = result->terminated_early;
    }

    char dirname[32];
    std::snprintf(dirname, sizeof(dirname), "image_%04zu", slot);
    save_image_artifacts(out_dir / dirname, out, result ? &*result : nullptr);
  });

  for (std::size_t slot = 0; slot < outputs.size(); ++slot) {
    record.per_image.push_back(outputs[slot].record);
    char dirname[32];
    std::snprintf(dirname, sizeof(dirname), "image_%04zu", slot);
    record.artifact_paths.push_back(std::string(dirname) + "/pred_clean.pgm");
  }

  if (config.setting == AttackSetting::distance_sweep) {
    record.sweep_values = config.distances;
    std::size_t per = work.size();
    for (std::size_t s = 0; s < config.distances.size(); ++s) {
      std::vector<ImageRecord> chunk(record.per_image.begin() + s * per,
                                     record.per_image.begin() + (s + 1) * per);
      record.aggregates.push_back(aggregate(chunk));
    }
  } else {
    record.aggregates.push_back(aggregate(record.per_image));
  }

  // detection: profile on clean train images, detectors on clean + attacked
  if (config.run_detection) {
    std::vector<Sample> clean_train;
    for (auto idx : dataset.splits.train) clean_train.push_back(dataset.samples[idx]);
    require(clean_train.size() >= 2, "detection needs >= 2 clean training images");
    GaussianProfile profile = fit_profile(model, clean_train,
                                          LabelsSource::ground_truth);
    profile.save(out_dir / "profile.ckpt");
    record.artifact_paths.push_back("profile.ckpt");

    std::vector<Tensor> stacks;
    std::vector<BinaryMask> fooled;
    std::vector<std::vector<double>> img_scores;
    std::vector<std::uint8_t> attacked_labels;
    for (const auto& out : outputs) {
      if (!out.have_attack) continue;
      const Sample& sample = dataset.samples[out.record.index];
      // clean and attacked interleaved so the 80/20 split sees both classes
      auto clean_features = extract_features(model, sample.image);
      auto clean_maps = pixel_scores(clean_features, profile);
      stacks.push_back(resize_scores(clean_maps, sample.labels.h, sample.labels.w));
      fooled.emplace_back(sample.labels.h, sample.labels.w);
      img_scores.push_back(image_scores(clean_maps));
      attacked_labels.push_back(0);

      auto adv_features = extract_features(model, out.adversarial_image);
      auto adv_maps = pixel_scores(adv_features, profile);
      stacks.push_back(resize_scores(adv_maps, sample.labels.h, sample.labels.w));
      fooled.push_back(out.fooled);
      img_scores.push_back(image_scores(adv_maps));
      attacked_labels.push_back(1);
    }
    require(!stacks.empty(), "detection enabled but no attacked images");
    PixelDetector pixel_det = fit_pixel_detector(stacks, fooled);
    ImageDetector image_det = fit_image_detector(img_scores, attacked_labels);
    save_pixel_detector(out_dir / "pixel_detector.json", pixel_det);
    save_image_detector(out_dir / "image_detector.json", image_det);
    record.artifact_paths.push_back("pixel_detector.json");
    record.artifact_paths.push_back("image_detector.json");
    record.pixel_auroc = pixel_det.heldout_auroc;
    record.image_auroc = image_det.heldout_auroc;
  }

  auto t1 = std::chrono::steady_clock::now();
  record.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();

  json per_image = json::array();
  for (const auto& r : record.per_image) {
    json j{{"index", r.index},
           {"skipped", r.skipped},
           {"sweep_value", r.sweep_value},
           {"iterations_used", r.iterations_used},
           {"terminated_early", r.terminated_early}};
    if (r.skipped)
      j["skip_reason"] = r.skip_reason;
    else
      j["metrics"] = region_metrics_to_json(r.metrics);
    per_image.push_back(j);
  }
  json aggregates_json = json::array();
  for (const auto& a : record.aggregates) aggregates_json.push_back(aggregates_to_json(a));
  json record_json{{"schema_version", kManifestSchemaVersion},
                   {"version", record.version},
                   {"config", json::parse(record.config_json)},
                   {"per_image", per_image},
                   {"aggregates", aggregates_json},
                   {"sweep_values", record.sweep_values},
                   {"artifact_paths", record.artifact_paths},
                   {"wall_clock_seconds", record.wall_clock_seconds}};
  if (record.image_auroc) record_json["image_auroc"] = *record.image_auroc;
  if (record.pixel_auroc) record_json["pixel_auroc"] = *record.pixel_auroc;
  write_text_file(out_dir / "run_record.json", record_json.dump(2));

  for (const auto& rel : record.artifact_paths)
    require(std::filesystem::exists(out_dir / rel),
            "artifact missing at run close: " + rel);
  return record;
}

namespace {

struct AttackedPair {
  std::size_t dataset_index;
  Tensor adversarial_image;
  BinaryMask fooled;
};

// Reads the (index, adversarial image, fooled mask) triples of a run.
std::vector<AttackedPair> load_attacked_pairs(const std::filesystem::path& run_dir) {
  json record = json::parse(read_text_file(run_dir / "run_record.json"));
  std::vector<AttackedPair> pairs;
  std::size_t slot = 0;
  for (const auto& pj : record.at("per_image")) {
    char dirname[32];
    std::snprintf(dirname, sizeof(dirname), "image_%04zu", slot);
    ++slot;
    if (pj.at("skipped").get<bool>()) continue;
    auto img_dir = run_dir / dirname;
    if (!std::filesystem::exists(img_dir / "adversarial.ppm")) continue;
    AttackedPair pair;
    pair.dataset_index = pj.at("index").get<std::size_t>();
    pair.adversarial_image = read_ppm(img_dir / "adversarial.ppm");
    pair.fooled = read_mask(img_dir / "fooled.pgm");
    pairs.push_back(std::move(pair));
  }
  require(!pairs.empty(), "no attacked images found in " + run_dir.string());
  return pairs;
}

}  // namespace

DetectReport detect_fit_pipeline(const Model& model, const Dataset& dataset,
                                 const std::filesystem::path& attack_run_dir,
                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<Sample> clean_train;
  for (auto idx : dataset.splits.train) clean_train.push_back(dataset.samples[idx]);
  require(clean_train.size() >= 2, "detect-fit needs >= 2 clean training images");
  GaussianProfile profile = fit_profile(model, clean_train, LabelsSource::ground_truth);
  profile.save(out_dir / "profile.ckpt");

  auto pairs = load_attacked_pairs(attack_run_dir);
  std::vector<Tensor> stacks;
  std::vector<BinaryMask> fooled;
  std::vector<std::vector<double>> img_scores;
  std::vector<std::uint8_t> attacked;
  for (const auto& pair : pairs) {
    const Sample& sample = dataset.samples[pair.dataset_index];
    auto clean_maps = pixel_scores(extract_features(model, sample.image), profile);
    stacks.push_back(resize_scores(clean_maps, sample.labels.h, sample.labels.w));
    fooled.emplace_back(sample.labels.h, sample.labels.w);
    img_scores.push_back(image_scores(clean_maps));
    attacked.push_back(0);

    auto adv_maps =
        pixel_scores(extract_features(model, pair.adversarial_image), profile);
    stacks.push_back(resize_scores(adv_maps, sample.labels.h, sample.labels.w));
    fooled.push_back(pair.fooled);
    img_scores.push_back(image_scores(adv_maps));
    attacked.push_back(1);
  }

  PixelDetector pixel_det = fit_pixel_detector(stacks, fooled);
  ImageDetector image_det = fit_image_detector(img_scores, attacked);
  save_pixel_detector(out_dir / "pixel_detector.json", pixel_det);
  save_image_detector(out_dir / "image_detector.json", image_det);

  DetectReport report{pixel_det.heldout_auroc, image_det.heldout_auroc, pairs.size()};
  json rj{{"pixel_auroc", report.pixel_auroc},
          {"image_auroc", report.image_auroc},
          {"images", report.images}};
  write_text_file(out_dir / "detect_report.json", rj.dump(2));
  return report;
}

DetectReport detect_eval_pipeline(const Model& model, const Dataset& dataset,
                                  const std::filesystem::path& attack_run_dir,
                                  const GaussianProfile& profile,
                                  const PixelDetector& pixel_detector,
                                  const ImageDetector& image_detector,
                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto pairs = load_attacked_pairs(attack_run_dir);

  std::vector<double> image_level_scores;
  std::vector<std::uint8_t> image_level_labels;
  std::vector<double> pixel_level_scores;
  std::vector<std::uint8_t> pixel_level_labels;

  std::size_t counter = 0;
  for (const auto& pair : pairs) {
    const Sample& sample = dataset.samples[pair.dataset_index];
    DetectionResult clean_res =
        detect(sample.image, model, profile, pixel_detector, image_detector);
    DetectionResult adv_res = detect(pair.adversarial_image, model, profile,
                                     pixel_detector, image_detector);
    image_level_scores.push_back(clean_res.image_score);
    image_level_labels.push_back(0);
    image_level_scores.push_back(adv_res.image_score);
    image_level_labels.push_back(1);
    for (std::size_t j = 0; j < clean_res.pixel_scores.v.size(); ++j) {
      pixel_level_scores.push_back(clean_res.pixel_scores.v[j]);
      pixel_level_labels.push_back(0);
      pixel_level_scores.push_back(adv_res.pixel_scores.v[j]);
      pixel_level_labels.push_back(pair.fooled.v[j]);
    }

    Grid<std::uint16_t> heat(adv_res.pixel_scores.h, adv_res.pixel_scores.w);
    for (std::size_t j = 0; j < heat.v.size(); ++j)
      heat.v[j] = static_cast<std::uint16_t>(
          std::lround(std::clamp(adv_res.pixel_scores.v[j], 0.0, 1.0) * 65535.0));
    char name[48];
    std::snprintf(name, sizeof(name), "detection_%04zu.pgm", counter);
    write_pgm16(out_dir / name, heat);
    ++counter;
  }

  DetectReport report;
  report.images = pairs.size();
  report.image_auroc = auroc(image_level_scores, image_level_labels);
  report.pixel_auroc = auroc(pixel_level_scores, pixel_level_labels);
  json rj{{"pixel_auroc", report.pixel_auroc},
          {"image_auroc", report.image_auroc},
          {"images", report.images}};
  write_text_file(out_dir / "detect_eval.json", rj.dump(2));
  return report;
}

namespace {

RunRecord load_run_record(const std::filesystem::path& dir) {
  json j = json::parse(read_text_file(dir / "run_record.json"));
  RunRecord r;
  r.config_json = j.at("config").dump();
  r.version = j.at("version").get<std::string>();
  for (const auto& pj : j.at("per_image")) {
    ImageRecord ir;
    ir.index = pj.at("index").get<std::size_t>();
    ir.skipped = pj.at("skipped").get<bool>();
    ir.sweep_value = pj.at("sweep_value").get<double>();
    ir.iterations_used = pj.at("iterations_used").get<int>();
    ir.terminated_early = pj.at("terminated_early").get<bool>();
    if (ir.skipped)
      ir.skip_reason = pj.at("skip_reason").get<std::string>();
    else
      ir.metrics = region_metrics_from_json(pj.at("metrics"));
    r.per_image.push_back(ir);
  }
  for (const auto& aj : j.at("aggregates")) r.aggregates.push_back(aggregates_from_json(aj));
  r.sweep_values = j.at("sweep_values").get<std::vector<double>>();
  r.artifact_paths = j.at("artifact_paths").get<std::vector<std::string>>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  if (j.contains("image_auroc")) r.image_auroc = j.at("image_auroc").get<double>();
  if (j.contains("pixel_auroc")) r.pixel_auroc = j.at("pixel_auroc").get<double>();
  return r;
}

Tensor colorize_labels(const LabelMap& labels, const SceneConfig& cfg) {
  Tensor img({static_cast<std::size_t>(labels.h), static_cast<std::size_t>(labels.w), 3});
  for (int y = 0; y < labels.h; ++y) {
    for (int x = 0; x < labels.w; ++x) {
      auto color = class_color(cfg, labels.at(y, x));
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
    }
  }
  return img;
}

void draw_support_outline(Tensor& img, const BinaryMask& support) {
  auto inside = [&](int y, int x) {
    return y >= 0 && y < support.h && x >= 0 && x < support.w && support.at(y, x);
  };
  for (int y = 0; y < support.h; ++y) {
    for (int x = 0; x < support.w; ++x) {
      if (!support.at(y, x)) continue;
      bool boundary = !inside(y - 1, x) || !inside(y + 1, x) || !inside(y, x - 1) ||
                      !inside(y, x + 1);
      if (boundary) {
        img.at(y, x, 0) = 1.0;
        img.at(y, x, 1) = 0.0;
        img.at(y, x, 2) = 0.0;
      }
    }
  }
}

std::string csv_cell(const std::optional<double>& v) {
  return v ? std::to_string(*v) : "";
}

}  // namespace

void report(const std::vector<std::filesystem::path>& run_dirs,
            const std::filesystem::path& out_dir) {
  require(!run_dirs.empty(), "report: no run directories given");
  std::filesystem::create_directories(out_dir);

  struct LoadedRun {
    std::filesystem::path dir;
    RunRecord record;
    json config;
  };
  std::vector<LoadedRun> runs;
  for (const auto& dir : run_dirs) {
    try {
      LoadedRun lr{dir, load_run_record(dir), json()};
      lr.config = json::parse(lr.record.config_json);
      runs.push_back(std::move(lr));
    } catch (const std::exception& e) {
      std::cerr << "report: skipping corrupt run directory " << dir << ": "
                << e.what() << "\n";
    }
  }
  require(!runs.empty(), "report: no valid run records");

  // flat per-aggregate table
  std::string csv =
      "run_dir,setting,sweep_param,sweep_value,images,skipped,miou_u,asr_t,asr_u,"
      "preserved_rate,linf,l2,sparsity,image_auroc,pixel_auroc\n";
  for (const auto& lr : runs) {
    std::string setting = lr.config.at("setting").get<std::string>();
    for (std::size_t s = 0; s < lr.record.aggregates.size(); ++s) {
      const Aggregates& a = lr.record.aggregates[s];
      std::string sweep_param, sweep_value;
      if (setting == "distance_sweep") {
        sweep_param = "d";
        sweep_value = std::to_string(lr.record.sweep_values[s]);
      } else if (setting == "adaptive_patch") {
        sweep_param = "sparsity_target";
        sweep_value =
            std::to_string(lr.config.at("adaptive").at("sparsity_target").get<double>());
      } else if (setting == "universal_patch") {
        sweep_param = "patch_area";
        double area = lr.config.at("universal").at("patch_h").get<double>() *
                      lr.config.at("universal").at("patch_w").get<double>();
        sweep_value = std::to_string(area);
      }
      csv += lr.dir.string() + "," + setting + "," + sweep_param + "," + sweep_value +
             "," + std::to_string(a.images) + "," + std::to_string(a.skipped) + "," +
             std::to_string(a.mean_miou_u) + "," + csv_cell(a.mean_asr_t) + "," +
             std::to_string(a.mean_asr_u) + "," + csv_cell(a.mean_preserved_rate) +
             "," + std::to_string(a.mean_linf) + "," + std::to_string(a.mean_l2) +
             "," + std::to_string(a.mean_sparsity) + "," +
             csv_cell(lr.record.image_auroc) + "," + csv_cell(lr.record.pixel_auroc) +
             "\n";
    }
  }
  write_text_file(out_dir / "runs.csv", csv);

  // overlays per image
  for (const auto& lr : runs) {
    SceneConfig scene_cfg;
    try {
      scene_cfg = scene_config_from_json(lr.config.at("scene").dump());
    } catch (...) {
      try {
        Dataset ds = load_dataset(lr.config.at("dataset_dir").get<std::string>());
        scene_cfg = ds.config;
      } catch (const std::exception& e) {
        std::cerr << "report: cannot recover scene config for " << lr.dir << ": "
                  << e.what() << "\n";
        continue;
      }
    }
    auto run_out = out_dir / lr.dir.filename();
    std::filesystem::create_directories(run_out);
    for (std::size_t slot = 0; slot < lr.record.per_image.size(); ++slot) {
      char dirname[32];
      std::snprintf(dirname, sizeof(dirname), "image_%04zu", slot);
      auto img_dir = lr.dir / dirname;
      if (!std::filesystem::exists(img_dir / "pred_clean.pgm")) {
        std::cerr << "report: missing artifact " << (img_dir / "pred_clean.pgm")
                  << "\n";
        continue;
      }
      auto clean_labels = labels_from_pgm(read_pgm(img_dir / "pred_clean.pgm"));
      write_ppm(run_out / (std::string(dirname) + "_pred_clean.ppm"),
                colorize_labels(clean_labels, scene_cfg));
      if (std::filesystem::exists(img_dir / "pred_adv.pgm")) {
        auto adv_labels = labels_from_pgm(read_pgm(img_dir / "pred_adv.pgm"));
        write_ppm(run_out / (std::string(dirname) + "_pred_adv.ppm"),
                  colorize_labels(adv_labels, scene_cfg));
      }
      if (std::filesystem::exists(img_dir / "adversarial.ppm") &&
          std::filesystem::exists(img_dir / "support.pgm")) {
        Tensor adv = read_ppm(img_dir / "adversarial.ppm");
        BinaryMask support = read_mask(img_dir / "support.pgm");
        draw_support_outline(adv, support);
        write_ppm(run_out / (std::string(dirname) + "_support_outline.ppm"), adv);
      }
      if (std::filesystem::exists(img_dir / "fooled.pgm")) {
        std::filesystem::copy_file(
            img_dir / "fooled.pgm",
            run_out / (std::string(dirname) + "_fooled.pgm"),
            std::filesystem::copy_options::overwrite_existing);
      }
      if (std::filesystem::exists(img_dir / "detection.pgm")) {
        std::filesystem::copy_file(
            img_dir / "detection.pgm",
            run_out / (std::string(dirname) + "_detection.pgm"),
            std::filesystem::copy_options::overwrite_existing);
      }
    }
  }
}

}  // namespace segattack
