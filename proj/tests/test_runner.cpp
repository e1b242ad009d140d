#include <doctest.h>

#include <filesystem>

#include "segattack/image_io.hpp"
#include "segattack/runner.hpp"

using namespace segattack;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("segattack_run_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

SceneConfig runner_scene(std::uint64_t seed) {
  SceneConfig cfg;
  cfg.width = 24;
  cfg.height = 24;
  cfg.objects_min = 1;
  cfg.objects_max = 2;
  cfg.object_min_size = 4;
  cfg.object_max_size = 7;
  cfg.min_dynamic_fraction = 0.02;
  cfg.max_dynamic_fraction = 0.4;
  cfg.texture_noise_std = 0.05;
  cfg.seed = seed;
  return cfg;
}

ExperimentConfig base_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.scene = runner_scene(4242);
  cfg.scene_count = 8;
  ModelSpec spec;
  spec.variant = Variant::global_context;
  spec.num_classes = cfg.scene->num_classes();
  spec.channel_widths = {6, 6, 6};
  spec.seed = 1;
  cfg.model_spec = spec;
  cfg.train.epochs = 10;
  cfg.train.batch_size = 3;
  cfg.train.seed = 2;
  cfg.setting = AttackSetting::full_static;
  cfg.attack.mode = AttackMode::targeted;
  cfg.attack.step_size = 1e-3;
  cfg.attack.max_iters = 15;
  cfg.output_dir = out;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("experiment config json round trip") {
  ExperimentConfig cfg = base_config("/tmp/unused");
  cfg.distances = {0.0, 3.0};
  std::string text = experiment_config_to_json(cfg);
  ExperimentConfig back = experiment_config_from_json(text);
  CHECK(back.seed == cfg.seed);
  CHECK(back.setting == cfg.setting);
  CHECK(back.attack.step_size == cfg.attack.step_size);
  CHECK(back.scene->width == cfg.scene->width);
  CHECK(back.model_spec->channel_widths == cfg.model_spec->channel_widths);
  CHECK(back.distances == cfg.distances);
}

TEST_CASE("config validation rejects bad combinations") {
  ExperimentConfig cfg = base_config("/tmp/unused");
  cfg.setting = AttackSetting::universal_patch;
  cfg.attack.mode = AttackMode::targeted;  // targeted universal is invalid
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = base_config("/tmp/unused");
  cfg.setting = AttackSetting::distance_sweep;
  cfg.distances.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = base_config("");
  CHECK_THROWS_AS(cfg.validate(), Error);

  CHECK_THROWS_WITH_AS(experiment_config_from_json(R"({"setting":"global"})"),
                       doctest::Contains("seed"), Error);
}

TEST_CASE("full_static run produces a complete record") {
  auto out = temp_dir("fs");
  ExperimentConfig cfg = base_config(out.string());
  RunRecord record = run(cfg);

  CHECK(!record.per_image.empty());
  REQUIRE(record.aggregates.size() == 1);
  const Aggregates& agg = record.aggregates[0];
  CHECK(agg.images + agg.skipped == record.per_image.size());
  CHECK(agg.images > 0);

  // every artifact listed resolves
  for (const auto& rel : record.artifact_paths)
    CHECK(std::filesystem::exists(out / rel));
  CHECK(std::filesystem::exists(out / "run_record.json"));
  CHECK(std::filesystem::exists(out / "model.ckpt"));

  // support confinement is visible in artifacts: adversarial equals clean
  // off the support mask (checked in attack tests; here just presence)
  CHECK(std::filesystem::exists(out / "image_0000" / "pred_clean.pgm"));
}

TEST_CASE("distance sweep aggregates per distance") {
  auto out = temp_dir("sweep");
  ExperimentConfig cfg = base_config(out.string());
  cfg.setting = AttackSetting::distance_sweep;
  cfg.distances = {0.0, 2.0};
  cfg.attack.max_iters = 8;
  RunRecord record = run(cfg);
  CHECK(record.sweep_values == std::vector<double>{0.0, 2.0});
  CHECK(record.aggregates.size() == 2);
}

TEST_CASE("universal run shares one perturbation across images") {
  auto out = temp_dir("universal");
  ExperimentConfig cfg = base_config(out.string());
  cfg.setting = AttackSetting::universal_patch;
  cfg.attack.mode = AttackMode::untargeted;
  cfg.universal.epochs = 3;
  cfg.universal.patch_h = 5;
  cfg.universal.patch_w = 5;
  RunRecord record = run(cfg);
  CHECK(std::filesystem::exists(out / "universal_delta.tensor"));
  REQUIRE(record.aggregates.size() == 1);
  CHECK(record.aggregates[0].images > 0);
}

TEST_CASE("rerunning an identical config reproduces every metric bit-exactly") {
  auto out_a = temp_dir("det_a");
  auto out_b = temp_dir("det_b");
  ExperimentConfig cfg = base_config(out_a.string());
  cfg.attack.max_iters = 10;
  RunRecord a = run(cfg);
  cfg.output_dir = out_b.string();
  RunRecord b = run(cfg);

  REQUIRE(a.per_image.size() == b.per_image.size());
  for (std::size_t i = 0; i < a.per_image.size(); ++i) {
    CHECK(a.per_image[i].skipped == b.per_image[i].skipped);
    if (a.per_image[i].skipped) continue;
    CHECK(a.per_image[i].metrics.miou_u == b.per_image[i].metrics.miou_u);
    CHECK(a.per_image[i].metrics.asr_u == b.per_image[i].metrics.asr_u);
    CHECK(a.per_image[i].metrics.perceptibility.l2 ==
          b.per_image[i].metrics.perceptibility.l2);
    if (a.per_image[i].metrics.asr_t)
      CHECK(*a.per_image[i].metrics.asr_t == *b.per_image[i].metrics.asr_t);
  }
  CHECK(a.aggregates[0].mean_miou_u == b.aggregates[0].mean_miou_u);
  CHECK(a.aggregates[0].mean_asr_u == b.aggregates[0].mean_asr_u);
}

TEST_CASE("report emits tables and overlays and tolerates corrupt runs") {
  auto out = temp_dir("report_src");
  ExperimentConfig cfg = base_config(out.string());
  cfg.attack.max_iters = 8;
  run(cfg);

  auto corrupt = temp_dir("report_bad");
  write_text_file(corrupt / "run_record.json", "{ not json");

  auto report_dir = temp_dir("report_out");
  report({out, corrupt}, report_dir);
  CHECK(std::filesystem::exists(report_dir / "runs.csv"));

  std::string csv = read_text_file(report_dir / "runs.csv");
  CHECK(csv.find("full_static") != std::string::npos);

  // one-row table for a single run: header + one aggregate line
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 2);

  CHECK_THROWS_AS(report({corrupt}, report_dir), Error);
}

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<int> hits(37, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
}
