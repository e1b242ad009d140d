#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segattack/tensor.hpp"

namespace segattack {

/// Synthetic street-scene analog: horizontal bands of static classes with
/// per-class base colors plus bounded uniform texture noise, and dynamic
/// foreground objects (axis-aligned rectangles and ellipses) painted on top.
/// Class index = position in the concatenated (static ++ dynamic) list.
struct SceneConfig {
  int width = 64;
  int height = 64;
  std::vector<std::string> static_classes = {"ground", "sky", "wall"};
  std::vector<std::string> dynamic_classes = {"vehicle", "person"};
  int objects_min = 2;           // objects_per_image range, inclusive
  int objects_max = 4;
  int object_min_size = 6;       // side length range of painted objects
  int object_max_size = 12;
  double min_dynamic_fraction = 0.02;
  double max_dynamic_fraction = 0.25;
  double texture_noise_std = 0.03;  // uniform noise bound per channel
  std::uint64_t seed = 0;

  int num_classes() const {
    return static_cast<int>(static_classes.size() + dynamic_classes.size());
  }
  int num_static() const { return static_cast<int>(static_classes.size()); }
  bool is_static_class(int c) const { return c < num_static(); }

  void validate() const;
};

struct Sample {
  Tensor image;     // H x W x 3 in [0,1], quantized to 8-bit levels
  LabelMap labels;  // H x W class indices in [0, K)

  bool operator==(const Sample& o) const {
    return image == o.image && labels == o.labels;
  }
};

struct DatasetSplits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct Dataset {
  std::vector<Sample> samples;
  DatasetSplits splits;
  SceneConfig config;
};

/// Base color of class `c` (curated palette for the default five classes,
/// hash-derived colors beyond that).
std::array<double, 3> class_color(const SceneConfig& config, int c);

/// Deterministic function of (config.seed, index). Throws after 100
/// rejection-sampling retries if the object-size range cannot reach the
/// configured dynamic-fraction bounds.
Sample generate_scene(const SceneConfig& config, std::uint64_t index);

/// Samples i = generate_scene(config, i); contiguous index-range splits
/// sized by cumulative rounding of the fractions.
Dataset generate_dataset(const SceneConfig& config, std::size_t n,
                         std::array<double, 3> split_fractions);

/// Directory layout: manifest.json + img_%06d.ppm + lbl_%06d.pgm.
/// The manifest records schema_version, config, n, splits and an FNV-1a
/// 64-bit checksum per file.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

std::string scene_config_to_json(const SceneConfig& config);
SceneConfig scene_config_from_json(const std::string& json_text);

}  // namespace segattack
