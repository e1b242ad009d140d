#include "segattack/scenegen.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "segattack/image_io.hpp"
#include "segattack/rng.hpp"
#include "segattack/version.hpp"

namespace segattack {

namespace {

using nlohmann::json;

constexpr int kMaxRejectionRetries = 100;

// Curated palette for the default street-scene classes; further classes get
// hash-derived colors.
constexpr std::array<std::array<double, 3>, 8> kPalette = {{
    {0.45, 0.32, 0.18},  // ground
    {0.55, 0.75, 0.95},  // sky
    {0.55, 0.55, 0.55},  // wall
    {0.70, 0.15, 0.15},  // vehicle
    {0.20, 0.35, 0.65},  // person
    {0.25, 0.55, 0.25},
    {0.80, 0.65, 0.20},
    {0.60, 0.30, 0.60},
}};

inline double quantize_unit(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<double>(std::lround(v * 255.0)) / 255.0;
}

struct ObjectShape {
  int cls = 0;       // absolute class index
  bool ellipse = false;
  int y0 = 0, x0 = 0, h = 0, w = 0;
};

void paint_object(const ObjectShape& o, LabelMap& labels) {
  if (!o.ellipse) {
    for (int y = o.y0; y < o.y0 + o.h; ++y)
      for (int x = o.x0; x < o.x0 + o.w; ++x) labels.at(y, x) = o.cls;
    return;
  }
  // Exact integer ellipse test on pixel centers: the ellipse inscribed in
  // the bounding box, evaluated as (2dy)^2 rx^2 + (2dx)^2 ry^2 <= (2 rx ry)^2
  // with dy, dx measured in half-pixel units from the box center.
  const std::int64_t ry2 = static_cast<std::int64_t>(o.h) * o.h;
  const std::int64_t rx2 = static_cast<std::int64_t>(o.w) * o.w;
  for (int y = o.y0; y < o.y0 + o.h; ++y) {
    for (int x = o.x0; x < o.x0 + o.w; ++x) {
      std::int64_t dy = 2 * (y - o.y0) + 1 - o.h;  // in half pixels
      std::int64_t dx = 2 * (x - o.x0) + 1 - o.w;
      if (dy * dy * rx2 + dx * dx * ry2 <= rx2 * ry2)
        labels.at(y, x) = o.cls;
    }
  }
}

}  // namespace

void SceneConfig::validate() const {
  require(width > 0 && height > 0, "scene dimensions must be positive");
  require(!static_classes.empty(), "at least one static class required");
  for (const auto& s : static_classes)
    require(std::find(dynamic_classes.begin(), dynamic_classes.end(), s) ==
                dynamic_classes.end(),
            "static and dynamic class lists must be disjoint: " + s);
  require(num_classes() <= 255, "at most 255 classes (8-bit label files)");
  require(objects_min >= 0 && objects_max >= objects_min,
          "invalid objects_per_image range");
  if (objects_max > 0) {
    require(!dynamic_classes.empty(), "objects requested but no dynamic classes");
    require(object_min_size >= 1 && object_max_size >= object_min_size,
            "invalid object size range");
    require(object_max_size <= width && object_max_size <= height,
            "object size exceeds scene dimensions");
  }
  require(min_dynamic_fraction > 0.0 && min_dynamic_fraction <= max_dynamic_fraction &&
              max_dynamic_fraction < 1.0,
          "need 0 < min_dynamic_fraction <= max_dynamic_fraction < 1");
  require(texture_noise_std >= 0.0 && texture_noise_std <= 1.0,
          "texture_noise_std must be in [0,1]");
}

std::array<double, 3> class_color(const SceneConfig& config, int c) {
  require(c >= 0 && c < config.num_classes(), "class index out of range");
  if (c < static_cast<int>(kPalette.size())) return kPalette[c];
  Rng rng(0x5EEDC01055ULL, static_cast<std::uint64_t>(c));
  return {0.15 + 0.7 * rng.next_double(), 0.15 + 0.7 * rng.next_double(),
          0.15 + 0.7 * rng.next_double()};
}

Sample generate_scene(const SceneConfig& config, std::uint64_t index) {
  config.validate();
  const int h = config.height, w = config.width;
  const int num_static = config.num_static();
  const std::size_t total = static_cast<std::size_t>(h) * w;

  LabelMap labels(h, w);
  for (int y = 0; y < h; ++y) {
    int band = static_cast<int>((static_cast<std::int64_t>(y) * num_static) / h);
    for (int x = 0; x < w; ++x) labels.at(y, x) = band;
  }
  const LabelMap background = labels;

  bool accepted = false;
  for (int attempt = 0; attempt < kMaxRejectionRetries; ++attempt) {
    labels = background;
    Rng rng(config.seed, (index << 8) | static_cast<std::uint64_t>(attempt));
    int count = config.objects_max == 0
                    ? 0
                    : static_cast<int>(rng.uniform_int(config.objects_min,
                                                       config.objects_max));
    for (int i = 0; i < count; ++i) {
      ObjectShape o;
      o.cls = num_static + static_cast<int>(rng.uniform_int(
                               0, static_cast<std::int64_t>(
                                      config.dynamic_classes.size()) - 1));
      o.ellipse = (rng.next_u64() & 1) != 0;
      o.h = static_cast<int>(rng.uniform_int(config.object_min_size,
                                             config.object_max_size));
      o.w = static_cast<int>(rng.uniform_int(config.object_min_size,
                                             config.object_max_size));
      o.y0 = static_cast<int>(rng.uniform_int(0, h - o.h));
      o.x0 = static_cast<int>(rng.uniform_int(0, w - o.w));
      paint_object(o, labels);
    }
    std::size_t dynamic_pixels = 0;
    for (auto c : labels.v) dynamic_pixels += (c >= num_static);
    double fraction = static_cast<double>(dynamic_pixels) / static_cast<double>(total);
    if (config.objects_max == 0 ||
        (fraction >= config.min_dynamic_fraction &&
         fraction <= config.max_dynamic_fraction)) {
      accepted = true;
      break;
    }
  }
  require(accepted,
          "generate_scene: dynamic-fraction bounds unreachable after " +
              std::to_string(kMaxRejectionRetries) + " retries (index " +
              std::to_string(index) + ")");

  Tensor image({static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3});
  Rng noise(config.seed, (index << 8) | 0xFFULL);
  const double amp = config.texture_noise_std;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto base = class_color(config, labels.at(y, x));
      for (int c = 0; c < 3; ++c) {
        double v = base[c];
        if (amp > 0.0) v += noise.uniform(-amp, amp);
        image.at(y, x, c) = quantize_unit(v);
      }
    }
  }
  return Sample{std::move(image), std::move(labels)};
}

Dataset generate_dataset(const SceneConfig& config, std::size_t n,
                         std::array<double, 3> split_fractions) {
  config.validate();
  require(n >= 1, "dataset size must be >= 1");
  double sum = split_fractions[0] + split_fractions[1] + split_fractions[2];
  require(std::abs(sum - 1.0) < 1e-9, "split fractions must sum to 1");
  for (double f : split_fractions) require(f >= 0.0, "negative split fraction");

  Dataset ds;
  ds.config = config;
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    ds.samples.push_back(generate_scene(config, i));

  auto boundary = [&](double f) {
    return static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
  };
  std::size_t b0 = boundary(split_fractions[0]);
  std::size_t b1 = boundary(split_fractions[0] + split_fractions[1]);
  b0 = std::min(b0, n);
  b1 = std::min(std::max(b1, b0), n);
  for (std::size_t i = 0; i < b0; ++i) ds.splits.train.push_back(i);
  for (std::size_t i = b0; i < b1; ++i) ds.splits.val.push_back(i);
  for (std::size_t i = b1; i < n; ++i) ds.splits.test.push_back(i);
  return ds;
}

namespace {

json config_to_json_obj(const SceneConfig& c) {
  return json{{"width", c.width},
              {"height", c.height},
              {"static_classes", c.static_classes},
              {"dynamic_classes", c.dynamic_classes},
              {"objects_min", c.objects_min},
              {"objects_max", c.objects_max},
              {"object_min_size", c.object_min_size},
              {"object_max_size", c.object_max_size},
              {"min_dynamic_fraction", c.min_dynamic_fraction},
              {"max_dynamic_fraction", c.max_dynamic_fraction},
              {"texture_noise_std", c.texture_noise_std},
              {"seed", c.seed}};
}

SceneConfig config_from_json_obj(const json& j) {
  SceneConfig c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.static_classes = j.at("static_classes").get<std::vector<std::string>>();
  c.dynamic_classes = j.at("dynamic_classes").get<std::vector<std::string>>();
  c.objects_min = j.at("objects_min").get<int>();
  c.objects_max = j.at("objects_max").get<int>();
  c.object_min_size = j.at("object_min_size").get<int>();
  c.object_max_size = j.at("object_max_size").get<int>();
  c.min_dynamic_fraction = j.at("min_dynamic_fraction").get<double>();
  c.max_dynamic_fraction = j.at("max_dynamic_fraction").get<double>();
  c.texture_noise_std = j.at("texture_noise_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string scene_config_to_json(const SceneConfig& config) {
  return config_to_json_obj(config).dump(2);
}

SceneConfig scene_config_from_json(const std::string& json_text) {
  return config_from_json_obj(json::parse(json_text));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json files = json::array();
  char name[32];
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    std::snprintf(name, sizeof(name), "img_%06zu.ppm", i);
    std::string img_name = name;
    std::snprintf(name, sizeof(name), "lbl_%06zu.pgm", i);
    std::string lbl_name = name;
    write_ppm(dir / img_name, s.image);
    Grid<std::uint8_t> lbl(s.labels.h, s.labels.w);
    for (std::size_t k = 0; k < lbl.v.size(); ++k)
      lbl.v[k] = static_cast<std::uint8_t>(s.labels.v[k]);
    write_pgm(dir / lbl_name, lbl);
    files.push_back({{"image", img_name},
                     {"label", lbl_name},
                     {"image_fnv1a64", hex64(fnv1a64_file(dir / img_name))},
                     {"label_fnv1a64", hex64(fnv1a64_file(dir / lbl_name))}});
  }
  json manifest{{"schema_version", kManifestSchemaVersion},
                {"checksum_algorithm", "fnv1a64"},
                {"config", config_to_json_obj(dataset.config)},
                {"n", dataset.samples.size()},
                {"splits",
                 {{"train", dataset.splits.train},
                  {"val", dataset.splits.val},
                  {"test", dataset.splits.test}}},
                {"files", files}};
  write_text_file(dir / "manifest.json", manifest.dump(2));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  auto manifest_path = dir / "manifest.json";
  require(std::filesystem::exists(manifest_path),
          "missing manifest: " + manifest_path.string());
  json manifest = json::parse(read_text_file(manifest_path));
  require(manifest.at("schema_version").get<int>() == kManifestSchemaVersion,
          "unsupported manifest schema version");

  Dataset ds;
  ds.config = config_from_json_obj(manifest.at("config"));
  ds.splits.train = manifest.at("splits").at("train").get<std::vector<std::size_t>>();
  ds.splits.val = manifest.at("splits").at("val").get<std::vector<std::size_t>>();
  ds.splits.test = manifest.at("splits").at("test").get<std::vector<std::size_t>>();

  const int num_classes = ds.config.num_classes();
  for (const auto& entry : manifest.at("files")) {
    auto img_path = dir / entry.at("image").get<std::string>();
    auto lbl_path = dir / entry.at("label").get<std::string>();
    require(hex64(fnv1a64_file(img_path)) == entry.at("image_fnv1a64").get<std::string>(),
            "checksum mismatch: " + img_path.string());
    require(hex64(fnv1a64_file(lbl_path)) == entry.at("label_fnv1a64").get<std::string>(),
            "checksum mismatch: " + lbl_path.string());
    Sample s;
    s.image = read_ppm(img_path);
    auto lbl = read_pgm(lbl_path);
    s.labels = LabelMap(lbl.h, lbl.w);
    for (std::size_t k = 0; k < lbl.v.size(); ++k) {
      require(lbl.v[k] < num_classes,
              "label value >= num_classes in " + lbl_path.string());
      s.labels.v[k] = lbl.v[k];
    }
    ds.samples.push_back(std::move(s));
  }
  std::size_t n = manifest.at("n").get<std::size_t>();
  require(ds.samples.size() == n, "manifest n does not match file list");
  return ds;
}

}  // namespace segattack
