#include "segattack/detection.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "segattack/serialize.hpp"
#include "segattack/version.hpp"

namespace segattack {

namespace {

using nlohmann::json;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Order-independent sum: addends rounded to 2^-20 fixed point and
// accumulated in 128-bit integers, so permuting the inputs cannot change
// the result.
class ExactSum {
 public:
  void add(double x) { acc_ += static_cast<__int128>(std::llround(x * kScale)); }
  double value() const { return static_cast<double>(acc_) / kScale; }

 private:
  static constexpr double kScale = 1048576.0;  // 2^20
  __int128 acc_ = 0;
};

// Mahalanobis scores on far-off-manifold features can be astronomically
// negative; cap the magnitude so the fixed-point sums stay in range.
inline double clamp_feature(double x) { return std::clamp(x, -1e6, 1e6); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Full-batch gradient descent on standardized features; all sums use
// fixed-point accumulation so the fit does not depend on sample order.
LogisticFit fit_logistic(const std::vector<const double*>& rows,
                         const std::vector<std::uint8_t>& labels, int dims,
                         int iters, double lr) {
  const std::size_t n = rows.size();
  bool any_pos = false, any_neg = false;
  for (auto y : labels) (y ? any_pos : any_neg) = true;
  require(any_pos && any_neg, "logistic fit: single-class training labels");

  LogisticFit fit;
  fit.mean.assign(dims, 0.0);
  fit.stddev.assign(dims, 1.0);
  for (int d = 0; d < dims; ++d) {
    ExactSum s;
    for (auto* r : rows) s.add(clamp_feature(r[d]));
    fit.mean[d] = s.value() / static_cast<double>(n);
    ExactSum sq;
    for (auto* r : rows) {
      double dv = clamp_feature(r[d]) - fit.mean[d];
      sq.add(dv * dv);
    }
    double var = sq.value() / static_cast<double>(n);
    fit.stddev[d] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }

  fit.weights.assign(dims, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < iters; ++it) {
    std::vector<ExactSum> gsum(dims);
    ExactSum bsum;
    for (std::size_t i = 0; i < n; ++i) {
      double z = fit.bias;
      for (int d = 0; d < dims; ++d)
        z += fit.weights[d] * (clamp_feature(rows[i][d]) - fit.mean[d]) / fit.stddev[d];
      double resid = sigmoid(z) - static_cast<double>(labels[i]);
      for (int d = 0; d < dims; ++d)
        gsum[d].add(resid * (clamp_feature(rows[i][d]) - fit.mean[d]) / fit.stddev[d]);
      bsum.add(resid);
    }
    for (int d = 0; d < dims; ++d)
      fit.weights[d] -= lr * gsum[d].value() * inv_n;
    fit.bias -= lr * bsum.value() * inv_n;
  }
  return fit;
}

double logistic_score(const LogisticFit& fit, const double* row, int dims) {
  double z = fit.bias;
  for (int d = 0; d < dims; ++d)
    z += fit.weights[d] * (clamp_feature(row[d]) - fit.mean[d]) / fit.stddev[d];
  return sigmoid(z);
}

}  // namespace

std::vector<std::vector<Tensor>> class_average_features(const FeatureStack& features,
                                                        const LabelMap& labels,
                                                        int num_classes,
                                                        std::vector<std::uint8_t>* present) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto c : labels.v) {
    require(c >= 0 && c < num_classes, "label out of range");
    ++counts[c];
  }
  if (present) {
    present->assign(num_classes, 0);
    for (int c = 0; c < num_classes; ++c) (*present)[c] = counts[c] > 0;
  }

  std::vector<std::vector<Tensor>> out(features.layers.size());
  for (std::size_t l = 0; l < features.layers.size(); ++l) {
    const Tensor& map = features.layers[l].second;
    require(static_cast<int>(map.dim(0)) == labels.h &&
                static_cast<int>(map.dim(1)) == labels.w,
            "feature map size does not match the label map");
    const std::size_t ch = map.dim(2);
    out[l].assign(num_classes, Tensor({ch}));
    for (std::size_t j = 0; j < labels.v.size(); ++j) {
      Tensor& acc = out[l][labels.v[j]];
      const Scalar* p = map.data() + j * ch;
      for (std::size_t c = 0; c < ch; ++c) acc[c] += p[c];
    }
    for (int cls = 0; cls < num_classes; ++cls) {
      if (counts[cls] == 0) continue;
      double inv = 1.0 / static_cast<double>(counts[cls]);
      for (std::size_t c = 0; c < ch; ++c) out[l][cls][c] *= inv;
    }
  }
  return out;
}

GaussianProfile fit_profile_from_features(const std::vector<FeatureStack>& stacks,
                                          const std::vector<LabelMap>& labels,
                                          int num_classes, double shrinkage) {
  require(stacks.size() >= 2, "profile fitting needs at least 2 images");
  require(stacks.size() == labels.size(), "stack/label count mismatch");
  const std::size_t num_layers = stacks.front().layers.size();

  GaussianProfile profile;
  profile.num_classes = num_classes;
  profile.shrinkage = shrinkage;
  profile.layers.resize(num_layers);

  // per-image class averages
  std::vector<std::vector<std::vector<Tensor>>> avgs(stacks.size());
  std::vector<std::vector<std::uint8_t>> present(stacks.size());
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    require(stacks[i].layers.size() == num_layers, "inconsistent layer counts");
    avgs[i] = class_average_features(stacks[i], labels[i], num_classes, &present[i]);
  }

  for (std::size_t l = 0; l < num_layers; ++l) {
    auto& layer = profile.layers[l];
    layer.name = stacks.front().layers[l].first;
    const int ch = static_cast<int>(stacks.front().layers[l].second.dim(2));
    layer.channels = ch;
    layer.observed.assign(num_classes, 0);
    layer.means.assign(num_classes, Tensor({static_cast<std::size_t>(ch)}));

    std::vector<std::size_t> obs_count(num_classes, 0);
    for (std::size_t i = 0; i < stacks.size(); ++i)
      for (int cls = 0; cls < num_classes; ++cls)
        if (present[i][cls]) {
          ++obs_count[cls];
          for (int c = 0; c < ch; ++c) layer.means[cls][c] += avgs[i][l][cls][c];
        }
    for (int cls = 0; cls < num_classes; ++cls) {
      if (obs_count[cls] == 0) continue;
      layer.observed[cls] = 1;
      for (int c = 0; c < ch; ++c)
        layer.means[cls][c] /= static_cast<double>(obs_count[cls]);
    }

    Mat cov = Mat::Zero(ch, ch);
    std::size_t total_obs = 0;
    Vec dev(ch);
    for (std::size_t i = 0; i < stacks.size(); ++i) {
      for (int cls = 0; cls < num_classes; ++cls) {
        if (!present[i][cls]) continue;
        for (int c = 0; c < ch; ++c)
          dev[c] = avgs[i][l][cls][c] - layer.means[cls][c];
        cov.noalias() += dev * dev.transpose();
        ++total_obs;
      }
    }
    require(total_obs > 0, "no class observations for covariance");
    cov /= static_cast<double>(total_obs);

    double scale = cov.trace() / static_cast<double>(ch);
    if (scale <= 0.0) scale = 1.0;  // constant features: identity shrinkage
    cov += shrinkage * scale * Mat::Identity(ch, ch);

    Eigen::LLT<Mat> llt(cov);
    require(llt.info() == Eigen::Success,
            "covariance not positive definite after shrinkage");

    layer.covariance = Tensor({static_cast<std::size_t>(ch), static_cast<std::size_t>(ch)});
    layer.chol_lower = Tensor({static_cast<std::size_t>(ch), static_cast<std::size_t>(ch)});
    Mat lower = llt.matrixL();
    for (int r = 0; r < ch; ++r)
      for (int c = 0; c < ch; ++c) {
        layer.covariance[static_cast<std::size_t>(r) * ch + c] = cov(r, c);
        layer.chol_lower[static_cast<std::size_t>(r) * ch + c] = lower(r, c);
      }
  }
  return profile;
}

GaussianProfile fit_profile(const Model& model, const std::vector<Sample>& clean_samples,
                            LabelsSource labels_source, double shrinkage) {
  require(clean_samples.size() >= 2, "profile fitting needs at least 2 images");
  std::vector<FeatureStack> stacks;
  std::vector<LabelMap> labels;
  stacks.reserve(clean_samples.size());
  for (const auto& s : clean_samples) {
    stacks.push_back(extract_features(model, s.image));
    if (labels_source == LabelsSource::ground_truth) {
      labels.push_back(s.labels);
    } else {
      labels.push_back(argmax_labels(stacks.back().layers.back().second));
    }
  }
  return fit_profile_from_features(stacks, labels, model.spec().num_classes, shrinkage);
}

std::vector<Grid<double>> pixel_scores(const FeatureStack& features,
                                       const GaussianProfile& profile) {
  require(features.layers.size() == profile.layers.size(),
          "feature stack does not match the profile layer count");
  std::vector<Grid<double>> maps;
  maps.reserve(features.layers.size());
  for (std::size_t l = 0; l < features.layers.size(); ++l) {
    const auto& [name, map] = features.layers[l];
    const auto& layer = profile.layers[l];
    require(name == layer.name, "layer name mismatch: " + name + " vs " + layer.name);
    const int h = static_cast<int>(map.dim(0));
    const int w = static_cast<int>(map.dim(1));
    const int ch = static_cast<int>(map.dim(2));
    require(ch == layer.channels, "channel mismatch at layer " + name);

    Eigen::Map<const Mat> lower(layer.chol_lower.data(), ch, ch);
    // row-major storage; Eigen map reads it as the transpose, i.e. upper
    Mat lmat = lower.transpose();

    const std::size_t pixels = static_cast<std::size_t>(h) * w;
    Grid<double> score(h, w);
    for (auto& s : score.v) s = -std::numeric_limits<double>::infinity();

    Mat dev(ch, pixels);
    for (int cls = 0; cls < profile.num_classes; ++cls) {
      if (!layer.observed[cls]) continue;
      const Tensor& mu = layer.means[cls];
      for (std::size_t j = 0; j < pixels; ++j) {
        const Scalar* p = map.data() + j * ch;
        for (int c = 0; c < ch; ++c) dev(c, j) = p[c] - mu[c];
      }
      lmat.triangularView<Eigen::Lower>().solveInPlace(dev);
      for (std::size_t j = 0; j < pixels; ++j) {
        double q = -dev.col(j).squaredNorm();
        if (q > score.v[j]) score.v[j] = q;
      }
    }
    maps.push_back(std::move(score));
  }
  return maps;
}

Tensor resize_scores(const std::vector<Grid<double>>& layer_maps, int target_h,
                     int target_w) {
  const std::size_t layers = layer_maps.size();
  Tensor out({static_cast<std::size_t>(target_h), static_cast<std::size_t>(target_w),
              layers});
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& map = layer_maps[l];
    for (int y = 0; y < target_h; ++y) {
      double sy = target_h > 1
                      ? static_cast<double>(y) * (map.h - 1) / (target_h - 1)
                      : 0.0;
      int y0 = std::min(static_cast<int>(sy), map.h - 1);
      int y1 = std::min(y0 + 1, map.h - 1);
      double fy = sy - y0;
      for (int x = 0; x < target_w; ++x) {
        double sx = target_w > 1
                        ? static_cast<double>(x) * (map.w - 1) / (target_w - 1)
                        : 0.0;
        int x0 = std::min(static_cast<int>(sx), map.w - 1);
        int x1 = std::min(x0 + 1, map.w - 1);
        double fx = sx - x0;
        double v = (1 - fy) * ((1 - fx) * map.at(y0, x0) + fx * map.at(y0, x1)) +
                   fy * ((1 - fx) * map.at(y1, x0) + fx * map.at(y1, x1));
        out.at(y, x, l) = v;
      }
    }
  }
  return out;
}

std::vector<double> image_scores(const std::vector<Grid<double>>& layer_maps) {
  std::vector<double> sums;
  sums.reserve(layer_maps.size());
  for (const auto& map : layer_maps) {
    double s = 0.0;
    for (double v : map.v) s += v;  // raster order, shared with tests
    sums.push_back(s);
  }
  return sums;
}

PixelDetector fit_pixel_detector(const std::vector<Tensor>& score_stacks,
                                 const std::vector<BinaryMask>& fooled_masks,
                                 int iters, double lr) {
  require(!score_stacks.empty() && score_stacks.size() == fooled_masks.size(),
          "fit_pixel_detector: stack/mask count mismatch");
  bool any_attacked = false, any_clean = false;
  for (const auto& m : fooled_masks)
    (mask_count(m) > 0 ? any_attacked : any_clean) = true;
  require(any_attacked, "fit_pixel_detector: no attacked images");
  require(any_clean, "fit_pixel_detector: no clean images");

  const int dims = static_cast<int>(score_stacks.front().dim(2));
  const std::size_t n_img = score_stacks.size();
  std::size_t n_fit = static_cast<std::size_t>(
      std::llround(0.8 * static_cast<double>(n_img)));
  n_fit = std::clamp<std::size_t>(n_fit, 1, n_img);

  auto collect = [&](std::size_t begin, std::size_t end,
                     std::vector<const double*>& rows,
                     std::vector<std::uint8_t>& labels) {
    for (std::size_t i = begin; i < end; ++i) {
      const Tensor& stack = score_stacks[i];
      const BinaryMask& fooled = fooled_masks[i];
      require(static_cast<int>(stack.dim(0)) == fooled.h &&
                  static_cast<int>(stack.dim(1)) == fooled.w,
              "score stack / fooled mask shape mismatch");
      require(static_cast<int>(stack.dim(2)) == dims, "inconsistent score dims");
      for (std::size_t j = 0; j < fooled.v.size(); ++j) {
        rows.push_back(stack.data() + j * static_cast<std::size_t>(dims));
        labels.push_back(fooled.v[j] ? 1 : 0);
      }
    }
  };

  std::vector<const double*> rows;
  std::vector<std::uint8_t> labels;
  collect(0, n_fit, rows, labels);
  LogisticFit fit = fit_logistic(rows, labels, dims, iters, lr);

  PixelDetector det;
  det.weights = fit.weights;
  det.bias = fit.bias;
  det.feature_mean = fit.mean;
  det.feature_std = fit.stddev;
  det.trained = true;
  det.target_h = static_cast<int>(score_stacks.front().dim(0));
  det.target_w = static_cast<int>(score_stacks.front().dim(1));

  std::vector<const double*> eval_rows;
  std::vector<std::uint8_t> eval_labels;
  collect(n_fit, n_img, eval_rows, eval_labels);
  bool eval_ok = false, has_pos = false, has_neg = false;
  for (auto y : eval_labels) (y ? has_pos : has_neg) = true;
  eval_ok = has_pos && has_neg;
  const auto& auroc_rows = eval_ok ? eval_rows : rows;
  const auto& auroc_labels = eval_ok ? eval_labels : labels;
  std::vector<double> scores(auroc_rows.size());
  for (std::size_t i = 0; i < auroc_rows.size(); ++i)
    scores[i] = logistic_score(fit, auroc_rows[i], dims);
  det.heldout_auroc = auroc(scores, auroc_labels);
  return det;
}

ImageDetector fit_image_detector(const std::vector<std::vector<double>>& image_score_vecs,
                                 const std::vector<std::uint8_t>& attacked,
                                 int iters, double lr) {
  require(!image_score_vecs.empty() && image_score_vecs.size() == attacked.size(),
          "fit_image_detector: score/label count mismatch");
  const int dims = static_cast<int>(image_score_vecs.front().size());
  const std::size_t n = image_score_vecs.size();
  std::size_t n_fit =
      std::clamp<std::size_t>(std::llround(0.8 * static_cast<double>(n)), 1, n);

  std::vector<const double*> rows;
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < n_fit; ++i) {
    rows.push_back(image_score_vecs[i].data());
    labels.push_back(attacked[i]);
  }
  LogisticFit fit = fit_logistic(rows, labels, dims, iters, lr);

  ImageDetector det;
  det.weights = fit.weights;
  det.bias = fit.bias;
  det.feature_mean = fit.mean;
  det.feature_std = fit.stddev;
  det.trained = true;

  std::vector<double> scores;
  std::vector<std::uint8_t> eval_labels;
  bool has_pos = false, has_neg = false;
  for (std::size_t i = n_fit; i < n; ++i) {
    scores.push_back(logistic_score(fit, image_score_vecs[i].data(), dims));
    eval_labels.push_back(attacked[i]);
    (attacked[i] ? has_pos : has_neg) = true;
  }
  if (!(has_pos && has_neg)) {
    scores.clear();
    eval_labels.clear();
    for (std::size_t i = 0; i < n_fit; ++i) {
      scores.push_back(logistic_score(fit, image_score_vecs[i].data(), dims));
      eval_labels.push_back(attacked[i]);
    }
  }
  det.heldout_auroc = auroc(scores, eval_labels);
  return det;
}

DetectionResult detect(const Tensor& image, const Model& model,
                       const GaussianProfile& profile, const PixelDetector& pixel_detector,
                       const ImageDetector& image_detector) {
  require(pixel_detector.trained && image_detector.trained,
          "detect: detectors are not trained");
  FeatureStack features = extract_features(model, image);
  require(static_cast<int>(pixel_detector.weights.size()) ==
              static_cast<int>(features.layers.size()),
          "detect: detector layer count does not match the model");
  auto maps = pixel_scores(features, profile);
  const int h = static_cast<int>(image.dim(0));
  const int w = static_cast<int>(image.dim(1));
  Tensor stack = resize_scores(maps, h, w);
  const int dims = static_cast<int>(stack.dim(2));

  LogisticFit fit;
  fit.weights = pixel_detector.weights;
  fit.bias = pixel_detector.bias;
  fit.mean = pixel_detector.feature_mean;
  fit.stddev = pixel_detector.feature_std;

  DetectionResult result;
  result.pixel_scores = Grid<double>(h, w);
  for (std::size_t j = 0; j < result.pixel_scores.v.size(); ++j)
    result.pixel_scores.v[j] =
        logistic_score(fit, stack.data() + j * static_cast<std::size_t>(dims), dims);

  auto sums = image_scores(maps);
  LogisticFit ifit;
  ifit.weights = image_detector.weights;
  ifit.bias = image_detector.bias;
  ifit.mean = image_detector.feature_mean;
  ifit.stddev = image_detector.feature_std;
  result.image_score = logistic_score(ifit, sums.data(), static_cast<int>(sums.size()));
  return result;
}

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  require(scores.size() == labels.size() && !scores.empty(),
          "auroc: size mismatch or empty input");
  std::size_t n_pos = 0;
  for (auto y : labels) n_pos += (y != 0);
  std::size_t n_neg = labels.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, "auroc: both label values must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // midranks; U statistic stays exact in doubles (counts and halves)
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) pos_rank_sum += midrank;
    i = j;
  }
  double u = pos_rank_sum -
             0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

void GaussianProfile::save(const std::filesystem::path& path) const {
  json layers_json = json::array();
  Checkpoint ck;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    layers_json.push_back({{"name", layer.name},
                           {"channels", layer.channels},
                           {"observed", layer.observed}});
    std::string prefix = "layer_" + std::to_string(l);
    Tensor means({static_cast<std::size_t>(num_classes),
                  static_cast<std::size_t>(layer.channels)});
    for (int cls = 0; cls < num_classes; ++cls)
      for (int c = 0; c < layer.channels; ++c)
        means[static_cast<std::size_t>(cls) * layer.channels + c] =
            layer.means[cls][c];
    ck.tensors.emplace_back(prefix + "_means", means);
    ck.tensors.emplace_back(prefix + "_cov", layer.covariance);
    ck.tensors.emplace_back(prefix + "_chol", layer.chol_lower);
  }
  json manifest{{"type", "segattack_profile"},
                {"version", kVersion},
                {"num_classes", num_classes},
                {"shrinkage", shrinkage},
                {"layers", layers_json}};
  ck.manifest_json = manifest.dump(2);
  ck.save(path);
}

GaussianProfile GaussianProfile::load(const std::filesystem::path& path) {
  Checkpoint ck = Checkpoint::load(path);
  json manifest = json::parse(ck.manifest_json);
  require(manifest.at("type").get<std::string>() == "segattack_profile",
          "not a profile checkpoint: " + path.string());
  GaussianProfile profile;
  profile.num_classes = manifest.at("num_classes").get<int>();
  profile.shrinkage = manifest.at("shrinkage").get<double>();
  std::size_t l = 0;
  for (const auto& lj : manifest.at("layers")) {
    Layer layer;
    layer.name = lj.at("name").get<std::string>();
    layer.channels = lj.at("channels").get<int>();
    layer.observed = lj.at("observed").get<std::vector<std::uint8_t>>();
    std::string prefix = "layer_" + std::to_string(l);
    const Tensor& means = ck.tensor(prefix + "_means");
    layer.means.assign(profile.num_classes,
                       Tensor({static_cast<std::size_t>(layer.channels)}));
    for (int cls = 0; cls < profile.num_classes; ++cls)
      for (int c = 0; c < layer.channels; ++c)
        layer.means[cls][c] =
            means[static_cast<std::size_t>(cls) * layer.channels + c];
    layer.covariance = ck.tensor(prefix + "_cov");
    layer.chol_lower = ck.tensor(prefix + "_chol");
    profile.layers.push_back(std::move(layer));
    ++l;
  }
  return profile;
}

namespace {

json detector_to_json(const std::vector<double>& w, double bias,
                      const std::vector<double>& mean, const std::vector<double>& stddev,
                      double auroc_value) {
  return json{{"weights", w},
              {"bias", bias},
              {"feature_mean", mean},
              {"feature_std", stddev},
              {"heldout_auroc", auroc_value}};
}

}  // namespace

void save_pixel_detector(const std::filesystem::path& path, const PixelDetector& d) {
  json j = detector_to_json(d.weights, d.bias, d.feature_mean, d.feature_std,
                            d.heldout_auroc);
  j["type"] = "segattack_pixel_detector";
  j["target_h"] = d.target_h;
  j["target_w"] = d.target_w;
  std::ofstream out(path);
  require(out.good(), "cannot write detector: " + path.string());
  out << j.dump(2);
}

PixelDetector load_pixel_detector(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open detector: " + path.string());
  json j = json::parse(in);
  require(j.at("type").get<std::string>() == "segattack_pixel_detector",
          "not a pixel detector file: " + path.string());
  PixelDetector d;
  d.weights = j.at("weights").get<std::vector<double>>();
  d.bias = j.at("bias").get<double>();
  d.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  d.feature_std = j.at("feature_std").get<std::vector<double>>();
  d.heldout_auroc = j.at("heldout_auroc").get<double>();
  d.target_h = j.at("target_h").get<int>();
  d.target_w = j.at("target_w").get<int>();
  d.trained = true;
  return d;
}

void save_image_detector(const std::filesystem::path& path, const ImageDetector& d) {
  json j = detector_to_json(d.weights, d.bias, d.feature_mean, d.feature_std,
                            d.heldout_auroc);
  j["type"] = "segattack_image_detector";
  std::ofstream out(path);
  require(out.good(), "cannot write detector: " + path.string());
  out << j.dump(2);
}

ImageDetector load_image_detector(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open detector: " + path.string());
  json j = json::parse(in);
  require(j.at("type").get<std::string>() == "segattack_image_detector",
          "not an image detector file: " + path.string());
  ImageDetector d;
  d.weights = j.at("weights").get<std::vector<double>>();
  d.bias = j.at("bias").get<double>();
  d.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  d.feature_std = j.at("feature_std").get<std::vector<double>>();
  d.heldout_auroc = j.at("heldout_auroc").get<double>();
  d.trained = true;
  return d;
}

}  // namespace segattack
