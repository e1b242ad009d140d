#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "segattack/detection.hpp"
#include "segattack/rng.hpp"

using namespace segattack;

namespace {

FeatureStack make_stack(const std::vector<std::string>& names,
                        const std::vector<Tensor>& maps) {
  FeatureStack fs;
  for (std::size_t i = 0; i < names.size(); ++i) fs.layers.emplace_back(names[i], maps[i]);
  return fs;
}

// profile with hand-set means and identity covariance
GaussianProfile identity_profile(int num_classes, int channels,
                                 const std::vector<Tensor>& means) {
  GaussianProfile p;
  p.num_classes = num_classes;
  p.shrinkage = 0.0;
  GaussianProfile::Layer layer;
  layer.name = "block_1";
  layer.channels = channels;
  layer.means = means;
  layer.observed.assign(num_classes, 1);
  layer.covariance = Tensor({static_cast<std::size_t>(channels),
                             static_cast<std::size_t>(channels)});
  layer.chol_lower = layer.covariance;
  for (int i = 0; i < channels; ++i) {
    layer.covariance[static_cast<std::size_t>(i) * channels + i] = 1.0;
    layer.chol_lower[static_cast<std::size_t>(i) * channels + i] = 1.0;
  }
  p.layers.push_back(layer);
  return p;
}

}  // namespace

TEST_CASE("profile on constant per-class features reduces to shrinkage") {
  // two images, 1x2 pixels, class 0 and class 1, constant features per class
  Tensor map({1, 2, 2});
  map.at(0, 0, 0) = 1.0;
  map.at(0, 0, 1) = 2.0;
  map.at(0, 1, 0) = -1.0;
  map.at(0, 1, 1) = 0.5;
  LabelMap labels(1, 2);
  labels.at(0, 0) = 0;
  labels.at(0, 1) = 1;

  std::vector<FeatureStack> stacks = {make_stack({"block_1"}, {map}),
                                      make_stack({"block_1"}, {map})};
  std::vector<LabelMap> lbls = {labels, labels};
  GaussianProfile p = fit_profile_from_features(stacks, lbls, 2, 1e-3);

  REQUIRE(p.layers.size() == 1);
  CHECK(p.layers[0].means[0][0] == 1.0);
  CHECK(p.layers[0].means[0][1] == 2.0);
  CHECK(p.layers[0].means[1][0] == -1.0);
  // zero scatter: covariance is the identity-scale shrinkage term alone
  CHECK(p.layers[0].covariance[0] == doctest::Approx(1e-3));
  CHECK(p.layers[0].covariance[3] == doctest::Approx(1e-3));
  CHECK(p.layers[0].covariance[1] == 0.0);
}

TEST_CASE("profile recovers known Gaussian means") {
  const int n_images = 200;
  const double sigma = 0.5;
  Rng rng(404, 0);
  std::vector<Tensor> mu = {Tensor({3}), Tensor({3})};
  mu[0][0] = 1.0;
  mu[0][1] = -2.0;
  mu[0][2] = 0.5;
  mu[1][0] = -1.0;
  mu[1][1] = 3.0;
  mu[1][2] = 2.0;

  std::vector<FeatureStack> stacks;
  std::vector<LabelMap> labels;
  for (int i = 0; i < n_images; ++i) {
    Tensor map({1, 2, 3});
    LabelMap lbl(1, 2);
    lbl.at(0, 0) = 0;
    lbl.at(0, 1) = 1;
    for (int c = 0; c < 3; ++c) {
      map.at(0, 0, c) = mu[0][c] + sigma * rng.normal();
      map.at(0, 1, c) = mu[1][c] + sigma * rng.normal();
    }
    stacks.push_back(make_stack({"block_1"}, {map}));
    labels.push_back(lbl);
  }
  GaussianProfile p = fit_profile_from_features(stacks, labels, 2, 1e-3);
  const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(n_images));
  for (int cls = 0; cls < 2; ++cls)
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(p.layers[0].means[cls][c] - mu[cls][c]) <= bound);
}

TEST_CASE("unobserved classes are flagged and excluded") {
  Tensor map({1, 2, 2});
  map.fill(0.3);
  LabelMap labels(1, 2, 0);  // only class 0 present
  std::vector<FeatureStack> stacks = {make_stack({"block_1"}, {map}),
                                      make_stack({"block_1"}, {map})};
  std::vector<LabelMap> lbls = {labels, labels};
  GaussianProfile p = fit_profile_from_features(stacks, lbls, 3, 1e-3);
  CHECK(p.layers[0].observed[0] == 1);
  CHECK(p.layers[0].observed[1] == 0);
  CHECK(p.layers[0].observed[2] == 0);

  // the max in the confidence score skips unobserved classes
  auto maps = pixel_scores(make_stack({"block_1"}, {map}), p);
  CHECK(maps[0].at(0, 0) == 0.0);  // exactly at the only observed mean
}

TEST_CASE("profile fitting requires at least two images") {
  Tensor map({1, 1, 2});
  LabelMap labels(1, 1, 0);
  std::vector<FeatureStack> stacks = {make_stack({"block_1"}, {map})};
  std::vector<LabelMap> lbls = {labels};
  CHECK_THROWS_AS(fit_profile_from_features(stacks, lbls, 2, 1e-3), Error);
}

TEST_CASE("pixel scores: zero at a mean, -r^2 under identity covariance") {
  std::vector<Tensor> means = {Tensor({2}), Tensor({2})};
  means[0][0] = 1.0;
  means[0][1] = 0.0;
  means[1][0] = -3.0;
  means[1][1] = 4.0;
  GaussianProfile p = identity_profile(2, 2, means);

  Tensor map({1, 3, 2});
  map.at(0, 0, 0) = 1.0;  // exactly mean 0
  map.at(0, 0, 1) = 0.0;
  map.at(0, 1, 0) = 1.0 + 0.6;  // distance 1 from mean 0: offset (0.6, 0.8)
  map.at(0, 1, 1) = 0.8;
  map.at(0, 2, 0) = -3.0;  // distance 2 from mean 1
  map.at(0, 2, 1) = 6.0;
  auto maps = pixel_scores(make_stack({"block_1"}, {map}), p);
  CHECK(maps[0].at(0, 0) == 0.0);
  CHECK(maps[0].at(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(maps[0].at(0, 2) == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("pixel scores match the explicit quadratic-form oracle") {
  // random SPD covariance, random means, explicit inverse on the oracle side
  Rng rng(777, 0);
  const int ch = 4, k = 3;
  Eigen::MatrixXd a(ch, ch);
  for (int i = 0; i < ch; ++i)
    for (int j = 0; j < ch; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd cov = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(ch, ch);
  Eigen::MatrixXd cov_inv = cov.fullPivLu().inverse();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::MatrixXd lower = llt.matrixL();

  GaussianProfile p;
  p.num_classes = k;
  GaussianProfile::Layer layer;
  layer.name = "block_1";
  layer.channels = ch;
  layer.observed.assign(k, 1);
  layer.covariance = Tensor({ch, ch});
  layer.chol_lower = Tensor({ch, ch});
  for (int i = 0; i < ch; ++i)
    for (int j = 0; j < ch; ++j) {
      layer.covariance[static_cast<std::size_t>(i) * ch + j] = cov(i, j);
      layer.chol_lower[static_cast<std::size_t>(i) * ch + j] = lower(i, j);
    }
  std::vector<Eigen::VectorXd> mu(k);
  for (int cls = 0; cls < k; ++cls) {
    Tensor m({ch});
    mu[cls] = Eigen::VectorXd(ch);
    for (int c = 0; c < ch; ++c) {
      mu[cls][c] = rng.uniform(-2.0, 2.0);
      m[c] = mu[cls][c];
    }
    layer.means.push_back(m);
  }
  p.layers.push_back(layer);

  Tensor map({2, 3, ch});
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = rng.uniform(-3.0, 3.0);
  auto maps = pixel_scores(make_stack({"block_1"}, {map}), p);

  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x) {
      double best = -std::numeric_limits<double>::infinity();
      Eigen::VectorXd feat(ch);
      for (int c = 0; c < ch; ++c) feat[c] = map.at(y, x, c);
      for (int cls = 0; cls < k; ++cls) {
        Eigen::VectorXd d = feat - mu[cls];
        best = std::max(best, -(d.transpose() * cov_inv * d)(0));
      }
      CHECK(maps[0].at(y, x) == doctest::Approx(best).epsilon(1e-9));
      CHECK(maps[0].at(y, x) <= 0.0);
    }
}

TEST_CASE("isotropic covariance inflation scales scores by 1/c") {
  Rng rng(888, 0);
  const int ch = 3;
  std::vector<Tensor> means = {Tensor({ch}), Tensor({ch})};
  for (int c = 0; c < ch; ++c) {
    means[0][c] = rng.uniform(-1.0, 1.0);
    means[1][c] = rng.uniform(-1.0, 1.0);
  }
  GaussianProfile p = identity_profile(2, ch, means);

  const double c_factor = 4.0;
  GaussianProfile inflated = p;
  for (std::size_t i = 0; i < inflated.layers[0].covariance.size(); ++i) {
    inflated.layers[0].covariance[i] *= c_factor;
    inflated.layers[0].chol_lower[i] *= std::sqrt(c_factor);
  }

  Tensor map({2, 2, ch});
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = rng.uniform(-2.0, 2.0);
  auto base = pixel_scores(make_stack({"block_1"}, {map}), p);
  auto scaled = pixel_scores(make_stack({"block_1"}, {map}), inflated);
  for (std::size_t i = 0; i < base[0].v.size(); ++i)
    CHECK(scaled[0].v[i] == doctest::Approx(base[0].v[i] / c_factor).epsilon(1e-9));
}

TEST_CASE("resize_scores identity, constant and hand-computed bilinear") {
  Grid<double> same(3, 3);
  for (std::size_t i = 0; i < same.v.size(); ++i) same.v[i] = static_cast<double>(i);
  Tensor out = resize_scores({same}, 3, 3);
  for (std::size_t i = 0; i < same.v.size(); ++i) CHECK(out[i] == same.v[i]);

  Grid<double> constant(2, 2);
  constant.v = {7.0, 7.0, 7.0, 7.0};
  Tensor up = resize_scores({constant}, 5, 5);
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(7.0));

  Grid<double> corners(2, 2);
  corners.v = {1.0, 2.0, 3.0, 4.0};  // a b / c d
  Tensor four = resize_scores({corners}, 4, 4);
  CHECK(four.at(0, 0, 0) == 1.0);
  CHECK(four.at(0, 3, 0) == 2.0);
  CHECK(four.at(3, 0, 0) == 3.0);
  CHECK(four.at(3, 3, 0) == 4.0);
  // interior (1,1) sits at source (1/3, 1/3): (4a + 2b + 2c + d) / 9
  CHECK(four.at(1, 1, 0) == doctest::Approx((4.0 * 1 + 2 * 2 + 2 * 3 + 4) / 9.0));
}

TEST_CASE("image_scores sums spatially and matches brute force") {
  Grid<double> zero(3, 4);
  CHECK(image_scores({zero})[0] == 0.0);

  Grid<double> constant(3, 4);
  for (auto& v : constant.v) v = -2.5;
  CHECK(image_scores({constant})[0] == doctest::Approx(-2.5 * 12));

  Rng rng(999, 0);
  Grid<double> random_map(5, 6);
  for (auto& v : random_map.v) v = rng.uniform(-5.0, 0.0);
  double expect = 0.0;
  for (double v : random_map.v) expect += v;
  CHECK(image_scores({random_map})[0] == expect);
}

TEST_CASE("pixel detector separates linearly separable scores") {
  // fooled pixels have layer-0 score below -10
  Rng rng(1234, 0);
  std::vector<Tensor> stacks;
  std::vector<BinaryMask> fooled;
  for (int i = 0; i < 10; ++i) {
    Tensor stack({8, 8, 2});
    BinaryMask mask(8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        bool is_fooled = (i % 2 == 0) && rng.next_double() < 0.3;
        stack.at(y, x, 0) =
            is_fooled ? -12.0 - rng.next_double() : -rng.next_double();
        stack.at(y, x, 1) = -rng.next_double();
        mask.at(y, x) = is_fooled ? 1 : 0;
      }
    stacks.push_back(stack);
    fooled.push_back(mask);
  }
  PixelDetector det = fit_pixel_detector(stacks, fooled);
  CHECK(det.trained);
  CHECK(det.heldout_auroc >= 0.99);
}

TEST_CASE("pixel detector rejects all-clean labels") {
  std::vector<Tensor> stacks = {Tensor({4, 4, 2}), Tensor({4, 4, 2})};
  std::vector<BinaryMask> fooled = {BinaryMask(4, 4), BinaryMask(4, 4)};
  CHECK_THROWS_AS(fit_pixel_detector(stacks, fooled), Error);
}

TEST_CASE("pixel detector fit is independent of pixel order") {
  auto build = [&](bool permute) {
    std::vector<Tensor> stacks;
    std::vector<BinaryMask> fooled;
    Rng local(555, 1);
    for (int i = 0; i < 5; ++i) {
      const int n = 16;
      std::vector<std::pair<std::array<double, 2>, std::uint8_t>> rows;
      for (int j = 0; j < n; ++j) {
        bool pos = (i % 2 == 0) && (j % 3 == 0);
        rows.push_back({{local.uniform(-5.0, 0.0) - (pos ? 8.0 : 0.0),
                         local.uniform(-2.0, 0.0)},
                        static_cast<std::uint8_t>(pos ? 1 : 0)});
      }
      if (permute)
        std::reverse(rows.begin(), rows.end());  // same multiset, new order
      Tensor stack({4, 4, 2});
      BinaryMask mask(4, 4);
      for (int j = 0; j < n; ++j) {
        stack[static_cast<std::size_t>(j) * 2] = rows[j].first[0];
        stack[static_cast<std::size_t>(j) * 2 + 1] = rows[j].first[1];
        mask.v[j] = rows[j].second;
      }
      stacks.push_back(stack);
      fooled.push_back(mask);
    }
    return fit_pixel_detector(stacks, fooled, 50, 0.5);
  };
  PixelDetector a = build(false);
  PixelDetector b = build(true);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

TEST_CASE("auroc trivial values and tie handling") {
  CHECK(auroc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(auroc({0.5, 0.6}, {1, 1}), Error);
}

TEST_CASE("auroc matches the pairwise oracle exactly on random instances") {
  Rng rng(2468, 0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(20);
    std::vector<std::uint8_t> labels(20);
    bool pos = false, neg = false;
    for (int i = 0; i < 20; ++i) {
      // coarse grid of score values forces plenty of ties
      scores[i] = static_cast<double>(rng.uniform_int(0, 5)) / 5.0;
      labels[i] = rng.next_double() < 0.4 ? 1 : 0;
      (labels[i] ? pos : neg) = true;
    }
    if (!pos) labels[0] = 1;
    if (!neg) labels[1] = 0;
    CHECK(auroc(scores, labels) == oracle::auroc(scores, labels));
  }
}

TEST_CASE("auroc is invariant under strictly monotone transforms") {
  Rng rng(1357, 0);
  std::vector<double> scores(30);
  std::vector<std::uint8_t> labels(30);
  for (int i = 0; i < 30; ++i) {
    scores[i] = rng.uniform(-4.0, 4.0);
    labels[i] = rng.next_double() < 0.5 ? 1 : 0;
  }
  labels[0] = 1;
  labels[1] = 0;
  std::vector<double> warped(30);
  for (int i = 0; i < 30; ++i) warped[i] = std::exp(0.5 * scores[i]) + 3.0;
  CHECK(auroc(scores, labels) == auroc(warped, labels));
}

TEST_CASE("profile and detector checkpoints round trip") {
  auto dir = std::filesystem::temp_directory_path() / "segattack_detect_ckpt";
  std::filesystem::create_directories(dir);

  std::vector<Tensor> means = {Tensor({2}), Tensor({2})};
  means[0][0] = 0.25;
  means[1][1] = -1.5;
  GaussianProfile p = identity_profile(2, 2, means);
  p.save(dir / "profile.ckpt");
  GaussianProfile back = GaussianProfile::load(dir / "profile.ckpt");
  CHECK(back.num_classes == 2);
  CHECK(back.layers[0].means[0] == p.layers[0].means[0]);
  CHECK(back.layers[0].covariance == p.layers[0].covariance);
  CHECK(back.layers[0].chol_lower == p.layers[0].chol_lower);

  PixelDetector det;
  det.weights = {0.5, -1.25};
  det.bias = 0.125;
  det.feature_mean = {-3.5, -1.0};
  det.feature_std = {2.0, 1.5};
  det.trained = true;
  det.target_h = 8;
  det.target_w = 8;
  det.heldout_auroc = 0.875;
  save_pixel_detector(dir / "pixel.json", det);
  PixelDetector dback = load_pixel_detector(dir / "pixel.json");
  CHECK(dback.weights == det.weights);
  CHECK(dback.bias == det.bias);
  CHECK(dback.feature_std == det.feature_std);

  ImageDetector idet;
  idet.weights = {1.0, 2.0};
  idet.bias = -0.5;
  idet.feature_mean = {0.0, -10.0};
  idet.feature_std = {1.0, 4.0};
  idet.trained = true;
  save_image_detector(dir / "image.json", idet);
  ImageDetector iback = load_image_detector(dir / "image.json");
  CHECK(iback.weights == idet.weights);
  CHECK(iback.bias == idet.bias);
}
