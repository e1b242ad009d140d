#include <doctest.h>

#include "oracles.hpp"
#include "segattack/metrics.hpp"
#include "segattack/rng.hpp"

using namespace segattack;

namespace {

LabelMap random_labels(int h, int w, int k, std::uint64_t seed) {
  Rng rng(seed, 0);
  LabelMap m(h, w);
  for (auto& v : m.v) v = static_cast<std::int32_t>(rng.uniform_int(0, k - 1));
  return m;
}

BinaryMask random_mask(int h, int w, double density, std::uint64_t seed) {
  Rng rng(seed, 1);
  BinaryMask m(h, w);
  for (auto& v : m.v) v = rng.next_double() < density ? 1 : 0;
  return m;
}

Tensor random_delta(int h, int w, std::uint64_t seed, double zero_prob) {
  Rng rng(seed, 2);
  Tensor t({static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3});
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = rng.next_double() < zero_prob ? 0.0 : rng.uniform(-0.5, 0.5);
  return t;
}

constexpr int kTrials = 100;

}  // namespace

TEST_CASE("miou trivial values") {
  LabelMap a = random_labels(8, 8, 4, 1);
  BinaryMask region(8, 8, 1);
  CHECK(miou(a, a, region, 4) == 1.0);

  LabelMap b(8, 8, 0);
  LabelMap c(8, 8, 1);
  CHECK(miou(b, c, region, 4) == 0.0);

  BinaryMask empty(8, 8);
  CHECK_THROWS_AS(miou(a, a, empty, 4), Error);
}

TEST_CASE("miou is symmetric and matches the confusion-matrix oracle") {
  for (std::uint64_t s = 0; s < kTrials; ++s) {
    LabelMap a = random_labels(8, 8, 5, 2 * s);
    LabelMap b = random_labels(8, 8, 5, 2 * s + 1);
    BinaryMask region = random_mask(8, 8, 0.7, s);
    if (mask_count(region) == 0) region.at(0, 0) = 1;
    double fast = miou(a, b, region, 5);
    CHECK(fast == oracle::miou(a, b, region, 5));
    CHECK(fast == miou(b, a, region, 5));
  }
}

TEST_CASE("asr_targeted counts hits") {
  LabelMap pred(2, 2, 1);
  TargetMap target;
  target.grid = LabelMap(2, 2, 1);
  target.valid = BinaryMask(2, 2, 1);
  BinaryMask f(2, 2, 1);
  CHECK(asr_targeted(pred, target, f) == 1.0);

  pred.at(0, 0) = 0;
  CHECK(asr_targeted(pred, target, f) == 0.75);  // 3 of 4 pixels hit

  LabelMap off(2, 2, 2);
  CHECK(asr_targeted(off, target, f) == 0.0);

  BinaryMask empty(2, 2);
  CHECK_THROWS_AS(asr_targeted(pred, target, empty), Error);
}

TEST_CASE("asr_untargeted and preserved_rate match oracles") {
  for (std::uint64_t s = 0; s < kTrials; ++s) {
    LabelMap clean = random_labels(8, 8, 4, 100 + 2 * s);
    LabelMap adv = random_labels(8, 8, 4, 101 + 2 * s);
    BinaryMask f = random_mask(8, 8, 0.4, 50 + s);
    if (mask_count(f) == 0) f.at(0, 0) = 1;
    if (mask_count(f) == f.v.size()) f.at(7, 7) = 0;
    CHECK(asr_untargeted(adv, clean, f) == oracle::asr_untargeted(adv, clean, f));
    CHECK(preserved_rate(adv, clean, f) == oracle::preserved_rate(adv, clean, f));
    CHECK(asr_untargeted(clean, clean, f) == 0.0);
    CHECK(preserved_rate(clean, clean, f) == 1.0);
  }
}

TEST_CASE("preserved_rate trivial flips") {
  LabelMap clean = random_labels(4, 4, 3, 9);
  LabelMap flipped(4, 4);
  for (std::size_t i = 0; i < clean.v.size(); ++i)
    flipped.v[i] = (clean.v[i] + 1) % 3;
  BinaryMask f(4, 4);
  f.at(0, 0) = 1;
  CHECK(preserved_rate(flipped, clean, f) == 0.0);
  BinaryMask all(4, 4, 1);
  CHECK_THROWS_AS(preserved_rate(flipped, clean, all), Error);
}

TEST_CASE("perceptibility trivial and random") {
  Tensor zero({4, 4, 3});
  auto p = perceptibility(zero);
  CHECK(p.linf == 0.0);
  CHECK(p.l2 == 0.0);

  Tensor single({4, 4, 3});
  single[5] = 0.3;
  p = perceptibility(single);
  CHECK(p.linf == 0.3);
  CHECK(p.l2 == doctest::Approx(0.3));

  for (std::uint64_t s = 0; s < kTrials; ++s) {
    Tensor d = random_delta(8, 8, s, 0.2);
    auto [linf, l2] = oracle::perceptibility(d);
    auto got = perceptibility(d);
    CHECK(got.linf == linf);
    CHECK(got.l2 == l2);
  }
}

TEST_CASE("sparsity trivial and random") {
  BinaryMask parent(8, 8, 1);
  Tensor zero({8, 8, 3});
  CHECK(sparsity(zero, parent) == 1.0);

  Tensor dense({8, 8, 3});
  dense.fill(0.1);
  CHECK(sparsity(dense, parent) == 0.0);

  // exactly half the parent perturbed
  Tensor half({8, 8, 3});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) half.at(y, x, 0) = 0.2;
  CHECK(sparsity(half, parent) == 0.5);

  for (std::uint64_t s = 0; s < kTrials; ++s) {
    BinaryMask p = random_mask(8, 8, 0.6, 200 + s);
    if (mask_count(p) == 0) p.at(0, 0) = 1;
    Tensor d = random_delta(8, 8, 300 + s, 0.5);
    CHECK(sparsity(d, p) == oracle::sparsity(d, p));
  }

  BinaryMask empty(8, 8);
  CHECK_THROWS_AS(sparsity(zero, empty), Error);
}
