#include "segattack/masks.hpp"

#include <algorithm>
#include <limits>

namespace segattack {

namespace {

constexpr std::int64_t kFarAway = 4'000'000'000'000LL;  // > any real sq distance

// 1-D squared distance transform (lower envelope of parabolas). Intersection
// abscissae are kept as exact rationals so the envelope is bit-reproducible.
void edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& out) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<std::int64_t> z_num(n + 1), z_den(n + 1);
  int k = 0;
  v[0] = 0;
  z_num[0] = std::numeric_limits<std::int64_t>::min();
  z_den[0] = 1;
  z_num[1] = std::numeric_limits<std::int64_t>::max();
  z_den[1] = 1;

  auto intersect = [&](int q, int p, std::int64_t& num, std::int64_t& den) {
    num = (f[q] + static_cast<std::int64_t>(q) * q) -
          (f[p] + static_cast<std::int64_t>(p) * p);
    den = 2 * (q - p);
  };

  for (int q = 1; q < n; ++q) {
    std::int64_t s_num, s_den;
    intersect(q, v[k], s_num, s_den);
    // s <= z[k]  <=>  s_num * z_den <= z_num * s_den  (dens positive)
    while (k > 0 && s_num * z_den[k] <= z_num[k] * s_den) {
      --k;
      intersect(q, v[k], s_num, s_den);
    }
    ++k;
    v[k] = q;
    z_num[k] = s_num;
    z_den[k] = s_den;
    z_num[k + 1] = std::numeric_limits<std::int64_t>::max();
    z_den[k + 1] = 1;
  }

  k = 0;
  for (int p = 0; p < n; ++p) {
    // advance while z[k+1] < p
    while (z_num[k + 1] != std::numeric_limits<std::int64_t>::max() &&
           z_num[k + 1] < static_cast<std::int64_t>(p) * z_den[k + 1]) {
      ++k;
    }
    std::int64_t d = p - v[k];
    out[p] = d * d + f[v[k]];
    if (out[p] > kFarAway) out[p] = kFarAway;
  }
}

}  // namespace

Grid<std::int64_t> squared_distance_transform(const BinaryMask& sites) {
  const int h = sites.h, w = sites.w;
  Grid<std::int64_t> dist(h, w);

  // pass 1: per column, squared distance along y
  {
    std::vector<std::int64_t> f(h), g(h);
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) f[y] = sites.at(y, x) ? 0 : kFarAway;
      edt_1d(f, g);
      for (int y = 0; y < h; ++y) dist.at(y, x) = g[y];
    }
  }
  // pass 2: per row over the column results
  {
    std::vector<std::int64_t> f(w), g(w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) f[x] = dist.at(y, x);
      edt_1d(f, g);
      for (int x = 0; x < w; ++x) dist.at(y, x) = g[x];
    }
  }
  return dist;
}

BinaryMask class_mask(const LabelMap& labels, const std::set<int>& class_set) {
  require(!class_set.empty(), "class_mask: empty class set");
  BinaryMask m(labels.h, labels.w);
  for (std::size_t i = 0; i < labels.v.size(); ++i)
    m.v[i] = class_set.count(labels.v[i]) ? 1 : 0;
  return m;
}

BinaryMask distance_mask(const LabelMap& labels, const std::set<int>& dynamic_set,
                         double d) {
  require(d >= 0.0, "distance_mask: d must be >= 0");
  BinaryMask sites(labels.h, labels.w);
  bool any_dynamic = false;
  for (std::size_t i = 0; i < labels.v.size(); ++i) {
    sites.v[i] = dynamic_set.count(labels.v[i]) ? 1 : 0;
    any_dynamic |= (sites.v[i] != 0);
  }
  BinaryMask m(labels.h, labels.w);
  if (!any_dynamic || d == 0.0) {
    for (std::size_t i = 0; i < labels.v.size(); ++i) m.v[i] = sites.v[i] ? 0 : 1;
    return m;
  }
  auto sq = squared_distance_transform(sites);
  const double d2 = d * d;
  for (std::size_t i = 0; i < labels.v.size(); ++i)
    m.v[i] = (!sites.v[i] && static_cast<double>(sq.v[i]) >= d2) ? 1 : 0;
  return m;
}

TargetMap nearest_static_target(const LabelMap& labels, const std::set<int>& static_set,
                                const std::set<int>& dynamic_set) {
  const int h = labels.h, w = labels.w;
  std::vector<std::pair<int, int>> statics;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (static_set.count(labels.at(y, x))) statics.emplace_back(y, x);
  require(!statics.empty(), "nearest_static_target: no static pixels");

  TargetMap t;
  t.grid = LabelMap(h, w, -1);
  t.valid = BinaryMask(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!dynamic_set.count(labels.at(y, x))) continue;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      int best_label = -1;
      for (const auto& [sy, sx] : statics) {  // row-major order; ties keep first
        std::int64_t dy = sy - y, dx = sx - x;
        std::int64_t d2 = dy * dy + dx * dx;
        if (d2 < best) {
          best = d2;
          best_label = labels.at(sy, sx);
        }
      }
      t.grid.at(y, x) = best_label;
      t.valid.at(y, x) = 1;
    }
  }
  return t;
}

PatchGrid patch_partition(const BinaryMask& mask, int h, int w) {
  require(h >= 1 && w >= 1, "patch_partition: patch size must be >= 1");
  PatchGrid grid;
  grid.patch_h = h;
  grid.patch_w = w;
  grid.parent = mask;
  for (int ty = 0; ty < mask.h; ty += h) {
    for (int tx = 0; tx < mask.w; tx += w) {
      BinaryMask patch(mask.h, mask.w);
      bool any = false;
      for (int y = ty; y < std::min(ty + h, mask.h); ++y) {
        for (int x = tx; x < std::min(tx + w, mask.w); ++x) {
          if (mask.at(y, x)) {
            patch.at(y, x) = 1;
            any = true;
          }
        }
      }
      if (any) grid.patches.push_back(std::move(patch));
    }
  }
  return grid;
}

BinaryMask center_patch_mask(int height, int width, int h, int w) {
  require(h >= 1 && w >= 1 && h <= height && w <= width,
          "center_patch_mask: patch larger than image");
  BinaryMask m(height, width);
  int y0 = (height - h) / 2;
  int x0 = (width - w) / 2;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m.at(y, x) = 1;
  return m;
}

bool validate_indirect(const BinaryMask& m, const BinaryMask& f) {
  require(m.same_shape(f), "validate_indirect: shape mismatch");
  for (std::size_t i = 0; i < m.v.size(); ++i)
    if (m.v[i] && f.v[i]) return false;
  return true;
}

}  // namespace segattack
