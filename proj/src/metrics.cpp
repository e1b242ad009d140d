#include "segattack/metrics.hpp"

#include <cmath>
#include <vector>

namespace segattack {

double miou(const LabelMap& pred_a, const LabelMap& pred_b, const BinaryMask& region,
            int num_classes) {
  require(pred_a.same_shape(pred_b) && pred_a.h == region.h && pred_a.w == region.w,
          "miou: shape mismatch");
  require(mask_count(region) > 0, "miou: empty region");
  std::vector<std::size_t> inter(num_classes, 0), in_a(num_classes, 0),
      in_b(num_classes, 0);
  for (std::size_t i = 0; i < region.v.size(); ++i) {
    if (!region.v[i]) continue;
    int a = pred_a.v[i], b = pred_b.v[i];
    require(a >= 0 && a < num_classes && b >= 0 && b < num_classes,
            "miou: label out of range");
    ++in_a[a];
    ++in_b[b];
    if (a == b) ++inter[a];
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t uni = in_a[c] + in_b[c] - inter[c];
    if (uni == 0) continue;  // class absent from both maps within the region
    sum += static_cast<double>(inter[c]) / static_cast<double>(uni);
    ++present;
  }
  return present == 0 ? 0.0 : sum / present;
}

double asr_targeted(const LabelMap& pred_adv, const TargetMap& target,
                    const BinaryMask& fooling) {
  require(pred_adv.h == fooling.h && pred_adv.w == fooling.w,
          "asr_targeted: shape mismatch");
  std::size_t total = 0, hits = 0;
  for (std::size_t i = 0; i < fooling.v.size(); ++i) {
    if (!fooling.v[i]) continue;
    require(target.valid.v[i], "asr_targeted: target undefined on a fooling pixel");
    ++total;
    hits += (pred_adv.v[i] == target.grid.v[i]);
  }
  require(total > 0, "asr_targeted: empty fooling region");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double asr_untargeted(const LabelMap& pred_adv, const LabelMap& pred_clean,
                      const BinaryMask& fooling) {
  require(pred_adv.same_shape(pred_clean), "asr_untargeted: shape mismatch");
  std::size_t total = 0, changed = 0;
  for (std::size_t i = 0; i < fooling.v.size(); ++i) {
    if (!fooling.v[i]) continue;
    ++total;
    changed += (pred_adv.v[i] != pred_clean.v[i]);
  }
  require(total > 0, "asr_untargeted: empty fooling region");
  return static_cast<double>(changed) / static_cast<double>(total);
}

double preserved_rate(const LabelMap& pred_adv, const LabelMap& pred_clean,
                      const BinaryMask& fooling) {
  require(pred_adv.same_shape(pred_clean), "preserved_rate: shape mismatch");
  std::size_t total = 0, kept = 0;
  for (std::size_t i = 0; i < fooling.v.size(); ++i) {
    if (fooling.v[i]) continue;
    ++total;
    kept += (pred_adv.v[i] == pred_clean.v[i]);
  }
  require(total > 0, "preserved_rate: empty preserved region");
  return static_cast<double>(kept) / static_cast<double>(total);
}

Perceptibility perceptibility(const Tensor& delta) {
  Perceptibility p;
  double sq = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    double a = std::abs(delta[i]);
    if (a > p.linf) p.linf = a;
    sq += delta[i] * delta[i];
  }
  p.l2 = std::sqrt(sq);
  return p;
}

double sparsity(const Tensor& delta, const BinaryMask& parent_mask) {
  require(delta.rank() == 3 && static_cast<int>(delta.dim(0)) == parent_mask.h &&
              static_cast<int>(delta.dim(1)) == parent_mask.w,
          "sparsity: shape mismatch");
  std::size_t parent = mask_count(parent_mask);
  require(parent > 0, "sparsity: empty parent mask");
  const std::size_t channels = delta.dim(2);
  std::size_t perturbed = 0;
  for (int y = 0; y < parent_mask.h; ++y) {
    for (int x = 0; x < parent_mask.w; ++x) {
      if (!parent_mask.at(y, x)) continue;
      bool any = false;
      for (std::size_t c = 0; c < channels; ++c)
        any |= (delta.at(y, x, c) != 0.0);
      perturbed += any;
    }
  }
  return 1.0 - static_cast<double>(perturbed) / static_cast<double>(parent);
}

}  // namespace segattack
