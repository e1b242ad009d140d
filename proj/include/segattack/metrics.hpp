#pragma once

#include <optional>
#include <utility>

#include "segattack/masks.hpp"
#include "segattack/tensor.hpp"

namespace segattack {

struct Perceptibility {
  double linf = 0.0;
  double l2 = 0.0;
};

struct RegionMetrics {
  double miou_u = 0.0;
  std::optional<double> asr_t;
  double asr_u = 0.0;
  std::optional<double> preserved_rate;  // unset when F covers the image
  Perceptibility perceptibility;
  double sparsity = 0.0;
};

/// Mean IoU between two label maps over the region, averaged over the
/// classes present in either map within the region.
double miou(const LabelMap& pred_a, const LabelMap& pred_b,
            const BinaryMask& region, int num_classes);

/// Fraction of F-pixels predicted as the target label.
double asr_targeted(const LabelMap& pred_adv, const TargetMap& target,
                    const BinaryMask& fooling);

/// Fraction of F-pixels whose label changed from the clean prediction.
double asr_untargeted(const LabelMap& pred_adv, const LabelMap& pred_clean,
                      const BinaryMask& fooling);

/// Fraction of F=0 pixels whose label is unchanged.
double preserved_rate(const LabelMap& pred_adv, const LabelMap& pred_clean,
                      const BinaryMask& fooling);

/// (max |entry|, Euclidean norm) over all entries of delta.
Perceptibility perceptibility(const Tensor& delta);

/// 1 - (parent pixels perturbed in any channel) / |parent|.
double sparsity(const Tensor& delta, const BinaryMask& parent_mask);

}  // namespace segattack
