#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "segattack/tensor.hpp"

namespace segattack {

/// Partition of a parent mask into disjoint h x w tiles intersected with
/// the mask; empty tiles are dropped. Sum of patches equals the parent.
struct PatchGrid {
  std::vector<BinaryMask> patches;
  int patch_h = 0;
  int patch_w = 0;
  BinaryMask parent;
};

/// Per-pixel target labels, defined exactly where `valid` is 1.
struct TargetMap {
  LabelMap grid;
  BinaryMask valid;
};

/// mask_j = 1 iff labels_j is in class_set. Empty class_set is an error.
BinaryMask class_mask(const LabelMap& labels, const std::set<int>& class_set);

/// mask_j = 1 iff labels_j is static (not in dynamic_set) and the exact
/// Euclidean distance from j to the nearest dynamic pixel is >= d.
/// With no dynamic pixels, or d = 0, this is the static-class mask.
BinaryMask distance_mask(const LabelMap& labels, const std::set<int>& dynamic_set,
                         double d);

/// Squared Euclidean distance to the nearest set pixel (exact integer
/// values; "infinity" when the mask is empty). Two-pass transform.
Grid<std::int64_t> squared_distance_transform(const BinaryMask& sites);

/// For each dynamic pixel, the label of the Euclidean-nearest static pixel;
/// equidistant static pixels tie-break by row-major scan order.
TargetMap nearest_static_target(const LabelMap& labels,
                                const std::set<int>& static_set,
                                const std::set<int>& dynamic_set);

/// Row-major tiling from the top-left; edge tiles truncated.
PatchGrid patch_partition(const BinaryMask& mask, int h, int w);

/// Ones on the h x w rectangle with top-left (floor((H-h)/2), floor((W-w)/2)).
BinaryMask center_patch_mask(int height, int width, int h, int w);

/// True iff M and F never overlap (element-wise product identically zero).
bool validate_indirect(const BinaryMask& m, const BinaryMask& f);

}  // namespace segattack
