#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segattack/model.hpp"
#include "segattack/tensor.hpp"

namespace segattack {

enum class LabelsSource { ground_truth, predicted };

/// Per-layer class-conditional Gaussians fit on class-averaged features:
/// one mean per observed class, one covariance shared across classes, plus
/// relative shrinkage to keep it positive definite.
struct GaussianProfile {
  struct Layer {
    std::string name;
    int channels = 0;
    std::vector<Tensor> means;           // K entries, each a length-C tensor
    std::vector<std::uint8_t> observed;  // per class
    Tensor covariance;                   // C x C, after shrinkage
    Tensor chol_lower;                   // cached Cholesky factor of covariance
  };
  std::vector<Layer> layers;
  int num_classes = 0;
  double shrinkage = 1e-3;

  void save(const std::filesystem::path& path) const;
  static GaussianProfile load(const std::filesystem::path& path);
};

/// Logistic classifier over the L per-layer confidence scores of a pixel.
struct PixelDetector {
  std::vector<double> weights;  // L
  double bias = 0.0;
  std::vector<double> feature_mean;  // standardization, from the fit split
  std::vector<double> feature_std;
  bool trained = false;
  int target_h = 0, target_w = 0;
  double heldout_auroc = 0.0;
};

/// Logistic classifier over the L image-level score sums.
struct ImageDetector {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  bool trained = false;
  double heldout_auroc = 0.0;
};

struct DetectionResult {
  Grid<double> pixel_scores;  // H x W, higher = more likely fooled
  double image_score = 0.0;
};

/// Mean feature vector over the pixels of each class present in the image,
/// one per (layer, class); the observations that profiles are fit on.
std::vector<std::vector<Tensor>> class_average_features(const FeatureStack& features,
                                                        const LabelMap& labels,
                                                        int num_classes,
                                                        std::vector<std::uint8_t>* present);

/// Fit from explicit feature stacks (the estimator itself).
GaussianProfile fit_profile_from_features(const std::vector<FeatureStack>& stacks,
                                          const std::vector<LabelMap>& labels,
                                          int num_classes, double shrinkage = 1e-3);

/// Fit by running the model over clean samples; labels from ground truth or
/// the model's own predictions.
GaussianProfile fit_profile(const Model& model, const std::vector<Sample>& clean_samples,
                            LabelsSource labels_source, double shrinkage = 1e-3);

/// Per-layer confidence maps: max over observed classes of the negative
/// Mahalanobis distance. Values are <= 0, with 0 exactly at a class mean.
std::vector<Grid<double>> pixel_scores(const FeatureStack& features,
                                       const GaussianProfile& profile);

/// Bilinear (corner-aligned) resize of each layer map to the target shape,
/// stacked as H x W x L in layer order.
Tensor resize_scores(const std::vector<Grid<double>>& layer_maps, int target_h,
                     int target_w);

/// Per-layer spatial sums, in layer order.
std::vector<double> image_scores(const std::vector<Grid<double>>& layer_maps);

/// Deterministic full-batch logistic regression on per-pixel score vectors.
/// The image list is split 80/20 (by order); AUROC is reported on the
/// held-out part. Gradient sums use fixed-point accumulation so the fit is
/// independent of pixel order.
PixelDetector fit_pixel_detector(const std::vector<Tensor>& score_stacks,
                                 const std::vector<BinaryMask>& fooled_masks,
                                 int iters = 300, double lr = 0.5);

ImageDetector fit_image_detector(const std::vector<std::vector<double>>& image_score_vecs,
                                 const std::vector<std::uint8_t>& attacked,
                                 int iters = 300, double lr = 0.5);

DetectionResult detect(const Tensor& image, const Model& model,
                       const GaussianProfile& profile, const PixelDetector& pixel_detector,
                       const ImageDetector& image_detector);

/// Exact rank-statistic AUROC; ties contribute 1/2.
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

void save_pixel_detector(const std::filesystem::path& path, const PixelDetector& d);
PixelDetector load_pixel_detector(const std::filesystem::path& path);
void save_image_detector(const std::filesystem::path& path, const ImageDetector& d);
ImageDetector load_image_detector(const std::filesystem::path& path);

}  // namespace segattack
