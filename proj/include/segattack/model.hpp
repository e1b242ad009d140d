#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segattack/scenegen.hpp"
#include "segattack/tensor.hpp"

namespace segattack {

enum class Variant { local, dilated, global_context };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Toy segmentation architectures with analytically known receptive fields:
///   local          - stride-1 3x3 conv blocks, dilation 1 everywhere
///   dilated        - the same trunk with per-block dilations
///   global_context - local trunk plus a global-average-pooled feature
///                    vector broadcast and concatenated before the classifier
struct ModelSpec {
  Variant variant = Variant::local;
  int num_classes = 5;
  std::vector<int> channel_widths = {8, 8, 8, 8};
  int kernel_size = 3;
  std::vector<int> dilations;  // dilated variant only; ones otherwise
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<int> effective_dilations() const;
};

/// Chebyshev radius of the output's dependence on the input; nullopt for
/// the global_context variant (whole image).
std::optional<int> receptive_field_radius(const ModelSpec& spec);

struct ConvLayer {
  int in_ch = 0, out_ch = 0, kernel = 3, dilation = 1;
  Tensor weight;             // k x k x in x out
  std::vector<Scalar> bias;  // out
};

/// One forward pass with every intermediate kept for backprop.
struct ForwardTrace {
  Tensor input;
  std::vector<Tensor> block_pre;   // pre-ReLU per block
  std::vector<Tensor> block_out;   // post-ReLU per block
  std::vector<Scalar> pooled;      // global_context only
  Tensor merged;                   // global_context only
  Tensor logits;
};

struct ParamGrads {
  std::vector<Tensor> weight;       // per layer, blocks then classifier
  std::vector<std::vector<Scalar>> bias;
};

struct FeatureStack {
  std::vector<std::pair<std::string, Tensor>> layers;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_mean_loss;
  double final_val_miou = 0.0;  // vs. ground truth on the val split
  int epochs = 0;
};

struct Prediction {
  Tensor logits;   // H x W x K
  Tensor probs;    // softmax per pixel
  LabelMap labels;  // argmax, lowest index wins ties
};

/// Scalar loss on the logits together with its gradient w.r.t. the logits.
struct LogitLoss {
  double value = 0.0;
  Tensor dlogits;
};
using LogitLossFn = std::function<LogitLoss(const Tensor& logits)>;

class Model {
 public:
  Model() = default;
  explicit Model(const ModelSpec& spec);  // deterministic init from spec.seed

  const ModelSpec& spec() const { return spec_; }
  const std::vector<ConvLayer>& blocks() const { return blocks_; }
  const ConvLayer& classifier() const { return classifier_; }
  ConvLayer& mutable_classifier() { return classifier_; }

  /// Names of the feature taps, in FeatureStack order: one per block,
  /// "context_merge" for the global variant, then "classifier" (logits).
  std::vector<std::string> feature_layer_names() const;

  ForwardTrace forward(const Tensor& image) const;

  /// Gradient of a logit-level loss w.r.t. the input; param gradients
  /// optionally accumulated for training.
  Tensor backward(const ForwardTrace& trace, const Tensor& dlogits,
                  ParamGrads* param_grads) const;

  std::vector<Tensor*> parameter_tensors();
  std::vector<std::vector<Scalar>*> parameter_biases();

  void save(const std::filesystem::path& path, const std::string& extra_json = "{}") const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelSpec spec_;
  std::vector<ConvLayer> blocks_;
  ConvLayer classifier_;
};

Model build_model(const ModelSpec& spec);

TrainReport train_model(Model& model, const Dataset& dataset, const TrainConfig& cfg);

Prediction predict(const Model& model, const Tensor& image);

FeatureStack extract_features(const Model& model, const Tensor& image);

/// Exact input gradient of fn(logits) via one forward and one backward pass.
Tensor input_gradient(const Model& model, const Tensor& image, const LogitLossFn& fn);

/// Per-pixel softmax with the max subtracted for stability.
Tensor softmax_per_pixel(const Tensor& logits);
LabelMap argmax_labels(const Tensor& probs_or_logits);

}  // namespace segattack
