#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "segattack/masks.hpp"
#include "segattack/metrics.hpp"
#include "segattack/model.hpp"
#include "segattack/tensor.hpp"

namespace segattack {

enum class AttackMode { targeted, untargeted };
enum class Norm { inf, two };

std::string attack_mode_name(AttackMode m);
std::string norm_name(Norm p);

struct AttackConfig {
  AttackMode mode = AttackMode::untargeted;
  Norm p = Norm::inf;
  double step_size = 1e-3;
  std::optional<double> budget;  // defaults: 100*alpha (inf), 100 (two)
  int max_iters = 100;
  double early_stop_asr = 0.9;
  double confidence_threshold = 0.3;
  bool clamp_to_valid_range = true;

  double effective_budget() const;
  void validate() const;
};

struct AdaptiveConfig {
  double lambda1 = 0.01;
  double lambda2_stage1 = 100.0;
  int patch_h = 8;
  int patch_w = 16;
  double sparsity_target = 0.95;  // fraction of parent-mask pixels zeroed
  double optimizer_lr = 0.01;
  int iters_stage1 = 150;
  int iters_stage2 = 100;
  double clip_threshold = 0.005;
  double confidence_threshold = 0.3;
  bool warm_start_stage2 = true;

  void validate() const;
};

struct UniversalConfig {
  int epochs = 200;
  double step_size = 1e-3;
  int patch_h = 8;
  int patch_w = 16;
  std::optional<double> budget;  // default 100*alpha, matching the inf rule

  double effective_budget() const;
  void validate() const;
};

/// delta is exactly zero wherever support_mask = 0.
struct Perturbation {
  Tensor delta;  // H x W x C
  BinaryMask support_mask;
};

struct AttackResult {
  Perturbation perturbation;
  Tensor adversarial_image;
  int iterations_used = 0;
  bool terminated_early = false;
  RegionMetrics metrics;
  LabelMap adversarial_labels;
  std::vector<int> selected_patches;  // adaptive attack only
};

/// Region-normalized attack objective on per-pixel probabilities.
///   untargeted: -mean CE(y_pred) over F plus mean CE(y_pred) over F=0
///   targeted:    mean CE(y_t) over F plus mean CE(y_pred) over F=0,
///                where fooling pixels already at the target with
///                confidence >= threshold contribute zero.
/// Cross-entropy uses a 1e-12 probability floor.
double attack_loss(const Tensor& probs, const LabelMap& y_pred,
                   const std::optional<TargetMap>& target, const BinaryMask& fooling,
                   AttackMode mode, double confidence_threshold);

/// attack_loss together with its gradient w.r.t. the logits.
LogitLoss attack_loss_with_grad(const Tensor& probs, const LabelMap& y_pred,
                                const std::optional<TargetMap>& target,
                                const BinaryMask& fooling, AttackMode mode,
                                double confidence_threshold);

/// Euclidean projection onto {support(delta) within M, ||delta||_p <= eps}.
Perturbation project(const Tensor& delta, const BinaryMask& m, Norm p, double eps);

/// Iterative projected gradient attack (sign steps for inf, normalized
/// gradient steps for two), with per-iteration ASR early stopping.
AttackResult pgd_attack(const Model& model, const Tensor& image, const BinaryMask& m,
                        const BinaryMask& fooling, const AttackConfig& config,
                        const std::optional<TargetMap>& target = std::nullopt);

/// Sum over patches of the l2 norm of the masked perturbation.
double group_sparsity_penalty(const Tensor& delta, const PatchGrid& grid);

/// Ranks patches by ||M_t (.) delta||_2 descending (ties by index) and keeps
/// the largest prefix whose pixel count stays within (1-S)*|parent|;
/// at least one patch is always kept.
std::pair<BinaryMask, std::vector<int>> select_top_patches(const Tensor& delta,
                                                           const PatchGrid& grid,
                                                           double sparsity_target);

/// Two-stage group-sparse attack: stage 1 minimizes
/// lambda2*sum_t||M_t (.) delta||_2 + lambda1*||delta||_2^2 + J_t with Adam,
/// zeroing entries below clip_threshold each iteration; the top patches at
/// sparsity S are selected and stage 2 re-optimizes with lambda2 = 0 on the
/// selected support.
AttackResult adaptive_attack(const Model& model, const Tensor& image,
                             const BinaryMask& m, const BinaryMask& fooling,
                             const TargetMap& target, const AdaptiveConfig& cfg);

/// Single shared untargeted perturbation over the training images; fooling
/// mask is the whole image. Sequential per-image sign steps, projected after
/// each step.
Perturbation universal_attack(const Model& model, const std::vector<Tensor>& train_images,
                              const BinaryMask& m, const UniversalConfig& cfg);

/// clamp(X + M (.) delta, 0, 1); equals X bit-exactly where M = 0.
Tensor apply_perturbation(const Tensor& image, const Perturbation& p, bool clamp);

/// RegionMetrics bundle for one attacked image.
RegionMetrics evaluate_attack(const LabelMap& pred_clean, const LabelMap& pred_adv,
                              const BinaryMask& fooling,
                              const std::optional<TargetMap>& target,
                              const Tensor& delta, const BinaryMask& parent,
                              int num_classes);

/// Run-directory serialization: config echo, delta tensor, adversarial
/// image, prediction maps, metrics.
void save_attack_result(const std::filesystem::path& dir, const AttackResult& result,
                        const std::string& config_json);

}  // namespace segattack
