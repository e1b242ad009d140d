#include "segattack/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "segattack/image_io.hpp"
#include "segattack/serialize.hpp"

namespace segattack {

namespace {

using nlohmann::json;

constexpr double kProbFloor = 1e-12;

inline double ce(double p) { return -std::log(std::max(p, kProbFloor)); }

int argmax_at(const Tensor& probs, std::size_t j, std::size_t k) {
  const Scalar* p = probs.data() + j * k;
  int best = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (p[c] > p[best]) best = static_cast<int>(c);
  return best;
}

void zero_outside(Tensor& delta, const BinaryMask& m) {
  const std::size_t channels = delta.dim(2);
  for (std::size_t j = 0; j < m.v.size(); ++j) {
    if (m.v[j]) continue;
    for (std::size_t c = 0; c < channels; ++c) delta[j * channels + c] = 0.0;
  }
}

double masked_l2(const Tensor& delta) {
  double sq = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) sq += delta[i] * delta[i];
  return std::sqrt(sq);
}

// Adam on a single tensor; gradients arrive already masked.
struct DeltaAdam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Tensor m, v;
  long t = 0;

  explicit DeltaAdam(const Tensor& like, double lr_) : lr(lr_) {
    m = Tensor::zeros_like(like);
    v = Tensor::zeros_like(like);
  }

  void step(Tensor& param, const Tensor& grad) {
    ++t;
    double bias1 = 1.0 - std::pow(beta1, t);
    double bias2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      param[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
    }
  }
};

void clip_small_entries(Tensor& delta, double threshold) {
  for (std::size_t i = 0; i < delta.size(); ++i)
    if (std::abs(delta[i]) < threshold) delta[i] = 0.0;
}

double compute_asr(const LabelMap& labels_adv, const LabelMap& y_pred,
                   const std::optional<TargetMap>& target, const BinaryMask& fooling,
                   AttackMode mode) {
  if (mode == AttackMode::targeted) return asr_targeted(labels_adv, *target, fooling);
  return asr_untargeted(labels_adv, y_pred, fooling);
}

}  // namespace

std::string attack_mode_name(AttackMode m) {
  return m == AttackMode::targeted ? "targeted" : "untargeted";
}

std::string norm_name(Norm p) { return p == Norm::inf ? "inf" : "two"; }

double AttackConfig::effective_budget() const {
  if (budget) return *budget;
  return p == Norm::inf ? 100.0 * step_size : 100.0;
}

void AttackConfig::validate() const {
  require(step_size >= 0.0, "step_size must be >= 0");
  require(max_iters >= 0, "max_iters must be >= 0");
  require(early_stop_asr >= 0.0 && early_stop_asr <= 1.0,
          "early_stop_asr must be in [0,1]");
  require(confidence_threshold >= 0.0 && confidence_threshold <= 1.0,
          "confidence_threshold must be in [0,1]");
  if (step_size > 0.0)
    require(effective_budget() > 0.0, "perturbation budget must be positive");
}

void AdaptiveConfig::validate() const {
  require(lambda1 >= 0.0 && lambda2_stage1 >= 0.0, "lambda values must be >= 0");
  require(patch_h >= 1 && patch_w >= 1, "patch size must be >= 1");
  require(sparsity_target > 0.0 && sparsity_target < 1.0,
          "sparsity target must be in (0,1)");
  require(optimizer_lr > 0.0, "optimizer_lr must be positive");
  require(iters_stage1 >= 1 && iters_stage2 >= 0, "iteration counts invalid");
  require(clip_threshold >= 0.0, "clip_threshold must be >= 0");
}

double UniversalConfig::effective_budget() const {
  if (budget) return *budget;
  return 100.0 * step_size;
}

void UniversalConfig::validate() const {
  require(epochs >= 0, "epochs must be >= 0");
  require(step_size > 0.0, "step_size must be positive");
  require(patch_h >= 1 && patch_w >= 1, "patch size must be >= 1");
  require(effective_budget() > 0.0, "perturbation budget must be positive");
}

double attack_loss(const Tensor& probs, const LabelMap& y_pred,
                   const std::optional<TargetMap>& target, const BinaryMask& fooling,
                   AttackMode mode, double confidence_threshold) {
  return attack_loss_with_grad(probs, y_pred, target, fooling, mode,
                               confidence_threshold)
      .value;
}

LogitLoss attack_loss_with_grad(const Tensor& probs, const LabelMap& y_pred,
                                const std::optional<TargetMap>& target,
                                const BinaryMask& fooling, AttackMode mode,
                                double confidence_threshold) {
  require(probs.rank() == 3, "probs must be H x W x K");
  const std::size_t hw = probs.dim(0) * probs.dim(1);
  const std::size_t k = probs.dim(2);
  require(y_pred.v.size() == hw && fooling.v.size() == hw,
          "attack_loss: shape mismatch");
  require(mode == AttackMode::targeted ? target.has_value() : !target.has_value(),
          "target must be supplied iff the attack is targeted");

  std::size_t n_fool = mask_count(fooling);
  require(n_fool > 0, "attack_loss: fooling mask is all zero (nothing to fool)");
  std::size_t n_pres = hw - n_fool;
  const double inv_fool = 1.0 / static_cast<double>(n_fool);
  const double inv_pres = n_pres > 0 ? 1.0 / static_cast<double>(n_pres) : 0.0;

  LogitLoss out;
  out.dlogits = Tensor({probs.dim(0), probs.dim(1), k});
  double fool_sum = 0.0, pres_sum = 0.0;
  for (std::size_t j = 0; j < hw; ++j) {
    double weight;
    int label;
    if (fooling.v[j]) {
      if (mode == AttackMode::targeted) {
        require(target->valid.v[j], "target undefined on a fooling pixel");
        label = target->grid.v[j];
        double p_t = probs[j * k + static_cast<std::size_t>(label)];
        bool satisfied = argmax_at(probs, j, k) == label &&
                         p_t >= confidence_threshold;
        if (satisfied) continue;  // already at the target with confidence
        fool_sum += ce(p_t);
        weight = inv_fool;
      } else {
        label = y_pred.v[j];
        fool_sum -= ce(probs[j * k + static_cast<std::size_t>(label)]);
        weight = -inv_fool;
      }
    } else {
      if (n_pres == 0) continue;
      label = y_pred.v[j];
      pres_sum += ce(probs[j * k + static_cast<std::size_t>(label)]);
      weight = inv_pres;
    }
    Scalar* d = out.dlogits.data() + j * k;
    const Scalar* p = probs.data() + j * k;
    for (std::size_t c = 0; c < k; ++c) d[c] = weight * p[c];
    d[label] -= weight;
  }
  out.value = fool_sum * inv_fool + pres_sum * inv_pres;
  return out;
}

Perturbation project(const Tensor& delta, const BinaryMask& m, Norm p, double eps) {
  require(delta.rank() == 3 && static_cast<int>(delta.dim(0)) == m.h &&
              static_cast<int>(delta.dim(1)) == m.w,
          "project: shape mismatch");
  require(eps > 0.0, "project: eps must be positive");
  Perturbation out{delta, m};
  zero_outside(out.delta, m);
  if (p == Norm::inf) {
    for (std::size_t i = 0; i < out.delta.size(); ++i)
      out.delta[i] = std::clamp(out.delta[i], -eps, eps);
  } else {
    double n = masked_l2(out.delta);
    if (n > eps) {
      double scale = eps / n;
      for (std::size_t i = 0; i < out.delta.size(); ++i) out.delta[i] *= scale;
      // guard against one-ulp overshoot so feasibility is exact
      while (masked_l2(out.delta) > eps) {
        for (std::size_t i = 0; i < out.delta.size(); ++i)
          out.delta[i] *= 0.9999999999999999;
      }
    }
  }
  return out;
}

Tensor apply_perturbation(const Tensor& image, const Perturbation& p, bool clamp) {
  require(image.same_shape(p.delta), "apply_perturbation: shape mismatch");
  Tensor out = image;
  const std::size_t channels = image.dim(2);
  for (std::size_t j = 0; j < p.support_mask.v.size(); ++j) {
    if (!p.support_mask.v[j]) continue;  // off-support pixels stay bit-exact
    for (std::size_t c = 0; c < channels; ++c) {
      double v = image[j * channels + c] + p.delta[j * channels + c];
      if (clamp) v = std::clamp(v, 0.0, 1.0);
      out[j * channels + c] = v;
    }
  }
  return out;
}

RegionMetrics evaluate_attack(const LabelMap& pred_clean, const LabelMap& pred_adv,
                              const BinaryMask& fooling,
                              const std::optional<TargetMap>& target,
                              const Tensor& delta, const BinaryMask& parent,
                              int num_classes) {
  RegionMetrics m;
  m.miou_u = miou(pred_adv, pred_clean, fooling, num_classes);
  if (target) m.asr_t = asr_targeted(pred_adv, *target, fooling);
  m.asr_u = asr_untargeted(pred_adv, pred_clean, fooling);
  if (mask_count(fooling) < fooling.v.size())
    m.preserved_rate = preserved_rate(pred_adv, pred_clean, fooling);
  m.perceptibility = perceptibility(delta);
  if (mask_count(parent) > 0) m.sparsity = sparsity(delta, parent);
  return m;
}

AttackResult pgd_attack(const Model& model, const Tensor& image, const BinaryMask& m,
                        const BinaryMask& fooling, const AttackConfig& config,
                        const std::optional<TargetMap>& target) {
  config.validate();
  require(image.rank() == 3, "image must be H x W x C");
  require(static_cast<int>(image.dim(0)) == m.h &&
              static_cast<int>(image.dim(1)) == m.w && m.same_shape(fooling),
          "pgd_attack: mask shapes do not match the image");
  if (config.mode == AttackMode::targeted)
    require(target.has_value(), "targeted attack requires a target map");
  else
    require(!target.has_value(), "untargeted attack must not carry a target map");

  const double eps = config.effective_budget();
  const int num_classes = model.spec().num_classes;
  LabelMap y_pred = argmax_labels(softmax_per_pixel(model.forward(image).logits));

  Perturbation pert{Tensor::zeros_like(image), m};
  Tensor x_adv = apply_perturbation(image, pert, config.clamp_to_valid_range);

  AttackResult result;
  LabelMap labels_adv = y_pred;
  bool have_final = false;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    ForwardTrace trace = model.forward(x_adv);
    Tensor probs = softmax_per_pixel(trace.logits);
    labels_adv = argmax_labels(probs);
    result.iterations_used = iter;
    double asr = compute_asr(labels_adv, y_pred, target, fooling, config.mode);
    if (asr >= config.early_stop_asr) {
      result.terminated_early = true;
      have_final = true;
      break;
    }
    LogitLoss loss = attack_loss_with_grad(probs, y_pred, target, fooling,
                                           config.mode, config.confidence_threshold);
    require(std::isfinite(loss.value), "pgd_attack: non-finite loss");
    Tensor grad = model.backward(trace, loss.dlogits, nullptr);
    zero_outside(grad, m);

    if (config.p == Norm::inf) {
      for (std::size_t i = 0; i < pert.delta.size(); ++i) {
        double g = grad[i];
        if (g > 0.0)
          pert.delta[i] -= config.step_size;
        else if (g < 0.0)
          pert.delta[i] += config.step_size;
      }
    } else {
      double n = masked_l2(grad);
      if (n > 0.0) {
        double scale = config.step_size / n;
        for (std::size_t i = 0; i < pert.delta.size(); ++i)
          pert.delta[i] -= scale * grad[i];
      }
    }
    if (eps > 0.0) {
      pert = project(pert.delta, m, config.p, eps);
    } else {
      zero_outside(pert.delta, m);  // step_size 0: nothing to project
    }
    x_adv = apply_perturbation(image, pert, config.clamp_to_valid_range);
  }

  if (!have_final) {
    // final state after the last step (or max_iters == 0)
    labels_adv = argmax_labels(softmax_per_pixel(model.forward(x_adv).logits));
  }

  result.perturbation = std::move(pert);
  result.adversarial_image = std::move(x_adv);
  result.adversarial_labels = labels_adv;
  result.metrics = evaluate_attack(y_pred, labels_adv, fooling, target,
                                   result.perturbation.delta, m, num_classes);
  return result;
}

double group_sparsity_penalty(const Tensor& delta, const PatchGrid& grid) {
  const std::size_t channels = delta.dim(2);
  double total = 0.0;
  for (const auto& patch : grid.patches) {
    double sq = 0.0;
    for (std::size_t j = 0; j < patch.v.size(); ++j) {
      if (!patch.v[j]) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        double v = delta[j * channels + c];
        sq += v * v;
      }
    }
    total += std::sqrt(sq);
  }
  return total;
}

std::pair<BinaryMask, std::vector<int>> select_top_patches(const Tensor& delta,
                                                           const PatchGrid& grid,
                                                           double sparsity_target) {
  require(!grid.patches.empty(), "select_top_patches: empty patch grid");
  require(sparsity_target > 0.0 && sparsity_target < 1.0,
          "sparsity target must be in (0,1)");
  const std::size_t channels = delta.dim(2);
  const std::size_t parent_count = mask_count(grid.parent);
  require(parent_count > 0, "select_top_patches: empty parent mask");

  struct Entry {
    double norm;
    std::size_t pixels;
    int index;
  };
  std::vector<Entry> entries;
  for (std::size_t t = 0; t < grid.patches.size(); ++t) {
    const auto& patch = grid.patches[t];
    double sq = 0.0;
    for (std::size_t j = 0; j < patch.v.size(); ++j) {
      if (!patch.v[j]) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        double v = delta[j * channels + c];
        sq += v * v;
      }
    }
    entries.push_back({std::sqrt(sq), mask_count(patch), static_cast<int>(t)});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.norm != b.norm) return a.norm > b.norm;
    return a.index < b.index;
  });

  const double budget = (1.0 - sparsity_target) * static_cast<double>(parent_count);
  BinaryMask selected(grid.parent.h, grid.parent.w);
  std::vector<int> indices;
  std::size_t pixels = 0;
  for (const auto& e : entries) {
    if (!indices.empty() &&
        static_cast<double>(pixels + e.pixels) > budget)
      break;
    indices.push_back(e.index);
    pixels += e.pixels;
    const auto& patch = grid.patches[e.index];
    for (std::size_t j = 0; j < patch.v.size(); ++j)
      if (patch.v[j]) selected.v[j] = 1;
    if (static_cast<double>(pixels) > budget) break;  // n = 1 floor case
  }
  return {selected, indices};
}

AttackResult adaptive_attack(const Model& model, const Tensor& image,
                             const BinaryMask& m, const BinaryMask& fooling,
                             const TargetMap& target, const AdaptiveConfig& cfg) {
  cfg.validate();
  require(image.rank() == 3, "image must be H x W x C");
  require(static_cast<int>(image.dim(0)) == m.h && m.same_shape(fooling),
          "adaptive_attack: mask shapes do not match the image");
  require(validate_indirect(m, fooling),
          "adaptive_attack: perturbation and fooling masks overlap");

  PatchGrid grid = patch_partition(m, cfg.patch_h, cfg.patch_w);
  require(!grid.patches.empty(), "no active patches: perturbation mask is empty");

  const int num_classes = model.spec().num_classes;
  LabelMap y_pred = argmax_labels(softmax_per_pixel(model.forward(image).logits));
  const std::optional<TargetMap> target_opt = target;
  const std::size_t channels = image.dim(2);

  auto objective_grad = [&](const Tensor& delta, const BinaryMask& support,
                            double lambda2, const PatchGrid* gs_grid) {
    Perturbation pert{delta, support};
    Tensor x_adv = apply_perturbation(image, pert, true);
    ForwardTrace trace = model.forward(x_adv);
    Tensor probs = softmax_per_pixel(trace.logits);
    LogitLoss loss = attack_loss_with_grad(probs, y_pred, target_opt, fooling,
                                           AttackMode::targeted,
                                           cfg.confidence_threshold);
    require(std::isfinite(loss.value), "adaptive_attack: non-finite loss");
    Tensor grad = model.backward(trace, loss.dlogits, nullptr);
    zero_outside(grad, support);
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad[i] += 2.0 * cfg.lambda1 * delta[i];
    if (lambda2 > 0.0 && gs_grid) {
      for (const auto& patch : gs_grid->patches) {
        double sq = 0.0;
        for (std::size_t j = 0; j < patch.v.size(); ++j) {
          if (!patch.v[j]) continue;
          for (std::size_t c = 0; c < channels; ++c) {
            double v = delta[j * channels + c];
            sq += v * v;
          }
        }
        double norm = std::sqrt(sq);
        if (norm == 0.0) continue;  // subgradient 0 at the origin
        double scale = lambda2 / norm;
        for (std::size_t j = 0; j < patch.v.size(); ++j) {
          if (!patch.v[j]) continue;
          for (std::size_t c = 0; c < channels; ++c)
            grad[j * channels + c] += scale * delta[j * channels + c];
        }
      }
    }
    return grad;
  };

  // stage 1: group-sparse search for the sensitive patches
  Tensor delta = Tensor::zeros_like(image);
  {
    DeltaAdam adam(delta, cfg.optimizer_lr);
    for (int it = 0; it < cfg.iters_stage1; ++it) {
      Tensor grad = objective_grad(delta, m, cfg.lambda2_stage1, &grid);
      adam.step(delta, grad);
      zero_outside(delta, m);
      clip_small_entries(delta, cfg.clip_threshold);
    }
  }
  bool all_zero = true;
  for (std::size_t i = 0; i < delta.size() && all_zero; ++i)
    all_zero = (delta[i] == 0.0);
  require(!all_zero, "no active patches: stage-1 perturbation is identically zero");

  auto [selected, indices] = select_top_patches(delta, grid, cfg.sparsity_target);

  // stage 2: re-optimize on the selected support with lambda2 = 0
  Tensor delta2 = Tensor::zeros_like(image);
  if (cfg.warm_start_stage2) {
    delta2 = delta;
    zero_outside(delta2, selected);
  }
  {
    DeltaAdam adam(delta2, cfg.optimizer_lr);
    for (int it = 0; it < cfg.iters_stage2; ++it) {
      Tensor grad = objective_grad(delta2, selected, 0.0, nullptr);
      adam.step(delta2, grad);
      zero_outside(delta2, selected);
      clip_small_entries(delta2, cfg.clip_threshold);
    }
  }

  AttackResult result;
  result.perturbation = Perturbation{std::move(delta2), selected};
  result.adversarial_image =
      apply_perturbation(image, result.perturbation, true);
  result.adversarial_labels = argmax_labels(
      softmax_per_pixel(model.forward(result.adversarial_image).logits));
  result.iterations_used = cfg.iters_stage1 + cfg.iters_stage2;
  result.selected_patches = indices;
  result.metrics = evaluate_attack(y_pred, result.adversarial_labels, fooling,
                                   target_opt, result.perturbation.delta, m,
                                   num_classes);
  return result;
}

Perturbation universal_attack(const Model& model, const std::vector<Tensor>& train_images,
                              const BinaryMask& m, const UniversalConfig& cfg) {
  cfg.validate();
  require(!train_images.empty(), "universal_attack: empty training set");
  for (const auto& img : train_images)
    require(img.same_shape(train_images.front()), "training images differ in shape");
  require(static_cast<int>(train_images.front().dim(0)) == m.h &&
              static_cast<int>(train_images.front().dim(1)) == m.w,
          "universal_attack: mask shape mismatch");

  const double eps = cfg.effective_budget();
  BinaryMask fool_all(m.h, m.w, 1);

  std::vector<LabelMap> y_pred;
  y_pred.reserve(train_images.size());
  for (const auto& img : train_images)
    y_pred.push_back(argmax_labels(softmax_per_pixel(model.forward(img).logits)));

  Perturbation pert{Tensor::zeros_like(train_images.front()), m};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < train_images.size(); ++i) {
      Tensor x_adv = apply_perturbation(train_images[i], pert, true);
      ForwardTrace trace = model.forward(x_adv);
      Tensor probs = softmax_per_pixel(trace.logits);
      LogitLoss loss = attack_loss_with_grad(probs, y_pred[i], std::nullopt,
                                             fool_all, AttackMode::untargeted, 0.0);
      require(std::isfinite(loss.value), "universal_attack: non-finite loss");
      Tensor grad = model.backward(trace, loss.dlogits, nullptr);
      zero_outside(grad, m);
      for (std::size_t idx = 0; idx < pert.delta.size(); ++idx) {
        double g = grad[idx];
        if (g > 0.0)
          pert.delta[idx] -= cfg.step_size;
        else if (g < 0.0)
          pert.delta[idx] += cfg.step_size;
      }
      pert = project(pert.delta, m, Norm::inf, eps);
    }
  }
  return pert;
}

void save_attack_result(const std::filesystem::path& dir, const AttackResult& result,
                        const std::string& config_json) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "config.json", config_json);
  save_tensor(dir / "delta.tensor", result.perturbation.delta);
  write_mask(dir / "support.pgm", result.perturbation.support_mask);
  write_ppm(dir / "adversarial.ppm", result.adversarial_image);
  Grid<std::uint8_t> lbl(result.adversarial_labels.h, result.adversarial_labels.w);
  for (std::size_t i = 0; i < lbl.v.size(); ++i)
    lbl.v[i] = static_cast<std::uint8_t>(result.adversarial_labels.v[i]);
  write_pgm(dir / "pred_adv.pgm", lbl);

  json metrics{{"miou_u", result.metrics.miou_u},
               {"asr_u", result.metrics.asr_u},
               {"sparsity", result.metrics.sparsity},
               {"perceptibility_linf", result.metrics.perceptibility.linf},
               {"perceptibility_l2", result.metrics.perceptibility.l2},
               {"iterations_used", result.iterations_used},
               {"terminated_early", result.terminated_early}};
  if (result.metrics.asr_t) metrics["asr_t"] = *result.metrics.asr_t;
  if (result.metrics.preserved_rate)
    metrics["preserved_rate"] = *result.metrics.preserved_rate;
  if (!result.selected_patches.empty())
    metrics["selected_patches"] = result.selected_patches;
  write_text_file(dir / "metrics.json", metrics.dump(2));
}

}  // namespace segattack
