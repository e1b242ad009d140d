#include "segattack/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "segattack/metrics.hpp"
#include "segattack/rng.hpp"
#include "segattack/serialize.hpp"
#include "segattack/version.hpp"

namespace segattack {

namespace {

using nlohmann::json;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Gather the kernel window of every output pixel into one row (zero padded).
RowMat im2col(const Tensor& in, int kernel, int dilation) {
  const int h = static_cast<int>(in.dim(0));
  const int w = static_cast<int>(in.dim(1));
  const int cin = static_cast<int>(in.dim(2));
  const int center = (kernel - 1) / 2;
  RowMat a = RowMat::Zero(static_cast<Eigen::Index>(h) * w,
                          static_cast<Eigen::Index>(kernel) * kernel * cin);
  const Scalar* src = in.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Eigen::Index row = static_cast<Eigen::Index>(y) * w + x;
      double* dst = a.data() + row * a.cols();
      for (int ky = 0; ky < kernel; ++ky) {
        int sy = y + (ky - center) * dilation;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          int sx = x + (kx - center) * dilation;
          if (sx < 0 || sx >= w) continue;
          const Scalar* p = src + (static_cast<std::size_t>(sy) * w + sx) * cin;
          double* q = dst + (static_cast<std::size_t>(ky) * kernel + kx) * cin;
          for (int c = 0; c < cin; ++c) q[c] = p[c];
        }
      }
    }
  }
  return a;
}

// Scatter-add of the im2col layout back onto the input grid.
void col2im_add(const RowMat& da, int h, int w, int cin, int kernel, int dilation,
                Tensor& din) {
  const int center = (kernel - 1) / 2;
  Scalar* dst = din.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Eigen::Index row = static_cast<Eigen::Index>(y) * w + x;
      const double* src = da.data() + row * da.cols();
      for (int ky = 0; ky < kernel; ++ky) {
        int sy = y + (ky - center) * dilation;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          int sx = x + (kx - center) * dilation;
          if (sx < 0 || sx >= w) continue;
          Scalar* q = dst + (static_cast<std::size_t>(sy) * w + sx) * cin;
          const double* p = src + (static_cast<std::size_t>(ky) * kernel + kx) * cin;
          for (int c = 0; c < cin; ++c) q[c] += p[c];
        }
      }
    }
  }
}

Tensor conv_forward(const Tensor& in, const ConvLayer& layer) {
  const std::size_t h = in.dim(0), w = in.dim(1);
  Tensor out({h, w, static_cast<std::size_t>(layer.out_ch)});
  ConstMapMat wm(layer.weight.data(),
                 static_cast<Eigen::Index>(layer.kernel) * layer.kernel * layer.in_ch,
                 layer.out_ch);
  MapMat om(out.data(), static_cast<Eigen::Index>(h) * w, layer.out_ch);
  if (layer.kernel == 1) {
    ConstMapMat im(in.data(), static_cast<Eigen::Index>(h) * w, layer.in_ch);
    om.noalias() = im * wm;
  } else {
    RowMat a = im2col(in, layer.kernel, layer.dilation);
    om.noalias() = a * wm;
  }
  Eigen::Map<const Eigen::RowVectorXd> bias(layer.bias.data(), layer.out_ch);
  om.rowwise() += bias;
  return out;
}

// dIn += backprop of dOut through the layer; optional dW/dB accumulation.
void conv_backward(const Tensor& in, const ConvLayer& layer, const Tensor& dout,
                   Tensor* din, Tensor* dweight, std::vector<Scalar>* dbias) {
  const int h = static_cast<int>(in.dim(0));
  const int w = static_cast<int>(in.dim(1));
  ConstMapMat dom(dout.data(), static_cast<Eigen::Index>(h) * w, layer.out_ch);
  ConstMapMat wm(layer.weight.data(),
                 static_cast<Eigen::Index>(layer.kernel) * layer.kernel * layer.in_ch,
                 layer.out_ch);
  if (layer.kernel == 1) {
    if (din) {
      MapMat dim(din->data(), static_cast<Eigen::Index>(h) * w, layer.in_ch);
      dim.noalias() += dom * wm.transpose();
    }
    if (dweight) {
      ConstMapMat im(in.data(), static_cast<Eigen::Index>(h) * w, layer.in_ch);
      MapMat dwm(dweight->data(), layer.in_ch, layer.out_ch);
      dwm.noalias() += im.transpose() * dom;
    }
  } else {
    if (din) {
      RowMat da = dom * wm.transpose();
      col2im_add(da, h, w, layer.in_ch, layer.kernel, layer.dilation, *din);
    }
    if (dweight) {
      RowMat a = im2col(in, layer.kernel, layer.dilation);
      MapMat dwm(dweight->data(),
                 static_cast<Eigen::Index>(layer.kernel) * layer.kernel * layer.in_ch,
                 layer.out_ch);
      dwm.noalias() += a.transpose() * dom;
    }
  }
  if (dbias) {
    Eigen::Map<Eigen::RowVectorXd> dbm(dbias->data(), layer.out_ch);
    dbm += dom.colwise().sum();
  }
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  return out;
}

// dPre = dPost gated by the pre-activation sign.
Tensor relu_backward(const Tensor& pre, const Tensor& dpost) {
  Tensor d = dpost;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (pre[i] <= 0.0) d[i] = 0.0;
  return d;
}

ConvLayer make_layer(int in_ch, int out_ch, int kernel, int dilation, Rng& rng) {
  ConvLayer layer;
  layer.in_ch = in_ch;
  layer.out_ch = out_ch;
  layer.kernel = kernel;
  layer.dilation = dilation;
  layer.weight = Tensor({static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel),
                         static_cast<std::size_t>(in_ch), static_cast<std::size_t>(out_ch)});
  double scale = std::sqrt(2.0 / (static_cast<double>(kernel) * kernel * in_ch));
  for (std::size_t i = 0; i < layer.weight.size(); ++i)
    layer.weight[i] = scale * rng.normal();
  layer.bias.assign(out_ch, 0.0);
  return layer;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::local: return "local";
    case Variant::dilated: return "dilated";
    case Variant::global_context: return "global_context";
  }
  fail("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "local") return Variant::local;
  if (name == "dilated") return Variant::dilated;
  if (name == "global_context") return Variant::global_context;
  fail("unknown model variant: " + name);
}

void ModelSpec::validate() const {
  require(num_classes >= 2, "num_classes must be >= 2");
  require(!channel_widths.empty(), "channel_widths must be non-empty");
  for (int c : channel_widths) require(c >= 1, "channel widths must be positive");
  require(kernel_size >= 1 && kernel_size % 2 == 1,
          "kernel_size must be odd (same-size zero-padded convolutions)");
  if (variant == Variant::dilated) {
    require(!dilations.empty(), "dilated variant requires a dilations list");
    require(dilations.size() == channel_widths.size(),
            "dilations list must match channel_widths length");
    for (int d : dilations) require(d >= 1, "dilations must be >= 1");
  } else {
    for (int d : dilations)
      require(d == 1, "non-dilated variants use all-ones dilations");
  }
}

std::vector<int> ModelSpec::effective_dilations() const {
  if (variant == Variant::dilated) return dilations;
  return std::vector<int>(channel_widths.size(), 1);
}

std::optional<int> receptive_field_radius(const ModelSpec& spec) {
  spec.validate();
  if (spec.variant == Variant::global_context) return std::nullopt;
  int radius = 0;
  for (int d : spec.effective_dilations()) radius += d * (spec.kernel_size - 1) / 2;
  return radius;  // classifier is 1x1 and adds nothing
}

Model::Model(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  Rng rng(spec_.seed, 0x300D31);
  int in_ch = 3;
  const auto dil = spec_.effective_dilations();
  for (std::size_t i = 0; i < spec_.channel_widths.size(); ++i) {
    blocks_.push_back(make_layer(in_ch, spec_.channel_widths[i], spec_.kernel_size,
                                 dil[i], rng));
    in_ch = spec_.channel_widths[i];
  }
  int classifier_in = in_ch;
  if (spec_.variant == Variant::global_context) classifier_in = 2 * in_ch;
  classifier_ = make_layer(classifier_in, spec_.num_classes, 1, 1, rng);
}

Model build_model(const ModelSpec& spec) { return Model(spec); }

std::vector<std::string> Model::feature_layer_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    names.push_back("block_" + std::to_string(i + 1));
  if (spec_.variant == Variant::global_context) names.push_back("context_merge");
  names.push_back("classifier");
  return names;
}

ForwardTrace Model::forward(const Tensor& image) const {
  require(image.rank() == 3 && image.dim(2) == 3,
          "model input must be H x W x 3");
  ForwardTrace tr;
  tr.input = image;
  const Tensor* cur = &tr.input;
  for (const auto& block : blocks_) {
    require(static_cast<int>(cur->dim(2)) == block.in_ch, "channel mismatch");
    tr.block_pre.push_back(conv_forward(*cur, block));
    tr.block_out.push_back(relu(tr.block_pre.back()));
    cur = &tr.block_out.back();
  }
  if (spec_.variant == Variant::global_context) {
    const Tensor& t = *cur;
    const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
    const double inv_hw = 1.0 / (static_cast<double>(h) * w);
    tr.pooled.assign(c, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) tr.pooled[i % c] += t[i];
    for (auto& v : tr.pooled) v *= inv_hw;
    tr.merged = Tensor({h, w, 2 * c});
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t k = 0; k < c; ++k) {
          tr.merged.at(y, x, k) = t.at(y, x, k);
          tr.merged.at(y, x, c + k) = tr.pooled[k];
        }
      }
    }
    cur = &tr.merged;
  }
  tr.logits = conv_forward(*cur, classifier_);
  return tr;
}

Tensor Model::backward(const ForwardTrace& trace, const Tensor& dlogits,
                       ParamGrads* param_grads) const {
  require(dlogits.same_shape(trace.logits), "dlogits shape mismatch");
  const std::size_t nblocks = blocks_.size();
  Tensor* dw_cls = nullptr;
  std::vector<Scalar>* db_cls = nullptr;
  if (param_grads) {
    require(param_grads->weight.size() == nblocks + 1 &&
                param_grads->bias.size() == nblocks + 1,
            "param gradient buffers not sized for this model");
    dw_cls = &param_grads->weight[nblocks];
    db_cls = &param_grads->bias[nblocks];
  }

  const Tensor& cls_in = spec_.variant == Variant::global_context
                             ? trace.merged
                             : trace.block_out.back();
  Tensor d_cls_in = Tensor::zeros_like(cls_in);
  conv_backward(cls_in, classifier_, dlogits, &d_cls_in, dw_cls, db_cls);

  Tensor dcur;
  if (spec_.variant == Variant::global_context) {
    const Tensor& t = trace.block_out.back();
    const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
    const double inv_hw = 1.0 / (static_cast<double>(h) * w);
    dcur = Tensor({h, w, c});
    std::vector<double> dpooled(c, 0.0);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t k = 0; k < c; ++k) {
          dcur.at(y, x, k) = d_cls_in.at(y, x, k);
          dpooled[k] += d_cls_in.at(y, x, c + k);
        }
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t k = 0; k < c; ++k)
          dcur.at(y, x, k) += dpooled[k] * inv_hw;
  } else {
    dcur = std::move(d_cls_in);
  }

  for (std::size_t i = nblocks; i-- > 0;) {
    Tensor dpre = relu_backward(trace.block_pre[i], dcur);
    const Tensor& in = i == 0 ? trace.input : trace.block_out[i - 1];
    Tensor din = Tensor::zeros_like(in);
    Tensor* dw = param_grads ? &param_grads->weight[i] : nullptr;
    std::vector<Scalar>* db = param_grads ? &param_grads->bias[i] : nullptr;
    conv_backward(in, blocks_[i], dpre, &din, dw, db);
    dcur = std::move(din);
  }
  return dcur;
}

std::vector<Tensor*> Model::parameter_tensors() {
  std::vector<Tensor*> out;
  for (auto& b : blocks_) out.push_back(&b.weight);
  out.push_back(&classifier_.weight);
  return out;
}

std::vector<std::vector<Scalar>*> Model::parameter_biases() {
  std::vector<std::vector<Scalar>*> out;
  for (auto& b : blocks_) out.push_back(&b.bias);
  out.push_back(&classifier_.bias);
  return out;
}

Tensor softmax_per_pixel(const Tensor& logits) {
  const std::size_t hw = logits.dim(0) * logits.dim(1);
  const std::size_t k = logits.dim(2);
  Tensor probs = logits;
  Scalar* p = probs.data();
  for (std::size_t j = 0; j < hw; ++j, p += k) {
    double mx = p[0];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, p[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      p[c] = std::exp(p[c] - mx);
      sum += p[c];
    }
    for (std::size_t c = 0; c < k; ++c) p[c] /= sum;
  }
  return probs;
}

LabelMap argmax_labels(const Tensor& t) {
  const int h = static_cast<int>(t.dim(0));
  const int w = static_cast<int>(t.dim(1));
  const int k = static_cast<int>(t.dim(2));
  LabelMap labels(h, w);
  const Scalar* p = t.data();
  for (int j = 0; j < h * w; ++j, p += k) {
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (p[c] > p[best]) best = c;  // strict: ties keep the lowest index
    labels.v[j] = best;
  }
  return labels;
}

Prediction predict(const Model& model, const Tensor& image) {
  ForwardTrace tr = model.forward(image);
  Prediction pred;
  pred.probs = softmax_per_pixel(tr.logits);
  pred.labels = argmax_labels(pred.probs);
  pred.logits = std::move(tr.logits);
  return pred;
}

FeatureStack extract_features(const Model& model, const Tensor& image) {
  ForwardTrace tr = model.forward(image);
  FeatureStack stack;
  for (std::size_t i = 0; i < tr.block_out.size(); ++i)
    stack.layers.emplace_back("block_" + std::to_string(i + 1),
                              std::move(tr.block_out[i]));
  if (model.spec().variant == Variant::global_context)
    stack.layers.emplace_back("context_merge", std::move(tr.merged));
  stack.layers.emplace_back("classifier", std::move(tr.logits));
  return stack;
}

Tensor input_gradient(const Model& model, const Tensor& image, const LogitLossFn& fn) {
  ForwardTrace tr = model.forward(image);
  LogitLoss loss = fn(tr.logits);
  require(loss.dlogits.same_shape(tr.logits),
          "loss gradient shape does not match the logits (non-differentiable "
          "or mis-specified loss)");
  return model.backward(tr, loss.dlogits, nullptr);
}

void TrainConfig::validate() const {
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be positive");
}

namespace {

struct Adam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::vector<double>> m, v;
  long t = 0;

  void init(const std::vector<std::size_t>& sizes, double lr_) {
    lr = lr_;
    m.resize(sizes.size());
    v.resize(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      m[i].assign(sizes[i], 0.0);
      v[i].assign(sizes[i], 0.0);
    }
  }

  void step(std::size_t slot, Scalar* param, const Scalar* grad, std::size_t n,
            double bias1, double bias2) {
    auto& mi = m[slot];
    auto& vi = v[slot];
    for (std::size_t i = 0; i < n; ++i) {
      mi[i] = beta1 * mi[i] + (1.0 - beta1) * grad[i];
      vi[i] = beta2 * vi[i] + (1.0 - beta2) * grad[i] * grad[i];
      double mhat = mi[i] / bias1;
      double vhat = vi[i] / bias2;
      param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

// Mean pixel cross-entropy against ground truth plus its logit gradient.
double ce_loss_and_grad(const Tensor& logits, const LabelMap& labels, Tensor& dlogits) {
  Tensor probs = softmax_per_pixel(logits);
  const std::size_t hw = logits.dim(0) * logits.dim(1);
  const std::size_t k = logits.dim(2);
  const double inv = 1.0 / static_cast<double>(hw);
  dlogits = probs;
  double loss = 0.0;
  for (std::size_t j = 0; j < hw; ++j) {
    int y = labels.v[j];
    double p = std::max(probs[j * k + y], 1e-12);
    loss -= std::log(p);
    dlogits[j * k + y] -= 1.0;
  }
  for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits[i] *= inv;
  return loss * inv;
}

}  // namespace

TrainReport train_model(Model& model, const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  require(!dataset.splits.train.empty(), "empty train split");
  const int k = model.spec().num_classes;
  for (auto idx : dataset.splits.train) {
    require(idx < dataset.samples.size(), "train split index out of range");
    for (auto lbl : dataset.samples[idx].labels.v)
      require(lbl >= 0 && lbl < k, "dataset label >= num_classes");
  }

  auto weights = model.parameter_tensors();
  auto biases = model.parameter_biases();
  const std::size_t nparams = weights.size();

  Adam adam_w, adam_b;
  std::vector<std::size_t> wsizes, bsizes;
  for (auto* t : weights) wsizes.push_back(t->size());
  for (auto* b : biases) bsizes.push_back(b->size());
  adam_w.init(wsizes, cfg.learning_rate);
  adam_b.init(bsizes, cfg.learning_rate);
  long step_count = 0;

  TrainReport report;
  report.epochs = cfg.epochs;
  std::vector<std::size_t> order = dataset.splits.train;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(cfg.seed, 0x7EA1 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      ParamGrads grads;
      for (auto* t : weights) grads.weight.push_back(Tensor::zeros_like(*t));
      for (auto* b : biases) grads.bias.emplace_back(b->size(), 0.0);

      for (std::size_t i = start; i < stop; ++i) {
        const Sample& s = dataset.samples[order[i]];
        ForwardTrace tr = model.forward(s.image);
        Tensor dlogits;
        double loss = ce_loss_and_grad(tr.logits, s.labels, dlogits);
        require(std::isfinite(loss),
                "training diverged: non-finite loss at epoch " +
                    std::to_string(epoch) + ", sample " + std::to_string(order[i]));
        model.backward(tr, dlogits, &grads);
        epoch_loss += loss;
        ++seen;
      }
      double inv_batch = 1.0 / static_cast<double>(stop - start);
      ++step_count;
      double bias1 = 1.0 - std::pow(adam_w.beta1, step_count);
      double bias2 = 1.0 - std::pow(adam_w.beta2, step_count);
      for (std::size_t p = 0; p < nparams; ++p) {
        for (std::size_t i = 0; i < grads.weight[p].size(); ++i)
          grads.weight[p][i] *= inv_batch;
        for (auto& g : grads.bias[p]) g *= inv_batch;
        adam_w.step(p, weights[p]->data(), grads.weight[p].data(),
                    weights[p]->size(), bias1, bias2);
        adam_b.step(p, biases[p]->data(), grads.bias[p].data(), biases[p]->size(),
                    bias1, bias2);
      }
    }
    report.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(seen));
  }

  const auto& eval_split =
      dataset.splits.val.empty() ? dataset.splits.train : dataset.splits.val;
  BinaryMask everywhere(dataset.samples[eval_split[0]].labels.h,
                        dataset.samples[eval_split[0]].labels.w, 1);
  double miou_sum = 0.0;
  for (auto idx : eval_split) {
    const Sample& s = dataset.samples[idx];
    Prediction pred = predict(model, s.image);
    miou_sum += miou(pred.labels, s.labels, everywhere, k);
  }
  report.final_val_miou = miou_sum / static_cast<double>(eval_split.size());
  return report;
}

void Model::save(const std::filesystem::path& path, const std::string& extra_json) const {
  json spec_json{{"variant", variant_name(spec_.variant)},
                 {"num_classes", spec_.num_classes},
                 {"channel_widths", spec_.channel_widths},
                 {"kernel_size", spec_.kernel_size},
                 {"dilations", spec_.dilations},
                 {"seed", spec_.seed}};
  json manifest{{"type", "segattack_model"},
                {"version", kVersion},
                {"spec", spec_json},
                {"extra", json::parse(extra_json)}};
  Checkpoint ck;
  ck.manifest_json = manifest.dump(2);
  auto add_layer = [&ck](const std::string& prefix, const ConvLayer& layer) {
    ck.tensors.emplace_back(prefix + "_weight", layer.weight);
    Tensor b({layer.bias.size()});
    for (std::size_t i = 0; i < layer.bias.size(); ++i) b[i] = layer.bias[i];
    ck.tensors.emplace_back(prefix + "_bias", b);
  };
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    add_layer("block_" + std::to_string(i + 1), blocks_[i]);
  add_layer("classifier", classifier_);
  ck.save(path);
}

Model Model::load(const std::filesystem::path& path) {
  Checkpoint ck = Checkpoint::load(path);
  json manifest = json::parse(ck.manifest_json);
  require(manifest.at("type").get<std::string>() == "segattack_model",
          "not a model checkpoint: " + path.string());
  const auto& sj = manifest.at("spec");
  ModelSpec spec;
  spec.variant = variant_from_name(sj.at("variant").get<std::string>());
  spec.num_classes = sj.at("num_classes").get<int>();
  spec.channel_widths = sj.at("channel_widths").get<std::vector<int>>();
  spec.kernel_size = sj.at("kernel_size").get<int>();
  spec.dilations = sj.at("dilations").get<std::vector<int>>();
  spec.seed = sj.at("seed").get<std::uint64_t>();

  Model model(spec);
  auto load_layer = [&ck](const std::string& prefix, ConvLayer& layer) {
    layer.weight = ck.tensor(prefix + "_weight");
    const Tensor& b = ck.tensor(prefix + "_bias");
    require(b.size() == layer.bias.size(), "bias size mismatch in checkpoint");
    for (std::size_t i = 0; i < b.size(); ++i) layer.bias[i] = b[i];
  };
  for (std::size_t i = 0; i < model.blocks_.size(); ++i)
    load_layer("block_" + std::to_string(i + 1), model.blocks_[i]);
  load_layer("classifier", model.classifier_);
  return model;
}

}  // namespace segattack
