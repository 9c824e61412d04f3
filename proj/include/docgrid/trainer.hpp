#ifndef DOCGRID_TRAINER_HPP
#define DOCGRID_TRAINER_HPP

// Mini-batch SGD with momentum, step learning-rate decay, periodic
// validation and best-checkpoint retention.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "docgrid/checkpoint.hpp"
#include "docgrid/inference.hpp"
#include "docgrid/pipeline.hpp"

namespace docgrid {

struct TrainConfig {
  int batch_size = 32;
  long total_updates = 500000;
  double base_lr = 0.003;
  long lr_step = 150000;
  double lr_decay = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  Preprocess preprocess;
  Augmentation augmentation;
  std::vector<int> scales;  // multi-scale training sizes; empty for fixed size
  double fraction = 1.0;    // share of the training split used
  long val_interval = 500;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (total_updates < 1) throw ConfigError("total_updates must be >= 1");
    if (!(base_lr > 0)) throw ConfigError("base_lr must be > 0");
    if (lr_step < 1) throw ConfigError("lr_step must be >= 1");
    if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("lr_decay must be in (0, 1]");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
    if (!(fraction > 0 && fraction <= 1)) throw ConfigError("fraction must be in (0, 1]");
    if (val_interval < 1) throw ConfigError("val_interval must be >= 1");
    for (int s : scales)
      if (s < 1) throw ConfigError("scales must be positive");
    if (preprocess.input_h < 1 || preprocess.input_w < 1) throw ConfigError("input size must be positive");
    preprocess.representation.validate();
    preprocess.ar.validate();
    for (const auto& t : augmentation.transforms) t.validate();
  }
  bool operator==(const TrainConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},       {"total_updates", c.total_updates}, {"base_lr", c.base_lr},
       {"lr_step", c.lr_step},             {"lr_decay", c.lr_decay},           {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},   {"seed", c.seed},                   {"augmentation", c.augmentation},
       {"scales", c.scales},               {"fraction", c.fraction},           {"val_interval", c.val_interval}};
}

// Preprocessing lives elsewhere in experiment configs; missing keys keep defaults.
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  const Preprocess pp = c.preprocess;
  c = TrainConfig{};
  c.preprocess = pp;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("batch_size", c.batch_size);
  opt("total_updates", c.total_updates);
  opt("base_lr", c.base_lr);
  opt("lr_step", c.lr_step);
  opt("lr_decay", c.lr_decay);
  opt("momentum", c.momentum);
  opt("weight_decay", c.weight_decay);
  opt("seed", c.seed);
  opt("augmentation", c.augmentation);
  opt("scales", c.scales);
  opt("fraction", c.fraction);
  opt("val_interval", c.val_interval);
}

// Schedules of the large-scale runs: RVL-CDIP and ANDOC.
inline TrainConfig rvlcdip_profile() {
  TrainConfig c;
  c.batch_size = 32;
  c.total_updates = 500000;
  c.base_lr = 0.003;
  c.lr_step = 150000;
  c.lr_decay = 0.1;
  return c;
}

inline TrainConfig andoc_profile() {
  TrainConfig c;
  c.batch_size = 128;
  c.total_updates = 250000;
  c.base_lr = 0.005;
  c.lr_step = 100000;
  c.lr_decay = 0.1;
  return c;
}

inline double lr_at(long update, const TrainConfig& c) {
  if (update < 0) throw InvalidArgument("update index must be >= 0");
  return c.base_lr * std::pow(c.lr_decay, static_cast<double>(update / c.lr_step));
}

// ------------------------------------------------------------------ SGD

struct SgdState {
  std::vector<Tensor> velocity;  // one per trainable tensor, created on first step
};

namespace detail {

struct Trainable {
  Tensor* param;
  const Tensor* grad;
  bool decay;
};

inline std::vector<Trainable> trainables(Model& m, const BackwardResult& g) {
  if (g.params.size() != m.params.size()) throw InvalidArgument("gradient list does not match the model");
  std::vector<Trainable> v;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    auto& p = m.params[i];
    const auto& gp = g.params[i];
    if (!p.weight.empty()) v.push_back({&p.weight, &gp.weight, true});
    if (!p.bias.empty()) v.push_back({&p.bias, &gp.bias, false});
    if (p.bn) {
      v.push_back({&p.bn->gamma, &gp.gamma, false});
      v.push_back({&p.bn->beta, &gp.beta, false});
    }
  }
  for (const auto& t : v)
    if (t.grad->shape() != t.param->shape())
      throw InvalidArgument("gradient " + shape_str(t.grad->shape()) + " does not match parameter " +
                            shape_str(t.param->shape()));
  return v;
}

}  // namespace detail

/**
 * v <- mu v - lr (g + lambda w); w <- w + v. Weight decay applies to conv
 * and fc weights only (not biases or batchnorm scale/shift).
 */
inline void sgd_step(Model& m, const BackwardResult& grads, double lr, double momentum, double weight_decay,
                     SgdState& state) {
  const auto ts = detail::trainables(m, grads);
  if (state.velocity.empty())
    for (const auto& t : ts) state.velocity.emplace_back(t.param->shape());
  if (state.velocity.size() != ts.size()) throw InvalidArgument("optimizer state does not match the model");
  for (std::size_t k = 0; k < ts.size(); ++k) {
    Tensor& w = *ts[k].param;
    const Tensor& g = *ts[k].grad;
    Tensor& v = state.velocity[k];
    const double lambda = ts[k].decay ? weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = static_cast<float>(momentum * v[i] - lr * (g[i] + lambda * w[i]));
      w[i] += v[i];
    }
  }
}

// ---------------------------------------------------------------- log

struct TrainRecord {
  long update = 0;  // updates completed
  double loss = 0;  // mean training loss since the previous record
  double val_accuracy = 0;
  bool operator==(const TrainRecord&) const = default;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  long best_update = -1;

  double best_accuracy() const {
    double b = 0;
    for (const auto& r : records) b = std::max(b, r.val_accuracy);
    return b;
  }
  std::string csv() const {
    std::string out = "update,loss,val_accuracy\n";
    char buf[96];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f\n", r.update, r.loss, r.val_accuracy);
      out += buf;
    }
    return out;
  }
};

struct TrainResult {
  TrainLog log;
  Checkpoint best;
  Preprocess preprocess;  // with channel means
};

struct TrainHooks {
  std::function<void(const TrainRecord&)> on_record;
};

// Indices of the first ceil(f N) items of a seeded shuffle of [0, N).
inline std::vector<std::size_t> fraction_subset(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw InvalidArgument("fraction must be in (0, 1]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (fraction >= 1) return idx;
  std::mt19937_64 rng(sample_seed(seed, 0xf7ac7105ull, 0));
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  idx.resize(std::max<std::size_t>(1, keep));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

// Epoch-wise reshuffled stream of training indices.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) { reshuffle(); }
  std::vector<std::size_t> next(int batch) {
    std::vector<std::size_t> out;
    while (static_cast<int>(out.size()) < batch) {
      if (pos_ == order_.size()) {
        ++epoch_;
        reshuffle();
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    std::mt19937_64 rng(sample_seed(seed_, epoch_, 0xe90c4ull));
    std::shuffle(order_.begin(), order_.end(), rng);
    pos_ = 0;
  }
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

inline void add_scaled(BackwardResult& acc, const BackwardResult& g, float s) {
  auto axpy = [s](Tensor& a, const Tensor& b) {
    if (b.empty()) return;
    if (a.empty()) a = Tensor(b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
  };
  if (acc.params.empty()) acc.params.resize(g.params.size());
  for (std::size_t i = 0; i < g.params.size(); ++i) {
    axpy(acc.params[i].weight, g.params[i].weight);
    axpy(acc.params[i].bias, g.params[i].bias);
    axpy(acc.params[i].gamma, g.params[i].gamma);
    axpy(acc.params[i].beta, g.params[i].beta);
  }
}

}  // namespace detail

/**
 * One mini-batch step on prepared samples: forward in train mode, softmax
 * cross-entropy, backward. Samples of different shapes (variable aspect or
 * mixed scales) form separate groups whose gradients are combined with
 * weights proportional to group size. Returns the mean loss.
 */
inline double batch_gradients(Model& m, const std::vector<Tensor>& samples, const std::vector<int>& labels,
                              std::uint64_t dropout_seed, BackwardResult& grads) {
  std::map<Shape, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].shape()].push_back(i);
  grads = BackwardResult{};
  double loss = 0;
  std::uint64_t g = 0;
  for (const auto& [shape, idx] : groups) {
    std::vector<Tensor> items;
    std::vector<int> y;
    for (std::size_t i : idx) items.push_back(samples[i]), y.push_back(labels[i]);
    const Tensor batch = stack_batch(items);
    std::mt19937_64 rng(sample_seed(dropout_seed, g++, 0xd509ull));
    auto fp = forward(m, batch, Mode::train, &rng);
    const auto& logits = fp.outputs[fp.outputs.size() - 2];
    const auto sx = softmax_xent(logits, y);
    const float w = static_cast<float>(idx.size()) / static_cast<float>(samples.size());
    loss += w * sx.loss;
    auto bw = backward(m, fp, softmax_xent_grad(sx.probs, y));
    detail::add_scaled(grads, bw, w);
  }
  return loss;
}

/**
 * Trains `model` in place for exactly total_updates steps and returns the
 * log plus the checkpoint with the best validation accuracy (earliest on
 * ties). Deterministic given the config: per-sample randomness is seeded
 * from (seed, update, slot), independent of thread count.
 */
inline TrainResult train(Model& model, const ImageSet& train_split, const ImageSet& val_split, TrainConfig cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (train_split.empty()) throw InvalidArgument("training split is empty");
  if (val_split.empty()) throw InvalidArgument("validation split is empty");
  if (!cfg.scales.empty() && !model.spec.has_spp()) throw ConfigError("multi-scale training needs an SPP model");
  if (cfg.preprocess.ar.kind == ARKind::variable && !model.spec.has_spp())
    throw ConfigError("variable aspect-ratio policy needs an SPP model");
  if (cfg.preprocess.channels() != model.spec.channels)
    throw InvalidArgument("preprocessing yields " + std::to_string(cfg.preprocess.channels()) +
                          " channels but the model expects " + std::to_string(model.spec.channels));

  const ImageSet train_set = train_split.subset(fraction_subset(train_split.size(), cfg.fraction, cfg.seed));
  Preprocess pp = cfg.preprocess;
  pp.channel_means = compute_channel_means(train_set, pp);

  TrainResult result;
  result.preprocess = pp;
  SgdState sgd;
  detail::BatchStream stream(train_set.size(), cfg.seed);
  double interval_loss = 0;
  long interval_steps = 0;
  bool have_best = false;

  for (long u = 0; u < cfg.total_updates; ++u) {
    const auto idx = stream.next(cfg.batch_size);
    int h = pp.input_h, w = pp.input_w;
    if (!cfg.scales.empty()) {
      std::mt19937_64 srng(sample_seed(cfg.seed, static_cast<std::uint64_t>(u), 0x5ca1eull));
      h = w = sample_scale(cfg.scales, srng);
    }
    std::vector<Tensor> samples(idx.size());
    std::vector<int> labels(idx.size());
    parallel_for(0, idx.size(), [&](std::size_t k) {
      samples[k] = training_sample(*train_set.image(idx[k]), pp, cfg.augmentation, h, w,
                                   sample_seed(cfg.seed, static_cast<std::uint64_t>(u), k + 1));
      labels[k] = train_set.label(idx[k]);
    });
    BackwardResult grads;
    const double loss = batch_gradients(model, samples, labels, sample_seed(cfg.seed, static_cast<std::uint64_t>(u), 0), grads);
    if (!std::isfinite(loss))
      throw DivergedTraining(u, "training diverged at update " + std::to_string(u) + " (non-finite loss)");
    sgd_step(model, grads, lr_at(u, cfg), cfg.momentum, cfg.weight_decay, sgd);
    interval_loss += loss;
    ++interval_steps;

    if ((u + 1) % cfg.val_interval == 0 || u + 1 == cfg.total_updates) {
      TrainRecord rec{u + 1, interval_loss / static_cast<double>(interval_steps),
                      evaluate(model, val_split, pp).accuracy};
      interval_loss = 0;
      interval_steps = 0;
      result.log.records.push_back(rec);
      if (!have_best || rec.val_accuracy > result.best.meta.val_accuracy) {
        have_best = true;
        result.log.best_update = rec.update;
        result.best.model = model;
        result.best.meta.updates = rec.update;
        result.best.meta.val_accuracy = rec.val_accuracy;
        result.best.meta.seed = cfg.seed;
        result.best.meta.extra = {{"preprocess", pp}};
      }
      if (hooks.on_record) hooks.on_record(rec);
    }
  }
  return result;
}

// train() with per-batch input sizes drawn from cfg.scales; needs SPP.
inline TrainResult train_multiscale(Model& model, const ImageSet& train_split, const ImageSet& val_split,
                                    const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  if (!model.spec.has_spp()) throw ConfigError("multi-scale training needs an SPP model");
  if (cfg.scales.empty()) throw ConfigError("multi-scale training needs a non-empty scale range");
  return train(model, train_split, val_split, cfg, hooks);
}

// Preprocessing stored with a checkpoint by train().
inline Preprocess checkpoint_preprocess(const Checkpoint& ck) {
  if (!ck.meta.extra.contains("preprocess")) throw FormatError("checkpoint carries no preprocessing record");
  return ck.meta.extra.at("preprocess").get<Preprocess>();
}

}  // namespace docgrid

#endif  // DOCGRID_TRAINER_HPP
