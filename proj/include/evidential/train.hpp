#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evidential/data.hpp"
#include "evidential/error.hpp"
#include "evidential/feature_net.hpp"
#include "evidential/init.hpp"
#include "evidential/model.hpp"
#include "evidential/optim.hpp"
#include "evidential/params.hpp"

namespace evidential {

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t patience = 10;
  double lr_factor = 0.1;
  double min_lr = 1e-6;
  double lambda = 0.0;
  LossKind loss = LossKind::Sse;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamSettings adam;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;  // 0: full batch
  bool train_features = true;
  bool train_layer = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_error = 0.0;
  double val_error = 0.0;
  double mean_ignorance = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

inline void write_history_csv(std::ostream& os, const TrainHistory& h) {
  os << "epoch,loss,train_err,val_err,mean_ignorance\n";
  auto old = os.precision(17);
  for (const auto& r : h.records)
    os << r.epoch << ',' << r.loss << ',' << r.train_error << ',' << r.val_error << ',' << r.mean_ignorance << '\n';
  os.precision(old);
}

struct TrainResult {
  Model model;
  TrainHistory history;
  std::size_t best_epoch = 0;  // 0: the initial parameters were kept
};

namespace detail {

inline void check_config(const TrainConfig& c) {
  require(c.learning_rate > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
  require(c.lambda >= 0.0, ErrorCode::InvalidArgument, "lambda must be nonnegative");
  require(c.train_features || c.train_layer, ErrorCode::InvalidArgument, "nothing to train");
}

inline LabeledSet subset(const LabeledSet& set, std::span<const std::size_t> rows) {
  LabeledSet out{Matrix(rows.size(), set.dim()), std::vector<int>(rows.size()), set.seed};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(set.points.row(rows[r]).begin(), set.dim(), out.points.row(r).begin());
    out.labels[r] = set.labels[rows[r]];
  }
  return out;
}

// Splits the sample indices into minibatches (one batch when batch_size == 0).
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (batch_size == 0 || batch_size >= n) return {order};
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(std::min(n, start + batch_size)));
  return batches;
}

}  // namespace detail

/// Gradient-based training of a model on a labeled set. Returns the
/// parameters with the lowest validation objective (training objective when
/// no validation set is given) among all visited parameter vectors.
inline TrainResult train(const Model& initial, const LabeledSet& data, const LabeledSet* validation,
                         const TrainConfig& config) {
  detail::check_config(config);
  TrainResult result{initial, {}, 0};
  if (config.epochs == 0) return result;

  Model model = initial;
  std::vector<double> params = flatten(model);
  const std::size_t feature_count = feature_parameter_count(model);
  const std::size_t begin = config.train_features ? 0 : feature_count;
  const std::size_t end = config.train_layer ? params.size() : feature_count;
  detail::require(begin < end, ErrorCode::InvalidArgument, "no trainable parameters selected");

  Optimizer opt(config.optimizer, end - begin, config.adam);
  ReduceOnPlateau schedule(config.learning_rate, config.patience, config.lr_factor, config.min_lr);
  std::mt19937_64 rng(config.seed);

  double best_score = std::numeric_limits<double>::infinity();
  auto consider = [&](double score, std::size_t epoch) {
    if (score < best_score) {
      best_score = score;
      result.model = model;
      result.best_epoch = epoch;
    }
  };
  auto selection_score = [&](const Evaluation& train_eval, const Evaluation* val_eval) {
    return val_eval ? val_eval->loss : train_eval.loss;
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Evaluation full = evaluate(model, data.points, data.labels, config.loss, config.lambda, config.batch_size == 0);
    if (!std::isfinite(full.loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": loss is " + std::to_string(full.loss));
    }
    std::optional<Evaluation> val;
    if (validation) val = evaluate(model, validation->points, validation->labels, config.loss, config.lambda, false);
    // The parameters visited at the start of epoch e are the result of epoch e - 1.
    consider(selection_score(full, val ? &*val : nullptr), epoch - 1);

    result.history.records.push_back({epoch, full.loss, full.error_rate, val ? val->error_rate : full.error_rate,
                                      full.mean_ignorance});

    const double lr = schedule.learning_rate();
    if (config.batch_size == 0) {
      opt.step(std::span(params).subspan(begin, end - begin), std::span(full.grad).subspan(begin, end - begin), lr);
      unflatten(model, params);
    } else {
      for (const auto& rows : detail::make_batches(data.size(), config.batch_size, rng)) {
        const auto batch = detail::subset(data, rows);
        const auto ev = evaluate(model, batch.points, batch.labels, config.loss, config.lambda, true);
        if (!std::isfinite(ev.loss)) throw Error(ErrorCode::NonFiniteLoss, "minibatch loss is not finite");
        opt.step(std::span(params).subspan(begin, end - begin), std::span(ev.grad).subspan(begin, end - begin), lr);
        unflatten(model, params);
      }
    }
    schedule.observe(full.loss);
  }

  const auto last = evaluate(model, data.points, data.labels, config.loss, config.lambda, false);
  if (std::isfinite(last.loss)) {
    std::optional<Evaluation> val;
    if (validation) val = evaluate(model, validation->points, validation->labels, config.loss, config.lambda, false);
    consider(selection_score(last, val ? &*val : nullptr), config.epochs);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Softmax pretraining of the feature network (first initialization stage).

struct SoftmaxClassifier {
  MlpParams features;
  SoftmaxHead head;
};

template <class P, class F>
  requires std::same_as<std::remove_const_t<P>, SoftmaxClassifier>
void for_each_tensor(P& m, F&& f) {
  for_each_tensor(m.features, f);
  for_each_tensor(m.head, f);
}

/// Cross-entropy of a softmax classifier summed over samples.
inline double softmax_objective(const SoftmaxClassifier& m, const LabeledSet& data, std::vector<double>* grad,
                                double* error = nullptr) {
  const std::size_t K = m.head.num_classes();
  double loss = 0.0;
  std::size_t wrong = 0;
  if (grad) grad->assign(parameter_count(m), 0.0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto f = mlp_forward(m.features, data.points.row(n));
    const auto probs = softmax_head_forward(m.head, f.feature);
    const auto y = static_cast<std::size_t>(data.labels[n]);
    detail::require(y < K, ErrorCode::OutOfRange, "label outside the softmax head");
    loss -= std::log(std::max(probs[y], kProbabilityClamp));
    if (static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin()) != y) ++wrong;
    if (!grad) continue;
    std::vector<double> d_logits = probs;
    d_logits[y] -= 1.0;
    const auto hg = softmax_head_backward(m.head, f.feature, d_logits);
    const auto fg = mlp_backward(m.features, f.cache, hg.feature);
    auto flat = flatten(fg.params);
    const auto head_flat = flatten(hg.head);
    flat.insert(flat.end(), head_flat.begin(), head_flat.end());
    for (std::size_t i = 0; i < flat.size(); ++i) (*grad)[i] += flat[i];
  }
  if (error) *error = static_cast<double>(wrong) / static_cast<double>(std::max<std::size_t>(1, data.size()));
  return loss;
}

struct SoftmaxTrainResult {
  SoftmaxClassifier model;
  TrainHistory history;
};

inline SoftmaxTrainResult pretrain_softmax(SoftmaxClassifier model, const LabeledSet& data, const TrainConfig& config) {
  detail::check_config(config);
  SoftmaxTrainResult result{model, {}};
  std::vector<double> params = flatten(model);
  Optimizer opt(config.optimizer, params.size(), config.adam);
  ReduceOnPlateau schedule(config.learning_rate, config.patience, config.lr_factor, config.min_lr);
  std::mt19937_64 rng(config.seed);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> grad;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double err = 0.0;
    const double loss = softmax_objective(model, data, config.batch_size == 0 ? &grad : nullptr, &err);
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "softmax pretraining diverged");
    if (loss < best) {
      best = loss;
      result.model = model;
    }
    result.history.records.push_back({epoch, loss, err, err, 0.0});
    const double lr = schedule.learning_rate();
    if (config.batch_size == 0) {
      opt.step(params, grad, lr);
      unflatten(model, params);
    } else {
      for (const auto& rows : detail::make_batches(data.size(), config.batch_size, rng)) {
        softmax_objective(model, detail::subset(data, rows), &grad);
        opt.step(params, grad, lr);
        unflatten(model, params);
      }
    }
    schedule.observe(loss);
  }
  if (config.epochs > 0 && softmax_objective(model, data, nullptr) < best) result.model = model;
  return result;
}

// ---------------------------------------------------------------------------
// Four-stage k-means initialization of a feature network + evidential layer.

struct Architecture {
  std::vector<std::size_t> feature_sizes{2, 16, 2};  // D_in, hidden..., H
  LayerKind layer = LayerKind::Enn;
  std::size_t prototypes = 6;
  std::size_t classes = 2;
};

struct FourStageConfig {
  TrainConfig pretrain;     // stage 1: feature net + softmax head
  TrainConfig layer_only;   // stage 3: evidential layer on frozen features
  TrainConfig finetune;     // stage 4: whole model, small learning rate
  std::uint64_t seed = 0;

  /// Learning rates 1e-3, 1e-2 and 1e-4 for stages 1, 3 and 4.
  static FourStageConfig defaults(LayerKind layer, double lambda, std::size_t epochs_per_stage = 100) {
    FourStageConfig c;
    for (TrainConfig* t : {&c.pretrain, &c.layer_only, &c.finetune}) {
      t->epochs = epochs_per_stage;
      t->lambda = lambda;
      t->loss = default_loss(layer);
    }
    c.pretrain.learning_rate = 1e-3;
    c.layer_only.learning_rate = 1e-2;
    c.layer_only.train_features = false;
    c.finetune.learning_rate = 1e-4;
    return c;
  }
};

struct FourStageResult {
  Model model;                    // after stage 4
  SoftmaxClassifier pretrained;   // after stage 1
  Matrix stage1_features;         // training features after stage 1
  Model initialized;              // after stage 2 (k-means prototypes)
  Model layer_trained;            // after stage 3
  TrainHistory stage1, stage3, stage4;
};

inline Matrix extract_features(const MlpParams& net, const Matrix& points) {
  Matrix out(points.rows, net.output_dim());
  for (std::size_t n = 0; n < points.rows; ++n) {
    const auto f = mlp_forward(net, points.row(n));
    std::copy(f.feature.begin(), f.feature.end(), out.row(n).begin());
  }
  return out;
}

inline Model init_layer_kmeans(LayerKind kind, const Matrix& features, std::span<const int> labels, std::size_t I,
                               std::size_t K, std::uint64_t seed) {
  if (kind == LayerKind::Enn) return Model{std::nullopt, enn_init_kmeans(features, labels, I, K, seed)};
  detail::require(K == 2, ErrorCode::InvalidArgument, "the RBF layer is binary");
  return Model{std::nullopt, rbf_init_kmeans(features, labels, I, seed)};
}

inline Model init_layer_random(LayerKind kind, std::size_t I, std::size_t H, std::size_t K, std::uint64_t seed) {
  if (kind == LayerKind::Enn) return Model{std::nullopt, enn_init_random(I, H, K, seed)};
  detail::require(K == 2, ErrorCode::InvalidArgument, "the RBF layer is binary");
  return Model{std::nullopt, rbf_init_random(I, H, seed)};
}

/// Feature network and evidential layer, both randomly initialized.
inline Model init_model_random(const Architecture& arch, std::uint64_t seed) {
  Model m = init_layer_random(arch.layer, arch.prototypes, arch.feature_sizes.back(), arch.classes, seed + 1);
  m.features = mlp_init(arch.feature_sizes, seed);
  return m;
}

inline FourStageResult four_stage_init(const LabeledSet& data, const Architecture& arch, const FourStageConfig& config,
                                       const LabeledSet* validation = nullptr) {
  detail::require(data.dim() == arch.feature_sizes.front(), ErrorCode::DimensionMismatch,
                  "data dimension does not match the feature network input");
  FourStageResult r;

  SoftmaxClassifier start{mlp_init(arch.feature_sizes, config.seed),
                          softmax_head_init(arch.feature_sizes.back(), arch.classes, config.seed + 1)};
  auto stage1 = pretrain_softmax(start, data, config.pretrain);
  r.pretrained = stage1.model;
  r.stage1 = std::move(stage1.history);

  r.stage1_features = extract_features(r.pretrained.features, data.points);
  r.initialized = init_layer_kmeans(arch.layer, r.stage1_features, data.labels, arch.prototypes, arch.classes,
                                    config.seed + 2);
  r.initialized.features = r.pretrained.features;

  auto stage3 = train(r.initialized, data, validation, config.layer_only);
  r.layer_trained = stage3.model;
  r.stage3 = std::move(stage3.history);

  auto stage4 = train(r.layer_trained, data, validation, config.finetune);
  r.model = stage4.model;
  r.stage4 = std::move(stage4.history);
  return r;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks.

/// Absolute floor in the relative-error denominator, so that components
/// whose true value is ~0 are compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-6;

/// Worst relative error |a - n| / max(|a|, |n|, floor) over all coordinates,
/// with n the central difference of `objective` at x.
template <class F>
double grad_check(F&& objective, std::span<const double> x, std::span<const double> analytic, double eps = 1e-6,
                  double floor = kGradCheckFloor) {
  detail::require(x.size() == analytic.size(), ErrorCode::ShapeMismatch, "gradient length mismatch");
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = objective(std::span<const double>(probe));
    probe[i] = saved - eps;
    const double down = objective(std::span<const double>(probe));
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

/// Checks every parameter of `model` against the objective on `sample`.
inline double grad_check(const Model& model, const LabeledSet& sample, LossKind loss, double lambda,
                         double eps = 1e-6) {
  const auto analytic = evaluate(model, sample.points, sample.labels, loss, lambda, true).grad;
  Model probe = model;
  auto objective = [&](std::span<const double> p) {
    unflatten(probe, p);
    return evaluate(probe, sample.points, sample.labels, loss, lambda, false).loss;
  };
  const auto x = flatten(model);
  return grad_check(objective, x, analytic, eps);
}

}  // namespace evidential
