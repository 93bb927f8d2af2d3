#pragma once

// A classifier is an optional feature network followed by an evidential
// layer (ENN or RBF). This header wires forward/backward through both and
// evaluates batch objectives over labeled samples.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "evidential/enn.hpp"
#include "evidential/error.hpp"
#include "evidential/feature_net.hpp"
#include "evidential/linalg.hpp"
#include "evidential/losses.hpp"
#include "evidential/params.hpp"
#include "evidential/rbf.hpp"

namespace evidential {

enum class LayerKind { Enn, Rbf };
enum class LossKind { Sse, CrossEntropy, Dice };

using EvidentialLayer = std::variant<EnnParams, RbfParams>;

struct Model {
  std::optional<MlpParams> features;
  EvidentialLayer layer;

  LayerKind kind() const { return std::holds_alternative<EnnParams>(layer) ? LayerKind::Enn : LayerKind::Rbf; }
  std::size_t num_classes() const {
    return std::visit([](const auto& l) { return l.num_classes(); }, layer);
  }
  std::size_t layer_input_dim() const {
    return std::visit([](const auto& l) { return l.dim(); }, layer);
  }
  std::size_t input_dim() const { return features ? features->input_dim() : layer_input_dim(); }

  bool operator==(const Model&) const = default;
};

template <class P, class F>
  requires std::same_as<std::remove_const_t<P>, Model>
void for_each_tensor(P& m, F&& f) {
  if (m.features) for_each_tensor(*m.features, f);
  std::visit([&](auto& layer) { for_each_tensor(layer, f); }, m.layer);
}

inline std::size_t feature_parameter_count(const Model& m) { return m.features ? parameter_count(*m.features) : 0; }

inline std::string_view to_string(LayerKind k) { return k == LayerKind::Enn ? "enn" : "rbf"; }
inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::Sse: return "sse";
    case LossKind::CrossEntropy: return "ce";
    case LossKind::Dice: return "dice";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  if (s == "enn") return LayerKind::Enn;
  if (s == "rbf") return LayerKind::Rbf;
  throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(s) + "'");
}

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "sse") return LossKind::Sse;
  if (s == "ce" || s == "cross-entropy") return LossKind::CrossEntropy;
  if (s == "dice") return LossKind::Dice;
  throw Error(ErrorCode::InvalidArgument, "unknown loss '" + std::string(s) + "'");
}

/// The loss each layer was introduced with: sum of squares for ENN, cross-entropy for RBF.
inline LossKind default_loss(LayerKind k) { return k == LayerKind::Enn ? LossKind::Sse : LossKind::CrossEntropy; }

struct ModelForward {
  std::optional<MlpForward> features;
  std::variant<EnnOutput, RbfOutput> layer;
  std::vector<double> mass;  // singletons, then the frame
  double p1 = 0.5;           // normalized plausibility of w1 (binary frames)
};

/// Pignistic probabilities from a singletons-plus-frame mass vector.
inline std::vector<double> pignistic_from_mass(std::span<const double> mass) {
  const std::size_t K = mass.size() - 1;
  std::vector<double> p(K);
  for (std::size_t k = 0; k < K; ++k) p[k] = mass[k] + mass[K] / static_cast<double>(K);
  return p;
}

inline std::size_t predict_from_mass(std::span<const double> mass) {
  const auto p = pignistic_from_mass(mass);
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

inline ModelForward model_forward(const Model& model, std::span<const double> x) {
  ModelForward f;
  std::span<const double> input = x;
  if (model.features) {
    f.features = mlp_forward(*model.features, x);
    input = f.features->feature;
  }
  if (const auto* enn = std::get_if<EnnParams>(&model.layer)) {
    auto out = enn_forward(*enn, input);
    f.mass = out.mass;
    if (f.mass.size() == 3) {
      const double pl1 = f.mass[0] + f.mass[2];
      const double pl2 = f.mass[1] + f.mass[2];
      f.p1 = pl1 / (pl1 + pl2);
    }
    f.layer = std::move(out);
  } else {
    auto out = rbf_forward(std::get<RbfParams>(model.layer), input);
    f.mass.assign(out.mass.begin(), out.mass.end());
    f.p1 = out.p1;
    f.layer = std::move(out);
  }
  return f;
}

/// Flat gradient (same layout as flatten(model)) given dL/dmass and dL/dp1.
inline std::vector<double> model_backward(const Model& model, const ModelForward& f, std::span<const double> d_mass,
                                          double d_p1) {
  std::vector<double> layer_grad;
  std::vector<double> d_input;
  if (const auto* enn = std::get_if<EnnParams>(&model.layer)) {
    std::vector<double> upstream(d_mass.begin(), d_mass.end());
    if (d_p1 != 0.0) {
      detail::require(upstream.size() == 3, ErrorCode::InvalidArgument, "p1 gradients need a binary frame");
      const double pl1 = f.mass[0] + f.mass[2];
      const double pl2 = f.mass[1] + f.mass[2];
      const double total = (pl1 + pl2) * (pl1 + pl2);
      const double d_pl1 = d_p1 * pl2 / total;
      const double d_pl2 = -d_p1 * pl1 / total;
      upstream[0] += d_pl1;
      upstream[1] += d_pl2;
      upstream[2] += d_pl1 + d_pl2;
    }
    auto g = enn_backward(*enn, std::get<EnnOutput>(f.layer), upstream);
    layer_grad = flatten(g.params);
    d_input = std::move(g.input);
  } else {
    const auto& rbf = std::get<RbfParams>(model.layer);
    const auto& out = std::get<RbfOutput>(f.layer);
    auto g = rbf_backward(rbf, out, MassUpstream{{d_mass[0], d_mass[1], d_mass[2]}});
    if (d_p1 != 0.0) {
      auto gp = rbf_backward(rbf, out, PlausibilityUpstream{d_p1});
      auto a = flatten(g.params);
      const auto b = flatten(gp.params);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      unflatten(g.params, a);
      for (std::size_t h = 0; h < g.input.size(); ++h) g.input[h] += gp.input[h];
    }
    layer_grad = flatten(g.params);
    d_input = std::move(g.input);
  }

  if (!model.features) return layer_grad;
  auto fg = mlp_backward(*model.features, f.features->cache, d_input);
  auto grad = flatten(fg.params);
  grad.insert(grad.end(), layer_grad.begin(), layer_grad.end());
  return grad;
}

/// R = sum alpha_i for ENN and sum v_i^2 for RBF, with its flat gradient.
inline double layer_regularizer(const Model& model, std::vector<double>* grad = nullptr) {
  const std::size_t offset = feature_parameter_count(model);
  double value = 0.0;
  if (const auto* enn = std::get_if<EnnParams>(&model.layer)) {
    const std::size_t I = enn->num_prototypes();
    const std::size_t alpha_offset = offset + enn->prototypes.data.size();
    for (std::size_t i = 0; i < I; ++i) {
      const double a = enn->alpha(i);
      value += a;
      if (grad) (*grad)[alpha_offset + i] += a * (1.0 - a);
    }
  } else {
    const auto& rbf = std::get<RbfParams>(model.layer);
    const std::size_t I = rbf.num_prototypes();
    const std::size_t v_offset = offset + rbf.prototypes.data.size() + I;
    for (std::size_t i = 0; i < I; ++i) {
      value += rbf.weights[i] * rbf.weights[i];
      if (grad) (*grad)[v_offset + i] += 2.0 * rbf.weights[i];
    }
  }
  return value;
}

struct Evaluation {
  double loss = 0.0;
  std::vector<double> grad;  // empty unless requested
  std::vector<std::vector<double>> masses;
  std::vector<std::size_t> predictions;
  double error_rate = 0.0;
  double mean_ignorance = 0.0;
};

/// Objective of `loss` plus lambda * R over the samples. Labels index the
/// frame; for Dice the tumor class is w2 (label 1) and S_n = m({w2}) + m(Omega)/2.
inline Evaluation evaluate(const Model& model, const Matrix& points, std::span<const int> labels, LossKind loss,
                           double lambda, bool with_grad) {
  const std::size_t N = points.rows;
  const std::size_t K = model.num_classes();
  detail::require(N == labels.size(), ErrorCode::ShapeMismatch, "points and labels differ in length");
  detail::require(N > 0, ErrorCode::Empty, "no samples to evaluate");
  detail::require(points.cols == model.input_dim(), ErrorCode::DimensionMismatch, "sample dimension does not match model");
  detail::require(loss != LossKind::Dice || K == 2, ErrorCode::InvalidArgument, "Dice loss needs a binary frame");
  detail::require(loss != LossKind::CrossEntropy || K == 2, ErrorCode::InvalidArgument,
                  "cross-entropy on normalized plausibility needs a binary frame");

  Evaluation ev;
  std::vector<ModelForward> forwards;
  forwards.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    detail::require(labels[n] >= 0 && static_cast<std::size_t>(labels[n]) < K, ErrorCode::OutOfRange,
                    "label outside the frame");
    forwards.push_back(model_forward(model, points.row(n)));
    ev.masses.push_back(forwards.back().mass);
  }

  // Upstream gradients per sample in mass space and p1 space.
  Matrix d_mass(N, K + 1);
  std::vector<double> d_p1(N, 0.0);
  switch (loss) {
    case LossKind::Sse: {
      Matrix probs(N, K), targets(N, K);
      for (std::size_t n = 0; n < N; ++n) {
        const auto p = pignistic_from_mass(forwards[n].mass);
        for (std::size_t k = 0; k < K; ++k) probs(n, k) = p[k];
        targets(n, static_cast<std::size_t>(labels[n])) = 1.0;
      }
      const auto l = loss_sse(probs, targets, {}, 0.0);
      ev.loss = l.value;
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t k = 0; k < K; ++k) {
          d_mass(n, k) = l.d_probs(n, k);
          d_mass(n, K) += l.d_probs(n, k) / static_cast<double>(K);
        }
      }
      break;
    }
    case LossKind::CrossEntropy: {
      std::vector<double> p1(N), y(N);
      for (std::size_t n = 0; n < N; ++n) {
        p1[n] = forwards[n].p1;
        y[n] = labels[n] == 0 ? 1.0 : 0.0;
      }
      const auto l = loss_ce(p1, y, {}, 0.0);
      ev.loss = l.value;
      d_p1 = l.d_p1;
      break;
    }
    case LossKind::Dice: {
      std::vector<double> s(N), g(N);
      for (std::size_t n = 0; n < N; ++n) {
        s[n] = forwards[n].mass[1] + 0.5 * forwards[n].mass[2];
        g[n] = labels[n] == 1 ? 1.0 : 0.0;
      }
      const auto l = loss_dice(s, g, 0.0, 0.0);
      ev.loss = l.value;
      for (std::size_t n = 0; n < N; ++n) {
        d_mass(n, 1) = l.d_scores[n];
        d_mass(n, 2) = 0.5 * l.d_scores[n];
      }
      break;
    }
  }

  if (with_grad) {
    ev.grad.assign(parameter_count(model), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      const auto g = model_backward(model, forwards[n], d_mass.row(n), d_p1[n]);
      for (std::size_t i = 0; i < g.size(); ++i) ev.grad[i] += g[i];
    }
  }
  std::vector<double> reg_grad(with_grad ? ev.grad.size() : 0, 0.0);
  const double reg = layer_regularizer(model, with_grad ? &reg_grad : nullptr);
  ev.loss += lambda * reg;
  for (std::size_t i = 0; i < reg_grad.size(); ++i) ev.grad[i] += lambda * reg_grad[i];

  std::size_t wrong = 0;
  double ignorance = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t pred = predict_from_mass(forwards[n].mass);
    ev.predictions.push_back(pred);
    if (pred != static_cast<std::size_t>(labels[n])) ++wrong;
    ignorance += forwards[n].mass[K];
  }
  ev.error_rate = static_cast<double>(wrong) / static_cast<double>(N);
  ev.mean_ignorance = ignorance / static_cast<double>(N);
  return ev;
}

}  // namespace evidential
