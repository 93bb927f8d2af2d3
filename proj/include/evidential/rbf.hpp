#pragma once

// RBF layer read as evidence pooling on the binary frame {w1, w2}. Each
// hidden unit yields a signed weight of evidence w_i = v_i exp(-gamma_i d_i^2);
// positive parts support w1, negative parts support w2. The pooled mass
// function {w1}^{w+} (+) {w2}^{w-} stays latent: its normalized plausibility
// of w1 is the logistic of sum_i w_i.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "evidential/enn.hpp"
#include "evidential/error.hpp"
#include "evidential/linalg.hpp"

namespace evidential {

inline constexpr double kRbfStabilizeThreshold = 500.0;

struct RbfParams {
  Matrix prototypes;              // I x H
  std::vector<double> log_gamma;  // I
  std::vector<double> weights;    // I, the output connections v_i

  RbfParams() = default;
  RbfParams(std::size_t I, std::size_t H) : prototypes(I, H), log_gamma(I, 0.0), weights(I, 0.0) {
    detail::require(I >= 1 && H >= 1, ErrorCode::InvalidArgument, "RBF layer needs I >= 1 and H >= 1");
  }

  std::size_t num_prototypes() const { return prototypes.rows; }
  std::size_t dim() const { return prototypes.cols; }
  static constexpr std::size_t num_classes() { return 2; }

  double gamma(std::size_t i) const { return std::exp(log_gamma[i]); }
  void set_gamma(std::size_t i, double g) {
    detail::require(g > 0.0, ErrorCode::OutOfRange, "gamma must be positive");
    log_gamma[i] = std::log(g);
  }

  bool operator==(const RbfParams&) const = default;
};

template <class P, class F>
  requires std::same_as<std::remove_const_t<P>, RbfParams>
void for_each_tensor(P& p, F&& f) {
  f(std::span(p.prototypes.data));
  f(std::span(p.log_gamma));
  f(std::span(p.weights));
}

inline std::uint64_t fingerprint(const RbfParams& p) {
  std::uint64_t h = 0x7f4a7c159e3779b9ULL;
  for_each_tensor(p, [&](std::span<const double> t) { h = hash_doubles(t, h); });
  return h;
}

struct RbfOutput {
  std::array<double, 3> mass{};  // m({w1}), m({w2}), m(Omega)
  double wplus = 0.0;
  double wminus = 0.0;
  double kappa = 0.0;
  double p1 = 0.5;

  struct Cache {
    std::uint64_t params_fingerprint = 0;
    std::vector<double> x;
    std::vector<double> sq_dist;
    std::vector<double> activation;  // s_i
    std::vector<double> evidence;    // w_i
  } cache;
};

struct RbfGradients {
  RbfParams params;
  std::vector<double> input;
};

/// Upstream gradient in mass space, (dL/dm1, dL/dm2, dL/dmOmega).
struct MassUpstream {
  std::array<double, 3> value{};
};

/// Upstream gradient with respect to the normalized plausibility p1.
struct PlausibilityUpstream {
  double value = 0.0;
};

namespace detail {

// Masses of {w1}^a (+) {w2}^b. Multiplying the numerators and the
// normalizer by e^{a+b} gives m1 = (e^a - 1)/D, m2 = (e^b - 1)/D,
// mOmega = 1/D with D = e^a + e^b - 1; rescale by e^{-max} when large.
inline std::array<double, 3> latent_binary_mass(double a, double b) {
  if (a + b <= kRbfStabilizeThreshold) {
    const double ea = std::expm1(a);
    const double eb = std::expm1(b);
    const double denom = ea + eb + 1.0;
    return {ea / denom, eb / denom, 1.0 / denom};
  }
  const double top = std::max(a, b);
  const double scale = std::exp(-top);
  const double ea = std::exp(a - top) - scale;
  const double eb = std::exp(b - top) - scale;
  const double denom = ea + eb + scale;
  return {ea / denom, eb / denom, scale / denom};
}

}  // namespace detail

inline RbfOutput rbf_forward(const RbfParams& params, std::span<const double> x) {
  const std::size_t I = params.num_prototypes();
  detail::require(x.size() == params.dim(), ErrorCode::DimensionMismatch,
                  "RBF input has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(params.dim()));
  RbfOutput out;
  auto& c = out.cache;
  c.params_fingerprint = fingerprint(params);
  c.x.assign(x.begin(), x.end());
  c.sq_dist.resize(I);
  c.activation.resize(I);
  c.evidence.resize(I);

  double net = 0.0;
  for (std::size_t i = 0; i < I; ++i) {
    c.sq_dist[i] = squared_distance(x, params.prototypes.row(i));
    c.activation[i] = std::exp(-params.gamma(i) * c.sq_dist[i]);
    c.evidence[i] = c.activation[i] * params.weights[i];
    net += c.evidence[i];
    if (c.evidence[i] > 0.0) {
      out.wplus += c.evidence[i];
    } else {
      out.wminus -= c.evidence[i];
    }
  }
  out.kappa = -std::expm1(-out.wplus) * -std::expm1(-out.wminus);
  out.mass = detail::latent_binary_mass(out.wplus, out.wminus);
  out.p1 = sigmoid(net);
  return out;
}

namespace detail {

inline RbfGradients rbf_backward_from_evidence(const RbfParams& params, const RbfOutput& out,
                                               std::span<const double> d_evidence) {
  const std::size_t I = params.num_prototypes();
  const std::size_t H = params.dim();
  const auto& c = out.cache;
  RbfGradients g{RbfParams(I, H), std::vector<double>(H, 0.0)};
  for (std::size_t i = 0; i < I; ++i) {
    const double d_activation = d_evidence[i] * params.weights[i];
    g.params.weights[i] = d_evidence[i] * c.activation[i];
    const double gamma = params.gamma(i);
    g.params.log_gamma[i] = -d_activation * c.activation[i] * c.sq_dist[i] * gamma;
    const double radial = -2.0 * gamma * c.activation[i] * d_activation;
    const auto proto = params.prototypes.row(i);
    for (std::size_t h = 0; h < H; ++h) {
      const double dx = radial * (c.x[h] - proto[h]);
      g.input[h] += dx;
      g.params.prototypes(i, h) = -dx;
    }
  }
  return g;
}

inline void check_rbf_cache(const RbfParams& params, const RbfOutput& out) {
  require(out.cache.params_fingerprint == fingerprint(params) && out.cache.sq_dist.size() == params.num_prototypes(),
          ErrorCode::StaleCache, "RBF output was not produced by these parameters");
}

}  // namespace detail

/// Backward pass for losses defined on the latent mass (Dice, pignistic).
/// The positive/negative split uses subgradient 0 at w_i = 0.
inline RbfGradients rbf_backward(const RbfParams& params, const RbfOutput& out, MassUpstream upstream) {
  detail::check_rbf_cache(params, out);
  const auto [m1, m2, mo] = out.mass;
  const double pl1 = m1 + mo;
  const double pl2 = m2 + mo;
  const auto& g = upstream.value;
  const double d_plus = g[0] * pl1 * pl2 - g[1] * m2 * pl1 - g[2] * mo * pl1;
  const double d_minus = -g[0] * m1 * pl2 + g[1] * pl1 * pl2 - g[2] * mo * pl2;

  std::vector<double> d_evidence(params.num_prototypes());
  for (std::size_t i = 0; i < d_evidence.size(); ++i) {
    const double w = out.cache.evidence[i];
    d_evidence[i] = w > 0.0 ? d_plus : (w < 0.0 ? -d_minus : 0.0);
  }
  return detail::rbf_backward_from_evidence(params, out, d_evidence);
}

/// Backward pass for losses defined on p1 (cross-entropy).
inline RbfGradients rbf_backward(const RbfParams& params, const RbfOutput& out, PlausibilityUpstream upstream) {
  detail::check_rbf_cache(params, out);
  const double d_net = upstream.value * out.p1 * (1.0 - out.p1);
  std::vector<double> d_evidence(params.num_prototypes(), d_net);
  return detail::rbf_backward_from_evidence(params, out, d_evidence);
}

inline RbfParams rbf_init_random(std::size_t I, std::size_t H, std::uint64_t seed) {
  RbfParams p(I, H);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : p.prototypes.data) v = normal(rng);
  for (std::size_t i = 0; i < I; ++i) {
    p.set_gamma(i, 0.01);
    p.weights[i] = normal(rng);
  }
  return p;
}

}  // namespace evidential
