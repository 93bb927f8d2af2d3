#pragma once

// Evidential neural network layer: each prototype contributes a discounted
// Bayesian mass function whose support decays with squared distance, and the
// I contributions are pooled with Dempster's rule.
//
// Constrained quantities are stored unconstrained so that plain gradient
// steps keep them feasible:
//   alpha_i = sigmoid(alpha_logit_i)       in [0, 1]
//   gamma_i = exp(log_gamma_i)             > 0
//   u_i.    = softmax(membership_logit_i.) on the simplex

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "evidential/error.hpp"
#include "evidential/linalg.hpp"

namespace evidential {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

struct EnnParams {
  Matrix prototypes;                // I x H
  std::vector<double> alpha_logit;  // I
  std::vector<double> log_gamma;    // I
  Matrix membership_logit;          // I x K

  EnnParams() = default;
  EnnParams(std::size_t I, std::size_t H, std::size_t K)
      : prototypes(I, H), alpha_logit(I, 0.0), log_gamma(I, 0.0), membership_logit(I, K) {
    detail::require(I >= 1 && H >= 1 && K >= 2, ErrorCode::InvalidArgument, "ENN needs I >= 1, H >= 1, K >= 2");
  }

  std::size_t num_prototypes() const { return prototypes.rows; }
  std::size_t dim() const { return prototypes.cols; }
  std::size_t num_classes() const { return membership_logit.cols; }

  double alpha(std::size_t i) const { return sigmoid(alpha_logit[i]); }
  double gamma(std::size_t i) const { return std::exp(log_gamma[i]); }

  std::vector<double> membership(std::size_t i) const {
    const auto z = membership_logit.row(i);
    double top = -std::numeric_limits<double>::infinity();
    for (double v : z) top = std::max(top, v);
    std::vector<double> u(z.size());
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) total += (u[k] = std::exp(z[k] - top));
    for (double& v : u) v /= total;
    return u;
  }

  void set_alpha(std::size_t i, double a) {
    detail::require(a >= 0.0 && a <= 1.0, ErrorCode::OutOfRange, "alpha must lie in [0, 1]");
    alpha_logit[i] = logit(a);
  }
  void set_gamma(std::size_t i, double g) {
    detail::require(g > 0.0, ErrorCode::OutOfRange, "gamma must be positive");
    log_gamma[i] = std::log(g);
  }
  /// Rows need not be normalized; zero entries become -inf logits.
  void set_membership(std::size_t i, std::span<const double> u) {
    detail::require(u.size() == num_classes(), ErrorCode::DimensionMismatch, "membership row has wrong length");
    double total = 0.0;
    for (double v : u) {
      detail::require(v >= 0.0, ErrorCode::OutOfRange, "membership degrees must be nonnegative");
      total += v;
    }
    detail::require(total > 0.0, ErrorCode::OutOfRange, "membership row sums to zero");
    for (std::size_t k = 0; k < u.size(); ++k) membership_logit(i, k) = std::log(u[k] / total);
  }

  bool operator==(const EnnParams&) const = default;
};

template <class P, class F>
  requires std::same_as<std::remove_const_t<P>, EnnParams>
void for_each_tensor(P& p, F&& f) {
  f(std::span(p.prototypes.data));
  f(std::span(p.alpha_logit));
  f(std::span(p.log_gamma));
  f(std::span(p.membership_logit.data));
}

inline std::uint64_t fingerprint(const EnnParams& p) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for_each_tensor(p, [&](std::span<const double> t) { h = hash_doubles(t, h); });
  return h;
}

struct EnnOutput {
  std::vector<double> mass;  // K singletons, then the frame

  struct Cache {
    std::uint64_t params_fingerprint = 0;
    std::vector<double> x;
    std::vector<double> sq_dist;     // d_i^2
    std::vector<double> support;     // s_i
    std::vector<double> decay;       // exp(-gamma_i d_i^2)
    Matrix factor;                   // u_ik s_i + 1 - s_i
    Matrix factor_loo;               // prod over j != i of factor(j, k)
    std::vector<double> ignorance_loo;  // prod over j != i of (1 - s_j)
    std::vector<double> class_product;  // prod_i factor(i, k)
    double ignorance_product = 0.0;     // prod_i (1 - s_i)
    double normalizer = 0.0;
    std::vector<std::vector<double>> memberships;
  } cache;
};

/// Gradients with respect to the stored (unconstrained) parameters, in the
/// same layout as EnnParams, plus the gradient with respect to the input.
struct EnnGradients {
  EnnParams params;
  std::vector<double> input;
};

namespace detail {

// out[i] = prod_{j != i} values[j], computed without division.
inline void leave_one_out_products(std::span<const double> values, std::span<double> out) {
  const std::size_t n = values.size();
  double prefix = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = prefix;
    prefix *= values[i];
  }
  double suffix = 1.0;
  for (std::size_t i = n; i-- > 0;) {
    out[i] *= suffix;
    suffix *= values[i];
  }
}

}  // namespace detail

inline EnnOutput enn_forward(const EnnParams& params, std::span<const double> x) {
  const std::size_t I = params.num_prototypes();
  const std::size_t H = params.dim();
  const std::size_t K = params.num_classes();
  detail::require(x.size() == H, ErrorCode::DimensionMismatch,
                  "ENN input has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(H));

  EnnOutput out;
  auto& c = out.cache;
  c.params_fingerprint = fingerprint(params);
  c.x.assign(x.begin(), x.end());
  c.sq_dist.resize(I);
  c.support.resize(I);
  c.decay.resize(I);
  c.factor = Matrix(I, K);
  c.factor_loo = Matrix(I, K);
  c.ignorance_loo.resize(I);
  c.memberships.resize(I);

  std::vector<double> complement(I);
  for (std::size_t i = 0; i < I; ++i) {
    c.sq_dist[i] = squared_distance(x, params.prototypes.row(i));
    c.decay[i] = std::exp(-params.gamma(i) * c.sq_dist[i]);
    c.support[i] = params.alpha(i) * c.decay[i];
    complement[i] = 1.0 - c.support[i];
    c.memberships[i] = params.membership(i);
    for (std::size_t k = 0; k < K; ++k) c.factor(i, k) = c.memberships[i][k] * c.support[i] + complement[i];
  }

  detail::leave_one_out_products(complement, c.ignorance_loo);
  c.ignorance_product = 1.0;
  for (double v : complement) c.ignorance_product *= v;

  c.class_product.assign(K, 1.0);
  std::vector<double> column(I), loo(I);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < I; ++i) column[i] = c.factor(i, k);
    detail::leave_one_out_products(column, loo);
    for (std::size_t i = 0; i < I; ++i) {
      c.factor_loo(i, k) = loo[i];
      c.class_product[k] *= column[i];
    }
  }

  // Unnormalized combination: m({k}) = P_k - B, m(Omega) = B, B = prod(1 - s_i).
  c.normalizer = -static_cast<double>(K - 1) * c.ignorance_product;
  for (double p : c.class_product) c.normalizer += p;
  if (!(c.normalizer > 0.0)) {
    throw Error(ErrorCode::TotalConflict, "prototype evidence is totally conflicting");
  }

  out.mass.resize(K + 1);
  for (std::size_t k = 0; k < K; ++k)
    out.mass[k] = std::max(0.0, c.class_product[k] - c.ignorance_product) / c.normalizer;
  out.mass[K] = c.ignorance_product / c.normalizer;
  return out;
}

inline EnnGradients enn_backward(const EnnParams& params, const EnnOutput& out, std::span<const double> upstream) {
  const std::size_t I = params.num_prototypes();
  const std::size_t H = params.dim();
  const std::size_t K = params.num_classes();
  const auto& c = out.cache;
  detail::require(c.params_fingerprint == fingerprint(params) && c.sq_dist.size() == I, ErrorCode::StaleCache,
                  "ENN output was not produced by these parameters");
  detail::require(upstream.size() == K + 1, ErrorCode::DimensionMismatch, "upstream gradient must have K + 1 entries");

  // Quotient rule through the single normalization.
  double weighted = 0.0;
  double upstream_singletons = 0.0;
  for (std::size_t k = 0; k <= K; ++k) weighted += upstream[k] * out.mass[k];
  for (std::size_t k = 0; k < K; ++k) upstream_singletons += upstream[k];
  std::vector<double> d_class(K);
  for (std::size_t k = 0; k < K; ++k) d_class[k] = (upstream[k] - weighted) / c.normalizer;
  const double d_ignorance =
      (upstream[K] - upstream_singletons + static_cast<double>(K - 1) * weighted) / c.normalizer;

  EnnGradients g{EnnParams(I, H, K), std::vector<double>(H, 0.0)};
  for (std::size_t i = 0; i < I; ++i) {
    const double s = c.support[i];
    const auto& u = c.memberships[i];

    double d_support = -d_ignorance * c.ignorance_loo[i];
    std::vector<double> d_u(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double d_factor = d_class[k] * c.factor_loo(i, k);
      d_support += d_factor * (u[k] - 1.0);
      d_u[k] = d_factor * s;
    }

    double u_dot = 0.0;
    for (std::size_t k = 0; k < K; ++k) u_dot += u[k] * d_u[k];
    for (std::size_t k = 0; k < K; ++k) g.params.membership_logit(i, k) = u[k] * (d_u[k] - u_dot);

    const double alpha = params.alpha(i);
    const double gamma = params.gamma(i);
    g.params.alpha_logit[i] = d_support * c.decay[i] * alpha * (1.0 - alpha);
    g.params.log_gamma[i] = -d_support * s * c.sq_dist[i] * gamma;

    // ds/dx = -2 gamma s (x - pi); ds/dpi = -ds/dx.
    const double radial = -2.0 * gamma * s * d_support;
    const auto proto = params.prototypes.row(i);
    for (std::size_t h = 0; h < H; ++h) {
      const double dx = radial * (c.x[h] - proto[h]);
      g.input[h] += dx;
      g.params.prototypes(i, h) = -dx;
    }
  }
  return g;
}

inline EnnParams enn_init_random(std::size_t I, std::size_t H, std::size_t K, std::uint64_t seed) {
  EnnParams p(I, H, K);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (double& v : p.prototypes.data) v = normal(rng);
  std::vector<double> row(K);
  for (std::size_t i = 0; i < I; ++i) {
    p.set_alpha(i, 0.5);
    p.set_gamma(i, 0.01);
    for (double& v : row) v = uniform(rng);
    p.set_membership(i, row);
  }
  return p;
}

}  // namespace evidential
