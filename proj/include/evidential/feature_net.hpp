#pragma once

// Small fully-connected feature extractor: affine + PReLU on every hidden
// layer, plain affine output. Also the softmax head used to pretrain it.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "evidential/error.hpp"
#include "evidential/linalg.hpp"

namespace evidential {

inline constexpr double kDefaultPreluSlope = 0.25;

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;

  std::size_t in() const { return weight.cols; }
  std::size_t out() const { return weight.rows; }
  bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  std::vector<double> slopes;  // one PReLU slope per hidden layer

  std::size_t input_dim() const { return layers.front().in(); }
  std::size_t output_dim() const { return layers.back().out(); }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s{input_dim()};
    for (const auto& l : layers) s.push_back(l.out());
    return s;
  }
  bool operator==(const MlpParams&) const = default;
};

template <class P, class F>
  requires std::same_as<std::remove_const_t<P>, MlpParams>
void for_each_tensor(P& p, F&& f) {
  for (auto& layer : p.layers) {
    f(std::span(layer.weight.data));
    f(std::span(layer.bias));
  }
  f(std::span(p.slopes));
}

/// Zero-valued parameters for the given layer sizes.
inline MlpParams mlp_zeros(std::span<const std::size_t> sizes) {
  detail::require(sizes.size() >= 2, ErrorCode::InvalidArgument, "an MLP needs at least input and output sizes");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    detail::require(sizes[l] >= 1 && sizes[l + 1] >= 1, ErrorCode::InvalidArgument, "layer sizes must be positive");
    p.layers.push_back({Matrix(sizes[l + 1], sizes[l]), std::vector<double>(sizes[l + 1], 0.0)});
  }
  p.slopes.assign(p.layers.size() - 1, kDefaultPreluSlope);
  return p;
}

/// He-style initialization: weights ~ N(0, 2 / fan_in), zero biases.
inline MlpParams mlp_init(std::span<const std::size_t> sizes, std::uint64_t seed) {
  MlpParams p = mlp_zeros(sizes);
  std::mt19937_64 rng(seed);
  for (auto& layer : p.layers) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(layer.in())));
    for (double& w : layer.weight.data) w = normal(rng);
  }
  return p;
}

struct MlpCache {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // affine output of each layer
};

struct MlpForward {
  std::vector<double> feature;
  MlpCache cache;
};

inline MlpForward mlp_forward(const MlpParams& params, std::span<const double> x) {
  detail::require(!params.layers.empty(), ErrorCode::InvalidArgument, "empty MLP");
  detail::require(x.size() == params.input_dim(), ErrorCode::DimensionMismatch,
                  "MLP input has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(params.input_dim()));
  MlpForward f;
  std::vector<double> current(x.begin(), x.end());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    detail::require(current.size() == layer.in(), ErrorCode::DimensionMismatch, "inconsistent layer sizes");
    std::vector<double> z(layer.bias);
    for (std::size_t o = 0; o < layer.out(); ++o) {
      const auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < layer.in(); ++i) z[o] += w[i] * current[i];
    }
    f.cache.inputs.push_back(std::move(current));
    f.cache.pre.push_back(z);
    if (l + 1 < params.layers.size()) {
      const double a = params.slopes[l];
      for (double& v : z) v = v > 0.0 ? v : a * v;
    }
    current = std::move(z);
  }
  f.feature = std::move(current);
  return f;
}

struct MlpGradients {
  MlpParams params;
  std::vector<double> input;
};

inline MlpGradients mlp_backward(const MlpParams& params, const MlpCache& cache, std::span<const double> upstream) {
  detail::require(cache.pre.size() == params.layers.size(), ErrorCode::StaleCache, "MLP cache does not match");
  detail::require(upstream.size() == params.output_dim(), ErrorCode::DimensionMismatch,
                  "upstream gradient has wrong dimension");
  MlpGradients g{mlp_zeros(params.sizes()), {}};
  g.params.slopes.assign(params.slopes.size(), 0.0);

  std::vector<double> delta(upstream.begin(), upstream.end());  // dL/d(pre) of the current layer
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto& in = cache.inputs[l];
    auto& gl = g.params.layers[l];
    for (std::size_t o = 0; o < layer.out(); ++o) {
      gl.bias[o] = delta[o];
      for (std::size_t i = 0; i < layer.in(); ++i) gl.weight(o, i) = delta[o] * in[i];
    }
    std::vector<double> d_in(layer.in(), 0.0);
    for (std::size_t o = 0; o < layer.out(); ++o) {
      const auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < layer.in(); ++i) d_in[i] += w[i] * delta[o];
    }
    if (l > 0) {
      // Undo the PReLU that produced this layer's input.
      const auto& z = cache.pre[l - 1];
      const double a = params.slopes[l - 1];
      double d_slope = 0.0;
      for (std::size_t i = 0; i < d_in.size(); ++i) {
        if (z[i] <= 0.0) {
          d_slope += d_in[i] * z[i];
          d_in[i] *= a;
        }
      }
      g.params.slopes[l - 1] = d_slope;
    }
    delta = std::move(d_in);
  }
  g.input = std::move(delta);
  return g;
}

struct SoftmaxHead {
  Matrix weight;  // H x K
  std::vector<double> bias;

  std::size_t feature_dim() const { return weight.rows; }
  std::size_t num_classes() const { return weight.cols; }
  bool operator==(const SoftmaxHead&) const = default;
};

template <class P, class F>
  requires std::same_as<std::remove_const_t<P>, SoftmaxHead>
void for_each_tensor(P& p, F&& f) {
  f(std::span(p.weight.data));
  f(std::span(p.bias));
}

inline SoftmaxHead softmax_head_init(std::size_t H, std::size_t K, std::uint64_t seed) {
  SoftmaxHead head{Matrix(H, K), std::vector<double>(K, 0.0)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / static_cast<double>(H)));
  for (double& w : head.weight.data) w = normal(rng);
  return head;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : logits) top = std::max(top, v);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += (p[k] = std::exp(logits[k] - top));
  for (double& v : p) v /= total;
  return p;
}

inline std::vector<double> softmax_head_logits(const SoftmaxHead& head, std::span<const double> feature) {
  detail::require(feature.size() == head.feature_dim(), ErrorCode::DimensionMismatch,
                  "feature dimension does not match softmax head");
  std::vector<double> logits(head.bias);
  for (std::size_t h = 0; h < feature.size(); ++h)
    for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += feature[h] * head.weight(h, k);
  return logits;
}

inline std::vector<double> softmax_head_forward(const SoftmaxHead& head, std::span<const double> feature) {
  return softmax(softmax_head_logits(head, feature));
}

struct SoftmaxHeadGradients {
  SoftmaxHead head;
  std::vector<double> feature;
};

/// `d_logits` is dL/d(logits); for cross-entropy it is probs - onehot.
inline SoftmaxHeadGradients softmax_head_backward(const SoftmaxHead& head, std::span<const double> feature,
                                                  std::span<const double> d_logits) {
  const std::size_t H = head.feature_dim();
  const std::size_t K = head.num_classes();
  SoftmaxHeadGradients g{{Matrix(H, K), std::vector<double>(d_logits.begin(), d_logits.end())},
                         std::vector<double>(H, 0.0)};
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t k = 0; k < K; ++k) {
      g.head.weight(h, k) = feature[h] * d_logits[k];
      g.feature[h] += head.weight(h, k) * d_logits[k];
    }
  }
  return g;
}

}  // namespace evidential
