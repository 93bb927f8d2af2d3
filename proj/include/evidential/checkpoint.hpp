#pragma once

// Plain-text checkpoints: one `key,v1,v2,...` line per tensor after a small
// header. Stored (unconstrained) values are written with round-trip
// precision; natural-scale alpha/gamma/membership rows are added for readers
// and ignored on load.

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "evidential/data.hpp"
#include "evidential/error.hpp"
#include "evidential/model.hpp"

namespace evidential {

namespace detail {

inline void write_row(std::ostream& os, const std::string& key, std::span<const double> values) {
  os << key;
  for (double v : values) os << ',' << v;
  os << '\n';
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Model& model) {
  auto old = os.precision(17);
  os << "# evidential checkpoint v1\n";
  os << "layer," << to_string(model.kind()) << '\n';
  const std::size_t I = std::visit([](const auto& l) { return l.num_prototypes(); }, model.layer);
  os << "I," << I << "\nH," << model.layer_input_dim() << "\nK," << model.num_classes() << '\n';
  if (model.features) {
    os << "features";
    for (auto s : model.features->sizes()) os << ',' << s;
    os << '\n';
    for (std::size_t l = 0; l < model.features->layers.size(); ++l) {
      const auto& layer = model.features->layers[l];
      detail::write_row(os, "mlp" + std::to_string(l) + ".weight", layer.weight.data);
      detail::write_row(os, "mlp" + std::to_string(l) + ".bias", layer.bias);
    }
    detail::write_row(os, "mlp.slopes", model.features->slopes);
  }
  if (const auto* enn = std::get_if<EnnParams>(&model.layer)) {
    detail::write_row(os, "prototypes", enn->prototypes.data);
    detail::write_row(os, "alpha_logit", enn->alpha_logit);
    detail::write_row(os, "log_gamma", enn->log_gamma);
    detail::write_row(os, "membership_logit", enn->membership_logit.data);
    std::vector<double> alpha, gamma, membership;
    for (std::size_t i = 0; i < I; ++i) {
      alpha.push_back(enn->alpha(i));
      gamma.push_back(enn->gamma(i));
      const auto u = enn->membership(i);
      membership.insert(membership.end(), u.begin(), u.end());
    }
    detail::write_row(os, "alpha", alpha);
    detail::write_row(os, "gamma", gamma);
    detail::write_row(os, "membership", membership);
  } else {
    const auto& rbf = std::get<RbfParams>(model.layer);
    detail::write_row(os, "prototypes", rbf.prototypes.data);
    detail::write_row(os, "log_gamma", rbf.log_gamma);
    detail::write_row(os, "weights", rbf.weights);
    std::vector<double> gamma;
    for (std::size_t i = 0; i < I; ++i) gamma.push_back(rbf.gamma(i));
    detail::write_row(os, "gamma", gamma);
  }
  os.precision(old);
}

inline Model read_checkpoint(std::istream& is) {
  std::map<std::string, std::string> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    detail::require(comma != std::string::npos, ErrorCode::Parse, "checkpoint line without a value: " + line);
    rows[line.substr(0, comma)] = line.substr(comma + 1);
  }
  auto text = [&](const std::string& key) -> const std::string& {
    auto it = rows.find(key);
    detail::require(it != rows.end(), ErrorCode::Parse, "checkpoint is missing '" + key + "'");
    return it->second;
  };
  auto values = [&](const std::string& key, std::size_t expected) {
    auto v = parse_csv_doubles(text(key));
    detail::require(v.size() == expected, ErrorCode::Parse,
                    "checkpoint entry '" + key + "' has " + std::to_string(v.size()) + " values, expected " +
                        std::to_string(expected));
    return v;
  };
  auto count = [&](const std::string& key) { return static_cast<std::size_t>(values(key, 1)[0]); };

  const LayerKind kind = parse_layer_kind(text("layer"));
  const std::size_t I = count("I"), H = count("H"), K = count("K");
  Model model;
  if (rows.count("features")) {
    std::vector<std::size_t> sizes;
    for (double s : parse_csv_doubles(text("features"))) sizes.push_back(static_cast<std::size_t>(s));
    detail::require(sizes.size() >= 2 && sizes.back() == H, ErrorCode::Parse, "feature sizes inconsistent with H");
    MlpParams net = mlp_zeros(sizes);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto& layer = net.layers[l];
      layer.weight.data = values("mlp" + std::to_string(l) + ".weight", layer.weight.data.size());
      layer.bias = values("mlp" + std::to_string(l) + ".bias", layer.bias.size());
    }
    net.slopes = values("mlp.slopes", net.slopes.size());
    model.features = std::move(net);
  }
  if (kind == LayerKind::Enn) {
    EnnParams p(I, H, K);
    p.prototypes.data = values("prototypes", I * H);
    p.alpha_logit = values("alpha_logit", I);
    p.log_gamma = values("log_gamma", I);
    p.membership_logit.data = values("membership_logit", I * K);
    model.layer = std::move(p);
  } else {
    detail::require(K == 2, ErrorCode::Parse, "RBF checkpoints are binary");
    RbfParams p(I, H);
    p.prototypes.data = values("prototypes", I * H);
    p.log_gamma = values("log_gamma", I);
    p.weights = values("weights", I);
    model.layer = std::move(p);
  }
  return model;
}

inline void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path);
  detail::require(out.good(), ErrorCode::Io, "cannot write " + path);
  write_checkpoint(out, model);
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), ErrorCode::Io, "cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace evidential
