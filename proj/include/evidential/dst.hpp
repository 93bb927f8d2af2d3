#pragma once

// Exact belief-function calculus over small finite frames. Focal sets are
// K-bit sets, so every subset of the frame is enumerable for K <= 16.

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evidential/error.hpp"

namespace evidential {

inline constexpr std::size_t kMaxFrameSize = 16;
inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kPruneThreshold = 1e-15;
inline constexpr double kTotalConflictThreshold = 1.0 - 1e-12;

class FocalSet {
 public:
  constexpr FocalSet() = default;
  constexpr explicit FocalSet(std::uint32_t bits) : bits_(bits) {}

  static constexpr FocalSet singleton(std::size_t k) { return FocalSet(std::uint32_t{1} << k); }
  static FocalSet of(std::initializer_list<std::size_t> members) {
    std::uint32_t bits = 0;
    for (auto k : members) bits |= std::uint32_t{1} << k;
    return FocalSet(bits);
  }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(std::size_t k) const { return (bits_ >> k) & 1U; }
  constexpr int cardinality() const { return std::popcount(bits_); }
  constexpr bool is_subset_of(FocalSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(FocalSet other) const { return (bits_ & other.bits_) != 0; }

  friend constexpr FocalSet operator&(FocalSet a, FocalSet b) { return FocalSet(a.bits_ & b.bits_); }
  friend constexpr FocalSet operator|(FocalSet a, FocalSet b) { return FocalSet(a.bits_ | b.bits_); }
  friend constexpr auto operator<=>(FocalSet, FocalSet) = default;

 private:
  std::uint32_t bits_ = 0;
};

class Frame {
 public:
  explicit Frame(std::size_t size, std::vector<std::string> labels = {}) : size_(size), labels_(std::move(labels)) {
    detail::require(size >= 1 && size <= kMaxFrameSize, ErrorCode::InvalidFrame,
                    "frame size must be in [1, 16], got " + std::to_string(size));
    if (labels_.empty()) {
      for (std::size_t k = 0; k < size; ++k) labels_.push_back("w" + std::to_string(k + 1));
    }
    detail::require(labels_.size() == size, ErrorCode::InvalidFrame, "label count does not match frame size");
  }

  std::size_t size() const { return size_; }
  const std::vector<std::string>& labels() const { return labels_; }
  FocalSet omega() const { return FocalSet(static_cast<std::uint32_t>((std::uint64_t{1} << size_) - 1)); }
  bool holds(FocalSet a) const { return a.is_subset_of(omega()); }
  FocalSet complement(FocalSet a) const { return FocalSet(omega().bits() & ~a.bits()); }

  // Frames are compared by size; labels are display-only.
  friend bool operator==(const Frame& a, const Frame& b) { return a.size_ == b.size_; }

 private:
  std::size_t size_;
  std::vector<std::string> labels_;
};

/// Simple mass function A^w: mass 1 - e^{-w} on A, e^{-w} on the frame.
struct WeightedSimpleMass {
  FocalSet focal;
  double weight = 0.0;
};

struct DecisionRule {
  enum class Kind { MaxBelief, MaxPlausibility, Hurwicz, Pignistic };

  Kind kind = Kind::Pignistic;
  double optimism = 0.0;  // only meaningful for Hurwicz

  static DecisionRule max_belief() { return {Kind::MaxBelief, 0.0}; }
  static DecisionRule max_plausibility() { return {Kind::MaxPlausibility, 0.0}; }
  static DecisionRule pignistic() { return {Kind::Pignistic, 0.0}; }
  static DecisionRule hurwicz(double xi) {
    detail::require(xi >= 0.0 && xi <= 1.0, ErrorCode::OutOfRange, "Hurwicz optimism index must lie in [0, 1]");
    return {Kind::Hurwicz, xi};
  }
};

class MassFunction;
MassFunction make_mass(const Frame& frame, const std::vector<std::pair<FocalSet, double>>& entries);

/// Normalized mass function with strictly positive entries and no mass on the empty set.
class MassFunction {
 public:
  const Frame& frame() const { return frame_; }
  const std::map<FocalSet, double>& focal_sets() const { return masses_; }

  double mass(FocalSet a) const {
    auto it = masses_.find(a);
    return it == masses_.end() ? 0.0 : it->second;
  }
  double ignorance() const { return mass(frame_.omega()); }

 private:
  MassFunction(Frame frame, std::map<FocalSet, double> masses) : frame_(std::move(frame)), masses_(std::move(masses)) {}

  friend MassFunction make_mass(const Frame&, const std::vector<std::pair<FocalSet, double>>&);
  friend MassFunction normalized_from_map(const Frame&, std::map<FocalSet, double>);

  Frame frame_;
  std::map<FocalSet, double> masses_;
};

// Drops entries below the prune threshold and rescales to unit total.
inline MassFunction normalized_from_map(const Frame& frame, std::map<FocalSet, double> raw) {
  double total = 0.0;
  for (auto it = raw.begin(); it != raw.end();) {
    if (it->second < kPruneThreshold) {
      it = raw.erase(it);
    } else {
      total += it->second;
      ++it;
    }
  }
  detail::require(total >= kMassTolerance, ErrorCode::ZeroTotal, "total mass is zero");
  for (auto& [set, m] : raw) m /= total;
  return MassFunction(frame, std::move(raw));
}

inline MassFunction make_mass(const Frame& frame, const std::vector<std::pair<FocalSet, double>>& entries) {
  std::map<FocalSet, double> raw;
  for (const auto& [set, m] : entries) {
    detail::require(!set.empty(), ErrorCode::EmptyFocal, "mass assigned to the empty set");
    detail::require(frame.holds(set), ErrorCode::FrameMismatch, "focal set outside the frame");
    detail::require(std::isfinite(m), ErrorCode::NegativeMass, "mass must be finite");
    detail::require(m >= 0.0, ErrorCode::NegativeMass, "negative mass");
    raw[set] += m;
  }
  return normalized_from_map(frame, std::move(raw));
}

inline MassFunction vacuous(const Frame& frame) { return make_mass(frame, {{frame.omega(), 1.0}}); }

/// s * m + (1 - s) * vacuous.
inline MassFunction discount(const MassFunction& m, double s) {
  detail::require(s >= 0.0 && s <= 1.0, ErrorCode::OutOfRange, "discount factor must lie in [0, 1]");
  std::map<FocalSet, double> out;
  for (const auto& [set, v] : m.focal_sets()) out[set] += s * v;
  out[m.frame().omega()] += 1.0 - s;
  return normalized_from_map(m.frame(), std::move(out));
}

inline MassFunction expand_simple(const Frame& frame, const WeightedSimpleMass& sm) {
  detail::require(!sm.focal.empty() && sm.focal != frame.omega() && frame.holds(sm.focal), ErrorCode::InvalidFocal,
                  "simple mass needs a proper nonempty focal set");
  detail::require(sm.weight >= 0.0, ErrorCode::OutOfRange, "weight of evidence must be nonnegative");
  const double keep = std::exp(-sm.weight);
  return make_mass(frame, {{sm.focal, -std::expm1(-sm.weight)}, {frame.omega(), keep}});
}

inline double belief(const MassFunction& m, FocalSet a) {
  detail::require(m.frame().holds(a), ErrorCode::FrameMismatch, "set outside the frame");
  double acc = 0.0;
  for (const auto& [set, v] : m.focal_sets())
    if (set.is_subset_of(a)) acc += v;
  return acc;
}

inline double plausibility(const MassFunction& m, FocalSet a) {
  detail::require(m.frame().holds(a), ErrorCode::FrameMismatch, "set outside the frame");
  double acc = 0.0;
  for (const auto& [set, v] : m.focal_sets())
    if (set.intersects(a)) acc += v;
  return acc;
}

inline double conflict(const MassFunction& m1, const MassFunction& m2) {
  detail::require(m1.frame() == m2.frame(), ErrorCode::FrameMismatch, "mass functions on different frames");
  double kappa = 0.0;
  for (const auto& [b, v1] : m1.focal_sets())
    for (const auto& [c, v2] : m2.focal_sets())
      if (!b.intersects(c)) kappa += v1 * v2;
  return kappa;
}

inline MassFunction combine_dempster(const MassFunction& m1, const MassFunction& m2) {
  detail::require(m1.frame() == m2.frame(), ErrorCode::FrameMismatch, "mass functions on different frames");
  std::map<FocalSet, double> joint;
  double kappa = 0.0;
  for (const auto& [b, v1] : m1.focal_sets()) {
    for (const auto& [c, v2] : m2.focal_sets()) {
      const FocalSet inter = b & c;
      if (inter.empty()) {
        kappa += v1 * v2;
      } else {
        joint[inter] += v1 * v2;
      }
    }
  }
  if (kappa >= kTotalConflictThreshold) {
    throw Error(ErrorCode::TotalConflict, "degree of conflict " + std::to_string(kappa));
  }
  for (auto& [set, v] : joint) v /= 1.0 - kappa;
  return normalized_from_map(m1.frame(), std::move(joint));
}

inline std::vector<double> pignistic(const MassFunction& m) {
  std::vector<double> p(m.frame().size(), 0.0);
  for (const auto& [set, v] : m.focal_sets()) {
    const double share = v / set.cardinality();
    for (std::size_t k = 0; k < p.size(); ++k)
      if (set.contains(k)) p[k] += share;
  }
  return p;
}

/// Index of the winning singleton under `rule`; ties go to the lowest index.
inline std::size_t decide(const MassFunction& m, const DecisionRule& rule) {
  const std::size_t K = m.frame().size();
  std::vector<double> score(K);
  if (rule.kind == DecisionRule::Kind::Pignistic) {
    score = pignistic(m);
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      const FocalSet single = FocalSet::singleton(k);
      const double bel = belief(m, single);
      const double pl = plausibility(m, single);
      switch (rule.kind) {
        case DecisionRule::Kind::MaxBelief: score[k] = bel; break;
        case DecisionRule::Kind::MaxPlausibility: score[k] = pl; break;
        default: score[k] = (1.0 - rule.optimism) * bel + rule.optimism * pl; break;
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (score[k] > score[best]) best = k;
  return best;
}

// CSV rows `focal_bitmask,mass`.

inline void write_mass_csv(std::ostream& os, const MassFunction& m) {
  os << "focal_bitmask,mass\n";
  auto old = os.precision(17);
  for (const auto& [set, v] : m.focal_sets()) os << set.bits() << ',' << v << '\n';
  os.precision(old);
}

inline MassFunction read_mass_csv(std::istream& is, const Frame& frame) {
  std::string line;
  std::vector<std::pair<FocalSet, double>> entries;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("focal_bitmask", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    detail::require(comma != std::string::npos, ErrorCode::Parse, "expected 'bitmask,mass': " + line);
    try {
      const auto bits = static_cast<std::uint32_t>(std::stoul(line.substr(0, comma)));
      entries.emplace_back(FocalSet(bits), std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, "bad mass row: " + line);
    }
  }
  return make_mass(frame, entries);
}

}  // namespace evidential
