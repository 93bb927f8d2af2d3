#pragma once

// Synthetic datasets: interleaved half circles, an out-of-distribution blob,
// and a two-channel toy segmentation task. Everything is a pure function of
// its arguments and seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "evidential/error.hpp"
#include "evidential/linalg.hpp"

namespace evidential {

struct LabeledSet {
  Matrix points;            // N x D
  std::vector<int> labels;  // N
  std::uint64_t seed = 0;

  std::size_t size() const { return points.rows; }
  std::size_t dim() const { return points.cols; }
};

inline LabeledSet concat(const LabeledSet& a, const LabeledSet& b) {
  detail::require(a.size() == 0 || b.size() == 0 || a.dim() == b.dim(), ErrorCode::DimensionMismatch,
                  "cannot concatenate sets of different dimension");
  LabeledSet out;
  out.points = Matrix(a.size() + b.size(), a.size() ? a.dim() : b.dim());
  std::copy(a.points.data.begin(), a.points.data.end(), out.points.data.begin());
  std::copy(b.points.data.begin(), b.points.data.end(), out.points.data.begin() + a.points.data.size());
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.seed = a.seed;
  return out;
}

// Two unit-radius half circles: class 0 around (0, 0) opening downward,
// class 1 around (1, 0.5) opening upward.
inline constexpr double kMoonRadius = 1.0;
inline constexpr double kMoonOffsetX = 1.0;
inline constexpr double kMoonOffsetY = 0.5;
inline constexpr double kDefaultMoonNoise = 0.1;

inline LabeledSet gen_half_moons(std::size_t n, double noise_sigma, std::uint64_t seed) {
  detail::require(n >= 2, ErrorCode::InvalidArgument, "need at least two points");
  detail::require(noise_sigma >= 0.0, ErrorCode::InvalidArgument, "noise must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  LabeledSet set{Matrix(n, 2), std::vector<int>(n), seed};
  const std::size_t first = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = angle(rng);
    const bool upper = i < first;
    double x = upper ? kMoonRadius * std::cos(t) : kMoonOffsetX - kMoonRadius * std::cos(t);
    double y = upper ? kMoonRadius * std::sin(t) : kMoonOffsetY - kMoonRadius * std::sin(t);
    if (noise_sigma > 0.0) {
      x += noise_sigma * noise(rng);
      y += noise_sigma * noise(rng);
    }
    set.points(i, 0) = x;
    set.points(i, 1) = y;
    set.labels[i] = upper ? 0 : 1;
  }
  return set;
}

// Out-of-distribution blob, well above both arcs.
inline constexpr double kOodCenterX = 0.5;
inline constexpr double kOodCenterY = 4.5;
inline constexpr double kOodSigma = 0.25;
inline constexpr double kOodTruncation = 3.0;  // in standard deviations

inline LabeledSet gen_ood_class(std::size_t n, std::uint64_t seed, int label = 2) {
  detail::require(n >= 1, ErrorCode::InvalidArgument, "need at least one point");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  LabeledSet set{Matrix(n, 2), std::vector<int>(n, label), seed};
  for (std::size_t i = 0; i < n; ++i) {
    double dx, dy;
    do {
      dx = noise(rng);
      dy = noise(rng);
    } while (dx * dx + dy * dy > kOodTruncation * kOodTruncation);
    set.points(i, 0) = kOodCenterX + kOodSigma * dx;
    set.points(i, 1) = kOodCenterY + kOodSigma * dy;
  }
  return set;
}

/// Two-channel image with a binary ground-truth mask, stored row-major.
struct ToySegTask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> intensity;  // channel 1: blurred blobs plus noise
  std::vector<double> context;    // channel 2: smooth background gradient
  std::vector<int> mask;

  std::size_t pixels() const { return width * height; }
};

struct ToySegSettings {
  double min_radius = 4.0;
  double max_radius = 9.0;
  double noise_sigma = 0.2;
  double foreground_level = 1.0;
};

namespace detail {

// Pixel count of a discrete disc, used to bound the mask area.
inline std::size_t disc_pixel_bound(double radius, bool upper) {
  const double r = upper ? radius + 1.0 : std::max(0.0, radius - 1.0);
  return static_cast<std::size_t>(upper ? std::ceil(std::numbers::pi * r * r) : std::floor(std::numbers::pi * r * r));
}

}  // namespace detail

/// Inclusive bounds on the foreground pixel count of a task with n_blobs > 0.
inline std::pair<std::size_t, std::size_t> toy_mask_area_bounds(std::size_t n_blobs, const ToySegSettings& s = {}) {
  if (n_blobs == 0) return {0, 0};
  return {detail::disc_pixel_bound(s.min_radius, false), n_blobs * detail::disc_pixel_bound(s.max_radius, true)};
}

inline ToySegTask gen_toy_segmentation(std::size_t width, std::size_t height, std::size_t n_blobs,
                                       std::uint64_t seed, const ToySegSettings& settings = {}) {
  detail::require(width >= 8 && height >= 8, ErrorCode::InvalidArgument, "segmentation grids must be at least 8x8");
  std::mt19937_64 rng(seed);
  ToySegTask task{width, height, std::vector<double>(width * height, 0.0), std::vector<double>(width * height, 0.0),
                  std::vector<int>(width * height, 0)};

  std::uniform_real_distribution<double> radius(settings.min_radius, settings.max_radius);
  for (std::size_t b = 0; b < n_blobs; ++b) {
    const double fit = (static_cast<double>(std::min(width, height)) - 1.0) / 2.0;
    const double r = std::min(radius(rng), fit);
    const double cx = std::uniform_real_distribution<double>(r, static_cast<double>(width - 1) - r)(rng);
    const double cy = std::uniform_real_distribution<double>(r, static_cast<double>(height - 1) - r)(rng);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - cx;
        const double dy = static_cast<double>(y) - cy;
        if (dx * dx + dy * dy <= r * r) task.mask[y * width + x] = 1;
      }
    }
  }

  // 3x3 binomial blur of the mask blurs the lesion boundary.
  static constexpr double kernel[3] = {0.25, 0.5, 0.25};
  auto at = [&](long x, long y) {
    x = std::clamp<long>(x, 0, static_cast<long>(width) - 1);
    y = std::clamp<long>(y, 0, static_cast<long>(height) - 1);
    return static_cast<double>(task.mask[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)]);
  };
  std::normal_distribution<double> noise(0.0, 1.0);
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double blurred = 0.0;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i)
          blurred += kernel[i + 1] * kernel[j + 1] * at(static_cast<long>(x) + i, static_cast<long>(y) + j);
      const std::size_t idx = y * width + x;
      task.intensity[idx] = settings.foreground_level * blurred + settings.noise_sigma * noise(rng);
      const double u = static_cast<double>(x) / static_cast<double>(width - 1);
      const double v = static_cast<double>(y) / static_cast<double>(height - 1);
      task.context[idx] = 0.5 * (u + v) + 0.1 * std::sin(2.0 * std::numbers::pi * u + phase);
    }
  }
  return task;
}

/// Per-pixel samples (intensity, context) labeled by the mask.
inline LabeledSet pixels_as_samples(const ToySegTask& task) {
  LabeledSet set{Matrix(task.pixels(), 2), task.mask, 0};
  for (std::size_t i = 0; i < task.pixels(); ++i) {
    set.points(i, 0) = task.intensity[i];
    set.points(i, 1) = task.context[i];
  }
  return set;
}

// CSV: header x1,...,xD,label then one row per sample.

inline void write_set_csv(std::ostream& os, const LabeledSet& set) {
  for (std::size_t d = 0; d < set.dim(); ++d) os << 'x' << d + 1 << ',';
  os << "label\n";
  auto old = os.precision(17);
  for (std::size_t n = 0; n < set.size(); ++n) {
    for (std::size_t d = 0; d < set.dim(); ++d) os << set.points(n, d) << ',';
    os << set.labels[n] << '\n';
  }
  os.precision(old);
}

inline std::vector<double> parse_csv_doubles(const std::string& line) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, "not a number: '" + cell + "'");
    }
  }
  return values;
}

inline LabeledSet read_set_csv(std::istream& is) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(is, line)), ErrorCode::Parse, "missing CSV header");
  std::size_t columns = 1;
  for (char c : line) columns += c == ',';
  detail::require(columns >= 2, ErrorCode::Parse, "dataset needs at least one feature and a label");
  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = parse_csv_doubles(line);
    detail::require(row.size() == columns, ErrorCode::Parse, "row has " + std::to_string(row.size()) + " cells");
    labels.push_back(static_cast<int>(row.back()));
    values.insert(values.end(), row.begin(), row.end() - 1);
  }
  LabeledSet set;
  set.points = Matrix(labels.size(), columns - 1);
  set.points.data = std::move(values);
  set.labels = std::move(labels);
  return set;
}

inline LabeledSet load_set(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), ErrorCode::Io, "cannot open " + path);
  return read_set_csv(in);
}

inline void save_set(const std::string& path, const LabeledSet& set) {
  std::ofstream out(path);
  detail::require(out.good(), ErrorCode::Io, "cannot write " + path);
  write_set_csv(out, set);
}

/// Row-major grid without header, one image row per line.
template <class T>
void write_grid_csv(std::ostream& os, std::span<const T> values, std::size_t width, std::size_t height) {
  auto old = os.precision(17);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) os << (x ? "," : "") << values[y * width + x];
    os << '\n';
  }
  os.precision(old);
}

}  // namespace evidential
