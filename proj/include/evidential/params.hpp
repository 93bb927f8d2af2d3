#pragma once

#include <span>
#include <vector>

#include "evidential/error.hpp"

namespace evidential {

/// Concatenates every tensor of `p` (anything with a for_each_tensor overload).
template <class P>
std::vector<double> flatten(const P& p) {
  std::vector<double> out;
  for_each_tensor(p, [&](std::span<const double> t) { out.insert(out.end(), t.begin(), t.end()); });
  return out;
}

template <class P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](std::span<const double> t) { n += t.size(); });
  return n;
}

/// Inverse of flatten; returns the number of values consumed.
template <class P>
std::size_t unflatten(P& p, std::span<const double> values) {
  std::size_t offset = 0;
  for_each_tensor(p, [&](std::span<double> t) {
    detail::require(offset + t.size() <= values.size(), ErrorCode::ShapeMismatch, "flat parameter vector too short");
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = values[offset + i];
    offset += t.size();
  });
  return offset;
}

}  // namespace evidential
