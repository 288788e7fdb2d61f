#pragma once

// A field is a dense grid of manifold points: shape[0] counts channels and
// the remaining extents span the signal (rank 1) or image (rank 2). Data is
// row-major with the channel index slowest.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "surreal/manifold.hpp"

namespace surreal {

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

template <class T>
struct BasicField {
  std::vector<std::size_t> shape;       // [channels, spatial extents...]
  std::vector<BasicPolar<T>> data;      // row-major, channel slowest

  std::size_t channels() const { return shape.empty() ? 0 : shape.front(); }

  std::size_t spatial_rank() const {
    return shape.empty() ? 0 : shape.size() - 1;
  }

  std::size_t spatial_size() const {
    if (shape.empty()) return 0;
    std::size_t n = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
    return n;
  }

  BasicPolar<T>& at(std::size_t channel, std::size_t pos) {
    return data[channel * spatial_size() + pos];
  }
  const BasicPolar<T>& at(std::size_t channel, std::size_t pos) const {
    return data[channel * spatial_size() + pos];
  }
};

using ComplexField = BasicField<double>;

/// Throws unless the shape is usable (rank 2 or 3 overall, nothing zero) and
/// consistent with the stored element count.
template <class T>
void validate_field(const BasicField<T>& f) {
  if (f.shape.size() < 2 || f.shape.size() > 3) {
    throw std::invalid_argument("field: shape must be [channels, x] or [channels, y, x]");
  }
  for (std::size_t e : f.shape) {
    if (e == 0) throw std::invalid_argument("field: zero extent");
  }
  if (f.data.size() != shape_numel(f.shape)) {
    throw std::invalid_argument("field: data size " + std::to_string(f.data.size()) +
                                " does not match shape");
  }
}

inline ComplexField make_field(std::vector<std::size_t> shape,
                               PolarComplex fill = {0.0, 0.0}) {
  ComplexField f;
  f.shape = std::move(shape);
  f.data.assign(shape_numel(f.shape), fill);
  validate_field(f);
  return f;
}

}  // namespace surreal
