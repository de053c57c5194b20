#pragma once

#include <span>
#include <vector>

#include "ptomo/error.hpp"

namespace ptomo {

/// Row-major 2D image of doubles (row 0 at the top).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}
  Image(int w, int h, std::vector<double> v) : width(w), height(h), values(std::move(v)) {
    require(values.size() == static_cast<std::size_t>(w) * h, "image size mismatch");
  }

  double& operator()(int col, int row) { return values[static_cast<std::size_t>(row) * width + col]; }
  double operator()(int col, int row) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> span() const noexcept { return values; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Top-left `w` x `h` block of `img`.
Image crop(const Image& img, int w, int h);
/// `img` placed at the top-left of a zero `w` x `h` image.
Image pad(const Image& img, int w, int h);

}  // namespace ptomo
