#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ptomo {

namespace binio {
class Writer;
class Reader;
}  // namespace binio

/// Dense row-major matrix of doubles, used for reading tables.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const {
    return std::span(values).subspan(static_cast<std::size_t>(r) * cols, cols);
  }
  std::span<double> row(int r) {
    return std::span(values).subspan(static_cast<std::size_t>(r) * cols, cols);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Eigenpairs of a symmetric matrix, eigenvalues nonincreasing,
/// eigenvectors stored as rows. Cyclic Jacobi rotations; each eigenvector
/// is sign-normalized so its largest-magnitude entry is positive.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
SymmetricEigen jacobi_eigen(const Matrix& symmetric, int max_sweeps = 100);

/// Principal-component model of channel readings.
struct PCAModel {
  std::vector<double> mean;         // width
  Matrix components;                // rows = components, orthonormal
  std::vector<double> eigenvalues;  // nonincreasing, clamped at 0
  std::vector<double> explained_variance_ratio;
  std::uint64_t sample_count = 0;
  bool whiten = false;

  int width() const { return static_cast<int>(mean.size()); }
  int size() const { return components.rows; }

  void serialize(binio::Writer& w) const;
  static PCAModel deserialize(binio::Reader& r);

  friend bool operator==(const PCAModel&, const PCAModel&) = default;
};

/// Eigenvalues below this fraction of the largest count as zero.
inline constexpr double kPcaRelativeZero = 1e-12;

/// Fits on an N x width table (N >= 2); covariance divides by N - 1. All
/// components are kept; truncation happens in choose_rank/transform.
PCAModel pca_fit(const Matrix& readings);

/// Smallest k whose cumulative explained variance reaches `threshold`
/// (in (0, 1]), never more than the number of nonzero eigenvalues.
int pca_choose_rank(const PCAModel& model, double threshold);

/// (x - mean) projected on the first k components, divided by
/// sqrt(eigenvalue) when model.whiten is set.
Matrix pca_transform(const PCAModel& model, int k, const Matrix& readings);

/// coords * components[0..k) + mean (undoing whitening if set).
Matrix pca_inverse_transform(const PCAModel& model, int k, const Matrix& coords);

}  // namespace ptomo
