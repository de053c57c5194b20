#include "ptomo/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptomo/binio.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

SymmetricEigen jacobi_eigen(const Matrix& symmetric, int max_sweeps) {
  require(symmetric.rows == symmetric.cols, "jacobi_eigen: matrix must be square");
  const int n = symmetric.rows;
  Matrix a = symmetric;
  Matrix v(n, n, 0.0);  // columns accumulate eigenvectors
  for (int i = 0; i < n; ++i) v(i, i) = 1.0;

  double scale = 0;
  for (double x : a.values) scale = std::max(scale, std::abs(x));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off == 0.0 || std::sqrt(off) <= 1e-300) break;
    if (std::sqrt(off) <= 1e-17 * scale) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Skip rotations that cannot change the diagonal in floating point.
        if (sweep > 3 && std::abs(apq) * 1e18 < std::abs(app) && std::abs(apq) * 1e18 < std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (int r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
        }
        for (int r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    const int src = order[k];
    out.values[k] = a(src, src);
    int arg = 0;
    for (int r = 1; r < n; ++r) {
      if (std::abs(v(r, src)) > std::abs(v(arg, src))) arg = r;
    }
    const double sign = v(arg, src) < 0 ? -1.0 : 1.0;
    for (int r = 0; r < n; ++r) out.vectors(k, r) = sign * v(r, src);
  }
  return out;
}

PCAModel pca_fit(const Matrix& readings) {
  require(readings.rows >= 2, "pca_fit: need at least 2 samples");
  const int n = readings.rows;
  const int w = readings.cols;

  PCAModel model;
  model.sample_count = static_cast<std::uint64_t>(n);
  model.mean.assign(w, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < w; ++c) model.mean[c] += readings(i, c);
  }
  for (double& m : model.mean) m /= n;

  Matrix cov(w, w, 0.0);
  std::vector<double> centered(w);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < w; ++c) centered[c] = readings(i, c) - model.mean[c];
    for (int p = 0; p < w; ++p) {
      if (centered[p] == 0.0) continue;
      for (int q = p; q < w; ++q) cov(p, q) += centered[p] * centered[q];
    }
  }
  for (int p = 0; p < w; ++p) {
    for (int q = p; q < w; ++q) {
      cov(p, q) /= (n - 1);
      cov(q, p) = cov(p, q);
    }
  }

  auto eig = jacobi_eigen(cov);
  model.components = std::move(eig.vectors);
  model.eigenvalues = std::move(eig.values);
  for (double& e : model.eigenvalues) e = std::max(e, 0.0);
  const double total = std::accumulate(model.eigenvalues.begin(), model.eigenvalues.end(), 0.0);
  model.explained_variance_ratio.resize(w);
  for (int k = 0; k < w; ++k) {
    model.explained_variance_ratio[k] = total > 0 ? model.eigenvalues[k] / total : 0.0;
  }
  return model;
}

int pca_choose_rank(const PCAModel& model, double threshold) {
  require(threshold > 0 && threshold <= 1, "pca_choose_rank: threshold must be in (0, 1]");
  const int n = model.size();
  if (n == 0) return 0;
  const double cutoff = kPcaRelativeZero * model.eigenvalues.front();
  int nonzero = 0;
  double total = 0;
  for (double e : model.eigenvalues) {
    if (e > cutoff) {
      ++nonzero;
      total += e;
    }
  }
  if (nonzero == 0) return 0;
  double cum = 0;
  for (int k = 0; k < nonzero; ++k) {
    cum += model.eigenvalues[k];
    if (cum / total >= threshold) return k + 1;
  }
  return nonzero;
}

namespace {

void check_rank(const PCAModel& model, int k) {
  require(k >= 0 && k <= model.size(), "pca: k=" + std::to_string(k) + " out of range [0, " +
                                           std::to_string(model.size()) + "]");
}

double whiten_scale(const PCAModel& model, int j) {
  const double floor = kPcaRelativeZero * std::max(model.eigenvalues.front(), 1e-300);
  return std::sqrt(std::max(model.eigenvalues[j], floor));
}

}  // namespace

Matrix pca_transform(const PCAModel& model, int k, const Matrix& readings) {
  check_rank(model, k);
  require(readings.cols == model.width(), "pca_transform: expected " + std::to_string(model.width()) +
                                              " channels, got " + std::to_string(readings.cols));
  Matrix out(readings.rows, k, 0.0);
  std::vector<double> centered(model.width());
  for (int i = 0; i < readings.rows; ++i) {
    for (int c = 0; c < model.width(); ++c) centered[c] = readings(i, c) - model.mean[c];
    for (int j = 0; j < k; ++j) {
      double s = 0;
      const auto comp = model.components.row(j);
      for (int c = 0; c < model.width(); ++c) s += comp[c] * centered[c];
      out(i, j) = model.whiten ? s / whiten_scale(model, j) : s;
    }
  }
  return out;
}

Matrix pca_inverse_transform(const PCAModel& model, int k, const Matrix& coords) {
  check_rank(model, k);
  require(coords.cols == k, "pca_inverse_transform: expected " + std::to_string(k) + " coordinates, got " +
                                std::to_string(coords.cols));
  Matrix out(coords.rows, model.width(), 0.0);
  for (int i = 0; i < coords.rows; ++i) {
    auto row = out.row(i);
    for (int c = 0; c < model.width(); ++c) row[c] = model.mean[c];
    for (int j = 0; j < k; ++j) {
      const double a = model.whiten ? coords(i, j) * whiten_scale(model, j) : coords(i, j);
      const auto comp = model.components.row(j);
      for (int c = 0; c < model.width(); ++c) row[c] += a * comp[c];
    }
  }
  return out;
}

void PCAModel::serialize(binio::Writer& w) const {
  w.u32(static_cast<std::uint32_t>(mean.size()));
  w.u32(static_cast<std::uint32_t>(components.rows));
  w.u64(sample_count);
  w.u32(whiten ? 1 : 0);
  w.f64_array(mean);
  w.f64_array(components.values);
  w.f64_array(eigenvalues);
  w.f64_array(explained_variance_ratio);
}

PCAModel PCAModel::deserialize(binio::Reader& r) {
  PCAModel m;
  const auto width = r.u32();
  const auto ncomp = r.u32();
  require(width <= 4096 && ncomp <= width, "PCA snapshot: implausible dimensions");
  m.sample_count = r.u64();
  m.whiten = r.u32() != 0;
  m.mean.resize(width);
  r.f64_array(m.mean);
  m.components = Matrix(static_cast<int>(ncomp), static_cast<int>(width));
  r.f64_array(m.components.values);
  m.eigenvalues.resize(ncomp);
  r.f64_array(m.eigenvalues);
  m.explained_variance_ratio.resize(ncomp);
  r.f64_array(m.explained_variance_ratio);
  return m;
}

}  // namespace ptomo
