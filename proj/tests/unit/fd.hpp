#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ptomo/rng.hpp"
#include "ptomo/tensor.hpp"

namespace fd {

inline double rel_err(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

/// Central difference of `loss` with respect to every entry of `t`.
inline std::vector<double> numeric_grad(ptomo::nn::Tensor<double>& t, const std::function<double()>& loss,
                                        double h = 1e-5) {
  std::vector<double> g(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double keep = t[i];
    t[i] = keep + h;
    const double up = loss();
    t[i] = keep - h;
    const double down = loss();
    t[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_rel_err(const ptomo::nn::Tensor<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) worst = std::max(worst, rel_err(analytic[i], numeric[i]));
  return worst;
}

inline ptomo::nn::Tensor<double> random_tensor(std::vector<std::size_t> shape, ptomo::Rng& rng, double lo = -1.0,
                                               double hi = 1.0) {
  ptomo::nn::Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// sum(y * r): a scalar loss whose upstream gradient is `r`.
inline double dot(const ptomo::nn::Tensor<double>& y, const ptomo::nn::Tensor<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

}  // namespace fd
