#include "ptomo/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

namespace ptomo::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

std::string dims(const std::vector<std::size_t>& s) { return shape_string(s); }

void check(bool cond, const char* op, const std::string& what) {
  if (!cond) throw ValidationError(std::string(op) + ": " + what);
}

/// Unfolds one C x H x W map stack into (C*9) x (H*W) patches.
template <typename T>
void im2col3x3(const T* x, std::size_t channels, std::size_t h, std::size_t w, T* col) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* src = x + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + ((c * 9) + ky * 3 + kx) * hw;
        for (std::size_t r = 0; r < h; ++r) {
          T* out = dst + r * w;
          const long sr = static_cast<long>(r) + ky - 1;
          if (sr < 0 || sr >= static_cast<long>(h)) {
            std::fill(out, out + w, T(0));
            continue;
          }
          const T* in = src + static_cast<std::size_t>(sr) * w;
          if (kx == 0) {
            out[0] = T(0);
            std::memcpy(out + 1, in, (w - 1) * sizeof(T));
          } else if (kx == 1) {
            std::memcpy(out, in, w * sizeof(T));
          } else {
            std::memcpy(out, in + 1, (w - 1) * sizeof(T));
            out[w - 1] = T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col3x3: scatters patch gradients back onto the maps.
template <typename T>
void col2im3x3_add(const T* col, std::size_t channels, std::size_t h, std::size_t w, T* dx) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    T* dst = dx + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + ((c * 9) + ky * 3 + kx) * hw;
        for (std::size_t r = 0; r < h; ++r) {
          const long sr = static_cast<long>(r) + ky - 1;
          if (sr < 0 || sr >= static_cast<long>(h)) continue;
          const T* g = src + r * w;
          T* out = dst + static_cast<std::size_t>(sr) * w;
          if (kx == 0) {
            for (std::size_t q = 1; q < w; ++q) out[q - 1] += g[q];
          } else if (kx == 1) {
            for (std::size_t q = 0; q < w; ++q) out[q] += g[q];
          } else {
            for (std::size_t q = 0; q + 1 < w; ++q) out[q + 1] += g[q];
          }
        }
      }
    }
  }
}

struct BilinearTap {
  std::size_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

BilinearTap bilinear_tap(std::size_t out_index, std::size_t in_size) {
  double src = (static_cast<double>(out_index) + 0.5) / 2.0 - 0.5;
  src = std::max(src, 0.0);
  auto i0 = static_cast<std::size_t>(std::floor(src));
  i0 = std::min(i0, in_size - 1);
  const std::size_t i1 = std::min(i0 + 1, in_size - 1);
  return {i0, i1, src - static_cast<double>(i0)};
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  require(fan_in >= 1 && fan_out >= 1, "glorot: fans must be >= 1");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::vector<std::size_t> shape, Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  Tensor<T> t(std::move(shape));
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

template <typename T>
void fc_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
  check(x.rank() == 2 && w.rank() == 2 && b.rank() == 1, "fc_forward", "expected x[B,n_in], W[n_in,n_out], b[n_out]");
  check(x.dim(1) == w.dim(0) && b.dim(0) == w.dim(1), "fc_forward",
        "shape mismatch x" + dims(x.shape()) + " W" + dims(w.shape()) + " b" + dims(b.shape()));
  const auto batch = static_cast<Eigen::Index>(x.dim(0));
  const auto n_in = static_cast<Eigen::Index>(w.dim(0));
  const auto n_out = static_cast<Eigen::Index>(w.dim(1));
  y.resize({x.dim(0), w.dim(1)});
  MapMat<T> ym(y.data(), batch, n_out);
  ym.noalias() = ConstMapMat<T>(x.data(), batch, n_in) * ConstMapMat<T>(w.data(), n_in, n_out);
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(b.data(), n_out);
  ym.rowwise() += bias;
}

template <typename T>
void fc_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>& dw,
                 Tensor<T>& db) {
  check(dy.rank() == 2 && dy.dim(0) == x.dim(0) && dy.dim(1) == w.dim(1), "fc_backward",
        "upstream gradient " + dims(dy.shape()) + " does not match output shape");
  const auto batch = static_cast<Eigen::Index>(x.dim(0));
  const auto n_in = static_cast<Eigen::Index>(w.dim(0));
  const auto n_out = static_cast<Eigen::Index>(w.dim(1));
  const ConstMapMat<T> xm(x.data(), batch, n_in);
  const ConstMapMat<T> dym(dy.data(), batch, n_out);

  dw.resize(w.shape());
  MapMat<T>(dw.data(), n_in, n_out).noalias() = xm.transpose() * dym;

  // Column sums in batch order.
  db.resize({w.dim(1)});
  std::fill(db.values().begin(), db.values().end(), T(0));
  for (Eigen::Index r = 0; r < batch; ++r) {
    const T* row = dy.data() + r * n_out;
    for (Eigen::Index c = 0; c < n_out; ++c) db[c] += row[c];
  }

  if (dx) {
    dx->resize(x.shape());
    MapMat<T>(dx->data(), batch, n_in).noalias() = dym * ConstMapMat<T>(w.data(), n_in, n_out).transpose();
  }
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& b, Tensor<T>& y) {
  check(x.rank() == 4 && k.rank() == 4 && b.rank() == 1, "conv2d_forward",
        "expected x[B,C,H,W], K[C_out,C_in,3,3], b[C_out]");
  check(k.dim(2) == 3 && k.dim(3) == 3, "conv2d_forward", "kernel must be 3x3");
  check(k.dim(1) == x.dim(1) && b.dim(0) == k.dim(0), "conv2d_forward",
        "shape mismatch x" + dims(x.shape()) + " K" + dims(k.shape()) + " b" + dims(b.shape()));
  const std::size_t batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3), c_out = k.dim(0);
  const std::size_t hw = h * w;
  y.resize({batch, c_out, h, w});
  std::vector<T> col(c_in * 9 * hw);
  const ConstMapMat<T> km(k.data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(c_in * 9));
  for (std::size_t s = 0; s < batch; ++s) {
    im2col3x3(x.data() + s * c_in * hw, c_in, h, w, col.data());
    MapMat<T> ys(y.data() + s * c_out * hw, static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(hw));
    ys.noalias() = km * ConstMapMat<T>(col.data(), static_cast<Eigen::Index>(c_in * 9), static_cast<Eigen::Index>(hw));
    for (std::size_t o = 0; o < c_out; ++o) ys.row(static_cast<Eigen::Index>(o)).array() += b[o];
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>& dk,
                     Tensor<T>& db) {
  const std::size_t batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3), c_out = k.dim(0);
  check(dy.rank() == 4 && dy.dim(0) == batch && dy.dim(1) == c_out && dy.dim(2) == h && dy.dim(3) == w,
        "conv2d_backward", "upstream gradient " + dims(dy.shape()) + " does not match output shape");
  const std::size_t hw = h * w;
  const auto rows_k = static_cast<Eigen::Index>(c_out);
  const auto cols_k = static_cast<Eigen::Index>(c_in * 9);
  const auto n_pix = static_cast<Eigen::Index>(hw);

  dk.resize(k.shape());
  dk.fill(T(0));
  db.resize({c_out});
  db.fill(T(0));
  if (dx) {
    dx->resize(x.shape());
    dx->fill(T(0));
  }
  std::vector<T> col(c_in * 9 * hw);
  std::vector<T> dcol(dx ? c_in * 9 * hw : 0);
  MapMat<T> dkm(dk.data(), rows_k, cols_k);
  const ConstMapMat<T> km(k.data(), rows_k, cols_k);
  for (std::size_t s = 0; s < batch; ++s) {
    im2col3x3(x.data() + s * c_in * hw, c_in, h, w, col.data());
    const ConstMapMat<T> dys(dy.data() + s * c_out * hw, rows_k, n_pix);
    dkm.noalias() += dys * ConstMapMat<T>(col.data(), cols_k, n_pix).transpose();
    for (std::size_t o = 0; o < c_out; ++o) {
      const T* g = dy.data() + (s * c_out + o) * hw;
      T acc = T(0);
      for (std::size_t p = 0; p < hw; ++p) acc += g[p];
      db[o] += acc;
    }
    if (dx) {
      MapMat<T>(dcol.data(), cols_k, n_pix).noalias() = km.transpose() * dys;
      col2im3x3_add(dcol.data(), c_in, h, w, dx->data() + s * c_in * hw);
    }
  }
}

template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y, Upsampling mode) {
  check(x.rank() == 4, "upsample2x_forward", "expected x[B,C,H,W]");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  y.resize({x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = x.data() + p * h * w;
    T* out = y.data() + p * 4 * h * w;
    if (mode == Upsampling::Nearest) {
      for (std::size_t r = 0; r < h; ++r) {
        T* o0 = out + (2 * r) * 2 * w;
        for (std::size_t c = 0; c < w; ++c) o0[2 * c] = o0[2 * c + 1] = in[r * w + c];
        std::memcpy(o0 + 2 * w, o0, 2 * w * sizeof(T));
      }
    } else {
      for (std::size_t r = 0; r < 2 * h; ++r) {
        const auto ty = bilinear_tap(r, h);
        for (std::size_t c = 0; c < 2 * w; ++c) {
          const auto tx = bilinear_tap(c, w);
          const double top = (1 - tx.w1) * in[ty.i0 * w + tx.i0] + tx.w1 * in[ty.i0 * w + tx.i1];
          const double bot = (1 - tx.w1) * in[ty.i1 * w + tx.i0] + tx.w1 * in[ty.i1 * w + tx.i1];
          out[r * 2 * w + c] = static_cast<T>((1 - ty.w1) * top + ty.w1 * bot);
        }
      }
    }
  }
}

template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>& dx, Upsampling mode) {
  check(dy.rank() == 4 && dy.dim(2) % 2 == 0 && dy.dim(3) % 2 == 0, "upsample2x_backward",
        "upstream gradient must have even spatial dims");
  const std::size_t h = dy.dim(2) / 2, w = dy.dim(3) / 2;
  const std::size_t planes = dy.dim(0) * dy.dim(1);
  dx.resize({dy.dim(0), dy.dim(1), h, w});
  dx.fill(T(0));
  for (std::size_t p = 0; p < planes; ++p) {
    const T* g = dy.data() + p * 4 * h * w;
    T* out = dx.data() + p * h * w;
    if (mode == Upsampling::Nearest) {
      for (std::size_t r = 0; r < h; ++r) {
        const T* g0 = g + (2 * r) * 2 * w;
        const T* g1 = g0 + 2 * w;
        for (std::size_t c = 0; c < w; ++c) {
          out[r * w + c] = (g0[2 * c] + g0[2 * c + 1]) + (g1[2 * c] + g1[2 * c + 1]);
        }
      }
    } else {
      for (std::size_t r = 0; r < 2 * h; ++r) {
        const auto ty = bilinear_tap(r, h);
        for (std::size_t c = 0; c < 2 * w; ++c) {
          const auto tx = bilinear_tap(c, w);
          const double v = g[r * 2 * w + c];
          out[ty.i0 * w + tx.i0] += static_cast<T>((1 - ty.w1) * (1 - tx.w1) * v);
          out[ty.i0 * w + tx.i1] += static_cast<T>((1 - ty.w1) * tx.w1 * v);
          out[ty.i1 * w + tx.i0] += static_cast<T>(ty.w1 * (1 - tx.w1) * v);
          out[ty.i1 * w + tx.i1] += static_cast<T>(ty.w1 * tx.w1 * v);
        }
      }
    }
  }
}

template <typename T>
void relu_forward(Tensor<T>& x) {
  for (T& v : x.values()) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward(Tensor<T>& upstream, const Tensor<T>& activation) {
  check(upstream.size() == activation.size(), "relu_backward", "shape mismatch");
  T* g = upstream.data();
  const T* a = activation.data();
  for (std::size_t i = 0; i < upstream.size(); ++i) g[i] = a[i] > T(0) ? g[i] : T(0);
}

template <typename T>
double mae_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check(pred.shape() == target.shape(), "mae_loss",
        "shape mismatch " + dims(pred.shape()) + " vs " + dims(target.shape()));
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  }
  return s / static_cast<double>(pred.size());
}

template <typename T>
void mae_grad(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>& grad) {
  check(pred.shape() == target.shape(), "mae_grad",
        "shape mismatch " + dims(pred.shape()) + " vs " + dims(target.shape()));
  grad.resize(pred.shape());
  const T inv = T(1) / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    grad[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
  }
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, T lr) {
  require(params.size() == grads.size(), "sgd_step: parameter and gradient sizes differ");
  require(lr > T(0), "sgd_step: learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

#define PTOMO_INSTANTIATE(T)                                                                                  \
  template Tensor<T> glorot_uniform<T>(std::size_t, std::size_t, std::vector<std::size_t>, Rng&);            \
  template void fc_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&);              \
  template void fc_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*, Tensor<T>&, \
                               Tensor<T>&);                                                                   \
  template void conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&);          \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,          \
                                   Tensor<T>&, Tensor<T>&);                                                   \
  template void upsample2x_forward<T>(const Tensor<T>&, Tensor<T>&, Upsampling);                             \
  template void upsample2x_backward<T>(const Tensor<T>&, Tensor<T>&, Upsampling);                            \
  template void relu_forward<T>(Tensor<T>&);                                                                  \
  template void relu_backward<T>(Tensor<T>&, const Tensor<T>&);                                               \
  template double mae_loss<T>(const Tensor<T>&, const Tensor<T>&);                                            \
  template void mae_grad<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                                  \
  template void sgd_step<T>(std::span<T>, std::span<const T>, T);

PTOMO_INSTANTIATE(float)
PTOMO_INSTANTIATE(double)

#undef PTOMO_INSTANTIATE

}  // namespace ptomo::nn
