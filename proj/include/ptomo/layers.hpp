#pragma once

#include <cstddef>
#include <span>

#include "ptomo/rng.hpp"
#include "ptomo/tensor.hpp"

namespace ptomo::nn {

// Kernels of the up-convolutional decoder. Every kernel is instantiated for
// float (training) and double (gradient checks). Backward functions
// overwrite their gradient outputs; nothing accumulates across calls.

/// sqrt(6 / (fan_in + fan_out)).
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

/// i.i.d. uniform on [-L, L] with L = glorot_limit(fan_in, fan_out).
template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::vector<std::size_t> shape, Rng& rng);

/// y = x W + b; x: B x n_in, W: n_in x n_out, b: n_out.
template <typename T>
void fc_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y);

/// Gradients of fc_forward. `dx` may be null when the input gradient is
/// not needed (first layer).
template <typename T>
void fc_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                 Tensor<T>& dw, Tensor<T>& db);

/// 3x3 cross-correlation, stride 1, zero padding 1 ("same" size).
/// x: B x C_in x H x W, k: C_out x C_in x 3 x 3, b: C_out.
template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& b, Tensor<T>& y);

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>& dk, Tensor<T>& db);

enum class Upsampling : std::uint8_t { Nearest = 0, Bilinear = 1 };

/// B x C x H x W -> B x C x 2H x 2W. Nearest replicates each pixel into a
/// 2x2 block; Bilinear uses half-pixel centers with edge clamping.
template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y, Upsampling mode = Upsampling::Nearest);

/// Adjoint of upsample2x_forward; dx takes the shape of the input.
template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>& dx, Upsampling mode = Upsampling::Nearest);

template <typename T>
void relu_forward(Tensor<T>& x);  // in place

/// upstream * 1[x > 0]; `activation` may be the ReLU input or output.
template <typename T>
void relu_backward(Tensor<T>& upstream, const Tensor<T>& activation);  // in place

/// mean |pred - target| over all elements.
template <typename T>
double mae_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// sign(pred - target) / count with sign(0) = 0.
template <typename T>
void mae_grad(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>& grad);

/// p <- p - lr * g.
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, T lr);

}  // namespace ptomo::nn
