#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ptomo/layers.hpp"
#include "ptomo/rng.hpp"
#include "ptomo/tensor.hpp"

namespace ptomo {

class KeyValueConfig;

/// Shape of the up-convolutional decoder:
///
///   input_dim -> FC(fc_width)+ReLU -> FC(fc_width)+ReLU
///   -> reshape seed_maps x seed_rows x seed_cols
///   -> n_upblocks x [upsample 2x, conv3x3(block_maps)+ReLU, conv3x3(block_maps)+ReLU]
///   -> conv3x3(1)
///
/// Images are rows x cols (height x width); the full network maps a
/// reading vector onto a 200 x 120 image.
struct NetworkConfig {
  int input_dim = 50;
  int fc_width = 7500;
  int seed_maps = 20;
  int seed_rows = 25;
  int seed_cols = 15;
  int block_maps = 30;
  int n_upblocks = 3;
  int out_rows = 200;
  int out_cols = 120;
  int kernel_size = 3;
  nn::Upsampling upsampling = nn::Upsampling::Nearest;

  /// 50 -> 7500 -> 7500 -> 20@25x15 -> 3 upblocks @30 -> 1@200x120.
  static NetworkConfig full(int input_dim = 50);
  /// 2 upblocks, 6 seed maps: 1@100x60.
  static NetworkConfig half(int input_dim = 50);
  /// 1 upblock, 4 seed maps, 16 block maps: 1@50x30.
  static NetworkConfig quarter(int input_dim = 50);
  static NetworkConfig for_scale(const std::string& scale, int input_dim = 50);

  /// Throws ValidationError when fc_width != seed volume or the output size
  /// is not seed size * 2^n_upblocks.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

NetworkConfig network_config_from(const KeyValueConfig& cfg, const NetworkConfig& base);
void network_config_to(const NetworkConfig& net, KeyValueConfig& cfg);

/// One trainable tensor and its gradient.
template <typename T>
struct Parameter {
  std::string name;
  nn::Tensor<T> value;
  nn::Tensor<T> grad;  // allocated by the first backward pass
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

template <typename T>
class Network {
 public:
  /// Weights Glorot-uniform from `rng` (in layer order), biases zero.
  static Network build(const NetworkConfig& cfg, Rng& rng);
  /// Same layout with every parameter zero; filled by checkpoint loading.
  static Network zeros(const NetworkConfig& cfg);

  const NetworkConfig& config() const noexcept { return cfg_; }

  /// input: B x input_dim. Returns B x 1 x out_rows x out_cols. With
  /// `keep_activations`, intermediate activations are retained for backward.
  nn::Tensor<T> forward(const nn::Tensor<T>& input, bool keep_activations = false);
  /// Inference-only forward pass; safe to call from several threads.
  nn::Tensor<T> infer(const nn::Tensor<T>& input) const;

  /// Backpropagates d(loss)/d(output) through the last forward pass made
  /// with keep_activations; fills every Parameter::grad. Returns the input
  /// gradient when `input_grad` is set.
  void backward(const nn::Tensor<T>& grad_output, nn::Tensor<T>* input_grad = nullptr);

  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

  /// p <- p - lr * grad for every parameter.
  void sgd_step(T lr);

  /// Copy of all parameter values, in layer order.
  std::vector<nn::Tensor<T>> snapshot() const;
  void restore(const std::vector<nn::Tensor<T>>& values);

  template <typename U>
  Network<U> cast() const;

  int fc_layers() const { return 2; }
  int conv_layers() const { return 2 * cfg_.n_upblocks + 1; }

 private:
  template <typename>
  friend class Network;

  explicit Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {}
  void allocate();

  Parameter<T>& weight(int layer) { return params_[2 * layer]; }
  Parameter<T>& bias(int layer) { return params_[2 * layer + 1]; }
  const Parameter<T>& weight(int layer) const { return params_[2 * layer]; }
  const Parameter<T>& bias(int layer) const { return params_[2 * layer + 1]; }

  // Shared forward computation; activations are kept when `acts` is set.
  nn::Tensor<T> run(const nn::Tensor<T>& input, std::vector<nn::Tensor<T>>* acts) const;

  NetworkConfig cfg_;
  std::vector<Parameter<T>> params_;  // fc1.W, fc1.b, fc2.W, fc2.b, conv*.K, conv*.b

  // Activations of the last training forward pass.
  nn::Tensor<T> input_;
  std::vector<nn::Tensor<T>> acts_;
};

/// Parameters of the second FC layer: fc_width^2 + fc_width.
std::size_t fc2_parameter_count(const NetworkConfig& cfg);

}  // namespace ptomo
