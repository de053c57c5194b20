#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptomo/model.hpp"
#include "ptomo/pca.hpp"

namespace ptomo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Trained network plus everything needed to apply it to raw readings.
struct Checkpoint {
  NetworkConfig network;
  std::vector<nn::Tensor<float>> parameters;  // layer order of Network::parameters()
  PCAModel pca;
  std::uint64_t training_seed = 0;
  double best_val_loss = 0.0;
  std::int32_t best_epoch = 0;
  std::uint64_t dataset_hash = 0;
  std::int32_t active_width = 0;
  std::int32_t active_height = 0;

  static Checkpoint from_network(const Network<float>& net);
  /// Network with this checkpoint's configuration and parameters.
  Network<float> network_instance() const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

}  // namespace ptomo
