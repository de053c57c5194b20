#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ptomo/metrics.hpp"
#include "ptomo/model.hpp"

namespace ptomo {

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 10;
  int max_epochs = 2000;
  double early_stop_delta = 1e-5;  // may be +inf
  int early_stop_patience = 50;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

TrainConfig train_config_from(const KeyValueConfig& cfg, const TrainConfig& base);
void train_config_to(const TrainConfig& tc, KeyValueConfig& cfg);

/// Network inputs (N x input_dim) and targets (N x 1 x rows x cols).
struct SampleSet {
  nn::Tensor<float> inputs;
  nn::Tensor<float> targets;

  std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.dim(0); }
  /// Rows `indices` of both tensors, in that order.
  SampleSet gather(const std::vector<std::size_t>& indices) const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;

  /// `epoch,train_loss,val_loss` with 17 significant digits; wall-clock
  /// times are kept out so reruns compare byte for byte.
  std::string to_csv() const;
  /// `epoch,seconds`.
  std::string timing_csv() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mean absolute error over every element of `set`, evaluated in batches.
double mean_loss(Network<float>& net, const SampleSet& set, int batch_size);

/// Seeded-shuffle minibatch SGD on MAE. After each epoch the validation
/// loss is recorded; training stops at max_epochs or once the validation
/// loss has not dropped below (last improvement - delta) for `patience`
/// epochs. The network is left at the parameters of the lowest
/// validation loss. Throws NumericError on a non-finite loss or gradient.
TrainHistory train(Network<float>& net, const SampleSet& train_set, const SampleSet& val_set,
                   const TrainConfig& tc, const EpochCallback& on_epoch = {});

/// Network outputs for every input row, B x 1 x rows x cols.
nn::Tensor<float> predict(Network<float>& net, const nn::Tensor<float>& inputs, int batch_size = 32);

/// Per-image SSIM/PSNR/NRMSE of the predictions against the targets,
/// both cropped to the active `active_w` x `active_h` region.
MetricsReport evaluate(Network<float>& net, const SampleSet& test_set, const std::vector<std::string>& ids,
                       int active_w, int active_h, const std::string& dataset_name,
                       const SsimOptions& opt = {});

/// Sample `i` of a B x 1 x rows x cols tensor as an Image.
Image tensor_image(const nn::Tensor<float>& batch, std::size_t i);

}  // namespace ptomo
