#include "ptomo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "ptomo/config.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

void TrainConfig::validate() const {
  require(lr > 0.0 && std::isfinite(lr), "train.lr must be positive");
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(max_epochs >= 1, "train.max_epochs must be >= 1");
  require(early_stop_delta >= 0.0, "train.early_stop_delta must be >= 0");
  require(early_stop_patience >= 1, "train.early_stop_patience must be >= 1");
}

TrainConfig train_config_from(const KeyValueConfig& cfg, const TrainConfig& base) {
  TrainConfig tc = base;
  tc.lr = cfg.get_double("train.lr", tc.lr);
  tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", tc.batch_size));
  tc.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", tc.max_epochs));
  tc.early_stop_delta = cfg.get_double("train.early_stop_delta", tc.early_stop_delta);
  tc.early_stop_patience = static_cast<int>(cfg.get_int("train.early_stop_patience", tc.early_stop_patience));
  tc.validate();
  return tc;
}

void train_config_to(const TrainConfig& tc, KeyValueConfig& cfg) {
  cfg.set("train.lr", tc.lr);
  cfg.set("train.batch_size", std::int64_t{tc.batch_size});
  cfg.set("train.max_epochs", std::int64_t{tc.max_epochs});
  cfg.set("train.early_stop_delta", tc.early_stop_delta);
  cfg.set("train.early_stop_patience", std::int64_t{tc.early_stop_patience});
}

SampleSet SampleSet::gather(const std::vector<std::size_t>& indices) const {
  auto take = [&](const nn::Tensor<float>& src) {
    auto shape = src.shape();
    const std::size_t stride = src.size() / shape[0];
    shape[0] = indices.size();
    nn::Tensor<float> out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      require(indices[i] < src.dim(0), "sample index out of range");
      std::memcpy(out.data() + i * stride, src.data() + indices[i] * stride, stride * sizeof(float));
    }
    return out;
  };
  return {take(inputs), take(targets)};
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[128];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss);
    out += buf;
  }
  return out;
}

std::string TrainHistory::timing_csv() const {
  std::string out = "epoch,seconds\n";
  char buf[64];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.3f\n", e.epoch, e.seconds);
    out += buf;
  }
  return out;
}

namespace {

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

void check_sets(const Network<float>& net, const SampleSet& set, const char* name) {
  const auto& cfg = net.config();
  require(set.size() > 0, std::string(name) + " set is empty");
  require(set.inputs.rank() == 2 && set.inputs.dim(1) == static_cast<std::size_t>(cfg.input_dim),
          std::string(name) + " inputs must be N x " + std::to_string(cfg.input_dim));
  require(set.targets.rank() == 4 && set.targets.dim(0) == set.size() && set.targets.dim(1) == 1 &&
              set.targets.dim(2) == static_cast<std::size_t>(cfg.out_rows) &&
              set.targets.dim(3) == static_cast<std::size_t>(cfg.out_cols),
          std::string(name) + " targets must be N x 1 x " + std::to_string(cfg.out_rows) + " x " +
              std::to_string(cfg.out_cols) + ", got " + nn::shape_string(set.targets.shape()));
}

}  // namespace

double mean_loss(Network<float>& net, const SampleSet& set, int batch_size) {
  check_sets(net, set, "evaluation");
  double weighted = 0.0;
  for (std::size_t b = 0; b < set.size(); b += static_cast<std::size_t>(batch_size)) {
    const auto idx = iota(b, std::min(set.size(), b + static_cast<std::size_t>(batch_size)));
    const auto batch = set.gather(idx);
    const auto out = net.forward(batch.inputs);
    weighted += nn::mae_loss(out, batch.targets) * static_cast<double>(idx.size());
  }
  return weighted / static_cast<double>(set.size());
}

TrainHistory train(Network<float>& net, const SampleSet& train_set, const SampleSet& val_set,
                   const TrainConfig& tc, const EpochCallback& on_epoch) {
  tc.validate();
  check_sets(net, train_set, "training");
  check_sets(net, val_set, "validation");

  Rng rng(tc.shuffle_seed);
  std::vector<std::size_t> order = iota(0, train_set.size());
  const float lr = static_cast<float>(tc.lr);

  TrainHistory hist;
  hist.best_val_loss = std::numeric_limits<double>::infinity();
  double reference = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  auto best = net.snapshot();
  nn::Tensor<float> grad;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double weighted = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tc.batch_size)) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                             order.size(), b + tc.batch_size)));
      const auto batch = train_set.gather(idx);
      const auto out = net.forward(batch.inputs, true);
      const double loss = nn::mae_loss(out, batch.targets);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b / tc.batch_size));
      }
      nn::mae_grad(out, batch.targets, grad);
      net.backward(grad);
      for (const auto& p : net.parameters()) {
        if (!p.grad.all_finite()) {
          throw NumericError("non-finite gradient in " + p.name + " at epoch " + std::to_string(epoch));
        }
      }
      net.sgd_step(lr);
      weighted += loss * static_cast<double>(idx.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weighted / static_cast<double>(order.size());
    rec.val_loss = mean_loss(net, val_set, tc.batch_size);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    hist.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < hist.best_val_loss) {
      hist.best_val_loss = rec.val_loss;
      hist.best_epoch = epoch;
      best = net.snapshot();
    }
    if (rec.val_loss < reference - tc.early_stop_delta) {
      reference = rec.val_loss;
      since_improvement = 0;
    } else if (++since_improvement >= tc.early_stop_patience) {
      hist.early_stopped = true;
      break;
    }
  }
  net.restore(best);
  return hist;
}

nn::Tensor<float> predict(Network<float>& net, const nn::Tensor<float>& inputs, int batch_size) {
  require(inputs.rank() == 2, "predict: inputs must be N x input_dim");
  require(batch_size >= 1, "predict: batch_size must be >= 1");
  const auto& cfg = net.config();
  const std::size_t n = inputs.dim(0);
  const std::size_t per = static_cast<std::size_t>(cfg.out_rows) * cfg.out_cols;
  nn::Tensor<float> out({n, 1, static_cast<std::size_t>(cfg.out_rows), static_cast<std::size_t>(cfg.out_cols)});
  SampleSet set{inputs, nn::Tensor<float>({n, 1})};
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
    const auto idx = iota(b, std::min(n, b + static_cast<std::size_t>(batch_size)));
    const auto y = net.forward(set.gather(idx).inputs);
    std::memcpy(out.data() + b * per, y.data(), y.size() * sizeof(float));
  }
  return out;
}

Image tensor_image(const nn::Tensor<float>& batch, std::size_t i) {
  require(batch.rank() == 4 && batch.dim(1) == 1 && i < batch.dim(0), "tensor_image: bad tensor or index");
  const int rows = static_cast<int>(batch.dim(2));
  const int cols = static_cast<int>(batch.dim(3));
  const std::size_t per = static_cast<std::size_t>(rows) * cols;
  Image img(cols, rows);
  for (std::size_t k = 0; k < per; ++k) img.values[k] = batch[i * per + k];
  return img;
}

MetricsReport evaluate(Network<float>& net, const SampleSet& test_set, const std::vector<std::string>& ids,
                       int active_w, int active_h, const std::string& dataset_name, const SsimOptions& opt) {
  check_sets(net, test_set, "test");
  require(ids.size() == test_set.size(), "evaluate: one id per test example required");
  const auto pred = predict(net, test_set.inputs);
  std::vector<MetricRow> rows;
  rows.reserve(ids.size());
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const Image x = crop(tensor_image(pred, i), active_w, active_h);
    const Image ref = crop(tensor_image(test_set.targets, i), active_w, active_h);
    rows.push_back({ids[i], ssim(x, ref, opt), psnr(x, ref), nrmse(x, ref)});
  }
  return aggregate(dataset_name, std::move(rows), opt);
}

}  // namespace ptomo
