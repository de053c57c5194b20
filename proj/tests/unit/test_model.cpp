#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fd.hpp"
#include "ptomo/checkpoint.hpp"
#include "ptomo/config.hpp"
#include "ptomo/model.hpp"
#include "ptomo/trainer.hpp"

using namespace ptomo;
using nn::Tensor;

namespace {

NetworkConfig tiny() {
  NetworkConfig c;
  c.input_dim = 4;
  c.seed_maps = 2;
  c.seed_rows = 3;
  c.seed_cols = 2;
  c.fc_width = 12;
  c.block_maps = 3;
  c.n_upblocks = 2;
  c.out_rows = 12;
  c.out_cols = 8;
  return c;
}

SampleSet random_set(const NetworkConfig& c, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SampleSet s{Tensor<float>({n, static_cast<std::size_t>(c.input_dim)}),
              Tensor<float>({n, 1, static_cast<std::size_t>(c.out_rows), static_cast<std::size_t>(c.out_cols)})};
  for (auto& v : s.inputs.values()) v = static_cast<float>(rng.normal());
  for (auto& v : s.targets.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return s;
}

}  // namespace

TEST(NetworkConfig, FullScaleDefaults) {
  const auto c = NetworkConfig::full();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.fc_width, 20 * 25 * 15);
  EXPECT_EQ(fc2_parameter_count(c), 56257500u);
}

TEST(NetworkConfig, InconsistentConfigsRejected) {
  auto c = NetworkConfig::full();
  c.fc_width = 7000;
  EXPECT_THROW(c.validate(), ValidationError);
  c = NetworkConfig::full();
  c.out_rows = 100;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(NetworkConfig, ScaledVariantsValid) {
  for (const char* s : {"quarter", "half", "full"}) {
    const auto c = NetworkConfig::for_scale(s);
    EXPECT_NO_THROW(c.validate()) << s;
  }
  EXPECT_EQ(NetworkConfig::quarter().out_rows, 50);
  EXPECT_EQ(NetworkConfig::quarter().out_cols, 30);
  EXPECT_EQ(NetworkConfig::half().out_rows, 100);
  EXPECT_THROW(NetworkConfig::for_scale("eighth"), ValidationError);
}

TEST(NetworkConfig, ConfigRoundTrip) {
  const auto c = tiny();
  KeyValueConfig kv;
  network_config_to(c, kv);
  EXPECT_EQ(network_config_from(kv, NetworkConfig::full()), c);
}

TEST(Network, LayerSequenceAndShapes) {
  Rng rng(1);
  auto net = Network<float>::build(tiny(), rng);
  const auto& p = net.parameters();
  ASSERT_EQ(p.size(), 2u * (2 + 2 * 2 + 1));
  EXPECT_EQ(p[0].name, "fc1.weight");
  EXPECT_EQ(p[2].value.shape(), (std::vector<std::size_t>{12, 12}));
  EXPECT_EQ(p[4].value.shape(), (std::vector<std::size_t>{3, 2, 3, 3}));
  EXPECT_EQ(p.back().value.shape(), (std::vector<std::size_t>{1}));
  for (std::size_t i = 1; i < p.size(); i += 2) {
    for (float v : p[i].value.values()) EXPECT_EQ(v, 0.0f) << p[i].name;
  }
  for (std::size_t batch : {1u, 3u}) {
    Tensor<float> x({batch, 4}, 0.5f);
    const auto y = net.forward(x);
    EXPECT_EQ(y.shape(), (std::vector<std::size_t>{batch, 1, 12, 8}));
  }
}

TEST(Network, QuarterForwardShape) {
  Rng rng(2);
  auto net = Network<float>::build(NetworkConfig::quarter(), rng);
  Tensor<float> x({2, 50}, 0.1f);
  EXPECT_EQ(net.forward(x).shape(), (std::vector<std::size_t>{2, 1, 50, 30}));
}

TEST(Network, QuarterWithFullWidthFc) {
  // Seed 20@25x15 with one upblock keeps fc_width 7500 and yields 50x30.
  NetworkConfig c = NetworkConfig::full();
  c.n_upblocks = 1;
  c.out_rows = 50;
  c.out_cols = 30;
  Rng rng(3);
  auto net = Network<float>::build(c, rng);
  Tensor<float> x({1, 50}, 0.1f);
  EXPECT_EQ(net.forward(x).shape(), (std::vector<std::size_t>{1, 1, 50, 30}));
}

TEST(Network, ZeroInputIsDeterministic) {
  Rng a(4), b(4);
  auto n1 = Network<float>::build(tiny(), a);
  auto n2 = Network<float>::build(tiny(), b);
  Tensor<float> x({1, 4});
  const auto y1 = n1.forward(x);
  EXPECT_TRUE(y1.all_finite());
  EXPECT_EQ(y1, n2.forward(x));
}

TEST(Network, IdenticalInputsIdenticalOutputs) {
  Rng rng(5);
  auto net = Network<float>::build(tiny(), rng);
  Tensor<float> x({3, 4}, std::vector<float>{0.3f, -1.f, 2.f, 0.5f, 0.3f, -1.f, 2.f, 0.5f, 0.3f, -1.f, 2.f, 0.5f});
  const auto y = net.forward(x);
  const std::size_t per = 12 * 8;
  for (std::size_t i = 0; i < per; ++i) {
    EXPECT_EQ(y[i], y[per + i]);
    EXPECT_EQ(y[i], y[2 * per + i]);
  }
}

TEST(Network, WrongInputWidthThrows) {
  Rng rng(6);
  auto net = Network<float>::build(tiny(), rng);
  Tensor<float> x({1, 5});
  EXPECT_THROW(net.forward(x), ValidationError);
}

TEST(Network, InferMatchesForward) {
  Rng rng(7);
  auto net = Network<float>::build(tiny(), rng);
  Tensor<float> x({2, 4}, 0.25f);
  EXPECT_EQ(net.infer(x), net.forward(x, true));
}

TEST(Network, EndToEndGradientMatchesFiniteDifferences) {
  for (auto mode : {nn::Upsampling::Nearest, nn::Upsampling::Bilinear}) {
    auto cfg = tiny();
    cfg.upsampling = mode;
    Rng rng(8);
    auto net = Network<double>::build(cfg, rng);
    // Nonzero biases so every bias gradient path is exercised.
    for (auto& p : net.parameters()) {
      if (p.name.ends_with(".bias")) {
        for (auto& v : p.value.values()) v = rng.uniform(0.05, 0.2);
      }
    }
    auto x = fd::random_tensor({2, 4}, rng);
    const auto r = fd::random_tensor({2, 1, 12, 8}, rng);
    auto loss = [&] { return fd::dot(net.forward(x), r); };
    net.forward(x, true);
    Tensor<double> dx;
    net.backward(r, &dx);
    EXPECT_LT(fd::max_rel_err(dx, fd::numeric_grad(x, loss)), 1e-4);
    for (auto& p : net.parameters()) {
      const auto analytic = p.grad;
      EXPECT_LT(fd::max_rel_err(analytic, fd::numeric_grad(p.value, loss)), 1e-4) << p.name;
    }
  }
}

TEST(Network, CastRoundTrip) {
  Rng rng(9);
  auto net = Network<float>::build(tiny(), rng);
  const auto back = net.cast<double>().cast<float>();
  EXPECT_EQ(back.snapshot(), net.snapshot());
}

TEST(Training, EmptySetsRejected) {
  Rng rng(1);
  auto net = Network<float>::build(tiny(), rng);
  const auto good = random_set(tiny(), 4, 2);
  SampleSet empty;
  TrainConfig tc;
  tc.max_epochs = 1;
  EXPECT_THROW(train(net, empty, good, tc), ValidationError);
  EXPECT_THROW(train(net, good, empty, tc), ValidationError);
}

TEST(Training, InfiniteDeltaStopsAfterPatience) {
  Rng rng(2);
  auto net = Network<float>::build(tiny(), rng);
  const auto tr = random_set(tiny(), 6, 3);
  const auto va = random_set(tiny(), 3, 4);
  TrainConfig tc;
  tc.max_epochs = 100;
  tc.early_stop_delta = std::numeric_limits<double>::infinity();
  tc.early_stop_patience = 7;
  const auto h = train(net, tr, va, tc);
  EXPECT_EQ(h.epochs.size(), 7u);
  EXPECT_TRUE(h.early_stopped);
}

TEST(Training, RestoresBestValidationParameters) {
  Rng rng(3);
  auto net = Network<float>::build(tiny(), rng);
  const auto tr = random_set(tiny(), 10, 5);
  const auto va = random_set(tiny(), 4, 6);
  TrainConfig tc;
  tc.lr = 0.05;
  tc.batch_size = 3;
  tc.max_epochs = 30;
  const auto h = train(net, tr, va, tc);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : h.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(h.best_val_loss, best);
  EXPECT_EQ(mean_loss(net, va, tc.batch_size), best);
}

TEST(Training, DeterministicForFixedSeeds) {
  auto run = [] {
    Rng rng(4);
    auto net = Network<float>::build(tiny(), rng);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.batch_size = 4;  // leaves a partial last batch
    tc.max_epochs = 5;
    tc.shuffle_seed = 99;
    auto h = train(net, random_set(tiny(), 10, 7), random_set(tiny(), 3, 8), tc);
    return std::make_pair(h, net.snapshot());
  };
  const auto [h1, p1] = run();
  const auto [h2, p2] = run();
  ASSERT_EQ(h1.epochs.size(), h2.epochs.size());
  for (std::size_t i = 0; i < h1.epochs.size(); ++i) {
    EXPECT_EQ(h1.epochs[i].train_loss, h2.epochs[i].train_loss);
    EXPECT_EQ(h1.epochs[i].val_loss, h2.epochs[i].val_loss);
  }
  EXPECT_EQ(p1, p2);
}

TEST(Training, NanInputAborts) {
  Rng rng(5);
  auto net = Network<float>::build(tiny(), rng);
  auto tr = random_set(tiny(), 4, 9);
  tr.inputs[0] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig tc;
  tc.max_epochs = 2;
  EXPECT_THROW(train(net, tr, random_set(tiny(), 2, 10), tc), NumericError);
}

TEST(Training, MemorizesOneQuarterScaleExample) {
  // One phantom-like target: a Gaussian bump in the active area.
  const auto cfg = NetworkConfig::quarter();
  SampleSet one{Tensor<float>({1, 50}), Tensor<float>({1, 1, 50, 30})};
  Rng rng(11);
  for (auto& v : one.inputs.values()) v = static_cast<float>(rng.normal());
  for (int r = 0; r < 49; ++r) {
    for (int c = 0; c < 29; ++c) {
      const double d2 = (r - 20.0) * (r - 20.0) + (c - 14.0) * (c - 14.0);
      one.targets[static_cast<std::size_t>(r) * 30 + c] = static_cast<float>(std::exp(-d2 / 50.0));
    }
  }
  auto net = Network<float>::build(cfg, rng);
  TrainConfig tc;
  tc.lr = 0.1;
  tc.batch_size = 1;
  tc.max_epochs = 200;
  tc.early_stop_patience = 200;
  const auto h = train(net, one, one, tc);
  ASSERT_EQ(h.epochs.size(), 200u);
  EXPECT_LE(h.epochs.back().train_loss, h.epochs.front().train_loss / 100.0);
}

TEST(TrainHistory, CsvLayout) {
  TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.25, 1.5});
  EXPECT_EQ(h.to_csv(), "epoch,train_loss,val_loss\n1,0.5,0.25\n");
  EXPECT_EQ(h.timing_csv(), "epoch,seconds\n1,1.500\n");
}

TEST(Checkpoint, RoundTripAndShapeCheck) {
  Rng rng(12);
  auto net = Network<float>::build(tiny(), rng);
  auto ck = Checkpoint::from_network(net);
  ck.pca.mean = {0, 0, 0, 0};
  ck.pca.components = Matrix(4, 4, 0.0);
  ck.pca.eigenvalues = {1, 1, 1, 1};
  ck.pca.explained_variance_ratio = {0.25, 0.25, 0.25, 0.25};
  ck.training_seed = 42;
  ck.best_val_loss = 0.125;
  ck.dataset_hash = 0xABCDEF;
  const auto bytes = ck.serialize();
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PTCK");
  const auto back = Checkpoint::deserialize(bytes);
  EXPECT_EQ(back, ck);
  EXPECT_EQ(back.serialize(), bytes);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(Checkpoint::deserialize(truncated), ValidationError);
  Tensor<float> x({1, 4}, 1.0f);
  auto restored = back.network_instance();
  EXPECT_EQ(restored.forward(x), net.forward(x));
}
