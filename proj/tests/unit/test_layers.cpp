#include <gtest/gtest.h>

#include <cmath>

#include "fd.hpp"
#include "ptomo/layers.hpp"

using namespace ptomo;
using namespace ptomo::nn;

TEST(Glorot, LimitForEqualFans) {
  EXPECT_DOUBLE_EQ(glorot_limit(3, 3), 1.0);
  Rng rng(5);
  const auto t = glorot_uniform<double>(3, 3, {1000}, rng);
  for (double v : t.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Glorot, VarianceMatchesUniformLaw) {
  Rng rng(11);
  const auto t = glorot_uniform<double>(50, 7500, {1000000}, rng);
  double mean = 0.0;
  for (double v : t.values()) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (double v : t.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(t.size() - 1);
  const double limit = std::sqrt(6.0 / 7550.0);
  EXPECT_NEAR(var / (limit * limit / 3.0), 1.0, 0.02);
}

TEST(Glorot, SameSeedSameTensor) {
  Rng a(3), b(3);
  EXPECT_EQ(glorot_uniform<float>(4, 6, {4, 6}, a), glorot_uniform<float>(4, 6, {4, 6}, b));
}

TEST(FullyConnected, IdentityWeights) {
  Tensor<double> x({2, 3}, std::vector<double>{1, 2, 3, -4, 5, -6});
  Tensor<double> w({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor<double> b({3});
  Tensor<double> y;
  fc_forward(x, w, b, y);
  EXPECT_EQ(y.values(), x.values());
}

TEST(FullyConnected, BiasGradientIsColumnSum) {
  Rng rng(2);
  auto x = fd::random_tensor({4, 3}, rng);
  auto w = fd::random_tensor({3, 5}, rng);
  auto dy = fd::random_tensor({4, 5}, rng);
  Tensor<double> dx, dw, db;
  fc_backward(x, w, dy, &dx, dw, db);
  for (std::size_t j = 0; j < 5; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += dy[i * 5 + j];
    EXPECT_EQ(db[j], s);
  }
}

TEST(FullyConnected, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  auto x = fd::random_tensor({1, 3}, rng);
  auto w = fd::random_tensor({3, 3}, rng);
  auto b = fd::random_tensor({3}, rng);
  const auto r = fd::random_tensor({1, 3}, rng);
  auto loss = [&] {
    Tensor<double> y;
    fc_forward(x, w, b, y);
    return fd::dot(y, r);
  };
  Tensor<double> dx, dw, db;
  fc_backward(x, w, r, &dx, dw, db);
  EXPECT_LT(fd::max_rel_err(dx, fd::numeric_grad(x, loss)), 1e-4);
  EXPECT_LT(fd::max_rel_err(dw, fd::numeric_grad(w, loss)), 1e-4);
  EXPECT_LT(fd::max_rel_err(db, fd::numeric_grad(b, loss)), 1e-4);
}

TEST(FullyConnected, ShapeMismatchThrows) {
  Tensor<float> x({2, 3}), w({4, 5}), b({5}), y;
  EXPECT_THROW(fc_forward(x, w, b, y), ValidationError);
}

TEST(Conv2d, DeltaKernelIsIdentity) {
  Rng rng(1);
  auto x = fd::random_tensor({1, 1, 4, 5}, rng);
  Tensor<double> k({1, 1, 3, 3});
  k[4] = 1.0;
  Tensor<double> b({1});
  Tensor<double> y;
  conv2d_forward(x, k, b, y);
  EXPECT_EQ(y.values(), x.values());
}

TEST(Conv2d, OnesKernelOnConstantInput) {
  Tensor<double> x({1, 1, 5, 6}, 2.0);
  Tensor<double> k({1, 1, 3, 3}, 1.0);
  Tensor<double> b({1}, std::vector<double>{0.5});
  Tensor<double> y;
  conv2d_forward(x, k, b, y);
  EXPECT_DOUBLE_EQ(y[2 * 6 + 3], 9 * 2.0 + 0.5);  // interior
  EXPECT_DOUBLE_EQ(y[0], 4 * 2.0 + 0.5);          // corner sees 4 pixels
  EXPECT_DOUBLE_EQ(y[3], 6 * 2.0 + 0.5);          // top edge sees 6
}

TEST(Conv2d, CrossCorrelationNotConvolution) {
  // Kernel with a single 1 at the top-left tap reads the pixel up-left.
  Tensor<double> x({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> k({1, 1, 3, 3});
  k[0] = 1.0;
  Tensor<double> b({1});
  Tensor<double> y;
  conv2d_forward(x, k, b, y);
  EXPECT_DOUBLE_EQ(y[4], 1.0);
  EXPECT_DOUBLE_EQ(y[8], 5.0);
  EXPECT_DOUBLE_EQ(y[0], 0.0);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  auto x = fd::random_tensor({1, 2, 5, 6}, rng);
  auto k = fd::random_tensor({3, 2, 3, 3}, rng);
  auto b = fd::random_tensor({3}, rng);
  const auto r = fd::random_tensor({1, 3, 5, 6}, rng);
  auto loss = [&] {
    Tensor<double> y;
    conv2d_forward(x, k, b, y);
    return fd::dot(y, r);
  };
  Tensor<double> dx, dk, db;
  conv2d_backward(x, k, r, &dx, dk, db);
  EXPECT_LT(fd::max_rel_err(dx, fd::numeric_grad(x, loss)), 1e-4);
  EXPECT_LT(fd::max_rel_err(dk, fd::numeric_grad(k, loss)), 1e-4);
  EXPECT_LT(fd::max_rel_err(db, fd::numeric_grad(b, loss)), 1e-4);
}

TEST(Conv2d, BatchedMatchesPerSample) {
  Rng rng(4);
  auto x = fd::random_tensor({3, 2, 4, 4}, rng);
  auto k = fd::random_tensor({2, 2, 3, 3}, rng);
  auto b = fd::random_tensor({2}, rng);
  Tensor<double> y;
  conv2d_forward(x, k, b, y);
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor<double> xs({1, 2, 4, 4}, std::vector<double>(x.values().begin() + s * 32, x.values().begin() + (s + 1) * 32));
    Tensor<double> ys;
    conv2d_forward(xs, k, b, ys);
    for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(ys[i], y[s * 32 + i]);
  }
}

TEST(Upsample, SinglePixelFillsBlock) {
  Tensor<double> x({1, 1, 1, 1}, std::vector<double>{3.5});
  Tensor<double> y;
  upsample2x_forward(x, y);
  ASSERT_EQ(y.shape(), (std::vector<std::size_t>{1, 1, 2, 2}));
  for (double v : y.values()) EXPECT_EQ(v, 3.5);
}

TEST(Upsample, BackwardOfOnesIsFour) {
  Tensor<double> dy({2, 3, 4, 6}, 1.0);
  Tensor<double> dx;
  upsample2x_backward(dy, dx);
  ASSERT_EQ(dx.shape(), (std::vector<std::size_t>{2, 3, 2, 3}));
  for (double v : dx.values()) EXPECT_EQ(v, 4.0);
}

TEST(Upsample, AveragePoolingUndoesNearest) {
  Rng rng(8);
  const auto x = fd::random_tensor({2, 3, 4, 5}, rng);
  Tensor<double> y;
  upsample2x_forward(x, y);
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        const double* up = y.data() + p * 80;
        const double avg =
            (up[(2 * r) * 10 + 2 * c] + up[(2 * r) * 10 + 2 * c + 1] + up[(2 * r + 1) * 10 + 2 * c] +
             up[(2 * r + 1) * 10 + 2 * c + 1]) / 4.0;
        EXPECT_EQ(avg, x[p * 20 + r * 5 + c]);
      }
    }
  }
}

TEST(Upsample, GradientsMatchFiniteDifferences) {
  for (auto mode : {Upsampling::Nearest, Upsampling::Bilinear}) {
    Rng rng(12);
    auto x = fd::random_tensor({2, 2, 3, 4}, rng);
    const auto r = fd::random_tensor({2, 2, 6, 8}, rng);
    auto loss = [&] {
      Tensor<double> y;
      upsample2x_forward(x, y, mode);
      return fd::dot(y, r);
    };
    Tensor<double> dx;
    upsample2x_backward(r, dx, mode);
    EXPECT_LT(fd::max_rel_err(dx, fd::numeric_grad(x, loss)), 1e-4);
  }
}

TEST(Relu, Values) {
  Tensor<double> x({3}, std::vector<double>{-1.0, 2.0, 0.0});
  relu_forward(x);
  EXPECT_EQ(x.values(), (std::vector<double>{0.0, 2.0, 0.0}));
  auto again = x;
  relu_forward(again);
  EXPECT_EQ(again, x);
}

TEST(Relu, DerivativeAtZeroIsZero) {
  Tensor<double> g({2}, 1.0);
  Tensor<double> a({2}, std::vector<double>{0.0, 1.0});
  relu_backward(g, a);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 1.0);
}

TEST(Relu, GradientMatchesFiniteDifferencesAwayFromKink) {
  Rng rng(21);
  auto x = fd::random_tensor({50}, rng);
  for (auto& v : x.values()) {
    if (std::abs(v) < 1e-3) v = 0.5;
  }
  const auto r = fd::random_tensor({50}, rng);
  auto loss = [&] {
    auto y = x;
    relu_forward(y);
    return fd::dot(y, r);
  };
  auto g = r;
  relu_backward(g, x);
  EXPECT_LT(fd::max_rel_err(g, fd::numeric_grad(x, loss)), 1e-4);
}

TEST(Mae, IdenticalIsZero) {
  Rng rng(1);
  const auto p = fd::random_tensor({2, 1, 3, 3}, rng);
  EXPECT_EQ(mae_loss(p, p), 0.0);
  Tensor<double> g;
  mae_grad(p, p, g);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Mae, ConstantOffset) {
  Tensor<double> t({2, 4}, 1.0);
  Tensor<double> p({2, 4}, 1.25);
  EXPECT_DOUBLE_EQ(mae_loss(p, t), 0.25);
  Tensor<double> g;
  mae_grad(p, t, g);
  for (double v : g.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 8.0);
}

TEST(Mae, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  auto p = fd::random_tensor({2, 1, 4, 4}, rng);
  const auto t = fd::random_tensor({2, 1, 4, 4}, rng);
  Tensor<double> g;
  mae_grad(p, t, g);
  const auto num = fd::numeric_grad(p, [&] { return mae_loss(p, t); });
  EXPECT_LT(fd::max_rel_err(g, num), 1e-4);
}

TEST(Mae, ShapeMismatchThrows) {
  Tensor<float> a({2, 3}), b({3, 2});
  EXPECT_THROW(mae_loss(a, b), ValidationError);
}

TEST(Sgd, Step) {
  std::vector<float> p{1.0f};
  const std::vector<float> g{2.0f};
  sgd_step<float>(p, g, 0.001f);
  EXPECT_FLOAT_EQ(p[0], 0.998f);
  std::vector<double> q{1.0, -2.0};
  const std::vector<double> zero{0.0, 0.0};
  sgd_step<double>(q, zero, 0.1);
  EXPECT_EQ(q, (std::vector<double>{1.0, -2.0}));
}

TEST(Sgd, QuadraticLossDecreases) {
  // loss = p^2 / 2, gradient p.
  for (double lr : {0.001, 0.5, 1.9}) {
    std::vector<double> p{1.0};
    const std::vector<double> g{p[0]};
    sgd_step<double>(p, g, lr);
    EXPECT_DOUBLE_EQ(p[0], 1.0 - lr);
    EXPECT_LT(0.5 * p[0] * p[0], 0.5);
  }
}
