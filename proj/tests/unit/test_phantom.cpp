#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "ptomo/config.hpp"
#include "ptomo/error.hpp"
#include "ptomo/phantom.hpp"

using namespace ptomo;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15 * eps) return left + right + diff / 15;
  return simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), eps, 60);
}

// Line integral by quadrature over arclength, split into pieces so no
// Gaussian peak is missed by the initial sampling.
double quadrature_projection(const std::vector<Blob>& blobs, const LineOfSight& los) {
  const double len = los.length();
  auto f = [&](double s) {
    const Point2 p = los.at(s / len);
    double v = 0.0;
    for (const auto& b : blobs) {
      const double dx = p.x - b.center.x, dy = p.y - b.center.y;
      v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
    }
    return v;
  };
  const int pieces = 64;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    total += adaptive_simpson(f, len * i / pieces, len * (i + 1) / pieces, 1e-16);
  }
  return total;
}

}  // namespace

TEST(Phantom, DeterministicInSeed) {
  const auto g = Grid::quarter();
  const auto spec = PhantomSpec{};
  const auto a = sample_phantom(spec, 42, g);
  const auto b = sample_phantom(spec, 42, g);
  EXPECT_EQ(a.blobs, b.blobs);
  EXPECT_EQ(a.image, b.image);
  EXPECT_NE(sample_phantom(spec, 43, g).blobs, a.blobs);
}

TEST(Phantom, DrawsWithinRanges) {
  const auto g = Grid::quarter();
  const PhantomSpec spec;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto ph = sample_phantom(spec, s, g);
    ASSERT_GE(ph.blobs.size(), 1u);
    ASSERT_LE(ph.blobs.size(), 6u);
    for (const auto& b : ph.blobs) {
      EXPECT_GT(b.sigma, 0.0);
      EXPECT_GE(b.amplitude, 0.0);
      EXPECT_TRUE(spec.core_region.contains(b.center) || spec.divertor_region.contains(b.center));
    }
  }
}

TEST(Phantom, ImageMatchesBlobSum) {
  const auto g = Grid::quarter();
  const auto ph = sample_phantom(PhantomSpec{}, 7, g);
  ASSERT_EQ(ph.image.width, 30);
  ASSERT_EQ(ph.image.height, 50);
  for (int r = 0; r < g.height_px; ++r) {
    for (int c = 0; c < g.width_px; ++c) {
      const Point2 x = g.pixel_center(c, r);
      double v = 0.0;
      for (const auto& b : ph.blobs) {
        const Point2 d = x - b.center;
        v += b.amplitude * std::exp(-(d.x * d.x + d.y * d.y) / (2 * b.sigma * b.sigma));
      }
      EXPECT_NEAR(ph.image(c, r), v, 1e-14);
    }
  }
}

TEST(Phantom, PaddingStaysZeroAndPixelsNonnegative) {
  const auto g = Grid::full();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ph = sample_phantom(PhantomSpec{}, s, g);
    for (int r = 0; r < g.pad_height_px; ++r) {
      for (int c = 0; c < g.pad_width_px; ++c) {
        if (c >= g.width_px || r >= g.height_px) {
          ASSERT_EQ(ph.image(c, r), 0.0);
        } else {
          ASSERT_GE(ph.image(c, r), 0.0);
        }
      }
    }
  }
}

TEST(Phantom, SingleBlobPeakBound) {
  const auto g = Grid::full();
  PhantomSpec spec;
  spec.n_blobs = {1, 1};
  spec.amplitude = {0.6, 0.6};
  spec.divertor_blob_probability = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto ph = sample_phantom(spec, s, g);
    ASSERT_EQ(ph.blobs.size(), 1u);
    const auto& b = ph.blobs[0];
    double peak = 0.0;
    for (double v : ph.image.values) peak = std::max(peak, v);
    const double off2 = 0.25 * (g.cell_w * g.cell_w + g.cell_h * g.cell_h);
    EXPECT_GT(peak, 0.6 * std::exp(-off2 / (2 * b.sigma * b.sigma)));
    EXPECT_LE(peak, 0.6);
  }
}

TEST(Phantom, DivertorFrequency) {
  const auto g = Grid::quarter();
  PhantomSpec spec;
  // Core blobs kept out of the divertor rectangle so membership identifies the extra blob.
  spec.core_region = {0.5, 1.2, 1.5, 2.8};
  int hits = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const auto ph = sample_phantom(spec, static_cast<std::uint64_t>(s), g);
    for (const auto& b : ph.blobs) {
      if (spec.divertor_region.contains(b.center)) {
        ++hits;
        break;
      }
    }
  }
  EXPECT_NEAR(static_cast<double>(hits) / n, spec.divertor_blob_probability, 0.02);
}

TEST(Phantom, SpecValidation) {
  const auto g = Grid::full();
  PhantomSpec{}.validate(g);
  PhantomSpec s;
  s.sigma = {0.0, 0.1};
  EXPECT_THROW(s.validate(g), ValidationError);
  s = PhantomSpec{};
  s.n_blobs = {3, 2};
  EXPECT_THROW(s.validate(g), ValidationError);
  s = PhantomSpec{};
  s.core_region = {0.5, 1.0, 2.5, 2.0};
  EXPECT_THROW(s.validate(g), ValidationError);
}

TEST(Phantom, SpecConfigRoundTrip) {
  PhantomSpec s;
  s.n_blobs = {2, 3};
  s.divertor_region = {0.7, 0.2, 1.3, 0.6};
  KeyValueConfig kv;
  phantom_spec_to_config(s, kv);
  const auto back = phantom_spec_from_config(kv, PhantomSpec{});
  EXPECT_EQ(back.hash(), s.hash());
  EXPECT_NE(back.hash(), PhantomSpec{}.hash());
}

TEST(AnalyticProjection, EmptyIsZero) {
  EXPECT_EQ(analytic_projection({}, LineOfSight{{0, 0}, {1, 1}}), 0.0);
}

TEST(AnalyticProjection, FullLineGaussian) {
  const std::vector<Blob> blob{{{1.0, 1.5}, 0.1, 0.8}};
  const LineOfSight los{{1.0 - 3.0, 1.5 - 4.0}, {1.0 + 3.0, 1.5 + 4.0}};
  const double expect = 0.8 * 0.1 * std::sqrt(2 * std::numbers::pi);
  EXPECT_NEAR(analytic_projection(blob, los) / expect, 1.0, 1e-9);
}

TEST(AnalyticProjection, MatchesQuadrature) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Blob> blob{{{rng.uniform(0.2, 1.8), rng.uniform(0.3, 3.2)}, rng.uniform(0.03, 0.4),
                            rng.uniform(0.1, 1.0)}};
    // Segments that pass reasonably close to the blob.
    const Point2 near = blob[0].center + Point2{rng.uniform(-2, 2) * blob[0].sigma, rng.uniform(-2, 2) * blob[0].sigma};
    const double a = rng.uniform(0, 2 * std::numbers::pi);
    const Point2 dir{std::cos(a), std::sin(a)};
    const LineOfSight los{near - rng.uniform(0.0, 1.5) * dir, near + rng.uniform(0.0, 1.5) * dir};
    const double exact = quadrature_projection(blob, los);
    if (exact < 1e-200) continue;
    EXPECT_NEAR(analytic_projection(blob, los) / exact, 1.0, 1e-9) << trial;
  }
}

TEST(AnalyticProjection, Superposition) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Blob a{{rng.uniform(0, 2), rng.uniform(0, 3.5)}, rng.uniform(0.05, 0.4), rng.uniform(0, 1)};
    const Blob b{{rng.uniform(0, 2), rng.uniform(0, 3.5)}, rng.uniform(0.05, 0.4), rng.uniform(0, 1)};
    const LineOfSight los{{rng.uniform(-1, 3), rng.uniform(-1, 4.5)}, {rng.uniform(-1, 3), rng.uniform(-1, 4.5)}};
    const std::vector<Blob> both{a, b}, only_a{a}, only_b{b};
    EXPECT_EQ(analytic_projection(both, los), analytic_projection(only_a, los) + analytic_projection(only_b, los));
  }
}

TEST(MakeExample, ZeroAmplitudePhantom) {
  const auto g = Grid::quarter();
  const auto cams = build_cameras(g, CameraLayoutConfig::defaults(g));
  const auto op = assemble_projection(g, cams);
  PhantomSpec spec;
  spec.amplitude = {0.0, 0.0};
  spec.divertor_amplitude = {0.0, 0.0};
  const auto ph = sample_phantom(spec, 3, g);
  for (auto mode : {ProjectionMode::Analytic, ProjectionMode::Discrete}) {
    Rng rng(0);
    const auto ex = make_example(ph, g, cams, op, mode, 0.0, rng);
    ASSERT_EQ(ex.readings.size(), 52u);
    for (double v : ex.readings) EXPECT_EQ(v, 0.0);
    for (double v : ex.target.values) EXPECT_EQ(v, 0.0);
  }
}

TEST(MakeExample, NoiselessReadingsAreNonnegativeAndDeadZero) {
  const auto g = Grid::quarter();
  const auto cams = build_cameras(g, CameraLayoutConfig::defaults(g));
  const auto op = assemble_projection(g, cams);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto ph = sample_phantom(PhantomSpec{}, s, g);
    for (auto mode : {ProjectionMode::Analytic, ProjectionMode::Discrete}) {
      Rng rng(0);
      const auto ex = make_example(ph, g, cams, op, mode, 0.0, rng);
      for (double v : ex.readings) EXPECT_GE(v, 0.0);
      EXPECT_EQ(ex.readings[24], 0.0);
      EXPECT_EQ(ex.readings[51], 0.0);
      for (int ch = 48; ch < 52; ++ch) EXPECT_EQ(ex.readings[ch], 0.0);
    }
  }
}

TEST(MakeExample, Reproducible) {
  const auto g = Grid::quarter();
  const auto cams = build_cameras(g, CameraLayoutConfig::defaults(g));
  const auto op = assemble_projection(g, cams);
  const auto ph = sample_phantom(PhantomSpec{}, 9, g);
  for (auto mode : {ProjectionMode::Analytic, ProjectionMode::Discrete}) {
    Rng r1(5), r2(5);
    EXPECT_EQ(make_example(ph, g, cams, op, mode, 0.01, r1).readings,
              make_example(ph, g, cams, op, mode, 0.01, r2).readings);
  }
}

TEST(MakeExample, GridMismatch) {
  const auto g = Grid::quarter();
  const auto cams = build_cameras(g, CameraLayoutConfig::defaults(g));
  const auto op = assemble_projection(g, cams);
  const auto ph = sample_phantom(PhantomSpec{}, 9, Grid::half());
  Rng rng(0);
  EXPECT_THROW(make_example(ph, g, cams, op, ProjectionMode::Discrete, 0.0, rng), ValidationError);
}

TEST(MakeExample, AnalyticAgreesWithDiscreteAtQuarter) {
  const auto g = Grid::quarter();
  const auto cams = build_cameras(g, CameraLayoutConfig::defaults(g));
  const auto op = assemble_projection(g, cams);
  const double min_sigma = 3 * std::max(g.cell_w, g.cell_h);
  Rng rng(13);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Phantom ph;
    ph.blobs = {{{rng.uniform(0.7, 1.3), rng.uniform(1.0, 2.5)}, rng.uniform(min_sigma, 0.3), rng.uniform(0.2, 1)}};
    ph.image = pad(render_blobs(ph.blobs, g), g.pad_width_px, g.pad_height_px);
    Rng r1(0), r2(0);
    const auto an = make_example(ph, g, cams, op, ProjectionMode::Analytic, 0.0, r1).readings;
    const auto di = make_example(ph, g, cams, op, ProjectionMode::Discrete, 0.0, r2).readings;
    for (int ch = 0; ch < 48; ++ch) {
      if (cams.is_dead(ch)) continue;
      const auto seg = in_domain_segment(g, cams.lines[ch]);
      const Point2 d = ph.blobs[0].center - seg->start;
      const Point2 u = (1.0 / seg->length()) * (seg->end - seg->start);
      const double t = dot(d, u);
      const double sigma = ph.blobs[0].sigma;
      // Oblique sight lines through the blob core whose segment covers its 3 sigma support.
      const double off_axis = std::min(std::abs(u.x), std::abs(u.y));
      if (off_axis < std::sin(10 * std::numbers::pi / 180)) continue;
      if (norm(d - t * u) > sigma || t < 3 * sigma || seg->length() - t < 3 * sigma) continue;
      const double rel = std::abs(an[ch] - di[ch]) / an[ch];
      EXPECT_LT(rel, 0.05);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}
