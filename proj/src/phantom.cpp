#include "ptomo/phantom.hpp"

#include <cmath>
#include <numbers>

#include "ptomo/binio.hpp"
#include "ptomo/config.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

PhantomSpec PhantomSpec::defaults_for(const Grid& grid) {
  PhantomSpec spec;
  const double sx = grid.extent_w() / 2.0;
  const double sy = grid.extent_h() / 3.5;
  if (std::abs(sx - 1.0) < 1e-12 && std::abs(sy - 1.0) < 1e-12 && grid.origin == Point2{}) return spec;
  auto scale = [&](Rect r) {
    return Rect{grid.origin.x + r.x_min * sx, grid.origin.y + r.y_min * sy,
                grid.origin.x + r.x_max * sx, grid.origin.y + r.y_max * sy};
  };
  spec.core_region = scale(spec.core_region);
  spec.divertor_region = scale(spec.divertor_region);
  return spec;
}

void PhantomSpec::validate(const Grid& grid) const {
  require(n_blobs.lo >= 0 && n_blobs.lo <= n_blobs.hi, "phantom: n_blobs range is empty");
  auto check_interval = [](Interval iv, const char* name, bool strictly_positive) {
    require(iv.lo <= iv.hi, std::string("phantom: ") + name + " range is empty");
    require(strictly_positive ? iv.lo > 0 : iv.lo >= 0,
            std::string("phantom: ") + name + (strictly_positive ? " must be positive" : " must be nonnegative"));
  };
  check_interval(sigma, "sigma", true);
  check_interval(amplitude, "amplitude", false);
  check_interval(divertor_sigma, "divertor_sigma", true);
  check_interval(divertor_amplitude, "divertor_amplitude", false);
  require(divertor_blob_probability >= 0 && divertor_blob_probability <= 1,
          "phantom: divertor_blob_probability must be in [0, 1]");
  const Rect domain{grid.origin.x, grid.origin.y, grid.origin.x + grid.extent_w(),
                    grid.origin.y + grid.extent_h()};
  for (const Rect* r : {&core_region, &divertor_region}) {
    require(r->x_min <= r->x_max && r->y_min <= r->y_max, "phantom: region is empty");
    require(domain.contains({r->x_min, r->y_min}) && domain.contains({r->x_max, r->y_max}),
            "phantom: region lies outside the grid domain");
  }
}

std::uint64_t PhantomSpec::hash() const {
  binio::Writer w;
  w.u32(static_cast<std::uint32_t>(n_blobs.lo));
  w.u32(static_cast<std::uint32_t>(n_blobs.hi));
  for (Interval iv : {sigma, amplitude, divertor_sigma, divertor_amplitude}) {
    w.f64(iv.lo);
    w.f64(iv.hi);
  }
  for (const Rect& r : {core_region, divertor_region}) {
    w.f64(r.x_min);
    w.f64(r.y_min);
    w.f64(r.x_max);
    w.f64(r.y_max);
  }
  w.f64(divertor_blob_probability);
  return binio::fnv1a(w.bytes());
}

Image render_blobs(std::span<const Blob> blobs, const Grid& grid) {
  Image img(grid.width_px, grid.height_px, 0.0);
  for (const Blob& b : blobs) {
    const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
    for (int r = 0; r < grid.height_px; ++r) {
      for (int c = 0; c < grid.width_px; ++c) {
        const Point2 d = grid.pixel_center(c, r) - b.center;
        img(c, r) += b.amplitude * std::exp(-(d.x * d.x + d.y * d.y) * inv);
      }
    }
  }
  return img;
}

Phantom sample_phantom(const PhantomSpec& spec, std::uint64_t seed, const Grid& grid) {
  Rng rng(seed);
  Phantom ph;
  ph.seed = seed;
  const auto n = rng.uniform_int(spec.n_blobs.lo, spec.n_blobs.hi);
  auto draw = [&](const Rect& region, Interval sigma, Interval amplitude) {
    Blob b;
    b.center.x = rng.uniform(region.x_min, region.x_max);
    b.center.y = rng.uniform(region.y_min, region.y_max);
    b.sigma = rng.uniform(sigma.lo, sigma.hi);
    b.amplitude = rng.uniform(amplitude.lo, amplitude.hi);
    return b;
  };
  for (std::int64_t i = 0; i < n; ++i) ph.blobs.push_back(draw(spec.core_region, spec.sigma, spec.amplitude));
  if (rng.bernoulli(spec.divertor_blob_probability)) {
    ph.blobs.push_back(draw(spec.divertor_region, spec.divertor_sigma, spec.divertor_amplitude));
  }
  ph.image = pad(render_blobs(ph.blobs, grid), grid.pad_width_px, grid.pad_height_px);
  return ph;
}

namespace {

/// (erf(b) - erf(a)) / 2 for a <= b, using erfc in the tails to keep
/// relative accuracy when both arguments have the same sign.
double half_erf_difference(double a, double b) {
  if (a >= 0) return 0.5 * (std::erfc(a) - std::erfc(b));
  if (b <= 0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
  return 0.5 * (std::erf(b) - std::erf(a));
}

}  // namespace

double analytic_projection(std::span<const Blob> blobs, const LineOfSight& los) {
  const Point2 d = los.end - los.start;
  const double length = norm(d);
  if (length == 0.0) return 0.0;
  const Point2 u = (1.0 / length) * d;
  double total = 0.0;
  for (const Blob& b : blobs) {
    const Point2 rel = b.center - los.start;
    const double t0 = dot(rel, u);
    const Point2 perp = rel - t0 * u;
    const double d2 = dot(perp, perp);
    const double s2 = b.sigma * std::numbers::sqrt2;
    const double along = half_erf_difference(-t0 / s2, (length - t0) / s2);
    total += b.amplitude * b.sigma * std::sqrt(2.0 * std::numbers::pi) *
             std::exp(-d2 / (2.0 * b.sigma * b.sigma)) * along;
  }
  return total;
}

Example make_example(const Phantom& phantom, const Grid& grid, const CameraSet& cams,
                     const ProjectionOperator& op, ProjectionMode mode, double noise_std, Rng& rng) {
  require(phantom.image.width == grid.pad_width_px && phantom.image.height == grid.pad_height_px,
          "phantom image does not match the grid's padded size");
  Example ex;
  ex.target = phantom.image;
  if (mode == ProjectionMode::Discrete) {
    const Image active = crop(phantom.image, grid.width_px, grid.height_px);
    ex.readings = project(op, cams, active.values, noise_std, rng);
    return ex;
  }
  require(noise_std >= 0 && std::isfinite(noise_std), "noise_std must be a nonnegative number");
  ex.readings.assign(cams.channel_count(), 0.0);
  for (std::size_t ch = 0; ch < cams.lines.size(); ++ch) {
    if (cams.is_dead(static_cast<int>(ch))) continue;
    if (const auto seg = in_domain_segment(grid, cams.lines[ch])) {
      ex.readings[ch] = analytic_projection(phantom.blobs, *seg);
    }
  }
  if (noise_std > 0) {
    for (double& r : ex.readings) r += noise_std * rng.normal();
  }
  for (int ch : cams.dead_channels) ex.readings[ch] = 0.0;
  return ex;
}

PhantomSpec phantom_spec_from_config(const KeyValueConfig& cfg, const PhantomSpec& base) {
  PhantomSpec s = base;
  s.n_blobs.lo = static_cast<int>(cfg.get_int("phantom.n_blobs_min", s.n_blobs.lo));
  s.n_blobs.hi = static_cast<int>(cfg.get_int("phantom.n_blobs_max", s.n_blobs.hi));
  s.sigma.lo = cfg.get_double("phantom.sigma_min", s.sigma.lo);
  s.sigma.hi = cfg.get_double("phantom.sigma_max", s.sigma.hi);
  s.amplitude.lo = cfg.get_double("phantom.amplitude_min", s.amplitude.lo);
  s.amplitude.hi = cfg.get_double("phantom.amplitude_max", s.amplitude.hi);
  s.divertor_sigma.lo = cfg.get_double("phantom.divertor_sigma_min", s.divertor_sigma.lo);
  s.divertor_sigma.hi = cfg.get_double("phantom.divertor_sigma_max", s.divertor_sigma.hi);
  s.divertor_amplitude.lo = cfg.get_double("phantom.divertor_amplitude_min", s.divertor_amplitude.lo);
  s.divertor_amplitude.hi = cfg.get_double("phantom.divertor_amplitude_max", s.divertor_amplitude.hi);
  s.divertor_blob_probability = cfg.get_double("phantom.divertor_probability", s.divertor_blob_probability);
  auto rect = [&](const std::string& key, Rect r) {
    const auto v = cfg.get_doubles(key, {r.x_min, r.y_min, r.x_max, r.y_max});
    require(v.size() == 4, key + " needs 4 values: x_min, y_min, x_max, y_max");
    return Rect{v[0], v[1], v[2], v[3]};
  };
  s.core_region = rect("phantom.core_region", s.core_region);
  s.divertor_region = rect("phantom.divertor_region", s.divertor_region);
  return s;
}

void phantom_spec_to_config(const PhantomSpec& s, KeyValueConfig& cfg) {
  cfg.set("phantom.n_blobs_min", std::int64_t{s.n_blobs.lo});
  cfg.set("phantom.n_blobs_max", std::int64_t{s.n_blobs.hi});
  cfg.set("phantom.sigma_min", s.sigma.lo);
  cfg.set("phantom.sigma_max", s.sigma.hi);
  cfg.set("phantom.amplitude_min", s.amplitude.lo);
  cfg.set("phantom.amplitude_max", s.amplitude.hi);
  cfg.set("phantom.divertor_sigma_min", s.divertor_sigma.lo);
  cfg.set("phantom.divertor_sigma_max", s.divertor_sigma.hi);
  cfg.set("phantom.divertor_amplitude_min", s.divertor_amplitude.lo);
  cfg.set("phantom.divertor_amplitude_max", s.divertor_amplitude.hi);
  cfg.set("phantom.divertor_probability", s.divertor_blob_probability);
  cfg.set("phantom.core_region", std::vector<double>{s.core_region.x_min, s.core_region.y_min,
                                                     s.core_region.x_max, s.core_region.y_max});
  cfg.set("phantom.divertor_region",
          std::vector<double>{s.divertor_region.x_min, s.divertor_region.y_min,
                              s.divertor_region.x_max, s.divertor_region.y_max});
}

}  // namespace ptomo
