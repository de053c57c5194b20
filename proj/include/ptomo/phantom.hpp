#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptomo/geometry.hpp"
#include "ptomo/image.hpp"

namespace ptomo {

class KeyValueConfig;

/// Isotropic Gaussian emissivity blob: amplitude * exp(-|x - center|^2 / (2 sigma^2)).
struct Blob {
  Point2 center;
  double sigma = 0.1;      // m
  double amplitude = 1.0;  // W m^-3

  friend bool operator==(const Blob&, const Blob&) = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool contains(Point2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
};

/// Distribution of random phantoms. Regions are in physical coordinates
/// (meters, same frame as Grid::origin).
///
/// A phantom has n_blobs core blobs inside core_region and, with
/// probability divertor_blob_probability, one extra compact blob inside
/// divertor_region.
struct PhantomSpec {
  IntRange n_blobs{1, 5};
  Interval sigma{0.05, 0.4};
  Interval amplitude{0.2, 1.0};
  Rect core_region{0.5, 1.2, 1.5, 2.8};
  Rect divertor_region{0.6, 0.1, 1.4, 0.8};
  Interval divertor_sigma{0.03, 0.1};
  Interval divertor_amplitude{0.2, 1.0};
  double divertor_blob_probability = 0.7;

  /// Spec scaled to a domain other than the default 2.0 m x 3.5 m one.
  static PhantomSpec defaults_for(const Grid& grid);

  void validate(const Grid& grid) const;
  /// FNV-1a of the canonical binary encoding; stored in dataset headers.
  std::uint64_t hash() const;
};

struct Phantom {
  std::vector<Blob> blobs;
  Image image;  // padded, zero outside the active area
  std::uint64_t seed = 0;
};

/// Active-area rendering of `blobs`, sampled at cell centers.
Image render_blobs(std::span<const Blob> blobs, const Grid& grid);

/// Draws a phantom; a pure function of (spec, seed, grid).
Phantom sample_phantom(const PhantomSpec& spec, std::uint64_t seed, const Grid& grid);

/// Closed-form line integral of the blob mixture along the finite segment
/// los.start -> los.end.
double analytic_projection(std::span<const Blob> blobs, const LineOfSight& los);

enum class ProjectionMode : std::uint8_t { Analytic = 0, Discrete = 1 };

struct Example {
  std::vector<double> readings;  // one per channel
  Image target;                  // padded image
};

/// Readings for a phantom. Analytic mode integrates each sight line's
/// in-domain segment in closed form; Discrete mode applies `op` to the
/// rendered image. Noise is added to every channel, dead channels are zero.
Example make_example(const Phantom& phantom, const Grid& grid, const CameraSet& cams,
                     const ProjectionOperator& op, ProjectionMode mode, double noise_std, Rng& rng);

PhantomSpec phantom_spec_from_config(const KeyValueConfig& cfg, const PhantomSpec& base);
void phantom_spec_to_config(const PhantomSpec& spec, KeyValueConfig& cfg);

}  // namespace ptomo
