#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptomo/geometry.hpp"
#include "ptomo/image.hpp"
#include "ptomo/pca.hpp"
#include "ptomo/phantom.hpp"
#include "ptomo/trainer.hpp"

namespace ptomo {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetExample {
  std::uint64_t seed = 0;
  std::vector<float> readings;  // reading_width values
  std::vector<float> image;     // padded image, row-major

  friend bool operator==(const DatasetExample&, const DatasetExample&) = default;
};

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded permutation of 0..n-1 cut into floor(train*n), floor(val*n) and
/// the remainder. Requires n >= 10.
SplitIndices split(std::size_t n, const SplitSpec& spec);

struct DatasetFile {
  std::uint32_t reading_width = 0;
  Grid grid;
  std::uint64_t phantom_spec_hash = 0;
  std::uint64_t operator_hash = 0;
  std::uint64_t generation_seed = 0;
  ProjectionMode mode = ProjectionMode::Analytic;
  double noise_std = 0.0;
  double peak_amplitude = 0.0;  // max target pixel over the whole file
  SplitSpec split_spec;
  std::uint32_t pca_components = 50;  // network input width
  PCAModel pca;                       // fitted on the training split
  std::vector<DatasetExample> examples;

  std::size_t size() const { return examples.size(); }
  SplitIndices splits() const { return split(examples.size(), split_spec); }

  std::vector<std::uint8_t> serialize() const;
  static DatasetFile deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static DatasetFile load(const std::string& path);
  std::uint64_t hash() const;

  /// PCA inputs and padded targets for the listed examples.
  SampleSet samples(const std::vector<std::size_t>& indices) const;
  /// Readings of the listed examples as an N x reading_width table.
  Matrix readings(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const DatasetFile&, const DatasetFile&) = default;
};

struct GenerateOptions {
  std::size_t count = 3000;
  PhantomSpec spec;
  ProjectionMode mode = ProjectionMode::Analytic;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  SplitSpec split_spec;
  std::uint32_t pca_components = 50;
  int threads = 1;
};

/// Example i uses phantom seed derive_seed(seed, i). The PCA model is fitted
/// on the training split of the float-stored readings. Output does not
/// depend on the thread count.
DatasetFile generate_dataset(const GenerateOptions& opt, const Grid& grid, const CameraSet& cams,
                             const ProjectionOperator& op);

enum class ImageFormat { PGM16, PNG };

struct ImageScale {
  double min = 0.0;
  double max = 0.0;
  std::uint32_t maxval = 65535;
  bool degenerate = false;  // constant image, written as mid-gray
};

/// Min-max scaled 16-bit grayscale export; the scale goes to `path`.scale.txt.
ImageScale export_image(const Image& img, const std::string& path, ImageFormat format);
/// Reads a PGM16 export back, undoing the scaling recorded in the sidecar.
Image import_pgm16(const std::string& path);

/// `left` and `right` next to each other with a `gap`-pixel column of
/// the lowest value between them.
Image side_by_side(const Image& left, const Image& right, int gap = 2);

}  // namespace ptomo
