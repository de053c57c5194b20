#pragma once

#include <cstdint>
#include <string>

#include "ptomo/checkpoint.hpp"
#include "ptomo/config.hpp"
#include "ptomo/datastore.hpp"
#include "ptomo/geometry.hpp"
#include "ptomo/metrics.hpp"
#include "ptomo/model.hpp"
#include "ptomo/phantom.hpp"
#include "ptomo/trainer.hpp"

namespace ptomo {

inline constexpr const char* kVersion = "1.0.0";

/// Seeds of every random stream, all derived from the run seed:
///   phantoms = derive_seed(seed, "gen.phantoms")
///   split    = derive_seed(seed, "gen.split")
///   init     = derive_seed(seed, "train.init")
///   shuffle  = derive_seed(seed, "train.shuffle")
///   bench    = derive_seed(seed, "bench.inputs")
struct SeedPlan {
  std::uint64_t phantoms = 0;
  std::uint64_t split = 0;
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t bench = 0;

  static SeedPlan from(std::uint64_t seed);
};

struct GenSettings {
  std::size_t count = 3000;
  ProjectionMode mode = ProjectionMode::Analytic;
  double noise_std = 0.0;
  std::uint32_t pca_components = 50;
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
};

struct EvalSettings {
  std::string split = "test";  // train, val or test
  int samples = 4;             // composites written
  bool self_check = false;     // compare targets with themselves
  std::string dataset_name = "phantom";
  SsimOptions ssim;
};

struct BenchSettings {
  int batch = 1;
  double duration = 2.0;     // seconds per thread count
  bool thread_sweep = true;  // measure 1..threads workers
};

/// Every setting of a run, resolved from defaults, the config file and
/// overrides. `to_config` writes the complete resolved set, so a manifest
/// can be passed back as --config.
struct Settings {
  std::string scale = "quarter";
  std::uint64_t seed = 0;
  int threads = 1;

  Grid grid;
  CameraLayoutConfig cameras;
  PhantomSpec phantom;
  GenSettings gen;
  NetworkConfig network;
  TrainConfig train;
  EvalSettings eval;
  BenchSettings bench;
  ImageFormat image_format = ImageFormat::PNG;

  std::string dataset_path;     // input.dataset
  std::string checkpoint_path;  // input.checkpoint
  std::string readings_path;    // input.readings

  /// Reads every known key; unknown keys raise ValidationError.
  static Settings resolve(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
  SeedPlan seeds() const { return SeedPlan::from(seed); }
};

Grid grid_for_scale(const std::string& scale);

struct Geometry {
  Grid grid;
  CameraSet cameras;
  ProjectionOperator op;
};

Geometry build_geometry(const Settings& s);

DatasetFile run_generate(const Settings& s, const Geometry& geo);

struct TrainResult {
  Checkpoint checkpoint;
  TrainHistory history;
};

/// Builds the network from the init seed and trains on the dataset's
/// training split, validating on its validation split.
TrainResult run_training(const Settings& s, const DatasetFile& ds, const EpochCallback& on_epoch = {});

/// Indices of the named split ("train", "val" or "test").
std::vector<std::size_t> split_indices(const DatasetFile& ds, const std::string& name);

struct EvalResult {
  MetricsReport report;
  std::vector<std::size_t> indices;  // dataset rows, in report order
  nn::Tensor<float> predictions;     // B x 1 x rows x cols
};

/// Metrics of the checkpoint on the configured split; ValidationError if
/// the checkpoint was trained on a different dataset.
EvalResult run_evaluation(const Settings& s, const Checkpoint& ck, const DatasetFile& ds);

/// Network outputs for raw reading rows (N x reading_width).
nn::Tensor<float> reconstruct(const Checkpoint& ck, const Matrix& readings);

}  // namespace ptomo
