#include "ptomo/pipeline.hpp"

#include <cmath>

#include "ptomo/binio.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

SeedPlan SeedPlan::from(std::uint64_t seed) {
  SeedPlan p;
  p.phantoms = derive_seed(seed, "gen.phantoms");
  p.split = derive_seed(seed, "gen.split");
  p.init = derive_seed(seed, "train.init");
  p.shuffle = derive_seed(seed, "train.shuffle");
  p.bench = derive_seed(seed, "bench.inputs");
  return p;
}

Grid grid_for_scale(const std::string& scale) {
  if (scale == "full") return Grid::full();
  if (scale == "half") return Grid::half();
  if (scale == "quarter") return Grid::quarter();
  throw ValidationError("unknown scale '" + scale + "' (expected quarter, half or full)");
}

namespace {

ProjectionMode parse_mode(const std::string& s) {
  if (s == "analytic") return ProjectionMode::Analytic;
  if (s == "discrete") return ProjectionMode::Discrete;
  throw ValidationError("gen.mode must be 'analytic' or 'discrete', got '" + s + "'");
}

ImageFormat parse_format(const std::string& s) {
  if (s == "png") return ImageFormat::PNG;
  if (s == "pgm16") return ImageFormat::PGM16;
  throw ValidationError("output.image_format must be 'png' or 'pgm16', got '" + s + "'");
}

}  // namespace

Settings Settings::resolve(const KeyValueConfig& cfg) {
  Settings s;
  s.scale = cfg.get_string("scale", s.scale);
  const auto seed = cfg.get_int("seed", 0);
  require(seed >= 0, "seed must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  s.threads = static_cast<int>(cfg.get_int("threads", s.threads));
  require(s.threads >= 1, "threads must be >= 1");

  s.grid = grid_from_config(cfg, grid_for_scale(s.scale));
  s.grid.validate();
  s.cameras = cameras_from_config(cfg, s.grid);
  s.phantom = phantom_spec_from_config(cfg, PhantomSpec::defaults_for(s.grid));
  s.phantom.validate(s.grid);

  const auto count = cfg.get_int("gen.count", static_cast<std::int64_t>(s.gen.count));
  require(count >= 1, "gen.count must be >= 1");
  s.gen.count = static_cast<std::size_t>(count);
  s.gen.mode = parse_mode(cfg.get_string("gen.mode", "analytic"));
  s.gen.noise_std = cfg.get_double("gen.noise_std", s.gen.noise_std);
  require(s.gen.noise_std >= 0.0, "gen.noise_std must be >= 0");
  const auto comps = cfg.get_int("gen.pca_components", s.gen.pca_components);
  require(comps >= 1, "gen.pca_components must be >= 1");
  s.gen.pca_components = static_cast<std::uint32_t>(comps);
  s.gen.split_train = cfg.get_double("gen.split_train", s.gen.split_train);
  s.gen.split_val = cfg.get_double("gen.split_val", s.gen.split_val);
  s.gen.split_test = cfg.get_double("gen.split_test", s.gen.split_test);
  SplitSpec{s.gen.split_train, s.gen.split_val, s.gen.split_test, 0}.validate();

  s.network = network_config_from(cfg, NetworkConfig::for_scale(s.scale, static_cast<int>(s.gen.pca_components)));
  require(s.network.out_rows == s.grid.pad_height_px && s.network.out_cols == s.grid.pad_width_px,
          "network output " + std::to_string(s.network.out_rows) + "x" + std::to_string(s.network.out_cols) +
              " does not match the padded grid " + std::to_string(s.grid.pad_height_px) + "x" +
              std::to_string(s.grid.pad_width_px) + " (rows x cols)");
  s.train = train_config_from(cfg, s.train);

  s.eval.split = cfg.get_string("eval.split", s.eval.split);
  require(s.eval.split == "train" || s.eval.split == "val" || s.eval.split == "test",
          "eval.split must be train, val or test");
  s.eval.samples = static_cast<int>(cfg.get_int("eval.samples", s.eval.samples));
  require(s.eval.samples >= 0, "eval.samples must be >= 0");
  s.eval.self_check = cfg.get_bool("eval.self_check", s.eval.self_check);
  s.eval.dataset_name = cfg.get_string("eval.dataset_name", s.eval.dataset_name);
  require(!s.eval.dataset_name.empty() && s.eval.dataset_name.find(',') == std::string::npos,
          "eval.dataset_name must be nonempty and contain no commas");
  s.eval.ssim.window = static_cast<int>(cfg.get_int("eval.ssim_window", s.eval.ssim.window));
  s.eval.ssim.k1 = cfg.get_double("eval.ssim_k1", s.eval.ssim.k1);
  s.eval.ssim.k2 = cfg.get_double("eval.ssim_k2", s.eval.ssim.k2);
  require(s.eval.ssim.window >= 3 && s.eval.ssim.window % 2 == 1, "eval.ssim_window must be odd and >= 3");

  s.bench.batch = static_cast<int>(cfg.get_int("bench.batch", s.bench.batch));
  require(s.bench.batch >= 1, "bench.batch must be >= 1");
  s.bench.duration = cfg.get_double("bench.duration", s.bench.duration);
  require(s.bench.duration > 0.0 && std::isfinite(s.bench.duration), "bench.duration must be positive");
  s.bench.thread_sweep = cfg.get_bool("bench.thread_sweep", s.bench.thread_sweep);

  s.image_format = parse_format(cfg.get_string("output.image_format", "png"));
  s.dataset_path = cfg.get_string("input.dataset", "");
  s.checkpoint_path = cfg.get_string("input.checkpoint", "");
  s.readings_path = cfg.get_string("input.readings", "");

  cfg.reject_unused();
  return s;
}

KeyValueConfig Settings::to_config() const {
  KeyValueConfig c;
  c.set("scale", scale);
  c.set("seed", static_cast<std::int64_t>(seed));
  c.set("threads", std::int64_t{threads});
  grid_to_config(grid, c);
  cameras_to_config(cameras, c);
  phantom_spec_to_config(phantom, c);
  c.set("gen.count", static_cast<std::int64_t>(gen.count));
  c.set("gen.mode", std::string(gen.mode == ProjectionMode::Analytic ? "analytic" : "discrete"));
  c.set("gen.noise_std", gen.noise_std);
  c.set("gen.pca_components", std::int64_t{gen.pca_components});
  c.set("gen.split_train", gen.split_train);
  c.set("gen.split_val", gen.split_val);
  c.set("gen.split_test", gen.split_test);
  network_config_to(network, c);
  train_config_to(train, c);
  c.set("eval.split", eval.split);
  c.set("eval.samples", std::int64_t{eval.samples});
  c.set("eval.self_check", std::string(eval.self_check ? "true" : "false"));
  c.set("eval.dataset_name", eval.dataset_name);
  c.set("eval.ssim_window", std::int64_t{eval.ssim.window});
  c.set("eval.ssim_k1", eval.ssim.k1);
  c.set("eval.ssim_k2", eval.ssim.k2);
  c.set("bench.batch", std::int64_t{bench.batch});
  c.set("bench.duration", bench.duration);
  c.set("bench.thread_sweep", std::string(bench.thread_sweep ? "true" : "false"));
  c.set("output.image_format", std::string(image_format == ImageFormat::PNG ? "png" : "pgm16"));
  c.set("input.dataset", dataset_path);
  c.set("input.checkpoint", checkpoint_path);
  c.set("input.readings", readings_path);
  return c;
}

Geometry build_geometry(const Settings& s) {
  Geometry g;
  g.grid = s.grid;
  g.cameras = build_cameras(s.grid, s.cameras);
  g.op = assemble_projection(s.grid, g.cameras);
  return g;
}

DatasetFile run_generate(const Settings& s, const Geometry& geo) {
  const auto seeds = s.seeds();
  GenerateOptions opt;
  opt.count = s.gen.count;
  opt.spec = s.phantom;
  opt.mode = s.gen.mode;
  opt.noise_std = s.gen.noise_std;
  opt.seed = seeds.phantoms;
  opt.split_spec = {s.gen.split_train, s.gen.split_val, s.gen.split_test, seeds.split};
  opt.pca_components = s.gen.pca_components;
  opt.threads = s.threads;
  return generate_dataset(opt, geo.grid, geo.cameras, geo.op);
}

std::vector<std::size_t> split_indices(const DatasetFile& ds, const std::string& name) {
  auto parts = ds.splits();
  if (name == "train") return parts.train;
  if (name == "val") return parts.val;
  if (name == "test") return parts.test;
  throw ValidationError("unknown split '" + name + "'");
}

TrainResult run_training(const Settings& s, const DatasetFile& ds, const EpochCallback& on_epoch) {
  require(ds.grid == s.grid, "dataset grid does not match the configured grid (check --scale and grid.*)");
  require(static_cast<int>(ds.pca_components) == s.network.input_dim,
          "network.input_dim (" + std::to_string(s.network.input_dim) + ") differs from the dataset's " +
              std::to_string(ds.pca_components) + " PCA components");
  const auto seeds = s.seeds();
  const auto parts = ds.splits();
  const auto train_set = ds.samples(parts.train);
  const auto val_set = ds.samples(parts.val);

  Rng init(seeds.init);
  auto net = Network<float>::build(s.network, init);
  TrainConfig tc = s.train;
  tc.shuffle_seed = seeds.shuffle;
  TrainResult res;
  res.history = train(net, train_set, val_set, tc, on_epoch);
  res.checkpoint = Checkpoint::from_network(net);
  res.checkpoint.pca = ds.pca;
  res.checkpoint.training_seed = s.seed;
  res.checkpoint.best_val_loss = res.history.best_val_loss;
  res.checkpoint.best_epoch = res.history.best_epoch;
  res.checkpoint.dataset_hash = ds.hash();
  res.checkpoint.active_width = ds.grid.width_px;
  res.checkpoint.active_height = ds.grid.height_px;
  return res;
}

EvalResult run_evaluation(const Settings& s, const Checkpoint& ck, const DatasetFile& ds) {
  const auto h = ds.hash();
  if (ck.dataset_hash != h) {
    throw ValidationError("checkpoint was trained on dataset " + binio::hex64(ck.dataset_hash) +
                          ", but the given dataset hashes to " + binio::hex64(h));
  }
  EvalResult res;
  res.indices = split_indices(ds, s.eval.split);
  const auto set = ds.samples(res.indices);
  std::vector<std::string> ids;
  for (auto i : res.indices) ids.push_back(std::to_string(i));
  auto net = ck.network_instance();
  // With self_check the targets double as predictions and every row must come out ideal.
  res.predictions = s.eval.self_check ? set.targets : predict(net, set.inputs);
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < res.indices.size(); ++i) {
    const Image x = crop(tensor_image(res.predictions, i), ds.grid.width_px, ds.grid.height_px);
    const Image ref = crop(tensor_image(set.targets, i), ds.grid.width_px, ds.grid.height_px);
    rows.push_back({ids[i], ssim(x, ref, s.eval.ssim), psnr(x, ref), nrmse(x, ref)});
  }
  res.report = aggregate(s.eval.dataset_name + "-" + s.eval.split, std::move(rows), s.eval.ssim);
  return res;
}

nn::Tensor<float> reconstruct(const Checkpoint& ck, const Matrix& readings) {
  require(readings.cols == ck.pca.width(), "reconstruct: expected " + std::to_string(ck.pca.width()) +
                                               " readings per row, got " + std::to_string(readings.cols));
  const Matrix coords = pca_transform(ck.pca, ck.network.input_dim, readings);
  nn::Tensor<float> in({static_cast<std::size_t>(coords.rows), static_cast<std::size_t>(coords.cols)});
  for (std::size_t i = 0; i < coords.values.size(); ++i) in[i] = static_cast<float>(coords.values[i]);
  auto net = ck.network_instance();
  return predict(net, in);
}

}  // namespace ptomo
