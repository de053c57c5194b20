// ptomo: geometry, dataset generation, training, evaluation, reconstruction
// and benchmarking from one binary. Every run writes manifest.txt.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ptomo/binio.hpp"
#include "ptomo/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ptomo;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::int64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> scale;
  std::string out = "out";
  std::string dataset;
  std::string checkpoint;
  std::string readings;
};

KeyValueConfig load_config(const Options& o) {
  KeyValueConfig cfg;
  if (!o.config_path.empty()) cfg = KeyValueConfig::load(o.config_path);
  for (const auto& kv : o.overrides) cfg.apply_override(kv);
  if (o.seed) cfg.set("seed", *o.seed);
  if (o.threads) cfg.set("threads", std::int64_t{*o.threads});
  if (o.scale) cfg.set("scale", *o.scale);
  if (!o.dataset.empty()) cfg.set("input.dataset", o.dataset);
  if (!o.checkpoint.empty()) cfg.set("input.checkpoint", o.checkpoint);
  if (!o.readings.empty()) cfg.set("input.readings", o.readings);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  binio::write_file(path.string(), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fmt(double v) { return KeyValueConfig::format_double(v); }

class Run {
 public:
  Run(const std::string& subcommand, const Options& o)
      : subcommand_(subcommand), settings_(Settings::resolve(load_config(o))), out_(o.out) {
    fs::create_directories(out_);
    manifest_ = settings_.to_config();
    const auto seeds = settings_.seeds();
    note("run.subcommand", subcommand);
    note("run.version", kVersion);
    note("run.rng", std::string(Rng::kAlgorithm));
    note("run.seed.phantoms", binio::hex64(seeds.phantoms));
    note("run.seed.split", binio::hex64(seeds.split));
    note("run.seed.init", binio::hex64(seeds.init));
    note("run.seed.shuffle", binio::hex64(seeds.shuffle));
    note("run.seed.bench", binio::hex64(seeds.bench));
  }

  const Settings& settings() const { return settings_; }
  fs::path path(const std::string& name) const { return out_ / name; }
  void note(const std::string& key, const std::string& value) { manifest_.set(key, value); }
  void note(const std::string& key, double value) { manifest_.set(key, value); }
  void note_int(const std::string& key, std::int64_t value) { manifest_.set(key, value); }

  // A run that throws still leaves a manifest behind, marked failed.
  ~Run() {
    if (finished_) return;
    try {
      note("run.status", std::string("failed"));
      write_text(path("manifest.txt"), manifest_.to_text());
    } catch (...) {
    }
  }

  void finish() {
    note("run.status", std::string("ok"));
    write_text(path("manifest.txt"), manifest_.to_text());
    finished_ = true;
  }

  std::string image_name(const std::string& stem) const {
    return stem + (settings_.image_format == ImageFormat::PNG ? ".png" : ".pgm");
  }

 private:
  std::string subcommand_;
  Settings settings_;
  fs::path out_;
  KeyValueConfig manifest_;
  bool finished_ = false;
};

DatasetFile load_dataset(const Settings& s) {
  if (s.dataset_path.empty()) throw ValidationError("no dataset given (use --dataset or input.dataset)");
  return DatasetFile::load(s.dataset_path);
}

Checkpoint load_checkpoint(const Settings& s) {
  if (s.checkpoint_path.empty()) throw ValidationError("no checkpoint given (use --checkpoint or input.checkpoint)");
  return Checkpoint::load(s.checkpoint_path);
}

// --- subcommands ----------------------------------------------------------

void cmd_geometry(const Options& o) {
  Run run("geometry", o);
  const auto geo = build_geometry(run.settings());
  geo.op.save(run.path("operator.ptop").string());
  const auto cov = coverage_map(geo.op);
  Image img(geo.grid.width_px, geo.grid.height_px, std::vector<double>(cov.begin(), cov.end()));
  export_image(img, run.path(run.image_name("coverage")).string(), run.settings().image_format);
  int traced = 0;
  for (int r = 0; r < geo.op.rows(); ++r) traced += geo.op.row_pixels(r).empty() ? 0 : 1;
  run.note("run.operator_hash", binio::hex64(geo.op.hash()));
  run.note_int("run.operator_rows", geo.op.rows());
  run.note_int("run.operator_entries", static_cast<std::int64_t>(geo.op.entry_count()));
  run.note_int("run.traced_channels", traced);
  run.finish();
  std::printf("operator %d x %d, %zu entries, %d traced channels, hash %s\n", geo.op.rows(), geo.op.cols(),
              geo.op.entry_count(), traced, binio::hex64(geo.op.hash()).c_str());
}

void cmd_gen(const Options& o) {
  Run run("gen", o);
  const auto& s = run.settings();
  const auto geo = build_geometry(s);
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = run_generate(s, geo);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto path = run.path("dataset.ptds");
  ds.save(path.string());
  const int rank = pca_choose_rank(ds.pca, 1.0 - 1e-12);
  const auto parts = ds.splits();
  run.note("run.dataset_hash", binio::hex64(ds.hash()));
  run.note("run.operator_hash", binio::hex64(ds.operator_hash));
  run.note("run.phantom_spec_hash", binio::hex64(ds.phantom_spec_hash));
  run.note("run.peak_amplitude", ds.peak_amplitude);
  run.note_int("run.pca_rank", rank);
  run.note_int("run.split_train", static_cast<std::int64_t>(parts.train.size()));
  run.note_int("run.split_val", static_cast<std::int64_t>(parts.val.size()));
  run.note_int("run.split_test", static_cast<std::int64_t>(parts.test.size()));
  run.finish();
  std::printf("%zu examples (%zu/%zu/%zu) in %.1f s, peak %.6g, PCA rank %d, hash %s\n", ds.size(),
              parts.train.size(), parts.val.size(), parts.test.size(), secs, ds.peak_amplitude, rank,
              binio::hex64(ds.hash()).c_str());
}

void cmd_train(const Options& o) {
  Run run("train", o);
  const auto& s = run.settings();
  const auto ds = load_dataset(s);
  std::printf("training %s network, %zu parameters, lr %g, batch %d, up to %d epochs\n", s.scale.c_str(),
              Network<float>::zeros(s.network).parameter_count(), s.train.lr, s.train.batch_size,
              s.train.max_epochs);
  const auto res = run_training(s, ds, [](const EpochRecord& e) {
    std::printf("epoch %4d  train %.6e  val %.6e  %.2f s\n", e.epoch, e.train_loss, e.val_loss, e.seconds);
    std::fflush(stdout);
  });
  res.checkpoint.save(run.path("checkpoint.ptck").string());
  write_text(run.path("history.csv"), res.history.to_csv());
  write_text(run.path("epoch_times.csv"), res.history.timing_csv());
  double total = 0.0;
  for (const auto& e : res.history.epochs) total += e.seconds;
  run.note("run.dataset_hash", binio::hex64(ds.hash()));
  run.note("run.checkpoint_hash", binio::hex64(binio::fnv1a(res.checkpoint.serialize())));
  run.note_int("run.epochs", static_cast<std::int64_t>(res.history.epochs.size()));
  run.note_int("run.best_epoch", res.history.best_epoch);
  run.note("run.best_val_loss", res.history.best_val_loss);
  run.note("run.early_stopped", std::string(res.history.early_stopped ? "true" : "false"));
  run.finish();
  std::printf("best val loss %.6e at epoch %d after %zu epochs (%.0f s)\n", res.history.best_val_loss,
              res.history.best_epoch, res.history.epochs.size(), total);
}

void cmd_eval(const Options& o) {
  Run run("eval", o);
  const auto& s = run.settings();
  const auto ds = load_dataset(s);
  const auto ck = load_checkpoint(s);
  const auto res = run_evaluation(s, ck, ds);
  write_text(run.path("metrics.csv"), per_image_csv({res.report}));
  write_text(run.path("metrics_summary.csv"), aggregate_csv(res.report));

  const auto set = ds.samples(res.indices);
  double abs_err = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < res.indices.size(); ++i) {
    const Image x = crop(tensor_image(res.predictions, i), ds.grid.width_px, ds.grid.height_px);
    const Image ref = crop(tensor_image(set.targets, i), ds.grid.width_px, ds.grid.height_px);
    for (std::size_t k = 0; k < x.size(); ++k) abs_err += std::abs(x.values[k] - ref.values[k]);
    count += x.size();
    if (static_cast<int>(i) < s.eval.samples) {
      char stem[64];
      std::snprintf(stem, sizeof stem, "sample_%04zu", res.indices[i]);
      export_image(side_by_side(ref, x), run.path(run.image_name(stem)).string(), s.image_format);
    }
  }
  const double mae = abs_err / static_cast<double>(count);
  const auto& r = res.report;
  run.note("run.dataset_hash", binio::hex64(ds.hash()));
  run.note("run.metrics.region", "active");
  run.note("run.metrics.psnr_peak", "max(ref)");
  run.note("run.metrics.ssim_range", "max(ref)-min(ref)");
  run.note_int("run.psnr_infinite_rows", static_cast<std::int64_t>(r.psnr_infinite));
  run.note("run.mean_abs_error", mae);
  run.note("run.mean_abs_error_over_peak", mae / ds.peak_amplitude);
  run.note("run.ssim_mean", r.ssim.mean);
  run.note("run.psnr_mean", r.psnr.mean);
  run.note("run.nrmse_mean", r.nrmse.mean);
  run.finish();
  if (r.psnr_infinite > 0) {
    std::fprintf(stderr, "warning: %zu identical rows left out of the PSNR aggregate\n", r.psnr_infinite);
  }
  std::printf("%s: %zu images\n", r.dataset.c_str(), r.rows.size());
  std::printf("  ssim   mean %.4f  best %.4f  worst %.4f\n", r.ssim.mean, r.ssim.best, r.ssim.worst);
  std::printf("  psnr   mean %.2f  best %.2f  worst %.2f dB\n", r.psnr.mean, r.psnr.best, r.psnr.worst);
  std::printf("  nrmse  mean %.4f  best %.4f  worst %.4f\n", r.nrmse.mean, r.nrmse.best, r.nrmse.worst);
  std::printf("  mean abs error %.6g (%.3f%% of peak %.6g)\n", mae, 100.0 * mae / ds.peak_amplitude,
              ds.peak_amplitude);
}

Matrix read_readings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open readings file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path + ": no readings");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(static_cast<int>(r)).begin());
  return m;
}

void cmd_reconstruct(const Options& o) {
  Run run("reconstruct", o);
  const auto& s = run.settings();
  const auto ck = load_checkpoint(s);
  Matrix readings;
  std::vector<std::string> names;
  if (!s.readings_path.empty()) {
    readings = read_readings_csv(s.readings_path);
    for (int i = 0; i < readings.rows; ++i) names.push_back(std::to_string(i));
  } else {
    const auto ds = load_dataset(s);
    const auto idx = split_indices(ds, s.eval.split);
    readings = ds.readings(idx);
    for (auto i : idx) names.push_back(std::to_string(i));
  }
  const auto out = reconstruct(ck, readings);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Image img = crop(tensor_image(out, i), ck.active_width, ck.active_height);
    export_image(img, run.path(run.image_name("recon_" + names[i])).string(), s.image_format);
  }
  run.note_int("run.reconstructions", static_cast<std::int64_t>(names.size()));
  run.finish();
  std::printf("%zu reconstructions written to %s\n", names.size(), run.path("").string().c_str());
}

void cmd_bench(const Options& o) {
  Run run("bench", o);
  const auto& s = run.settings();
  const auto ck = load_checkpoint(s);
  const auto net = ck.network_instance();
  const auto k = static_cast<std::size_t>(ck.network.input_dim);
  const auto batch = static_cast<std::size_t>(s.bench.batch);

  // Inputs drawn with the PCA variances of the training data.
  Rng rng(s.seeds().bench);
  nn::Tensor<float> input({batch, k});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < k; ++j) {
      const double sd = ck.pca.whiten ? 1.0 : std::sqrt(std::max(0.0, ck.pca.eigenvalues[j]));
      input[b * k + j] = static_cast<float>(rng.normal() * sd);
    }
  }
  net.infer(input);  // warm-up

  std::string csv = "threads,batch,reconstructions_per_s,p50_ms,p90_ms,p99_ms,ratio_to_5khz\n";
  std::vector<int> counts;
  if (s.bench.thread_sweep) {
    for (int t = 1; t <= s.threads; ++t) counts.push_back(t);
  } else {
    counts.push_back(s.threads);
  }
  for (int t : counts) {
    std::vector<std::vector<double>> lat(static_cast<std::size_t>(t));
    const auto start = std::chrono::steady_clock::now();
    const auto stop = start + std::chrono::duration<double>(s.bench.duration);
    std::vector<std::thread> pool;
    for (int w = 0; w < t; ++w) {
      pool.emplace_back([&, w] {
        while (std::chrono::steady_clock::now() < stop) {
          const auto a = std::chrono::steady_clock::now();
          const auto y = net.infer(input);
          const auto b = std::chrono::steady_clock::now();
          lat[static_cast<std::size_t>(w)].push_back(std::chrono::duration<double, std::milli>(b - a).count());
        }
      });
    }
    for (auto& th : pool) th.join();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<double> all;
    for (const auto& l : lat) all.insert(all.end(), l.begin(), l.end());
    std::sort(all.begin(), all.end());
    auto pct = [&](double p) {
      return all[std::min(all.size() - 1, static_cast<std::size_t>(std::floor(p * (all.size() - 1) + 0.5)))];
    };
    const double rate = static_cast<double>(all.size() * batch) / wall;
    char line[256];
    std::snprintf(line, sizeof line, "%d,%zu,%.6g,%.6g,%.6g,%.6g,%.6g\n", t, batch, rate, pct(0.5), pct(0.9),
                  pct(0.99), rate / 5000.0);
    csv += line;
    std::printf("threads %d  batch %zu  %.1f reconstructions/s  p50 %.3f ms  p99 %.3f ms  (%.3f x 5 kHz)\n", t,
                batch, rate, pct(0.5), pct(0.99), rate / 5000.0);
  }
  write_text(run.path("bench.csv"), csv);
  run.note_int("run.hardware_threads", static_cast<std::int64_t>(std::thread::hardware_concurrency()));
  run.note("run.reference_rate_hz", 5000.0);
  run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-network plasma tomography toolkit"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key = value configuration file (a manifest works too)");
    sub->add_option("--override", o.overrides, "KEY=VALUE, applied after --config (repeatable)");
    sub->add_option("--seed", o.seed, "run seed; every random stream derives from it");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads (default 1)");
    sub->add_option("--scale", o.scale, "quarter, half or full")
        ->check(CLI::IsMember({"quarter", "half", "full"}));
    sub->add_option("--dataset", o.dataset, "dataset file (input.dataset)");
    sub->add_option("--checkpoint", o.checkpoint, "checkpoint file (input.checkpoint)");
    sub->add_option("--readings", o.readings, "CSV of raw readings, one row per reconstruction (input.readings)");
  };
  struct Entry {
    const char* name;
    const char* help;
    void (*fn)(const Options&);
  };
  const Entry entries[] = {
      {"geometry", "build the projection operator and a coverage map", cmd_geometry},
      {"gen", "generate a phantom dataset", cmd_gen},
      {"train", "train a network on a dataset", cmd_train},
      {"eval", "evaluate a checkpoint on a dataset split", cmd_eval},
      {"reconstruct", "reconstruct images from readings", cmd_reconstruct},
      {"bench", "measure inference throughput", cmd_bench},
  };
  for (const auto& e : entries) add_common(app.add_subcommand(e.name, e.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    for (const auto& e : entries) {
      if (app.got_subcommand(e.name)) e.fn(o);
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
