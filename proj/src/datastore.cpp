#include "ptomo/datastore.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ptomo/binio.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

void SplitSpec::validate() const {
  require(train >= 0.0 && val >= 0.0 && test >= 0.0, "split fractions must be nonnegative");
  require(std::abs(train + val + test - 1.0) < 1e-9, "split fractions must sum to 1");
}

SplitIndices split(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  require(n >= 10, "split needs at least 10 examples, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val * static_cast<double>(n) + 1e-9));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

// ---------------------------------------------------------------------------
// PTDS

std::vector<std::uint8_t> DatasetFile::serialize() const {
  binio::Writer w;
  w.magic("PTDS");
  w.u32(kDatasetVersion);
  w.u64(examples.size());
  w.u32(reading_width);
  w.u32(static_cast<std::uint32_t>(grid.width_px));
  w.u32(static_cast<std::uint32_t>(grid.height_px));
  w.u32(static_cast<std::uint32_t>(grid.pad_width_px));
  w.u32(static_cast<std::uint32_t>(grid.pad_height_px));
  w.f64(grid.cell_w);
  w.f64(grid.cell_h);
  w.f64(grid.origin.x);
  w.f64(grid.origin.y);
  w.u64(phantom_spec_hash);
  w.u64(operator_hash);
  w.u64(generation_seed);
  w.u32(static_cast<std::uint32_t>(mode));
  w.f64(noise_std);
  w.f64(peak_amplitude);
  w.f64(split_spec.train);
  w.f64(split_spec.val);
  w.f64(split_spec.test);
  w.u64(split_spec.seed);
  w.u32(pca_components);
  pca.serialize(w);
  const std::size_t pixels = static_cast<std::size_t>(grid.padded_pixel_count());
  for (const auto& ex : examples) {
    require(ex.readings.size() == reading_width, "dataset: example reading width mismatch");
    require(ex.image.size() == pixels, "dataset: example image size mismatch");
    w.u64(ex.seed);
    w.f32_array(ex.readings);
    w.f32_array(ex.image);
  }
  return w.take();
}

DatasetFile DatasetFile::deserialize(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, "dataset");
  r.expect_magic("PTDS");
  const auto version = r.u32();
  require(version == kDatasetVersion, "dataset: unsupported version " + std::to_string(version));
  DatasetFile ds;
  const auto count = r.u64();
  ds.reading_width = r.u32();
  ds.grid.width_px = static_cast<int>(r.u32());
  ds.grid.height_px = static_cast<int>(r.u32());
  ds.grid.pad_width_px = static_cast<int>(r.u32());
  ds.grid.pad_height_px = static_cast<int>(r.u32());
  ds.grid.cell_w = r.f64();
  ds.grid.cell_h = r.f64();
  ds.grid.origin.x = r.f64();
  ds.grid.origin.y = r.f64();
  ds.grid.validate();
  ds.phantom_spec_hash = r.u64();
  ds.operator_hash = r.u64();
  ds.generation_seed = r.u64();
  const auto mode = r.u32();
  require(mode <= 1, "dataset: unknown projection mode");
  ds.mode = static_cast<ProjectionMode>(mode);
  ds.noise_std = r.f64();
  ds.peak_amplitude = r.f64();
  ds.split_spec.train = r.f64();
  ds.split_spec.val = r.f64();
  ds.split_spec.test = r.f64();
  ds.split_spec.seed = r.u64();
  ds.pca_components = r.u32();
  ds.pca = PCAModel::deserialize(r);
  require(ds.pca.width() == static_cast<int>(ds.reading_width), "dataset: PCA width differs from reading width");
  const std::size_t pixels = static_cast<std::size_t>(ds.grid.padded_pixel_count());
  const std::size_t per = 8 + 4 * (ds.reading_width + pixels);
  require(r.remaining() == count * per, "dataset: payload size does not match the declared example count");
  ds.examples.resize(count);
  for (auto& ex : ds.examples) {
    ex.seed = r.u64();
    ex.readings.resize(ds.reading_width);
    r.f32_array(ex.readings);
    ex.image.resize(pixels);
    r.f32_array(ex.image);
  }
  r.expect_end();
  return ds;
}

void DatasetFile::save(const std::string& path) const { binio::write_file(path, serialize()); }

DatasetFile DatasetFile::load(const std::string& path) { return deserialize(binio::read_file(path)); }

std::uint64_t DatasetFile::hash() const { return binio::fnv1a(serialize()); }

Matrix DatasetFile::readings(const std::vector<std::size_t>& indices) const {
  Matrix m(static_cast<int>(indices.size()), static_cast<int>(reading_width));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < examples.size(), "dataset: example index out of range");
    const auto& src = examples[indices[i]].readings;
    auto dst = m.row(static_cast<int>(i));
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c];
  }
  return m;
}

SampleSet DatasetFile::samples(const std::vector<std::size_t>& indices) const {
  const int k = static_cast<int>(pca_components);
  require(k >= 1 && k <= pca.size(), "dataset: pca_components out of range");
  const Matrix coords = pca_transform(pca, k, readings(indices));
  const std::size_t n = indices.size();
  SampleSet set{nn::Tensor<float>({n, static_cast<std::size_t>(k)}),
                nn::Tensor<float>({n, 1, static_cast<std::size_t>(grid.pad_height_px),
                                   static_cast<std::size_t>(grid.pad_width_px)})};
  for (std::size_t i = 0; i < coords.values.size(); ++i) set.inputs[i] = static_cast<float>(coords.values[i]);
  const std::size_t pixels = static_cast<std::size_t>(grid.padded_pixel_count());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(examples[indices[i]].image.begin(), examples[indices[i]].image.end(),
              set.targets.data() + i * pixels);
  }
  return set;
}

DatasetFile generate_dataset(const GenerateOptions& opt, const Grid& grid, const CameraSet& cams,
                             const ProjectionOperator& op) {
  require(opt.count >= 1, "dataset size must be >= 1");
  require(opt.threads >= 1, "threads must be >= 1");
  require(opt.noise_std >= 0.0, "noise_std must be >= 0");
  opt.spec.validate(grid);
  opt.split_spec.validate();
  require(op.rows() == cams.channel_count() && op.cols() == grid.pixel_count(),
          "projection operator does not match the grid and cameras");

  DatasetFile ds;
  ds.reading_width = static_cast<std::uint32_t>(cams.channel_count());
  ds.grid = grid;
  ds.phantom_spec_hash = opt.spec.hash();
  ds.operator_hash = op.hash();
  ds.generation_seed = opt.seed;
  ds.mode = opt.mode;
  ds.noise_std = opt.noise_std;
  ds.split_spec = opt.split_spec;
  ds.pca_components = opt.pca_components;
  ds.examples.resize(opt.count);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < opt.count; i += stride) {
      const auto seed = derive_seed(opt.seed, static_cast<std::uint64_t>(i));
      const Phantom ph = sample_phantom(opt.spec, seed, grid);
      Rng noise(derive_seed(seed, "noise"));
      const Example ex = make_example(ph, grid, cams, op, opt.mode, opt.noise_std, noise);
      auto& out = ds.examples[i];
      out.seed = seed;
      out.readings.assign(ex.readings.begin(), ex.readings.end());
      out.image.assign(ex.target.values.begin(), ex.target.values.end());
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(opt.threads, opt.count));
  if (n_threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
    for (auto& t : pool) t.join();
  }

  for (const auto& ex : ds.examples) {
    for (float v : ex.image) ds.peak_amplitude = std::max(ds.peak_amplitude, static_cast<double>(v));
  }
  if (opt.count >= 10) {
    ds.pca = pca_fit(ds.readings(ds.splits().train));
  } else {
    std::vector<std::size_t> all(opt.count);
    std::iota(all.begin(), all.end(), std::size_t{0});
    require(opt.count >= 2, "dataset needs at least 2 examples to fit the PCA model");
    ds.pca = pca_fit(ds.readings(all));
  }
  require(static_cast<int>(ds.pca_components) <= ds.pca.size(), "pca_components exceeds the reading width");
  return ds;
}

// ---------------------------------------------------------------------------
// Image export

namespace {

std::vector<std::uint16_t> quantize(const Image& img, ImageScale& scale) {
  require(!img.values.empty(), "export_image: empty image");
  for (double v : img.values) require(std::isfinite(v), "export_image: image has non-finite values");
  const auto [lo, hi] = std::minmax_element(img.values.begin(), img.values.end());
  scale.min = *lo;
  scale.max = *hi;
  scale.maxval = 65535;
  scale.degenerate = !(*hi > *lo);
  std::vector<std::uint16_t> q(img.values.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (scale.degenerate) {
      q[i] = 32768;
    } else {
      const double t = (img.values[i] - scale.min) / (scale.max - scale.min);
      q[i] = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
    }
  }
  return q;
}

void write_sidecar(const std::string& path, const ImageScale& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "min=%.17g\nmax=%.17g\nmaxval=%u\ndegenerate=%d\n", s.min, s.max, s.maxval,
                s.degenerate ? 1 : 0);
  const std::string text(buf);
  binio::write_file(path + ".scale.txt",
                    std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ImageScale read_sidecar(const std::string& path) {
  std::ifstream in(path + ".scale.txt");
  if (!in) throw ValidationError("missing scale sidecar " + path + ".scale.txt");
  ImageScale s;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto val = line.substr(eq + 1);
    if (key == "min") s.min = std::stod(val);
    if (key == "max") s.max = std::stod(val);
    if (key == "maxval") s.maxval = static_cast<std::uint32_t>(std::stoul(val));
    if (key == "degenerate") s.degenerate = val == "1";
  }
  return s;
}

void write_png16(const std::string& path, int width, int height, const std::vector<std::uint16_t>& q) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw NumericError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw NumericError("libpng failed writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(width) * 2);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const auto v = q[static_cast<std::size_t>(r) * width + c];
      row[2 * c] = static_cast<png_byte>(v >> 8);
      row[2 * c + 1] = static_cast<png_byte>(v & 0xFF);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw NumericError("error closing " + path);
}

}  // namespace

ImageScale export_image(const Image& img, const std::string& path, ImageFormat format) {
  ImageScale scale;
  const auto q = quantize(img, scale);
  if (format == ImageFormat::PNG) {
    write_png16(path, img.width, img.height, q);
  } else {
    const std::string header =
        "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (auto v : q) {
      bytes.push_back(static_cast<std::uint8_t>(v >> 8));
      bytes.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    binio::write_file(path, bytes);
  }
  write_sidecar(path, scale);
  return scale;
}

Image import_pgm16(const std::string& path) {
  const auto bytes = binio::read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  require(token() == "P5", path + ": not a binary PGM");
  const int width = std::stoi(token());
  const int height = std::stoi(token());
  const int maxval = std::stoi(token());
  require(maxval == 65535, path + ": expected a 16-bit PGM");
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(width) * height;
  require(bytes.size() - pos == 2 * n, path + ": raster size mismatch");
  const ImageScale s = read_sidecar(path);
  Image img(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
    img.values[i] = s.degenerate ? s.min : s.min + q / 65535.0 * (s.max - s.min);
  }
  return img;
}

Image side_by_side(const Image& left, const Image& right, int gap) {
  require(left.height == right.height, "side_by_side: heights differ");
  require(gap >= 0, "side_by_side: negative gap");
  double lo = std::min(*std::min_element(left.values.begin(), left.values.end()),
                       *std::min_element(right.values.begin(), right.values.end()));
  Image out(left.width + gap + right.width, left.height, lo);
  for (int r = 0; r < left.height; ++r) {
    for (int c = 0; c < left.width; ++c) out(c, r) = left(c, r);
    for (int c = 0; c < right.width; ++c) out(left.width + gap + c, r) = right(c, r);
  }
  return out;
}

}  // namespace ptomo
