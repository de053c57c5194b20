#include "ptomo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ptomo/binio.hpp"
#include "ptomo/config.hpp"
#include "ptomo/error.hpp"

namespace ptomo {

double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
double norm(Point2 a) { return std::hypot(a.x, a.y); }

// ---------------------------------------------------------------------------
// Grid

Grid Grid::over_extent(int width_px, int height_px, int pad_width_px, int pad_height_px,
                       double extent_w, double extent_h, Point2 origin) {
  require(width_px > 0 && height_px > 0, "grid dimensions must be positive");
  Grid g;
  g.width_px = width_px;
  g.height_px = height_px;
  g.pad_width_px = pad_width_px;
  g.pad_height_px = pad_height_px;
  g.cell_w = extent_w / width_px;
  g.cell_h = extent_h / height_px;
  g.origin = origin;
  g.validate();
  return g;
}

Grid Grid::full() { return over_extent(115, 196, 120, 200, 2.0, 3.5); }
Grid Grid::half() { return over_extent(58, 98, 60, 100, 2.0, 3.5); }
Grid Grid::quarter() { return over_extent(29, 49, 30, 50, 2.0, 3.5); }

void Grid::validate() const {
  require(width_px > 0 && height_px > 0, "grid dimensions must be positive");
  require(width_px <= pad_width_px && height_px <= pad_height_px,
          "grid active area must fit inside the padded image");
  require(cell_w > 0 && cell_h > 0 && std::isfinite(cell_w) && std::isfinite(cell_h),
          "grid cell sizes must be positive");
  require(std::isfinite(origin.x) && std::isfinite(origin.y), "grid origin must be finite");
}

Point2 Grid::pixel_center(int col, int row) const {
  return {origin.x + (col + 0.5) * cell_w, origin.y + (height_px - row - 0.5) * cell_h};
}

std::optional<std::pair<int, int>> Grid::cell_at(Point2 p) const {
  const double fx = (p.x - origin.x) / cell_w;
  const double fy = (p.y - origin.y) / cell_h;
  if (!(fx >= 0 && fx <= width_px && fy >= 0 && fy <= height_px)) return std::nullopt;
  const int col = std::min(static_cast<int>(fx), width_px - 1);
  const int row_from_bottom = std::min(static_cast<int>(fy), height_px - 1);
  return std::pair{col, height_px - 1 - row_from_bottom};
}

// ---------------------------------------------------------------------------
// Sight lines

std::optional<std::pair<double, double>> clip_to_domain(const Grid& grid, const LineOfSight& los) {
  const Point2 d = los.end - los.start;
  double t0 = 0.0;
  double t1 = 1.0;
  const double lo[2] = {grid.origin.x, grid.origin.y};
  const double hi[2] = {grid.origin.x + grid.extent_w(), grid.origin.y + grid.extent_h()};
  const double p[2] = {los.start.x, los.start.y};
  const double dir[2] = {d.x, d.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (dir[axis] == 0.0) {
      if (p[axis] < lo[axis] || p[axis] > hi[axis]) return std::nullopt;
      continue;
    }
    double a = (lo[axis] - p[axis]) / dir[axis];
    double b = (hi[axis] - p[axis]) / dir[axis];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::pair{t0, t1};
}

std::optional<LineOfSight> in_domain_segment(const Grid& grid, const LineOfSight& los) {
  const auto clip = clip_to_domain(grid, los);
  if (!clip) return std::nullopt;
  LineOfSight out = los;
  out.start = los.at(clip->first);
  out.end = los.at(clip->second);
  return out;
}

bool CameraSet::is_dead(int channel) const {
  return std::find(dead_channels.begin(), dead_channels.end(), channel) != dead_channels.end();
}

namespace {

std::vector<double> aim_angles(Point2 pivot, Point2 from, Point2 to, int n) {
  std::vector<double> angles(n);
  for (int i = 0; i < n; ++i) {
    const double s = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
    const Point2 target = from + s * (to - from);
    angles[i] = std::atan2(target.y - pivot.y, target.x - pivot.x);
  }
  return angles;
}

}  // namespace

CameraLayoutConfig CameraLayoutConfig::defaults(const Grid& grid) {
  const double x0 = grid.origin.x;
  const double y0 = grid.origin.y;
  const double w = grid.extent_w();
  const double h = grid.extent_h();

  CameraLayoutConfig cfg;
  // Horizontal camera: outboard, slightly above mid height, looking inward.
  cfg.horizontal.pivot = {x0 + 1.25 * w, y0 + 0.55 * h};
  cfg.horizontal.overview_angles = aim_angles(cfg.horizontal.pivot, {x0, y0 + 0.03 * h},
                                              {x0, y0 + 0.97 * h}, kOverviewPerCamera);
  cfg.horizontal.divertor_angles = aim_angles(cfg.horizontal.pivot, {x0 + 0.30 * w, y0},
                                              {x0 + 0.70 * w, y0}, kDivertorPerCamera);
  // Vertical camera: above the domain, looking down.
  cfg.vertical.pivot = {x0 + 0.55 * w, y0 + 1.2 * h};
  cfg.vertical.overview_angles = aim_angles(cfg.vertical.pivot, {x0 + 0.03 * w, y0},
                                            {x0 + 0.97 * w, y0}, kOverviewPerCamera);
  cfg.vertical.divertor_angles = aim_angles(cfg.vertical.pivot, {x0 + 0.35 * w, y0},
                                            {x0 + 0.65 * w, y0}, kDivertorPerCamera);
  cfg.reserve_channels = 4;
  cfg.dead_channels = {kChannelsPerCamera, kCameraChannels + cfg.reserve_channels - 1};
  return cfg;
}

CameraSet build_cameras(const Grid& grid, const CameraLayoutConfig& cfg) {
  grid.validate();
  require(cfg.reserve_channels >= 0, "reserve_channels must be nonnegative");

  CameraSet set;
  set.reserve_channels = cfg.reserve_channels;
  set.lines.reserve(kCameraChannels);

  auto add_camera = [&](const CameraConfig& cam, Camera id, const char* name) {
    const std::string label = std::string("cameras.") + name;
    require(cam.count == kChannelsPerCamera,
            label + ".count must be " + std::to_string(kChannelsPerCamera) + ", got " +
                std::to_string(cam.count));
    require(static_cast<int>(cam.overview_angles.size()) == kOverviewPerCamera,
            label + ".overview_angles needs " + std::to_string(kOverviewPerCamera) + " angles");
    require(static_cast<int>(cam.divertor_angles.size()) == kDivertorPerCamera,
            label + ".divertor_angles needs " + std::to_string(kDivertorPerCamera) + " angles");
    require(cam.ray_length > 0, label + ".ray_length must be positive");

    int channel = 0;
    auto add_fan = [&](const std::vector<double>& angles, Fan fan) {
      for (double a : angles) {
        require(std::isfinite(a), label + ": non-finite angle");
        LineOfSight los;
        los.start = cam.pivot;
        los.end = cam.pivot + cam.ray_length * Point2{std::cos(a), std::sin(a)};
        los.camera = id;
        los.channel_index = channel;
        los.fan = fan;
        if (!clip_to_domain(grid, los)) {
          throw ValidationError(label + " channel " + std::to_string(channel) +
                                " misses the grid domain");
        }
        set.lines.push_back(los);
        ++channel;
      }
    };
    add_fan(cam.overview_angles, Fan::Overview);
    add_fan(cam.divertor_angles, Fan::Divertor);
  };
  add_camera(cfg.horizontal, Camera::Horizontal, "horizontal");
  add_camera(cfg.vertical, Camera::Vertical, "vertical");

  for (int ch : cfg.dead_channels) {
    require(ch >= 0 && ch < set.channel_count(),
            "dead channel " + std::to_string(ch) + " out of range");
  }
  set.dead_channels = cfg.dead_channels;
  std::sort(set.dead_channels.begin(), set.dead_channels.end());
  set.dead_channels.erase(std::unique(set.dead_channels.begin(), set.dead_channels.end()),
                          set.dead_channels.end());
  return set;
}

// ---------------------------------------------------------------------------
// Ray tracing

std::vector<ChordEntry> trace_ray(const Grid& grid, const LineOfSight& los) {
  const auto clip = clip_to_domain(grid, los);
  if (!clip) return {};
  const auto [t_enter, t_exit] = *clip;
  const Point2 d = los.end - los.start;
  const double length = norm(d);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Parameter of the k-th vertical (x) / horizontal (y) grid plane.
  auto plane_t = [&](double origin, double cell, double p, double dir, int k) {
    return (origin + k * cell - p) / dir;
  };
  // First plane index strictly after t_enter along the direction of travel.
  auto first_plane = [&](double origin, double cell, double p, double dir, int n_cells) {
    if (dir == 0.0) return -1;
    const double f = (p + t_enter * dir - origin) / cell;
    int k = dir > 0 ? static_cast<int>(std::floor(f)) + 1 : static_cast<int>(std::ceil(f)) - 1;
    const int step = dir > 0 ? 1 : -1;
    while (k >= 0 && k <= n_cells && plane_t(origin, cell, p, dir, k) <= t_enter) k += step;
    return k;
  };

  const int step_x = d.x > 0 ? 1 : -1;
  const int step_y = d.y > 0 ? 1 : -1;
  int kx = first_plane(grid.origin.x, grid.cell_w, los.start.x, d.x, grid.width_px);
  int ky = first_plane(grid.origin.y, grid.cell_h, los.start.y, d.y, grid.height_px);
  auto next_tx = [&] {
    return (d.x == 0.0 || kx < 0 || kx > grid.width_px)
               ? kInf
               : plane_t(grid.origin.x, grid.cell_w, los.start.x, d.x, kx);
  };
  auto next_ty = [&] {
    return (d.y == 0.0 || ky < 0 || ky > grid.height_px)
               ? kInf
               : plane_t(grid.origin.y, grid.cell_h, los.start.y, d.y, ky);
  };

  std::vector<ChordEntry> row;
  row.reserve(static_cast<std::size_t>(grid.width_px + grid.height_px) + 2);
  double t = t_enter;
  double tx = next_tx();
  double ty = next_ty();
  while (true) {
    const double t_next = std::min({tx, ty, t_exit});
    if (t_next > t) {
      // The midpoint identifies the cell without tie-breaking at corners.
      const Point2 mid = los.at(0.5 * (t + t_next));
      const double fx = (mid.x - grid.origin.x) / grid.cell_w;
      const double fy = (mid.y - grid.origin.y) / grid.cell_h;
      const int col = std::clamp(static_cast<int>(std::floor(fx)), 0, grid.width_px - 1);
      const int row_up = std::clamp(static_cast<int>(std::floor(fy)), 0, grid.height_px - 1);
      const auto pixel = static_cast<std::uint32_t>(grid.pixel_index(col, grid.height_px - 1 - row_up));
      const double seg = (t_next - t) * length;
      if (!row.empty() && row.back().pixel == pixel) {
        row.back().length += seg;
      } else {
        row.push_back({pixel, seg});
      }
    }
    if (t_next >= t_exit) break;
    if (tx == t_next) {
      kx += step_x;
      tx = next_tx();
    }
    if (ty == t_next) {
      ky += step_y;
      ty = next_ty();
    }
    t = t_next;
  }
  return row;
}

// ---------------------------------------------------------------------------
// ProjectionOperator

ProjectionOperator::ProjectionOperator(int rows, int cols, std::vector<std::uint64_t> row_ptr,
                                       std::vector<std::uint32_t> pixels,
                                       std::vector<double> lengths)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      pixels_(std::move(pixels)),
      lengths_(std::move(lengths)) {
  require(rows_ >= 0 && cols_ >= 0, "operator dimensions must be nonnegative");
  require(row_ptr_.size() == static_cast<std::size_t>(rows_) + 1, "operator row_ptr size mismatch");
  require(row_ptr_.front() == 0 && row_ptr_.back() == pixels_.size(),
          "operator row_ptr does not cover entries");
  require(pixels_.size() == lengths_.size(), "operator entry arrays differ in length");
  for (int r = 0; r < rows_; ++r) {
    require(row_ptr_[r] <= row_ptr_[r + 1], "operator row_ptr not monotone");
  }
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    require(pixels_[i] < static_cast<std::uint32_t>(cols_), "operator pixel index out of range");
    require(lengths_[i] > 0 && std::isfinite(lengths_[i]), "operator chord lengths must be positive");
  }
}

std::span<const std::uint32_t> ProjectionOperator::row_pixels(int row) const {
  return std::span(pixels_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
}

std::span<const double> ProjectionOperator::row_lengths(int row) const {
  return std::span(lengths_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
}

double ProjectionOperator::row_sum(int row) const {
  double s = 0;
  for (double v : row_lengths(row)) s += v;
  return s;
}

double ProjectionOperator::at(int row, std::uint32_t pixel) const {
  const auto px = row_pixels(row);
  const auto it = std::lower_bound(px.begin(), px.end(), pixel);
  if (it == px.end() || *it != pixel) return 0.0;
  return row_lengths(row)[static_cast<std::size_t>(it - px.begin())];
}

std::vector<double> ProjectionOperator::apply(std::span<const double> image) const {
  if (image.size() != static_cast<std::size_t>(cols_)) {
    throw ValidationError("image has " + std::to_string(image.size()) + " pixels, operator expects " +
                          std::to_string(cols_));
  }
  std::vector<double> out(rows_, 0.0);
  for (int r = 0; r < rows_; ++r) {
    double s = 0;
    for (std::uint64_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) s += lengths_[i] * image[pixels_[i]];
    out[r] = s;
  }
  return out;
}

std::vector<std::uint8_t> ProjectionOperator::serialize() const {
  binio::Writer w;
  w.magic("PTOP");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(rows_));
  w.u32(static_cast<std::uint32_t>(cols_));
  w.u64(pixels_.size());
  for (int r = 0; r < rows_; ++r) {
    for (std::uint64_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) {
      w.u32(static_cast<std::uint32_t>(r));
      w.u32(pixels_[i]);
      w.f64(lengths_[i]);
    }
  }
  return w.take();
}

ProjectionOperator ProjectionOperator::deserialize(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, "PTOP");
  r.expect_magic("PTOP");
  const auto version = r.u32();
  require(version == 1, "PTOP: unsupported version " + std::to_string(version));
  const auto rows = r.u32();
  const auto cols = r.u32();
  const auto nnz = r.u64();
  require(nnz <= r.remaining() / 16, "PTOP: entry count exceeds payload");
  std::vector<std::uint64_t> row_ptr(rows + 1, 0);
  std::vector<std::uint32_t> pixels(nnz);
  std::vector<double> lengths(nnz);
  std::uint32_t prev_row = 0;
  for (std::uint64_t i = 0; i < nnz; ++i) {
    const auto ch = r.u32();
    require(ch < rows && ch >= prev_row, "PTOP: entries not ordered by channel");
    prev_row = ch;
    pixels[i] = r.u32();
    lengths[i] = r.f64();
    ++row_ptr[ch + 1];
  }
  r.expect_end();
  for (std::uint32_t k = 0; k < rows; ++k) row_ptr[k + 1] += row_ptr[k];
  return ProjectionOperator(static_cast<int>(rows), static_cast<int>(cols), std::move(row_ptr),
                            std::move(pixels), std::move(lengths));
}

void ProjectionOperator::save(const std::string& path) const { binio::write_file(path, serialize()); }

ProjectionOperator ProjectionOperator::load(const std::string& path) {
  return deserialize(binio::read_file(path));
}

std::uint64_t ProjectionOperator::hash() const { return binio::fnv1a(serialize()); }

ProjectionOperator assemble_projection(const Grid& grid, const CameraSet& cams) {
  grid.validate();
  const int rows = cams.channel_count();
  std::vector<std::uint64_t> row_ptr{0};
  std::vector<std::uint32_t> pixels;
  std::vector<double> lengths;
  for (int ch = 0; ch < rows; ++ch) {
    if (ch < static_cast<int>(cams.lines.size())) {
      auto row = trace_ray(grid, cams.lines[ch]);
      std::sort(row.begin(), row.end(),
                [](const ChordEntry& a, const ChordEntry& b) { return a.pixel < b.pixel; });
      for (const auto& e : row) {
        if (e.length <= 0) continue;
        pixels.push_back(e.pixel);
        lengths.push_back(e.length);
      }
    }
    row_ptr.push_back(pixels.size());
  }
  return ProjectionOperator(rows, grid.pixel_count(), std::move(row_ptr), std::move(pixels),
                            std::move(lengths));
}

std::vector<double> project(const ProjectionOperator& op, const CameraSet& cams,
                            std::span<const double> image, double noise_std, Rng& rng) {
  require(noise_std >= 0 && std::isfinite(noise_std), "noise_std must be a nonnegative number");
  require(op.rows() == cams.channel_count(), "operator and camera set disagree on channel count");
  auto readings = op.apply(image);
  if (noise_std > 0) {
    for (double& r : readings) r += noise_std * rng.normal();
  }
  for (int ch : cams.dead_channels) readings[ch] = 0.0;
  return readings;
}

std::vector<double> coverage_map(const ProjectionOperator& op) {
  std::vector<double> img(op.cols(), 0.0);
  for (int r = 0; r < op.rows(); ++r) {
    const auto px = op.row_pixels(r);
    const auto len = op.row_lengths(r);
    for (std::size_t i = 0; i < px.size(); ++i) img[px[i]] += len[i];
  }
  return img;
}

// ---------------------------------------------------------------------------
// Config mapping

Grid grid_from_config(const KeyValueConfig& cfg, const Grid& base) {
  const int w = static_cast<int>(cfg.get_int("grid.width_px", base.width_px));
  const int h = static_cast<int>(cfg.get_int("grid.height_px", base.height_px));
  const int pw = static_cast<int>(cfg.get_int("grid.pad_width_px", base.pad_width_px));
  const int ph = static_cast<int>(cfg.get_int("grid.pad_height_px", base.pad_height_px));
  const double ew = cfg.get_double("grid.extent_w", base.extent_w());
  const double eh = cfg.get_double("grid.extent_h", base.extent_h());
  const Point2 origin{cfg.get_double("grid.origin_x", base.origin.x),
                      cfg.get_double("grid.origin_y", base.origin.y)};
  return Grid::over_extent(w, h, pw, ph, ew, eh, origin);
}

void grid_to_config(const Grid& grid, KeyValueConfig& cfg) {
  cfg.set("grid.width_px", std::int64_t{grid.width_px});
  cfg.set("grid.height_px", std::int64_t{grid.height_px});
  cfg.set("grid.pad_width_px", std::int64_t{grid.pad_width_px});
  cfg.set("grid.pad_height_px", std::int64_t{grid.pad_height_px});
  cfg.set("grid.extent_w", grid.extent_w());
  cfg.set("grid.extent_h", grid.extent_h());
  cfg.set("grid.origin_x", grid.origin.x);
  cfg.set("grid.origin_y", grid.origin.y);
}

namespace {

CameraConfig camera_from_config(const KeyValueConfig& cfg, const std::string& prefix,
                                CameraConfig cam) {
  cam.pivot.x = cfg.get_double(prefix + ".pivot_x", cam.pivot.x);
  cam.pivot.y = cfg.get_double(prefix + ".pivot_y", cam.pivot.y);
  cam.count = static_cast<int>(cfg.get_int(prefix + ".count", cam.count));
  cam.overview_angles = cfg.get_doubles(prefix + ".overview_angles", cam.overview_angles);
  cam.divertor_angles = cfg.get_doubles(prefix + ".divertor_angles", cam.divertor_angles);
  cam.ray_length = cfg.get_double(prefix + ".ray_length", cam.ray_length);
  return cam;
}

void camera_to_config(const CameraConfig& cam, const std::string& prefix, KeyValueConfig& cfg) {
  cfg.set(prefix + ".pivot_x", cam.pivot.x);
  cfg.set(prefix + ".pivot_y", cam.pivot.y);
  cfg.set(prefix + ".count", std::int64_t{cam.count});
  cfg.set(prefix + ".overview_angles", cam.overview_angles);
  cfg.set(prefix + ".divertor_angles", cam.divertor_angles);
  cfg.set(prefix + ".ray_length", cam.ray_length);
}

}  // namespace

CameraLayoutConfig cameras_from_config(const KeyValueConfig& cfg, const Grid& grid) {
  auto layout = CameraLayoutConfig::defaults(grid);
  layout.horizontal = camera_from_config(cfg, "cameras.horizontal", layout.horizontal);
  layout.vertical = camera_from_config(cfg, "cameras.vertical", layout.vertical);
  layout.reserve_channels =
      static_cast<int>(cfg.get_int("cameras.reserve_channels", layout.reserve_channels));
  if (!cfg.has("cameras.dead_channels") && cfg.has("cameras.reserve_channels")) {
    layout.dead_channels = {kChannelsPerCamera, kCameraChannels + layout.reserve_channels - 1};
  }
  layout.dead_channels = cfg.get_ints("cameras.dead_channels", layout.dead_channels);
  return layout;
}

void cameras_to_config(const CameraLayoutConfig& layout, KeyValueConfig& cfg) {
  camera_to_config(layout.horizontal, "cameras.horizontal", cfg);
  camera_to_config(layout.vertical, "cameras.vertical", cfg);
  cfg.set("cameras.reserve_channels", std::int64_t{layout.reserve_channels});
  cfg.set("cameras.dead_channels", layout.dead_channels);
}

}  // namespace ptomo
