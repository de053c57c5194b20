#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptomo/rng.hpp"

namespace ptomo {

class KeyValueConfig;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2, Point2) = default;
};

double dot(Point2 a, Point2 b);
double norm(Point2 a);

/// Reconstruction grid over a rectangular poloidal domain.
///
/// Pixel (col, row) has row 0 at the top of the domain (largest y), so that
/// row-major images read like the cross-section picture. The active
/// width_px x height_px area occupies the top-left corner of the padded
/// pad_width_px x pad_height_px image; padding goes on the right and bottom.
struct Grid {
  int width_px = 115;
  int height_px = 196;
  int pad_width_px = 120;
  int pad_height_px = 200;
  double cell_w = 2.0 / 115;
  double cell_h = 3.5 / 196;
  Point2 origin{0.0, 0.0};  // lower-left corner of the physical domain

  /// Grid that maps `width_px` x `height_px` cells onto a physical extent.
  static Grid over_extent(int width_px, int height_px, int pad_width_px, int pad_height_px,
                          double extent_w, double extent_h, Point2 origin = {});
  /// 115x196 (padded 120x200) over a 2.0 m x 3.5 m domain.
  static Grid full();
  /// 58x98 (padded 60x100) over the same domain.
  static Grid half();
  /// 29x49 (padded 30x50) over the same domain.
  static Grid quarter();

  void validate() const;

  double extent_w() const { return width_px * cell_w; }
  double extent_h() const { return height_px * cell_h; }
  int pixel_count() const { return width_px * height_px; }
  int padded_pixel_count() const { return pad_width_px * pad_height_px; }
  int pixel_index(int col, int row) const { return row * width_px + col; }

  Point2 pixel_center(int col, int row) const;
  /// Cell containing `p`; nullopt outside the domain. Points on the top and
  /// right edges belong to the last cell.
  std::optional<std::pair<int, int>> cell_at(Point2 p) const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

enum class Camera : std::uint8_t { Horizontal = 0, Vertical = 1 };
enum class Fan : std::uint8_t { Overview = 0, Divertor = 1 };

struct LineOfSight {
  Point2 start;
  Point2 end;
  Camera camera = Camera::Horizontal;
  int channel_index = 0;  // 0..23 within the camera
  Fan fan = Fan::Overview;

  double length() const { return norm(end - start); }
  Point2 at(double t) const { return start + t * (end - start); }
};

/// Parametric range [t_enter, t_exit] of the segment inside the grid domain,
/// with t in [0, 1] along start->end. nullopt if the segment misses the
/// domain or only touches it in a point.
std::optional<std::pair<double, double>> clip_to_domain(const Grid& grid, const LineOfSight& los);

/// The part of `los` inside the domain, keeping camera/channel labels.
std::optional<LineOfSight> in_domain_segment(const Grid& grid, const LineOfSight& los);

inline constexpr int kChannelsPerCamera = 24;
inline constexpr int kOverviewPerCamera = 16;
inline constexpr int kDivertorPerCamera = 8;
inline constexpr int kCameraChannels = 2 * kChannelsPerCamera;

/// One camera: a pinhole at `pivot` with a fan of viewing angles (radians,
/// measured counter-clockwise from +x).
struct CameraConfig {
  Point2 pivot;
  int count = kChannelsPerCamera;
  std::vector<double> overview_angles;
  std::vector<double> divertor_angles;
  double ray_length = 10.0;  // m; sight lines end this far from the pivot
};

struct CameraLayoutConfig {
  CameraConfig horizontal;
  CameraConfig vertical;
  int reserve_channels = 4;
  std::vector<int> dead_channels;  // global channel indices

  /// Horizontal camera on the outboard side at mid height, vertical camera
  /// above the domain. Overview fans aim at evenly spaced points across the
  /// opposite boundary; divertor fans aim at the bottom quarter.
  static CameraLayoutConfig defaults(const Grid& grid);
};

/// Global channel layout: 0..23 horizontal, 24..47 vertical, then reserves.
struct CameraSet {
  std::vector<LineOfSight> lines;  // 48, ordered by global channel index
  int reserve_channels = 4;
  std::vector<int> dead_channels;

  int channel_count() const { return static_cast<int>(lines.size()) + reserve_channels; }
  bool is_dead(int channel) const;
};

/// Builds the 48 sight lines; throws ValidationError if a fan has the wrong
/// size, a dead channel index is out of range, or any ray misses the domain.
CameraSet build_cameras(const Grid& grid, const CameraLayoutConfig& cfg);

struct ChordEntry {
  std::uint32_t pixel;
  double length;
};

/// Exact chord lengths of the segment through each traversed cell, in
/// traversal order. Empty if the segment misses the grid.
std::vector<ChordEntry> trace_ray(const Grid& grid, const LineOfSight& los);

/// Sparse channel x pixel matrix of chord lengths (CSR, rows sorted by pixel).
class ProjectionOperator {
 public:
  ProjectionOperator() = default;
  ProjectionOperator(int rows, int cols, std::vector<std::uint64_t> row_ptr,
                     std::vector<std::uint32_t> pixels, std::vector<double> lengths);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t entry_count() const noexcept { return pixels_.size(); }

  std::span<const std::uint32_t> row_pixels(int row) const;
  std::span<const double> row_lengths(int row) const;
  double row_sum(int row) const;
  /// Entry (row, pixel), zero when absent.
  double at(int row, std::uint32_t pixel) const;

  /// y = A x, accumulated in pixel order per row.
  std::vector<double> apply(std::span<const double> image) const;

  /// PTOP binary serialization (see docs/formats.md).
  std::vector<std::uint8_t> serialize() const;
  static ProjectionOperator deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static ProjectionOperator load(const std::string& path);
  std::uint64_t hash() const;

  friend bool operator==(const ProjectionOperator&, const ProjectionOperator&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint64_t> row_ptr_;
  std::vector<std::uint32_t> pixels_;
  std::vector<double> lengths_;
};

/// One row per channel. Dead channels keep their chords (project() zeroes
/// their readings); reserve rows are empty.
ProjectionOperator assemble_projection(const Grid& grid, const CameraSet& cams);

/// Channel readings for an active-area image (width_px x height_px,
/// row-major). Gaussian noise of `noise_std` is added to every channel,
/// then dead channels are set to exactly zero.
std::vector<double> project(const ProjectionOperator& op, const CameraSet& cams,
                            std::span<const double> image, double noise_std, Rng& rng);

/// Renders the chord coverage (sum of chord lengths per pixel) as an
/// active-area image.
std::vector<double> coverage_map(const ProjectionOperator& op);

/// Reads `grid.*` keys (width_px, height_px, pad_width_px, pad_height_px,
/// extent_w, extent_h, origin_x, origin_y) on top of `base`.
Grid grid_from_config(const KeyValueConfig& cfg, const Grid& base);
void grid_to_config(const Grid& grid, KeyValueConfig& cfg);

/// Reads `cameras.*` keys on top of CameraLayoutConfig::defaults(grid).
CameraLayoutConfig cameras_from_config(const KeyValueConfig& cfg, const Grid& grid);
void cameras_to_config(const CameraLayoutConfig& layout, KeyValueConfig& cfg);

}  // namespace ptomo
