#include "ptomo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ptomo/error.hpp"

namespace ptomo {
namespace {

void check_pair(const Image& x, const Image& ref, const char* what) {
  if (x.width != ref.width || x.height != ref.height) {
    throw ValidationError(std::string(what) + ": image sizes differ (" + std::to_string(x.width) + "x" +
                          std::to_string(x.height) + " vs " + std::to_string(ref.width) + "x" +
                          std::to_string(ref.height) + ")");
  }
  require(!ref.values.empty(), std::string(what) + ": empty image");
}

// Sum over a `w`-long run along rows followed by one along columns; each
// output is recomputed from scratch so equal windows give equal sums.
std::vector<double> box_sums(const std::vector<double>& v, int width, int height, int w) {
  const int ow = width - w + 1;
  const int oh = height - w + 1;
  std::vector<double> rows(static_cast<std::size_t>(height) * ow);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < w; ++k) s += v[static_cast<std::size_t>(r) * width + c + k];
      rows[static_cast<std::size_t>(r) * ow + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < w; ++k) s += rows[static_cast<std::size_t>(r + k) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = s;
    }
  }
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double ssim(const Image& x, const Image& ref, const SsimOptions& opt) {
  check_pair(x, ref, "ssim");
  require(opt.window >= 3 && opt.window % 2 == 1, "ssim: window must be odd and >= 3");
  require(x.width >= opt.window && x.height >= opt.window, "ssim: image smaller than the window");
  const auto [lo, hi] = std::minmax_element(ref.values.begin(), ref.values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw ValidationError("ssim: reference image is constant (dynamic range 0)");
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);

  const std::size_t n = x.values.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x.values[i] * x.values[i];
    yy[i] = ref.values[i] * ref.values[i];
    xy[i] = x.values[i] * ref.values[i];
  }
  const int w = opt.window;
  const auto sx = box_sums(x.values, x.width, x.height, w);
  const auto sy = box_sums(ref.values, x.width, x.height, w);
  const auto sxx = box_sums(xx, x.width, x.height, w);
  const auto syy = box_sums(yy, x.width, x.height, w);
  const auto sxy = box_sums(xy, x.width, x.height, w);

  const double np = static_cast<double>(w) * w;
  double total = 0.0;
  for (std::size_t i = 0; i < sx.size(); ++i) {
    const double mx = sx[i] / np;
    const double my = sy[i] / np;
    const double vx = (sxx[i] - np * mx * mx) / (np - 1.0);
    const double vy = (syy[i] - np * my * my) / (np - 1.0);
    const double cxy = (sxy[i] - np * mx * my) / (np - 1.0);
    total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(sx.size());
}

double psnr(const Image& x, const Image& ref) {
  check_pair(x, ref, "psnr");
  const double peak = *std::max_element(ref.values.begin(), ref.values.end());
  require(peak > 0.0, "psnr: reference peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double d = x.values[i] - ref.values[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double rmse = std::sqrt(se / static_cast<double>(x.values.size()));
  return 20.0 * std::log10(peak / rmse);
}

double nrmse(const Image& x, const Image& ref) {
  check_pair(x, ref, "nrmse");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double d = x.values[i] - ref.values[i];
    num += d * d;
    den += ref.values[i] * ref.values[i];
  }
  require(den > 0.0, "nrmse: reference image has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

namespace {

template <typename Get>
MetricSummary summarize(const std::vector<MetricRow>& rows, Get get, bool higher_better, bool skip_inf) {
  MetricSummary s;
  double sum = 0.0;
  for (const auto& row : rows) {
    const double v = get(row);
    if (skip_inf && std::isinf(v)) continue;
    const bool first = s.count == 0;
    if (first || (higher_better ? v > s.best : v < s.best)) {
      s.best = v;
      s.best_id = row.id;
    }
    if (first || (higher_better ? v < s.worst : v > s.worst)) {
      s.worst = v;
      s.worst_id = row.id;
    }
    sum += v;
    ++s.count;
  }
  if (s.count == 0) {
    s.mean = s.best = s.worst = std::numeric_limits<double>::infinity();
  } else {
    s.mean = sum / static_cast<double>(s.count);
  }
  return s;
}

}  // namespace

MetricsReport aggregate(std::string dataset, std::vector<MetricRow> rows, const SsimOptions& opt) {
  require(!rows.empty(), "aggregate: no metric rows");
  MetricsReport rep;
  rep.dataset = std::move(dataset);
  rep.options = opt;
  rep.ssim = summarize(rows, [](const MetricRow& r) { return r.ssim; }, true, false);
  rep.psnr = summarize(rows, [](const MetricRow& r) { return r.psnr_db; }, true, true);
  rep.nrmse = summarize(rows, [](const MetricRow& r) { return r.nrmse; }, false, false);
  for (const auto& r : rows) rep.psnr_infinite += std::isinf(r.psnr_db) ? 1 : 0;
  rep.rows = std::move(rows);
  return rep;
}

std::string per_image_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "dataset,id,ssim,psnr_db,nrmse\n";
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      out += rep.dataset + "," + r.id + "," + fmt(r.ssim) + "," + fmt(r.psnr_db) + "," + fmt(r.nrmse) + "\n";
    }
  }
  return out;
}

std::string aggregate_csv(const MetricsReport& report) {
  std::string out = "metric,mean,best,worst\n";
  auto line = [&](const char* name, const MetricSummary& s) {
    out += std::string(name) + "," + fmt(s.mean) + "," + fmt(s.best) + "," + fmt(s.worst) + "\n";
  };
  line("ssim", report.ssim);
  line("psnr_db", report.psnr);
  line("nrmse", report.nrmse);
  return out;
}

}  // namespace ptomo
