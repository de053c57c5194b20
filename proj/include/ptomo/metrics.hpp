#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ptomo/image.hpp"

namespace ptomo {

struct SsimOptions {
  int window = 7;  // odd, uniform weights
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over all fully contained window positions. Window statistics
/// use the unbiased (n - 1) variance; L = max(ref) - min(ref). Throws
/// ValidationError for a constant reference or images smaller than the window.
double ssim(const Image& x, const Image& ref, const SsimOptions& opt = {});

/// 20 log10(max(ref) / rmse); +infinity when the images are identical.
double psnr(const Image& x, const Image& ref);

/// ||x - ref||_2 / ||ref||_2.
double nrmse(const Image& x, const Image& ref);

struct MetricRow {
  std::string id;
  double ssim = 0.0;
  double psnr_db = 0.0;
  double nrmse = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double best = 0.0;
  double worst = 0.0;
  std::string best_id;
  std::string worst_id;
  std::size_t count = 0;  // rows that entered the aggregate
};

struct MetricsReport {
  std::string dataset;
  std::vector<MetricRow> rows;
  MetricSummary ssim;
  MetricSummary psnr;
  MetricSummary nrmse;
  std::size_t psnr_infinite = 0;  // identical-image rows left out of the PSNR aggregate
  SsimOptions options;
};

/// Mean/best/worst per metric. SSIM and PSNR are higher-better, NRMSE
/// lower-better; ties keep the first row. Throws on an empty row list.
MetricsReport aggregate(std::string dataset, std::vector<MetricRow> rows, const SsimOptions& opt = {});

/// `dataset,id,ssim,psnr_db,nrmse` with a header line.
std::string per_image_csv(const std::vector<MetricsReport>& reports);
/// `metric,mean,best,worst` with a header line, one row per metric.
std::string aggregate_csv(const MetricsReport& report);

}  // namespace ptomo
