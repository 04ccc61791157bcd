#pragma once

#include "iconik/types.hpp"

#include <string>
#include <vector>

namespace iconik {

inline constexpr double kPsnrCap = 99.0;

/// 20 log10(max(ref) / rmse). Returns kPsnrCap when the images are identical.
double psnr(RealImage const &x, RealImage const &ref);

/// ||x - ref||_2 / ||ref||_2
double nrmse(RealImage const &x, RealImage const &ref);

struct SsimParams
{
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over all valid Gaussian windows, both images divided by max(ref).
double ssim(RealImage const &x, RealImage const &ref, SsimParams const &p = {});

struct MetricReport
{
  std::string method;
  int slice = 0;
  int motion_state = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double nrmse = 0.0;
};

MetricReport evaluate(RealImage const &x, RealImage const &ref, std::string method, int motion_state = 0);

/// Table-shaped CSV: method,slice,state,ssim,psnr_db,nrmse
std::string metrics_csv(std::vector<MetricReport> const &rows);
std::string metrics_json(std::vector<MetricReport> const &rows);

} // namespace iconik
