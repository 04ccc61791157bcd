#include "iconik/metrics.hpp"
#include "iconik/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace iconik {

namespace {

void check_shapes(RealImage const &x, RealImage const &ref, char const *what)
{
  if (!x.same_shape(ref) || x.empty()) { throw DataError(std::string(what) + ": image shapes differ or are empty"); }
}

std::vector<double> gaussian_window(int n, double sigma)
{
  std::vector<double> g(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double const d = i - (n - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += g[i];
  }
  for (auto &v : g) { v /= s; }
  return g;
}

// Separable valid filtering with a normalized 1-D kernel.
RealImage filter_valid(RealImage const &img, std::vector<double> const &g)
{
  std::size_t const n = g.size(), H = img.rows(), W = img.cols();
  RealImage tmp(H, W - n + 1), out(H - n + 1, W - n + 1);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x + n <= W; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) { s += g[i] * img(y, x + i); }
      tmp(y, x) = s;
    }
  }
  for (std::size_t y = 0; y + n <= H; ++y) {
    for (std::size_t x = 0; x < tmp.cols(); ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) { s += g[i] * tmp(y + i, x); }
      out(y, x) = s;
    }
  }
  return out;
}

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

} // namespace

double psnr(RealImage const &x, RealImage const &ref)
{
  check_shapes(x, ref, "psnr");
  double const peak = *std::max_element(ref.begin(), ref.end());
  if (!(peak > 0.0)) { throw DataError("psnr: reference maximum must be positive"); }
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) { se += (x[i] - ref[i]) * (x[i] - ref[i]); }
  if (se == 0.0) { return kPsnrCap; }
  double const rmse = std::sqrt(se / x.size());
  return std::min(kPsnrCap, 20.0 * std::log10(peak / rmse));
}

double nrmse(RealImage const &x, RealImage const &ref)
{
  check_shapes(x, ref, "nrmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - ref[i]) * (x[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  if (den == 0.0) { throw DataError("nrmse: reference is zero"); }
  return std::sqrt(num / den);
}

double ssim(RealImage const &x, RealImage const &ref, SsimParams const &p)
{
  check_shapes(x, ref, "ssim");
  if (p.window < 1 || x.rows() < static_cast<std::size_t>(p.window) || x.cols() < static_cast<std::size_t>(p.window)) {
    throw DataError("ssim: image smaller than the window");
  }
  double const peak = *std::max_element(ref.begin(), ref.end());
  if (!(peak > 0.0)) { throw DataError("ssim: reference maximum must be positive"); }
  std::size_t const n = x.size();
  RealImage a(x.rows(), x.cols()), b(x.rows(), x.cols()), aa(a), bb(a), ab(a);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = x[i] / peak;
    b[i] = ref[i] / peak;
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  auto const g = gaussian_window(p.window, p.sigma);
  auto const ma = filter_valid(a, g), mb = filter_valid(b, g);
  auto const saa = filter_valid(aa, g), sbb = filter_valid(bb, g), sab = filter_valid(ab, g);
  double const c1 = p.k1 * p.k1, c2 = p.k2 * p.k2;
  double total = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    double const va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cov = sab[i] - ma[i] * mb[i];
    total += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) / ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
  }
  return total / ma.size();
}

MetricReport evaluate(RealImage const &x, RealImage const &ref, std::string method, int motion_state)
{
  MetricReport r;
  r.method = std::move(method);
  r.motion_state = motion_state;
  r.psnr = psnr(x, ref);
  r.ssim = ssim(x, ref);
  r.nrmse = nrmse(x, ref);
  return r;
}

std::string metrics_csv(std::vector<MetricReport> const &rows)
{
  std::ostringstream os;
  os << "method,slice,state,ssim,psnr_db,nrmse\n";
  for (auto const &r : rows) {
    os << r.method << ',' << r.slice << ',' << r.motion_state << ',' << fmt(r.ssim) << ',' << fmt(r.psnr) << ','
       << fmt(r.nrmse) << '\n';
  }
  return os.str();
}

std::string metrics_json(std::vector<MetricReport> const &rows)
{
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (auto const &r : rows) {
    j.push_back({{"method", r.method}, {"slice", r.slice}, {"state", r.motion_state}, {"ssim", r.ssim},
                 {"psnr_db", r.psnr}, {"nrmse", r.nrmse}});
  }
  return j.dump(2) + "\n";
}

} // namespace iconik
