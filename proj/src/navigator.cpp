#include "iconik/navigator.hpp"
#include "iconik/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace iconik {

Array2<cdouble> extract_center_samples(KSpaceDataset const &ds)
{
  int const nfe = ds.meta.n_fe, nc = ds.meta.n_c, ns = ds.meta.n_spokes;
  Array2<cdouble> out(nc, ns);
  for (int s = 0; s < ns; ++s) {
    std::size_t const i = static_cast<std::size_t>(s) * nfe + nfe / 2;
    if (i >= ds.samples() || ds.coords[i].kx != 0.0 || ds.coords[i].ky != 0.0) {
      throw DataError("navigator: spoke " + std::to_string(s) + " has no sample at k = (0, 0)");
    }
    for (int c = 0; c < nc; ++c) { out(c, s) = cdouble(ds.value(i, c)); }
  }
  return out;
}

namespace {

// Cyclic Jacobi rotations on a small symmetric matrix. Returns eigenvalues and
// column eigenvectors.
void symmetric_eigen(std::vector<double> a, int n, std::vector<double> &evals, std::vector<double> &evecs)
{
  evecs.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) { evecs[i * n + i] = 1.0; }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        total += a[i * n + j] * a[i * n + j];
        if (i != j) { off += a[i * n + j] * a[i * n + j]; }
      }
    }
    if (off <= 1e-30 * total || off == 0.0) { break; }
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double const apq = a[p * n + q];
        if (apq == 0.0) { continue; }
        double const theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        double const t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double const c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          double const akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double const apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double const vkp = evecs[k * n + p], vkq = evecs[k * n + q];
          evecs[k * n + p] = c * vkp - s * vkq;
          evecs[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  evals.resize(n);
  for (int i = 0; i < n; ++i) { evals[i] = a[i * n + i]; }
}

} // namespace

std::vector<double> pca_first_component(RealImage const &data)
{
  int const nf = static_cast<int>(data.rows());
  std::size_t const nt = data.cols();
  if (nt < 2 || nf < 1) { throw DataError("pca: need at least one feature and two time points"); }

  RealImage centered(nf, nt);
  double energy = 0.0;
  for (int f = 0; f < nf; ++f) {
    double const mean = std::accumulate(data.row(f).begin(), data.row(f).end(), 0.0) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
      centered(f, t) = data(f, t) - mean;
      energy += data(f, t) * data(f, t);
    }
  }
  std::vector<double> cov(static_cast<std::size_t>(nf) * nf, 0.0);
  for (int i = 0; i < nf; ++i) {
    for (int j = i; j < nf; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < nt; ++t) { s += centered(i, t) * centered(j, t); }
      cov[i * nf + j] = cov[j * nf + i] = s / (nt - 1);
    }
  }
  std::vector<double> evals, evecs;
  symmetric_eigen(cov, nf, evals, evecs);
  int const top = static_cast<int>(std::max_element(evals.begin(), evals.end()) - evals.begin());
  double const trace = std::accumulate(evals.begin(), evals.end(), 0.0);
  double const scale = std::max(trace, energy / nt);
  if (!(evals[top] > 1e-12 * scale)) {
    throw NumericError("pca: degenerate signal (leading eigenvalue " + std::to_string(evals[top]) + ")");
  }

  std::vector<double> v(nf);
  double vmax = 0.0;
  for (int f = 0; f < nf; ++f) {
    v[f] = evecs[f * nf + top];
    vmax = std::max(vmax, std::abs(v[f]));
  }
  for (int f = 0; f < nf; ++f) {
    if (std::abs(v[f]) > 1e-9 * vmax) {
      if (v[f] < 0) {
        for (auto &x : v) { x = -x; }
      }
      break;
    }
  }
  std::vector<double> proj(nt, 0.0);
  for (std::size_t t = 0; t < nt; ++t) {
    for (int f = 0; f < nf; ++f) { proj[t] += v[f] * centered(f, t); }
  }
  return proj;
}

std::vector<double> moving_average(std::vector<double> const &x, int window)
{
  if (window <= 1) { return x; }
  int const n = static_cast<int>(x.size());
  int const left = (window - 1) / 2, right = window / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    int const lo = std::max(0, i - left), hi = std::min(n - 1, i + right);
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) { s += x[j]; }
    out[i] = s / (hi - lo + 1);
  }
  return out;
}

std::vector<double> rescale_unit(std::vector<double> const &x)
{
  auto const [lo, hi] = std::minmax_element(x.begin(), x.end());
  double const range = *hi - *lo;
  if (x.empty() || !(range > 1e-12 * std::max(std::abs(*hi), std::abs(*lo)))) {
    throw NumericError("navigator: degenerate signal, cannot rescale a flat curve");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) { out[i] = std::clamp(2.0 * (x[i] - *lo) / range - 1.0, -1.0, 1.0); }
  return out;
}

double pearson(std::vector<double> const &a, std::vector<double> const &b)
{
  if (a.size() != b.size() || a.size() < 2) { throw DataError("pearson: length mismatch"); }
  double const n = static_cast<double>(a.size());
  double const ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double const mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) { return 0.0; }
  return sab / std::sqrt(saa * sbb);
}

NavigatorSignal extract_navigator(KSpaceDataset const &ds, int smooth_window)
{
  int const ns = ds.meta.n_spokes;
  if (smooth_window < 1) { throw ConfigError("navigator: smooth_window must be >= 1"); }
  if (ns < 2 * smooth_window) { throw DataError("navigator: need at least 2 * smooth_window spokes"); }

  auto const center = extract_center_samples(ds);
  int const nc = static_cast<int>(center.rows());
  RealImage features(2 * nc, ns);
  for (int c = 0; c < nc; ++c) {
    for (int s = 0; s < ns; ++s) {
      features(2 * c, s) = center(c, s).real();
      features(2 * c + 1, s) = center(c, s).imag();
    }
  }
  NavigatorSignal nav;
  nav.provenance = NavProvenance::SelfNavigated;
  nav.values = rescale_unit(moving_average(pca_first_component(features), smooth_window));
  if (ds.has_ground_truth()) {
    double r = pearson(nav.values, ds.gt_nav);
    if (r < 0) {
      for (auto &v : nav.values) { v = -v; }
      nav.sign_flipped = true;
      r = -r;
    }
    nav.gt_correlation = r;
  }
  return nav;
}

NavigatorSignal oracle_navigator(KSpaceDataset const &ds)
{
  if (!ds.has_ground_truth()) { throw DataError("navigator: dataset has no ground-truth motion"); }
  NavigatorSignal nav;
  nav.provenance = NavProvenance::Oracle;
  nav.values = ds.gt_nav;
  nav.gt_correlation = 1.0;
  return nav;
}

std::vector<std::vector<int>> bin_assignments(NavigatorSignal const &nav, int n_bins)
{
  int const ns = static_cast<int>(nav.values.size());
  if (n_bins < 1 || ns < n_bins) { throw ConfigError("binning: need 1 <= n_bins <= n_spokes"); }
  std::vector<int> order(ns);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return nav.values[a] > nav.values[b]; });
  std::vector<std::vector<int>> bins(n_bins);
  int const base = ns / n_bins, extra = ns % n_bins;
  int pos = 0;
  for (int b = 0; b < n_bins; ++b) {
    int const size = base + (b < extra ? 1 : 0);
    bins[b].assign(order.begin() + pos, order.begin() + pos + size);
    std::sort(bins[b].begin(), bins[b].end());
    pos += size;
  }
  return bins;
}

std::vector<KSpaceDataset> bin_by_navigator(KSpaceDataset const &ds, NavigatorSignal const &nav, int n_bins)
{
  if (nav.values.size() != static_cast<std::size_t>(ds.meta.n_spokes)) {
    throw DataError("binning: navigator length does not match spoke count");
  }
  auto const bins = bin_assignments(nav, n_bins);
  int const nfe = ds.meta.n_fe, nc = ds.meta.n_c;
  std::vector<KSpaceDataset> out;
  out.reserve(n_bins);
  for (auto const &spokes : bins) {
    KSpaceDataset b;
    b.meta = ds.meta;
    b.meta.n_spokes = static_cast<int>(spokes.size());
    for (int s : spokes) {
      auto const first = static_cast<std::size_t>(s) * nfe;
      b.coords.insert(b.coords.end(), ds.coords.begin() + first, ds.coords.begin() + first + nfe);
      b.values.insert(b.values.end(), ds.values.begin() + first * nc, ds.values.begin() + (first + nfe) * nc);
      b.spoke_ids.push_back(ds.spoke_ids[s]);
      if (ds.has_ground_truth()) { b.gt_nav.push_back(ds.gt_nav[s]); }
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::string navigator_csv(NavigatorSignal const &nav)
{
  std::ostringstream os;
  os.precision(17);
  os << "spoke,nav\n";
  for (std::size_t i = 0; i < nav.values.size(); ++i) { os << i << ',' << nav.values[i] << '\n'; }
  return os.str();
}

} // namespace iconik
