#include "iconik/classic_recon.hpp"
#include "iconik/error.hpp"
#include "iconik/nufft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace iconik {

namespace {

void check_bins(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils)
{
  if (bins.empty()) { throw ConfigError("recon: need at least one bin"); }
  for (auto const &b : bins) {
    if (b.meta.n_c != coils.n_c || b.meta.H != coils.H || b.meta.W != coils.W) {
      throw DataError("recon: bin grid/coil metadata does not match the coil maps");
    }
  }
}

std::pair<double, double> nav_range(KSpaceDataset const &b)
{
  if (b.coords.empty()) { return {0.0, 0.0}; }
  double lo = b.coords[0].nav, hi = lo;
  for (auto const &c : b.coords) {
    lo = std::min(lo, c.nav);
    hi = std::max(hi, c.nav);
  }
  return {lo, hi};
}

// F S for one motion state, with optional density weighting of the data term.
struct StateOperator
{
  std::vector<KPoint> coords;
  std::vector<double> weights;
  std::vector<cdouble> y; // samples x n_c
  CoilMaps const *coils;

  StateOperator(KSpaceDataset const &b, CoilMaps const &cm, bool weighted)
    : coords(b.kpoints())
    , y(b.values.begin(), b.values.end())
    , coils(&cm)
  {
    if (weighted) {
      auto const profile = radial_density_profile(std::max(1, b.meta.n_spokes), b.meta.n_fe);
      weights.resize(coords.size());
      for (std::size_t i = 0; i < coords.size(); ++i) { weights[i] = profile[i % b.meta.n_fe]; }
    } else {
      weights.assign(coords.size(), 1.0);
    }
  }

  std::vector<cdouble> forward(ComplexImage const &x) const
  {
    std::vector<ComplexImage> coil_images(coils->n_c, ComplexImage(x.rows(), x.cols()));
    for (int c = 0; c < coils->n_c; ++c) {
      for (std::size_t p = 0; p < x.size(); ++p) { coil_images[c][p] = coils->maps[c][p] * x[p]; }
    }
    return nudft_forward(coil_images, coords);
  }

  // S^H F^H W r
  ComplexImage adjoint(std::vector<cdouble> const &r) const
  {
    auto const imgs = nudft_adjoint(r, coils->n_c, coords, weights, coils->H, coils->W);
    ComplexImage out(coils->H, coils->W);
    for (int c = 0; c < coils->n_c; ++c) {
      for (std::size_t p = 0; p < out.size(); ++p) { out[p] += std::conj(coils->maps[c][p]) * imgs[c][p]; }
    }
    return out;
  }

  double weighted_norm2(std::vector<cdouble> const &r) const
  {
    int const nc = coils->n_c;
    double s = 0.0;
    for (std::size_t m = 0; m < coords.size(); ++m) {
      double row = 0.0;
      for (int c = 0; c < nc; ++c) { row += std::norm(r[m * nc + c]); }
      s += weights[m] * row;
    }
    return s;
  }
};

std::vector<StateOperator> make_operators(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, bool weighted)
{
  std::vector<StateOperator> ops;
  ops.reserve(bins.size());
  for (auto const &b : bins) { ops.emplace_back(b, coils, weighted); }
  return ops;
}

double inner_re(ImageSeries const &a, ImageSeries const &b)
{
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    for (std::size_t p = 0; p < a[d].size(); ++p) { s += (std::conj(a[d][p]) * b[d][p]).real(); }
  }
  return s;
}

ImageSeries axpy(ImageSeries const &x, double t, ImageSeries const &d)
{
  ImageSeries out = x;
  for (std::size_t s = 0; s < x.size(); ++s) {
    for (std::size_t p = 0; p < x[s].size(); ++p) { out[s][p] += t * d[s][p]; }
  }
  return out;
}

void check_series(ImageSeries const &x)
{
  if (x.empty()) { throw DataError("tv: empty image series"); }
  for (auto const &im : x) {
    if (!im.same_shape(x[0])) { throw DataError("tv: states differ in shape"); }
  }
}

template <class Visit>
void for_each_difference(ImageSeries const &x, unsigned axes, Visit &&visit)
{
  std::size_t const nd = x.size(), H = x[0].rows(), W = x[0].cols();
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t c = 0; c < W; ++c) {
        if (axes & TvTemporal) { visit(d, y, c, (d + 1) % nd, y, c); }
        if (axes & TvSpatial) {
          // replicate padding: the last difference along an axis is identically zero
          visit(d, y, c, d, std::min(y + 1, H - 1), c);
          visit(d, y, c, d, y, std::min(c + 1, W - 1));
        }
      }
    }
  }
}

} // namespace

DynamicImage inufft_recon(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils)
{
  check_bins(bins, coils);
  DynamicImage out;
  out.method = "inufft";
  for (auto const &b : bins) {
    StateOperator op(b, coils, true);
    out.states.push_back(op.adjoint(op.y));
    out.nav_ranges.push_back(nav_range(b));
  }
  return out;
}

double tv_value(ImageSeries const &x, double mu, unsigned axes)
{
  check_series(x);
  double s = 0.0;
  for_each_difference(x, axes, [&](std::size_t d0, std::size_t y0, std::size_t c0, std::size_t d1, std::size_t y1,
                                   std::size_t c1) { s += std::sqrt(std::norm(x[d1](y1, c1) - x[d0](y0, c0)) + mu); });
  return s;
}

ImageSeries tv_grad(ImageSeries const &x, double mu, unsigned axes)
{
  check_series(x);
  if (!(mu > 0.0)) { throw ConfigError("tv: mu must be > 0"); }
  ImageSeries g(x.size(), ComplexImage(x[0].rows(), x[0].cols()));
  for_each_difference(x, axes, [&](std::size_t d0, std::size_t y0, std::size_t c0, std::size_t d1, std::size_t y1,
                                   std::size_t c1) {
    cdouble const diff = x[d1](y1, c1) - x[d0](y0, c0);
    cdouble const gd = diff / std::sqrt(std::norm(diff) + mu);
    g[d1](y1, c1) += gd;
    g[d0](y0, c0) -= gd;
  });
  return g;
}

void XDGraspConfig::validate() const
{
  if (lambda_spatial < 0.0 || lambda_temporal < 0.0) { throw ConfigError("xdgrasp: lambdas must be >= 0"); }
  if (!(mu > 0.0)) { throw ConfigError("xdgrasp: mu must be > 0"); }
  if (n_iter < 1) { throw ConfigError("xdgrasp: n_iter must be >= 1"); }
  if (!(backtrack > 0.0 && backtrack < 1.0)) { throw ConfigError("xdgrasp: backtrack factor must be in (0, 1)"); }
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) { throw ConfigError("xdgrasp: armijo_c must be in (0, 1)"); }
  if (max_backtracks < 1 || restart_every < 1) { throw ConfigError("xdgrasp: invalid line-search settings"); }
}

namespace {

std::pair<double, double> resolve_lambdas(ImageSeries const &x0, XDGraspConfig const &cfg)
{
  double scale = 1.0;
  if (cfg.scale_by_initial_max) {
    scale = 0.0;
    for (auto const &im : x0) {
      for (auto const &v : im) { scale = std::max(scale, std::abs(v)); }
    }
  }
  return {cfg.lambda_spatial * scale, cfg.lambda_temporal * scale};
}

double regularizer(ImageSeries const &x, double ls, double lt, double mu)
{
  double r = 0.0;
  if (lt > 0.0) { r += lt * tv_value(x, mu, TvTemporal); }
  if (ls > 0.0) { r += ls * tv_value(x, mu, TvSpatial); }
  return r;
}

void add_regularizer_grad(ImageSeries const &x, double ls, double lt, double mu, ImageSeries &g)
{
  auto add = [&](double lambda, unsigned axes) {
    if (lambda <= 0.0) { return; }
    auto const tg = tv_grad(x, mu, axes);
    for (std::size_t d = 0; d < g.size(); ++d) {
      for (std::size_t p = 0; p < g[d].size(); ++p) { g[d][p] += lambda * tg[d][p]; }
    }
  };
  add(lt, TvTemporal);
  add(ls, TvSpatial);
}

// residuals per state: A x_d - y_d
std::vector<std::vector<cdouble>> residuals(std::vector<StateOperator> const &ops, ImageSeries const &x)
{
  std::vector<std::vector<cdouble>> r(ops.size());
  for (std::size_t d = 0; d < ops.size(); ++d) {
    r[d] = ops[d].forward(x[d]);
    for (std::size_t i = 0; i < r[d].size(); ++i) { r[d][i] -= ops[d].y[i]; }
  }
  return r;
}

double data_term(std::vector<StateOperator> const &ops, std::vector<std::vector<cdouble>> const &r)
{
  double s = 0.0;
  for (std::size_t d = 0; d < ops.size(); ++d) { s += ops[d].weighted_norm2(r[d]); }
  return s;
}

ImageSeries gradient(std::vector<StateOperator> const &ops, std::vector<std::vector<cdouble>> const &r,
                     ImageSeries const &x, double ls, double lt, double mu)
{
  ImageSeries g(ops.size());
  for (std::size_t d = 0; d < ops.size(); ++d) {
    g[d] = ops[d].adjoint(r[d]);
    for (auto &v : g[d]) { v *= 2.0; }
  }
  add_regularizer_grad(x, ls, lt, mu, g);
  return g;
}

void check_start(ImageSeries const &x, std::vector<KSpaceDataset> const &bins, CoilMaps const &coils)
{
  if (x.size() != bins.size()) { throw DataError("xdgrasp: one image per bin required"); }
  for (auto const &im : x) {
    if (im.rows() != static_cast<std::size_t>(coils.H) || im.cols() != static_cast<std::size_t>(coils.W)) {
      throw DataError("xdgrasp: image size does not match coil maps");
    }
  }
}

} // namespace

double objective_with_gradient(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, ImageSeries const &x,
                               double lambda_spatial, double lambda_temporal, XDGraspConfig const &cfg,
                               ImageSeries *grad)
{
  check_bins(bins, coils);
  check_start(x, bins, coils);
  auto const ops = make_operators(bins, coils, cfg.density_weighting);
  auto const r = residuals(ops, x);
  double const J = data_term(ops, r) + regularizer(x, lambda_spatial, lambda_temporal, cfg.mu);
  if (grad) { *grad = gradient(ops, r, x, lambda_spatial, lambda_temporal, cfg.mu); }
  return J;
}

double objective_value(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, ImageSeries const &x,
                       XDGraspConfig const &cfg)
{
  cfg.validate();
  double ls = cfg.lambda_spatial, lt = cfg.lambda_temporal;
  if (cfg.scale_by_initial_max && (ls > 0.0 || lt > 0.0)) {
    std::tie(ls, lt) = resolve_lambdas(inufft_recon(bins, coils).states, cfg);
  }
  return objective_with_gradient(bins, coils, x, ls, lt, cfg, nullptr);
}

XDGraspResult xdgrasp_solve(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, ImageSeries x,
                            double ls, double lt, XDGraspConfig const &cfg)
{
  cfg.validate();
  check_bins(bins, coils);
  check_start(x, bins, coils);
  auto const ops = make_operators(bins, coils, cfg.density_weighting);

  XDGraspResult res;
  res.lambda_spatial = ls;
  res.lambda_temporal = lt;

  auto r = residuals(ops, x);
  double J = data_term(ops, r) + regularizer(x, ls, lt, cfg.mu);
  res.objective.push_back(J);
  ImageSeries g = gradient(ops, r, x, ls, lt, cfg.mu);
  ImageSeries dir;
  double g2_prev = 0.0;
  double t_prev = 1.0;

  for (int it = 0; it < cfg.n_iter; ++it) {
    double const g2 = inner_re(g, g);
    if (g2 == 0.0) { break; }
    bool steepest = (it % cfg.restart_every == 0) || dir.empty();
    if (steepest) {
      dir = g;
      for (auto &im : dir) {
        for (auto &v : im) { v = -v; }
      }
    } else {
      double const beta = g2 / g2_prev;
      for (std::size_t d = 0; d < dir.size(); ++d) {
        for (std::size_t p = 0; p < dir[d].size(); ++p) { dir[d][p] = beta * dir[d][p] - g[d][p]; }
      }
      if (inner_re(g, dir) >= 0.0) {
        steepest = true;
        dir = g;
        for (auto &im : dir) {
          for (auto &v : im) { v = -v; }
        }
      }
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double const slope = inner_re(g, dir);
      // A dir per state; the data term along the line is then closed form
      std::vector<std::vector<cdouble>> Ad(ops.size());
      for (std::size_t d = 0; d < ops.size(); ++d) { Ad[d] = ops[d].forward(dir[d]); }
      auto data_at = [&](double t) {
        double s = 0.0;
        for (std::size_t d = 0; d < ops.size(); ++d) {
          int const nc = coils.n_c;
          for (std::size_t m = 0; m < ops[d].coords.size(); ++m) {
            double row = 0.0;
            for (int c = 0; c < nc; ++c) { row += std::norm(r[d][m * nc + c] + t * Ad[d][m * nc + c]); }
            s += ops[d].weights[m] * row;
          }
        }
        return s;
      };
      double t = std::min(2.0 * t_prev, 1e12);
      for (int bt = 0; bt < cfg.max_backtracks; ++bt, t *= cfg.backtrack) {
        ImageSeries const xt = axpy(x, t, dir);
        double const Jt = data_at(t) + regularizer(xt, ls, lt, cfg.mu);
        if (std::isfinite(Jt) && Jt <= J + cfg.armijo_c * t * slope && Jt <= J) {
          x = xt;
          for (std::size_t d = 0; d < ops.size(); ++d) {
            for (std::size_t i = 0; i < r[d].size(); ++i) { r[d][i] += t * Ad[d][i]; }
          }
          J = Jt;
          t_prev = t;
          accepted = true;
          break;
        }
      }
      if (!accepted && !steepest) {
        steepest = true;
        dir = g;
        for (auto &im : dir) {
          for (auto &v : im) { v = -v; }
        }
      } else if (!accepted) {
        break;
      }
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
    res.objective.push_back(J);
    g2_prev = g2;
    g = gradient(ops, r, x, ls, lt, cfg.mu);
  }

  res.image.states = std::move(x);
  res.image.method = "xdgrasp";
  for (auto const &b : bins) { res.image.nav_ranges.push_back(nav_range(b)); }
  return res;
}

XDGraspResult xdgrasp_recon(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, XDGraspConfig const &cfg)
{
  cfg.validate();
  auto init = inufft_recon(bins, coils);
  auto const [ls, lt] = resolve_lambdas(init.states, cfg);
  return xdgrasp_solve(bins, coils, std::move(init.states), ls, lt, cfg);
}

std::string objective_csv(std::vector<double> const &objective)
{
  std::ostringstream os;
  os.precision(17);
  os << "iteration,objective\n";
  for (std::size_t i = 0; i < objective.size(); ++i) { os << i << ',' << objective[i] << '\n'; }
  return os.str();
}

} // namespace iconik
