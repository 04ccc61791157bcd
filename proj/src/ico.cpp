#include "iconik/ico.hpp"
#include "iconik/error.hpp"
#include "iconik/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace iconik {

namespace {

ComplexConv make_conv(int in, int out)
{
  ComplexConv c;
  c.in = in;
  c.out = out;
  c.w.assign(static_cast<std::size_t>(out) * in * 9, cdouble{});
  c.b.assign(out, cdouble{});
  return c;
}

cdouble crelu(cdouble z) { return {std::max(z.real(), 0.0), std::max(z.imag(), 0.0)}; }

// Activations of one patch through the stack (normalized units).
struct Trace
{
  std::vector<cdouble> a0, z1, a1, z2, a2, z3;
};

void run_stack(IcoKernel const &k, std::span<cdouble const> patch, Trace &t)
{
  double const inv = 1.0 / k.value_scale;
  t.a0.resize(patch.size());
  for (std::size_t i = 0; i < patch.size(); ++i) { t.a0[i] = patch[i] * inv; }
  t.z1 = conv_valid(k.layers[0], t.a0, kPatch, kPatch);
  t.a1.resize(t.z1.size());
  std::transform(t.z1.begin(), t.z1.end(), t.a1.begin(), crelu);
  t.z2 = conv_valid(k.layers[1], t.a1, kPatch - 2, kPatch - 2);
  t.a2.resize(t.z2.size());
  std::transform(t.z2.begin(), t.z2.end(), t.a2.begin(), crelu);
  t.z3 = conv_valid(k.layers[2], t.a2, kPatch - 4, kPatch - 4);
}

// Adds parameter gradients of one layer and returns the input gradient.
std::vector<cdouble> conv_backward(ComplexConv const &layer, std::vector<cdouble> const &input, int h, int w,
                                   std::vector<cdouble> const &g, cdouble *gw, cdouble *gb)
{
  int const oh = h - 2, ow = w - 2;
  std::vector<cdouble> gin(input.size(), cdouble{});
  for (int o = 0; o < layer.out; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        cdouble const go = g[(static_cast<std::size_t>(o) * oh + y) * ow + x];
        gb[o] += go;
        for (int i = 0; i < layer.in; ++i) {
          for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) {
              std::size_t const ii = (static_cast<std::size_t>(i) * h + y + dy) * w + x + dx;
              std::size_t const wi = ((static_cast<std::size_t>(o) * layer.in + i) * 3 + dy) * 3 + dx;
              gw[wi] += go * std::conj(input[ii]);
              gin[ii] += go * std::conj(layer.w[wi]);
            }
          }
        }
      }
    }
  }
  return gin;
}

void crelu_backward(std::vector<cdouble> const &z, std::vector<cdouble> &g)
{
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = {z[i].real() > 0.0 ? g[i].real() : 0.0, z[i].imag() > 0.0 ? g[i].imag() : 0.0};
  }
}

} // namespace

std::size_t IcoKernel::parameter_count() const
{
  std::size_t n = 0;
  for (auto const &l : layers) { n += l.w.size() + l.b.size(); }
  return n;
}

std::vector<cdouble> IcoKernel::parameters() const
{
  std::vector<cdouble> flat;
  flat.reserve(parameter_count());
  for (auto const &l : layers) {
    flat.insert(flat.end(), l.w.begin(), l.w.end());
    flat.insert(flat.end(), l.b.begin(), l.b.end());
  }
  return flat;
}

void IcoKernel::set_parameters(std::span<cdouble const> flat)
{
  if (flat.size() != parameter_count()) { throw DataError("ico: parameter count mismatch"); }
  std::size_t o = 0;
  for (auto &l : layers) {
    std::copy_n(flat.begin() + o, l.w.size(), l.w.begin());
    o += l.w.size();
    std::copy_n(flat.begin() + o, l.b.size(), l.b.begin());
    o += l.b.size();
  }
}

void IcoKernel::validate() const
{
  if (n_c < 1 || hidden < 1 || n_fe < 2 || !(value_scale > 0.0)) { throw DataError("ico: invalid kernel header"); }
  int const plan[4] = {n_c, hidden, hidden, n_c};
  for (int l = 0; l < 3; ++l) {
    auto const &c = layers[l];
    if (c.in != plan[l] || c.out != plan[l + 1] || c.w.size() != static_cast<std::size_t>(c.in) * c.out * 9 ||
        c.b.size() != static_cast<std::size_t>(c.out)) {
      throw DataError("ico: layer " + std::to_string(l) + " has inconsistent shape");
    }
    for (auto const &v : c.w) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) { throw NumericError("ico: non-finite weight"); }
    }
  }
}

IcoKernel zero_kernel(int n_c, int hidden, int n_fe)
{
  if (n_c < 1 || hidden < n_c) { throw ConfigError("ico: need n_c >= 1 and hidden >= n_c"); }
  IcoKernel k;
  k.n_c = n_c;
  k.hidden = hidden;
  k.n_fe = n_fe;
  k.layers = {make_conv(n_c, hidden), make_conv(hidden, hidden), make_conv(hidden, n_c)};
  return k;
}

IcoKernel near_identity_kernel(int n_c, int hidden, int n_fe, double value_scale, std::uint64_t seed, double offset,
                               double jitter)
{
  if (!(offset > 0.0) || !(value_scale > 0.0)) { throw ConfigError("ico: offset and value scale must be positive"); }
  IcoKernel k = zero_kernel(n_c, hidden, n_fe);
  k.value_scale = value_scale;
  cdouble const beta(offset, offset);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, jitter);
  for (int o = 0; o < hidden; ++o) {
    if (o < n_c) {
      k.layers[0].at(o, o, 1, 1) = 1.0;
      k.layers[1].at(o, o, 1, 1) = 1.0;
    } else {
      for (int i = 0; i < n_c; ++i) {
        for (int d = 0; d < 9; ++d) { k.layers[0].at(o, i, d / 3, d % 3) = {g(rng), g(rng)}; }
      }
      for (int i = 0; i < hidden; ++i) {
        for (int d = 0; d < 9; ++d) { k.layers[1].at(o, i, d / 3, d % 3) = {g(rng), g(rng)}; }
      }
    }
    k.layers[0].b[o] = beta;
  }
  for (int o = 0; o < n_c; ++o) {
    k.layers[2].at(o, o, 1, 1) = 1.0;
    k.layers[2].b[o] = -beta;
  }
  return k;
}

PatchCoords sample_patch_coords(Coord3 const &v, int n_fe)
{
  if (n_fe < 2) { throw ConfigError("patch: n_fe must be >= 2"); }
  double const delta = 2.0 / n_fe;
  PatchCoords p;
  for (int dy = 0; dy < kPatch; ++dy) {
    for (int dx = 0; dx < kPatch; ++dx) {
      Coord3 c{v.nav, v.kx + (dx - 3) * delta, v.ky + (dy - 3) * delta};
      p.points[dy * kPatch + dx] = c;
      p.out_of_range[dy * kPatch + dx] = c.kx < -1.0 || c.kx >= 1.0 || c.ky < -1.0 || c.ky >= 1.0;
    }
  }
  return p;
}

std::vector<cdouble> conv_valid(ComplexConv const &layer, std::span<cdouble const> input, int h, int w)
{
  if (h < 3 || w < 3 || input.size() != static_cast<std::size_t>(layer.in) * h * w) {
    throw DataError("conv: input shape mismatch");
  }
  int const oh = h - 2, ow = w - 2;
  std::vector<cdouble> out(static_cast<std::size_t>(layer.out) * oh * ow);
  parallel_for(
    0, static_cast<std::size_t>(layer.out) * oh,
    [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        int const o = static_cast<int>(r / oh), y = static_cast<int>(r % oh);
        for (int x = 0; x < ow; ++x) {
          cdouble s = layer.b[o];
          for (int i = 0; i < layer.in; ++i) {
            for (int dy = 0; dy < 3; ++dy) {
              cdouble const *row = input.data() + (static_cast<std::size_t>(i) * h + y + dy) * w + x;
              cdouble const *k = layer.w.data() + ((static_cast<std::size_t>(o) * layer.in + i) * 3 + dy) * 3;
              s += k[0] * row[0];
              s += k[1] * row[1];
              s += k[2] * row[2];
            }
          }
          out[(static_cast<std::size_t>(o) * oh + y) * ow + x] = s;
        }
      }
    },
    8);
  return out;
}

std::vector<cdouble> ico_forward(IcoKernel const &kernel, std::span<cdouble const> patch)
{
  if (patch.size() != static_cast<std::size_t>(kernel.n_c) * kPatchPoints) {
    throw DataError("ico_forward: patch must be n_c x 7 x 7");
  }
  Trace t;
  run_stack(kernel, patch, t);
  for (auto &v : t.z3) { v *= kernel.value_scale; }
  return t.z3;
}

double ico_batch_loss(IcoKernel const &kernel, std::span<cdouble const> patches, std::span<cdouble const> targets,
                      std::span<double const> radius2, HdrLossParams const &loss, std::vector<cdouble> *grad)
{
  int const nc = kernel.n_c;
  std::size_t const per = static_cast<std::size_t>(nc) * kPatchPoints;
  std::size_t const batch = radius2.size();
  if (batch == 0 || patches.size() != batch * per || targets.size() != batch * nc) {
    throw DataError("ico loss: batch shape mismatch");
  }
  std::size_t const np = kernel.parameter_count();
  std::size_t const block = 64, n_blocks = (batch + block - 1) / block;
  std::vector<double> block_loss(n_blocks, 0.0);
  std::vector<std::vector<cdouble>> block_grad(grad ? n_blocks : 0);
  double const inv = 1.0 / kernel.value_scale;

  // Offsets of each layer inside the flat parameter vector.
  std::size_t off[3][2];
  {
    std::size_t o = 0;
    for (int l = 0; l < 3; ++l) {
      off[l][0] = o;
      o += kernel.layers[l].w.size();
      off[l][1] = o;
      o += kernel.layers[l].b.size();
    }
  }

  parallel_for(0, n_blocks, [&](std::size_t blo, std::size_t bhi) {
    Trace t;
    std::vector<cdouble> tgt(nc), dpred(nc);
    for (std::size_t bi = blo; bi < bhi; ++bi) {
      if (grad) { block_grad[bi].assign(np, cdouble{}); }
      for (std::size_t s = bi * block; s < std::min(batch, (bi + 1) * block); ++s) {
        run_stack(kernel, patches.subspan(s * per, per), t);
        for (int c = 0; c < nc; ++c) { tgt[c] = targets[s * nc + c] * inv; }
        double const r2 = radius2[s];
        block_loss[bi] += hdr_loss(std::span<cdouble const>(t.z3), std::span<cdouble const>(tgt),
                                   std::span<double const>(&r2, 1), nc, loss, grad ? &dpred : nullptr);
        if (!grad) { continue; }
        cdouble *g = block_grad[bi].data();
        std::vector<cdouble> g3(dpred);
        auto g2 = conv_backward(kernel.layers[2], t.a2, kPatch - 4, kPatch - 4, g3, g + off[2][0], g + off[2][1]);
        crelu_backward(t.z2, g2);
        auto g1 = conv_backward(kernel.layers[1], t.a1, kPatch - 2, kPatch - 2, g2, g + off[1][0], g + off[1][1]);
        crelu_backward(t.z1, g1);
        conv_backward(kernel.layers[0], t.a0, kPatch, kPatch, g1, g + off[0][0], g + off[0][1]);
      }
    }
  });

  double total = 0.0;
  for (double l : block_loss) { total += l; }
  if (grad) {
    grad->assign(np, cdouble{});
    for (auto const &bg : block_grad) {
      for (std::size_t i = 0; i < np; ++i) { (*grad)[i] += bg[i]; }
    }
    for (auto &g : *grad) { g /= static_cast<double>(batch); }
  }
  return total / static_cast<double>(batch);
}

void AcrSpec::validate() const
{
  if (!(radius > 0.0 && radius <= 1.0)) { throw ConfigError("acr: radius must be in (0, 1]"); }
}

bool AcrSpec::contains(double kx, double ky) const { return std::sqrt(kx * kx + ky * ky) < radius; }

IcoCalibration calibrate_ico(NikModel const &nik, KSpaceDataset const &ds, AcrSpec const &acr, TrainConfig const &cfg,
                             IcoConfig const &ico)
{
  acr.validate();
  cfg.validate();
  int const nc = ds.meta.n_c;
  if (nik.n_coils() != nc) { throw ConfigError("ico: NIK coil count does not match dataset"); }

  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < ds.samples(); ++i) {
    if (acr.contains(ds.coords[i].kx, ds.coords[i].ky)) { members.push_back(i); }
  }
  if (members.empty()) { throw DataError("ico: no samples inside the calibration region (r = " + std::to_string(acr.radius) + ")"); }

  std::size_t const N = members.size(), per = static_cast<std::size_t>(nc) * kPatchPoints;
  std::vector<cdouble> patches(N * per), targets(N * nc);
  std::vector<double> radius2(N);
  {
    std::size_t const chunk = 1024;
    std::vector<Coord3> coords;
    for (std::size_t lo = 0; lo < N; lo += chunk) {
      std::size_t const n = std::min(chunk, N - lo);
      coords.resize(n * kPatchPoints);
      for (std::size_t s = 0; s < n; ++s) {
        auto const pc = sample_patch_coords(ds.coords[members[lo + s]], ds.meta.n_fe);
        std::copy(pc.points.begin(), pc.points.end(), coords.begin() + s * kPatchPoints);
      }
      auto const pred = nik.forward(coords);
      for (std::size_t s = 0; s < n; ++s) {
        for (int p = 0; p < kPatchPoints; ++p) {
          for (int c = 0; c < nc; ++c) {
            patches[(lo + s) * per + static_cast<std::size_t>(c) * kPatchPoints + p] =
              pred[(s * kPatchPoints + p) * nc + c];
          }
        }
      }
    }
    for (std::size_t s = 0; s < N; ++s) {
      std::size_t const i = members[s];
      radius2[s] = ds.coords[i].kx * ds.coords[i].kx + ds.coords[i].ky * ds.coords[i].ky;
      for (int c = 0; c < nc; ++c) { targets[s * nc + c] = cdouble(ds.value(i, c)); }
    }
  }

  int const hidden = ico.hidden > 0 ? ico.hidden : 2 * nc;
  IcoKernel kernel = near_identity_kernel(nc, hidden, ds.meta.n_fe, nik.value_scale, ico.seed, ico.offset);

  IcoCalibration out;
  out.acr_samples = N;
  out.identity_loss = ico_batch_loss(kernel, patches, targets, radius2, cfg.loss, nullptr);
  if (!std::isfinite(out.identity_loss)) { throw NumericError("ico: non-finite loss for the initial kernel"); }
  out.kernel = kernel;
  out.final_loss = out.identity_loss;

  std::size_t const bs = std::min<std::size_t>(cfg.batch_size, N);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  Adam<double> adam(2 * kernel.parameter_count(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::vector<cdouble> bp(bs * per), bt(bs * nc), grad;
  std::vector<double> br(bs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t lo = 0; lo < N; lo += bs) {
      std::size_t const n = std::min(bs, N - lo);
      for (std::size_t s = 0; s < n; ++s) {
        std::size_t const j = order[lo + s];
        std::copy_n(patches.begin() + j * per, per, bp.begin() + s * per);
        std::copy_n(targets.begin() + j * nc, nc, bt.begin() + s * nc);
        br[s] = radius2[j];
      }
      double const loss = ico_batch_loss(kernel, std::span(bp).first(n * per), std::span(bt).first(n * nc),
                                         std::span(br).first(n), cfg.loss, &grad);
      if (!std::isfinite(loss)) { throw NumericError("ico: non-finite loss at epoch " + std::to_string(epoch)); }
      auto params = kernel.parameters();
      adam.step(std::span(reinterpret_cast<double *>(params.data()), 2 * params.size()),
                std::span(reinterpret_cast<double const *>(grad.data()), 2 * grad.size()), cfg.lr);
      kernel.set_parameters(params);
    }
    double const full = ico_batch_loss(kernel, patches, targets, radius2, cfg.loss, nullptr);
    if (!std::isfinite(full)) { throw NumericError("ico: non-finite loss at epoch " + std::to_string(epoch)); }
    out.epoch_loss.push_back(full);
    if (full < out.final_loss) {
      out.final_loss = full;
      out.kernel = kernel;
    }
  }
  return out;
}

GridPrediction iconik_infer(NikModel const &nik, IcoKernel const &kernel, double nav, int H, int W)
{
  kernel.validate();
  if (H != kernel.n_fe || W != kernel.n_fe) {
    throw ConfigError("iconik: grid " + std::to_string(H) + "x" + std::to_string(W) + " must match the calibrated n_fe " +
                      std::to_string(kernel.n_fe));
  }
  if (nik.n_coils() != kernel.n_c) { throw ConfigError("iconik: NIK and kernel coil counts differ"); }
  int const nc = kernel.n_c, PH = H + 6, PW = W + 6;
  std::vector<Coord3> coords(static_cast<std::size_t>(PH) * PW);
  for (int y = 0; y < PH; ++y) {
    for (int x = 0; x < PW; ++x) {
      // same arithmetic as the grid point plus a patch offset
      double const kx = (x - 3 - W / 2) * 2.0 / W, ky = (y - 3 - H / 2) * 2.0 / H;
      coords[static_cast<std::size_t>(y) * PW + x] = {nav, kx, ky};
    }
  }
  auto const pred = nik.forward(coords);
  double const inv = 1.0 / kernel.value_scale;
  std::vector<cdouble> a0(static_cast<std::size_t>(nc) * PH * PW);
  for (std::size_t p = 0; p < coords.size(); ++p) {
    for (int c = 0; c < nc; ++c) { a0[static_cast<std::size_t>(c) * coords.size() + p] = pred[p * nc + c] * inv; }
  }
  auto z1 = conv_valid(kernel.layers[0], a0, PH, PW);
  for (auto &v : z1) { v = crelu(v); }
  auto z2 = conv_valid(kernel.layers[1], z1, PH - 2, PW - 2);
  for (auto &v : z2) { v = crelu(v); }
  auto const z3 = conv_valid(kernel.layers[2], z2, PH - 4, PW - 4);

  GridPrediction g;
  g.extrapolated = nav < -1.0 || nav > 1.0 || nav < nik.nav_min || nav > nik.nav_max;
  g.coils.assign(nc, ComplexImage(H, W));
  for (int c = 0; c < nc; ++c) {
    for (std::size_t p = 0; p < static_cast<std::size_t>(H) * W; ++p) {
      g.coils[c][p] = z3[static_cast<std::size_t>(c) * H * W + p] * kernel.value_scale;
    }
  }
  return g;
}

std::string calibration_csv(IcoCalibration const &cal)
{
  std::ostringstream os;
  os.precision(10);
  os << "epoch,loss\n";
  os << 0 << ',' << cal.identity_loss << '\n';
  for (std::size_t i = 0; i < cal.epoch_loss.size(); ++i) { os << i + 1 << ',' << cal.epoch_loss[i] << '\n'; }
  return os.str();
}

} // namespace iconik
