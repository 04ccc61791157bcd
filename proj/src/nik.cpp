#include "iconik/nik.hpp"
#include "iconik/error.hpp"
#include "iconik/nufft.hpp"
#include "iconik/parallel.hpp"
#include "iconik/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace iconik {

// ------------------------------------------------------------------ encoding

FourierEncoding FourierEncoding::gaussian(int m, double scale_nav, double scale_k, std::uint64_t seed)
{
  if (m < 1) { throw ConfigError("fourier encoding: m must be >= 1"); }
  FourierEncoding e;
  e.m = m;
  e.B.resize(static_cast<std::size_t>(m) * 3);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < m; ++i) {
    e.B[i * 3 + 0] = scale_nav * g(rng);
    e.B[i * 3 + 1] = scale_k * g(rng);
    e.B[i * 3 + 2] = scale_k * g(rng);
  }
  return e;
}

template <class Real>
void FourierEncoding::encode(Coord3 const &v, Real *out) const
{
  for (int i = 0; i < m; ++i) {
    double const phase = 2.0 * std::numbers::pi * (B[i * 3] * v.nav + B[i * 3 + 1] * v.kx + B[i * 3 + 2] * v.ky);
    out[i] = static_cast<Real>(std::sin(phase));
    out[m + i] = static_cast<Real>(std::cos(phase));
  }
}

template void FourierEncoding::encode<float>(Coord3 const &, float *) const;
template void FourierEncoding::encode<double>(Coord3 const &, double *) const;

std::vector<double> encode(FourierEncoding const &enc, Coord3 const &v)
{
  std::vector<double> out(enc.features());
  enc.encode(v, out.data());
  return out;
}

void NikArch::validate() const
{
  if (fourier_features < 1 || layers < 2 || width < 1 || n_coils < 1) {
    throw ConfigError("nik arch: need fourier_features >= 1, layers >= 2, width >= 1, n_coils >= 1");
  }
  if (!(scale_k > 0.0) || !(scale_nav >= 0.0)) { throw ConfigError("nik arch: encoding scales must be positive"); }
}

// ------------------------------------------------------------------ MLP

namespace {

template <class Real>
void transpose(Real const *src, std::size_t rows, std::size_t cols, Real *dst)
{
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) { dst[c * rows + r] = src[r * cols + c]; }
  }
}

// Row-blocked GEMM; row results are independent of the split.
template <class Real>
void gemm_rows(Real const *a, Real const *b, Real *c, std::size_t m, std::size_t k, std::size_t n)
{
  parallel_for(0, m, [&](std::size_t lo, std::size_t hi) { simd::gemm(a + lo * k, b, c + lo * n, hi - lo, k, n); }, 64);
}

} // namespace

template <class Real>
Mlp<Real>::Mlp(std::vector<int> const &dims, std::uint64_t seed, bool zero_output)
{
  if (dims.size() < 2) { throw ConfigError("mlp: need at least input and output sizes"); }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer<Real> L;
    L.in = dims[l];
    L.out = dims[l + 1];
    L.w.resize(static_cast<std::size_t>(L.in) * L.out);
    L.b.resize(L.out);
    double const bound = 1.0 / std::sqrt(static_cast<double>(L.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    bool const zero = zero_output && l + 2 == dims.size();
    for (auto &w : L.w) { w = zero ? Real(0) : static_cast<Real>(u(rng)); }
    for (auto &b : L.b) { b = zero ? Real(0) : static_cast<Real>(u(rng)); }
    layers.push_back(std::move(L));
  }
}

template <class Real>
std::size_t Mlp<Real>::parameter_count() const
{
  std::size_t n = 0;
  for (auto const &L : layers) { n += L.w.size() + L.b.size(); }
  return n;
}

template <class Real>
std::vector<DenseLayer<Real>> Mlp<Real>::zeros_like() const
{
  std::vector<DenseLayer<Real>> g(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    g[l].in = layers[l].in;
    g[l].out = layers[l].out;
    g[l].w.assign(layers[l].w.size(), Real(0));
    g[l].b.assign(layers[l].b.size(), Real(0));
  }
  return g;
}

template <class Real>
Real const *Mlp<Real>::forward(Real const *x, std::size_t batch, Workspace &ws) const
{
  std::size_t const L = layers.size();
  ws.batch = batch;
  ws.z.resize(L);
  ws.a.resize(L);
  Real const *input = x;
  for (std::size_t l = 0; l < L; ++l) {
    auto const &layer = layers[l];
    auto &z = ws.z[l];
    z.resize(batch * layer.out);
    for (std::size_t i = 0; i < batch; ++i) { std::copy(layer.b.begin(), layer.b.end(), z.begin() + i * layer.out); }
    gemm_rows(input, layer.w.data(), z.data(), batch, layer.in, layer.out);
    if (l + 1 < L) {
      ws.a[l].resize(z.size());
      simd::silu(z.data(), ws.a[l].data(), z.size());
      input = ws.a[l].data();
    }
  }
  return ws.z.back().data();
}

template <class Real>
void Mlp<Real>::backward(Real const *x, Workspace &ws, Real const *dout, std::vector<DenseLayer<Real>> &grad) const
{
  std::size_t const L = layers.size(), batch = ws.batch;
  ws.delta.assign(dout, dout + batch * layers.back().out);
  for (std::size_t l = L; l-- > 0;) {
    auto const &layer = layers[l];
    Real const *input = l == 0 ? x : ws.a[l - 1].data();
    // dW += input^T delta
    ws.scratch_t.resize(batch * layer.in);
    transpose(input, batch, layer.in, ws.scratch_t.data());
    gemm_rows(ws.scratch_t.data(), ws.delta.data(), grad[l].w.data(), layer.in, batch, layer.out);
    for (std::size_t i = 0; i < batch; ++i) {
      for (int o = 0; o < layer.out; ++o) { grad[l].b[o] += ws.delta[i * layer.out + o]; }
    }
    if (l == 0) { break; }
    // delta_prev = (delta W^T) * silu'(z_prev)
    ws.scratch_t.resize(layer.w.size());
    transpose(layer.w.data(), layer.in, layer.out, ws.scratch_t.data());
    ws.delta_prev.assign(batch * layer.in, Real(0));
    gemm_rows(ws.delta.data(), ws.scratch_t.data(), ws.delta_prev.data(), batch, layer.out, layer.in);
    simd::silu_grad(ws.z[l - 1].data(), ws.delta_prev.data(), ws.delta_prev.data(), ws.delta_prev.size());
    std::swap(ws.delta, ws.delta_prev);
  }
}

template class Mlp<float>;
template class Mlp<double>;

// ------------------------------------------------------------------ loss

template <class Real>
double hdr_loss(Real const *pred, Real const *target, double const *radius2, std::size_t batch, int n_c,
                HdrLossParams const &p, Real *dpred)
{
  if (!(p.eps > 0.0)) { throw ConfigError("hdr loss: eps must be > 0"); }
  double const count = static_cast<double>(batch) * n_c;
  double const inv2s2 = 1.0 / (2.0 * p.sigma * p.sigma);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    double const w = std::exp(-radius2[i] * inv2s2);
    double const center = p.lambda * w * w;
    for (int c = 0; c < n_c; ++c) {
      std::size_t const o = i * 2 * n_c + 2 * c;
      double const pr = pred[o], pi = pred[o + 1];
      double const er = pr - target[o], ei = pi - target[o + 1];
      double const denom = std::hypot(pr, pi) + p.eps;
      double const scale = 1.0 / (denom * denom) + center;
      total += (er * er + ei * ei) * scale;
      if (dpred) {
        dpred[o] = static_cast<Real>(2.0 * er * scale / count);
        dpred[o + 1] = static_cast<Real>(2.0 * ei * scale / count);
      }
    }
  }
  return total / count;
}

template double hdr_loss<float>(float const *, float const *, double const *, std::size_t, int, HdrLossParams const &,
                                float *);
template double hdr_loss<double>(double const *, double const *, double const *, std::size_t, int,
                                 HdrLossParams const &, double *);

double hdr_loss(std::span<cdouble const> pred, std::span<cdouble const> target, std::span<double const> radius2, int n_c,
                HdrLossParams const &p, std::vector<cdouble> *dpred)
{
  if (pred.size() != target.size() || n_c < 1 || pred.size() != radius2.size() * n_c) {
    throw DataError("hdr loss: shape mismatch");
  }
  auto const *pp = reinterpret_cast<double const *>(pred.data());
  auto const *tp = reinterpret_cast<double const *>(target.data());
  if (dpred) {
    dpred->assign(pred.size(), cdouble{});
    return hdr_loss(pp, tp, radius2.data(), radius2.size(), n_c, p, reinterpret_cast<double *>(dpred->data()));
  }
  return hdr_loss<double>(pp, tp, radius2.data(), radius2.size(), n_c, p, nullptr);
}

// ------------------------------------------------------------------ model

template <class Real>
BasicNikModel<Real>::BasicNikModel(NikArch const &a)
  : arch(a)
{
  arch.validate();
  encoding = FourierEncoding::gaussian(arch.fourier_features, arch.scale_nav, arch.scale_k, arch.seed);
  std::vector<int> dims{encoding.features()};
  for (int l = 0; l + 1 < arch.layers; ++l) { dims.push_back(arch.width); }
  dims.push_back(2 * arch.n_coils);
  mlp = Mlp<Real>(dims, arch.seed ^ 0x5bd1e995ULL, arch.zero_output);
}

template <class Real>
std::vector<Real> BasicNikModel<Real>::forward_normalized(std::span<Coord3 const> v) const
{
  std::size_t const nf = encoding.features(), no = mlp.outputs();
  std::vector<Real> out(v.size() * no);
  std::size_t const chunk = 2048;
  std::vector<Real> x;
  typename Mlp<Real>::Workspace ws;
  for (std::size_t lo = 0; lo < v.size(); lo += chunk) {
    std::size_t const n = std::min(chunk, v.size() - lo);
    x.resize(n * nf);
    for (std::size_t i = 0; i < n; ++i) { encoding.encode(v[lo + i], x.data() + i * nf); }
    Real const *y = mlp.forward(x.data(), n, ws);
    std::copy(y, y + n * no, out.begin() + lo * no);
  }
  return out;
}

template <class Real>
std::vector<cdouble> BasicNikModel<Real>::forward(std::span<Coord3 const> v) const
{
  auto const raw = forward_normalized(v);
  std::vector<cdouble> out(raw.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = value_scale * cdouble(static_cast<double>(raw[2 * i]), static_cast<double>(raw[2 * i + 1]));
  }
  return out;
}

template <class Real>
std::vector<Real> BasicNikModel<Real>::parameters() const
{
  std::vector<Real> flat;
  flat.reserve(mlp.parameter_count());
  for (auto const &L : mlp.layers) {
    flat.insert(flat.end(), L.w.begin(), L.w.end());
    flat.insert(flat.end(), L.b.begin(), L.b.end());
  }
  return flat;
}

template <class Real>
void BasicNikModel<Real>::set_parameters(std::span<Real const> flat)
{
  if (flat.size() != mlp.parameter_count()) { throw DataError("nik: parameter count mismatch"); }
  std::size_t o = 0;
  for (auto &L : mlp.layers) {
    std::copy(flat.begin() + o, flat.begin() + o + L.w.size(), L.w.begin());
    o += L.w.size();
    std::copy(flat.begin() + o, flat.begin() + o + L.b.size(), L.b.begin());
    o += L.b.size();
  }
}

namespace {
void fnv(std::uint64_t &h, void const *data, std::size_t n)
{
  auto const *p = static_cast<unsigned char const *>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}
} // namespace

template <class Real>
std::uint64_t BasicNikModel<Real>::hash() const
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv(h, encoding.B.data(), encoding.B.size() * sizeof(double));
  for (auto const &L : mlp.layers) {
    fnv(h, L.w.data(), L.w.size() * sizeof(Real));
    fnv(h, L.b.data(), L.b.size() * sizeof(Real));
  }
  fnv(h, &value_scale, sizeof(value_scale));
  return h;
}

template class BasicNikModel<float>;
template class BasicNikModel<double>;

std::vector<cdouble> nik_forward(NikModel const &model, std::span<Coord3 const> v) { return model.forward(v); }

// ------------------------------------------------------------------ Adam

template <class Real>
Adam<Real>::Adam(std::size_t n, double beta1, double beta2, double eps)
  : m_(n, Real(0))
  , v_(n, Real(0))
  , beta1_(beta1)
  , beta2_(beta2)
  , eps_(eps)
{
}

template <class Real>
void Adam<Real>::step(std::span<Real> params, std::span<Real const> grad, double lr)
{
  ++t_;
  double const c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double const c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  Real const b1 = static_cast<Real>(beta1_), b2 = static_cast<Real>(beta2_);
  Real const step = static_cast<Real>(lr / c1), inv_c2 = static_cast<Real>(1.0 / c2), eps = static_cast<Real>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Real const g = grad[i];
    m_[i] = b1 * m_[i] + (Real(1) - b1) * g;
    v_[i] = b2 * v_[i] + (Real(1) - b2) * g * g;
    params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

// ------------------------------------------------------------------ training

void TrainConfig::validate() const
{
  if (!(lr > 0.0) || batch_size < 1 || epochs < 1) { throw ConfigError("train: lr, batch_size and epochs must be positive"); }
  if (!(loss.eps > 0.0) || !(loss.sigma > 0.0) || loss.lambda < 0.0) { throw ConfigError("train: invalid loss parameters"); }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw ConfigError("train: invalid Adam coefficients");
  }
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) { throw ConfigError("train: lr_final_fraction must be in (0, 1]"); }
}

namespace {
double scheduled_lr(TrainConfig const &cfg, int epoch)
{
  if (cfg.lr_final_fraction >= 1.0 || cfg.epochs <= 1) { return cfg.lr; }
  double const t = static_cast<double>(epoch) / (cfg.epochs - 1);
  double const f = cfg.lr_final_fraction;
  return cfg.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}
} // namespace

NikModel train_nik(KSpaceDataset const &ds, NikArch const &arch_in, TrainConfig const &cfg, TrainLog *log,
                   EpochCallback const &on_epoch)
{
  cfg.validate();
  if (ds.samples() == 0) { throw DataError("train: dataset is empty"); }
  NikArch arch = arch_in;
  if (arch.n_coils != ds.meta.n_c) { throw ConfigError("train: arch n_coils does not match dataset"); }

  NikModel model(arch);
  std::size_t const N = ds.samples(), nf = model.encoding.features(), no = 2 * arch.n_coils;

  double vmax = 0.0;
  for (auto const &v : ds.values) { vmax = std::max(vmax, static_cast<double>(std::abs(v))); }
  model.value_scale = vmax > 0.0 ? vmax : 1.0;
  model.nav_min = ds.coords[0].nav;
  model.nav_max = ds.coords[0].nav;
  for (auto const &c : ds.coords) {
    model.nav_min = std::min(model.nav_min, c.nav);
    model.nav_max = std::max(model.nav_max, c.nav);
  }

  std::vector<float> features(N * nf), targets(N * no);
  std::vector<double> radius2(N);
  float const inv_scale = static_cast<float>(1.0 / model.value_scale);
  for (std::size_t i = 0; i < N; ++i) {
    model.encoding.encode(ds.coords[i], features.data() + i * nf);
    radius2[i] = ds.coords[i].kx * ds.coords[i].kx + ds.coords[i].ky * ds.coords[i].ky;
    for (int c = 0; c < arch.n_coils; ++c) {
      targets[i * no + 2 * c] = ds.value(i, c).real() * inv_scale;
      targets[i * no + 2 * c + 1] = ds.value(i, c).imag() * inv_scale;
    }
  }

  std::size_t const bs = std::min<std::size_t>(cfg.batch_size, N);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);

  Mlp<float>::Workspace ws;
  auto grad = model.mlp.zeros_like();
  Adam<float> adam(model.mlp.parameter_count(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::vector<float> xb(bs * nf), tb(bs * no), dpred(bs * no), flat_grad(model.mlp.parameter_count());
  std::vector<double> rb(bs);

  NikModel best = model;
  best.state.best_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double const lr = scheduled_lr(cfg, epoch);
    double epoch_sum = 0.0;
    for (std::size_t lo = 0; lo < N; lo += bs) {
      std::size_t const n = std::min(bs, N - lo);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t const s = order[lo + i];
        std::copy_n(features.data() + s * nf, nf, xb.data() + i * nf);
        std::copy_n(targets.data() + s * no, no, tb.data() + i * no);
        rb[i] = radius2[s];
      }
      float const *pred = model.mlp.forward(xb.data(), n, ws);
      double const loss = hdr_loss(pred, tb.data(), rb.data(), n, arch.n_coils, cfg.loss, dpred.data());
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_sum += loss * n;
      for (auto &L : grad) {
        std::fill(L.w.begin(), L.w.end(), 0.0f);
        std::fill(L.b.begin(), L.b.end(), 0.0f);
      }
      model.mlp.backward(xb.data(), ws, dpred.data(), grad);
      std::size_t o = 0;
      for (auto const &L : grad) {
        std::copy(L.w.begin(), L.w.end(), flat_grad.begin() + o);
        o += L.w.size();
        std::copy(L.b.begin(), L.b.end(), flat_grad.begin() + o);
        o += L.b.size();
      }
      auto params = model.parameters();
      adam.step(params, flat_grad, lr);
      model.set_parameters(params);
    }
    double const epoch_loss = epoch_sum / N;
    if (!std::isfinite(epoch_loss)) { throw NumericError("train: non-finite epoch loss at epoch " + std::to_string(epoch)); }
    model.state.epochs_run = epoch + 1;
    if (epoch_loss < best.state.best_loss) {
      best = model;
      best.state.best_loss = epoch_loss;
      best.state.best_epoch = epoch;
    }
    if (log) {
      log->epoch_loss.push_back(epoch_loss);
      log->best_so_far.push_back(best.state.best_loss);
    }
    if (on_epoch) { on_epoch(epoch, epoch_loss, model); }
  }
  best.state.epochs_run = cfg.epochs;
  return best;
}

std::string training_csv(TrainLog const &log)
{
  std::ostringstream os;
  os.precision(10);
  os << "epoch,loss,best\n";
  for (std::size_t i = 0; i < log.epoch_loss.size(); ++i) {
    os << i << ',' << log.epoch_loss[i] << ',' << log.best_so_far[i] << '\n';
  }
  return os.str();
}

// ------------------------------------------------------------------ inference

GridPrediction infer_grid(NikModel const &model, double nav, int H, int W)
{
  GridPrediction g;
  g.extrapolated = nav < -1.0 || nav > 1.0 || nav < model.nav_min || nav > model.nav_max;
  auto const grid = cartesian_grid(H, W);
  std::vector<Coord3> coords(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) { coords[i] = {nav, grid[i].kx, grid[i].ky}; }
  auto const values = model.forward(coords);
  int const nc = model.n_coils();
  g.coils.assign(nc, ComplexImage(H, W));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (int c = 0; c < nc; ++c) { g.coils[c][i] = values[i * nc + c]; }
  }
  return g;
}

ComplexImage coil_combine_image(std::vector<ComplexImage> const &kgrids, CoilMaps const &coils)
{
  if (kgrids.size() != static_cast<std::size_t>(coils.n_c)) { throw DataError("coil combine: grid count != coil count"); }
  ComplexImage out(coils.H, coils.W);
  for (int c = 0; c < coils.n_c; ++c) {
    if (kgrids[c].rows() != static_cast<std::size_t>(coils.H) || kgrids[c].cols() != static_cast<std::size_t>(coils.W)) {
      throw DataError("coil combine: grid size does not match coil maps");
    }
    ComplexImage const img = grid_to_image(kgrids[c]);
    for (std::size_t p = 0; p < out.size(); ++p) { out[p] += std::conj(coils.maps[c][p]) * img[p]; }
  }
  return out;
}

} // namespace iconik
