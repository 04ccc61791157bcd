#pragma once

// Neural implicit k-space representation: (nav, kx, ky) -> n_c complex coil
// values through random Fourier features and a SiLU MLP. Gradients are
// back-propagated by hand; the network is templated on the scalar type so the
// same code runs in float for training and in double for finite-difference
// checks.

#include "iconik/simulator.hpp"
#include "iconik/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace iconik {

struct FourierEncoding
{
  int m = 0;
  std::vector<double> B; // m x 3, columns (nav, kx, ky), fixed after construction

  /// Rows drawn i.i.d. from N(0, diag(scale_nav^2, scale_k^2, scale_k^2)).
  static FourierEncoding gaussian(int m, double scale_nav, double scale_k, std::uint64_t seed);

  int features() const { return 2 * m; }

  /// out[0..m) = sin(2 pi B v), out[m..2m) = cos(2 pi B v)
  template <class Real>
  void encode(Coord3 const &v, Real *out) const;
};

std::vector<double> encode(FourierEncoding const &enc, Coord3 const &v);

struct NikArch
{
  int fourier_features = 128; // m, giving 2m network inputs
  int layers = 6;             // dense layers including the output layer
  int width = 128;
  int n_coils = 4;
  double scale_nav = 1.0;
  double scale_k = 8.0;
  std::uint64_t seed = 1;
  bool zero_output = false; // zero the output layer (tests)

  void validate() const;
};

template <class Real>
struct DenseLayer
{
  int in = 0;
  int out = 0;
  std::vector<Real> w; // in x out
  std::vector<Real> b; // out
};

template <class Real>
class Mlp
{
public:
  struct Workspace
  {
    std::size_t batch = 0;
    std::vector<std::vector<Real>> z; // pre-activation per layer, batch x out
    std::vector<std::vector<Real>> a; // SiLU(z) for hidden layers
    std::vector<Real> scratch_t;      // transposes
    std::vector<Real> delta, delta_prev;
  };

  Mlp() = default;
  Mlp(std::vector<int> const &dims, std::uint64_t seed, bool zero_output);

  int inputs() const { return layers.front().in; }
  int outputs() const { return layers.back().out; }
  std::size_t parameter_count() const;

  /// x is batch x inputs. Returns a view of the output (batch x outputs) held in ws.
  Real const *forward(Real const *x, std::size_t batch, Workspace &ws) const;

  /// Back-propagates dL/d(output) (batch x outputs) and adds parameter
  /// gradients into grad (same layout as layers).
  void backward(Real const *x, Workspace &ws, Real const *dout, std::vector<DenseLayer<Real>> &grad) const;

  std::vector<DenseLayer<Real>> zeros_like() const;

  std::vector<DenseLayer<Real>> layers;
};

struct HdrLossParams
{
  double sigma = 1.0;
  double eps = 1e-2;
  double lambda = 0.1;
};

/// Linearized high-dynamic-range loss over a batch of n_c complex pairs:
///   mean |(p - t) / (sg(|p|) + eps)|^2 + lambda * mean |w(k) (p - t)|^2,
///   w(k) = exp(-(kx^2 + ky^2) / (2 sigma^2)).
/// pred/target hold interleaved (re, im) per coil, batch x 2 n_c. The
/// denominator is held constant when forming dpred.
template <class Real>
double hdr_loss(Real const *pred, Real const *target, double const *radius2, std::size_t batch, int n_c,
                HdrLossParams const &p, Real *dpred);

/// Complex-valued convenience form; radius2 is kx^2 + ky^2 per sample.
double hdr_loss(std::span<cdouble const> pred, std::span<cdouble const> target, std::span<double const> radius2, int n_c,
                HdrLossParams const &p, std::vector<cdouble> *dpred = nullptr);

struct TrainingState
{
  int epochs_run = 0;
  int best_epoch = -1;
  double best_loss = 0.0;
};

template <class Real>
class BasicNikModel
{
public:
  BasicNikModel() = default;
  explicit BasicNikModel(NikArch const &arch);

  NikArch arch;
  FourierEncoding encoding;
  Mlp<Real> mlp;
  double value_scale = 1.0; // network outputs are in units of value_scale
  double nav_min = -1.0;    // navigator range seen in training
  double nav_max = 1.0;
  TrainingState state;

  int n_coils() const { return arch.n_coils; }

  /// Raw network output (normalized units), batch x 2 n_c interleaved.
  std::vector<Real> forward_normalized(std::span<Coord3 const> v) const;

  /// Complex coil values in data units, batch x n_c.
  std::vector<cdouble> forward(std::span<Coord3 const> v) const;

  /// All trainable parameters flattened in layer order (w then b).
  std::vector<Real> parameters() const;
  void set_parameters(std::span<Real const> flat);

  /// FNV-1a over encoding and parameter bytes.
  std::uint64_t hash() const;
};

using NikModel = BasicNikModel<float>;

std::vector<cdouble> nik_forward(NikModel const &model, std::span<Coord3 const> v);

struct TrainConfig
{
  double lr = 3e-5;
  int batch_size = 10000;
  int epochs = 3000;
  std::uint64_t seed = 1;
  HdrLossParams loss;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lr_final_fraction = 1.0; // cosine decay target; 1 keeps lr constant
  int checkpoint_every = 0;       // epochs between checkpoint callbacks, 0 = never

  void validate() const;
};

struct TrainLog
{
  std::vector<double> epoch_loss;
  std::vector<double> best_so_far;
};

/// Called after every epoch with the current (not best) parameters.
using EpochCallback = std::function<void(int epoch, double loss, NikModel const &current)>;

/// Adam on the HDR loss over shuffled minibatches. Returns the snapshot with
/// the lowest epoch-mean loss. Throws NumericError on a non-finite loss.
NikModel train_nik(KSpaceDataset const &ds, NikArch const &arch, TrainConfig const &cfg, TrainLog *log = nullptr,
                   EpochCallback const &on_epoch = {});

std::string training_csv(TrainLog const &log);

struct GridPrediction
{
  std::vector<ComplexImage> coils; // n_c grids, H x W
  bool extrapolated = false;       // nav outside the training range or [-1, 1]
};

/// Evaluates the model on the Cartesian grid kx, ky = (i - N/2) * 2/N at fixed nav.
GridPrediction infer_grid(NikModel const &model, double nav, int H, int W);

/// sum_c conj(S_c) * grid_to_image(kgrid_c)
ComplexImage coil_combine_image(std::vector<ComplexImage> const &kgrids, CoilMaps const &coils);

/// Adam state over a flat parameter vector.
template <class Real>
class Adam
{
public:
  Adam(std::size_t n, double beta1, double beta2, double eps);
  void step(std::span<Real> params, std::span<Real const> grad, double lr);

private:
  std::vector<Real> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

} // namespace iconik
