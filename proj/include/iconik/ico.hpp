#pragma once

// Informed correction: a three-layer complex convolution stack (3x3 kernels,
// valid padding, complex ReLU in between) that maps 7x7 neighborhoods of
// frozen NIK predictions to corrected coil values.

#include "iconik/nik.hpp"
#include "iconik/simulator.hpp"
#include "iconik/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace iconik {

inline constexpr int kPatch = 7;
inline constexpr int kPatchPoints = kPatch * kPatch;

struct ComplexConv
{
  int in = 0;
  int out = 0;
  std::vector<cdouble> w; // out x in x 3 x 3
  std::vector<cdouble> b; // out

  cdouble &at(int o, int i, int dy, int dx) { return w[((o * in + i) * 3 + dy) * 3 + dx]; }
  cdouble at(int o, int i, int dy, int dx) const { return w[((o * in + i) * 3 + dy) * 3 + dx]; }
};

struct IcoKernel
{
  int n_c = 0;
  int hidden = 0;
  int n_fe = 0;             // patch spacing is 2 / n_fe
  double value_scale = 1.0; // patch values are divided by this before the stack
  std::array<ComplexConv, 3> layers;

  std::size_t parameter_count() const;
  std::vector<cdouble> parameters() const;
  void set_parameters(std::span<cdouble const> flat);
  void validate() const;
};

/// Identity on the center tap; the first layer adds offset*(1+i) so the
/// complex ReLUs stay linear for |value| < offset and the last layer removes
/// it. Extra hidden channels get small random input weights and zero output
/// weights.
IcoKernel near_identity_kernel(int n_c, int hidden, int n_fe, double value_scale, std::uint64_t seed,
                               double offset = 10.0, double jitter = 1e-3);

/// All-zero weights and biases.
IcoKernel zero_kernel(int n_c, int hidden, int n_fe);

struct PatchCoords
{
  std::array<Coord3, kPatchPoints> points; // row-major (dy, dx), center at index 24
  std::array<bool, kPatchPoints> out_of_range{};
};

PatchCoords sample_patch_coords(Coord3 const &v, int n_fe);

/// patch is n_c x 7 x 7 (channel-major). Returns n_c corrected values.
std::vector<cdouble> ico_forward(IcoKernel const &kernel, std::span<cdouble const> patch);

/// HDR loss of the stack over a batch of patches (batch x n_c x 7 x 7, data
/// units) against measured targets (batch x n_c). If grad is given it
/// receives dL/dRe + i dL/dIm in parameters() layout.
double ico_batch_loss(IcoKernel const &kernel, std::span<cdouble const> patches, std::span<cdouble const> targets,
                      std::span<double const> radius2, HdrLossParams const &loss, std::vector<cdouble> *grad);

/// One valid 3x3 convolution over channel-major input (in x h x w).
std::vector<cdouble> conv_valid(ComplexConv const &layer, std::span<cdouble const> input, int h, int w);

struct AcrSpec
{
  double radius = 0.4;

  void validate() const;
  bool contains(double kx, double ky) const;
};

struct IcoCalibration
{
  IcoKernel kernel;
  double identity_loss = 0.0;     // ACR loss of the near-identity kernel
  double final_loss = 0.0;        // ACR loss of the returned snapshot
  std::size_t acr_samples = 0;
  std::vector<double> epoch_loss; // full ACR loss after each epoch
};

struct IcoConfig
{
  int hidden = 0; // 0 selects 2 * n_c
  double offset = 10.0;
  std::uint64_t seed = 7;
};

/// Calibrates the stack on measured samples inside the ACR against frozen NIK
/// patches. Entry 0 of the candidate snapshots is the near-identity kernel.
IcoCalibration calibrate_ico(NikModel const &nik, KSpaceDataset const &ds, AcrSpec const &acr, TrainConfig const &cfg,
                             IcoConfig const &ico = {});

/// NIK on the (H+6) x (W+6) padded grid followed by the convolution stack.
/// H and W must equal the kernel's n_fe.
GridPrediction iconik_infer(NikModel const &nik, IcoKernel const &kernel, double nav, int H, int W);

std::string calibration_csv(IcoCalibration const &cal);

} // namespace iconik
