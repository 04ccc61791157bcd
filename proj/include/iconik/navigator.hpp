#pragma once

#include "iconik/simulator.hpp"
#include "iconik/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace iconik {

enum class NavProvenance
{
  Oracle,
  SelfNavigated,
};

struct NavigatorSignal
{
  std::vector<double> values; // per spoke, rescaled to [-1, 1]
  NavProvenance provenance = NavProvenance::SelfNavigated;
  bool sign_flipped = false;        // flipped to agree with simulator ground truth
  std::optional<double> gt_correlation; // Pearson r against ground truth after alignment
};

/// Coil values at k = (0, 0) for every spoke: n_c x n_spokes.
Array2<cdouble> extract_center_samples(KSpaceDataset const &ds);

/// Projection of mean-centered rows (features x time) on the leading
/// eigenvector of their covariance. The eigenvector's first non-negligible
/// loading is made positive.
std::vector<double> pca_first_component(RealImage const &data);

/// Centered moving average; the window shrinks at the ends.
std::vector<double> moving_average(std::vector<double> const &x, int window);

/// Min/max rescale to [-1, 1]. Throws NumericError on a flat signal.
std::vector<double> rescale_unit(std::vector<double> const &x);

double pearson(std::vector<double> const &a, std::vector<double> const &b);

NavigatorSignal extract_navigator(KSpaceDataset const &ds, int smooth_window);

/// The simulator's own motion curve wrapped as a navigator.
NavigatorSignal oracle_navigator(KSpaceDataset const &ds);

/// Amplitude binning: spokes sorted by nav descending (bin 0 = end-exhale),
/// cut into n_bins near-equal contiguous groups, earlier bins taking the
/// remainder. Spoke order inside a bin follows acquisition order.
std::vector<std::vector<int>> bin_assignments(NavigatorSignal const &nav, int n_bins);

std::vector<KSpaceDataset> bin_by_navigator(KSpaceDataset const &ds, NavigatorSignal const &nav, int n_bins);

/// CSV with header "spoke,nav".
std::string navigator_csv(NavigatorSignal const &nav);

} // namespace iconik
