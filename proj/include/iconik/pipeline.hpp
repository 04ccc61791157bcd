#pragma once

// Experiment orchestration behind the CLI subcommands.

#include "iconik/classic_recon.hpp"
#include "iconik/config.hpp"
#include "iconik/io.hpp"
#include "iconik/metrics.hpp"
#include "iconik/navigator.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace iconik {

/// Phantom, coils, trajectory, acquisition and noise as configured. The
/// phantom is stored in the dataset header for later evaluation.
DatasetFile simulate_dataset(ExperimentConfig const &cfg);

/// Writes the dataset plus ground-truth PNGs for n_bins evenly spaced motion states.
void run_simulate(ExperimentConfig const &cfg, fs::path const &dataset_path, std::ostream &log);

NavigatorSignal navigator_for(ExperimentConfig const &cfg, KSpaceDataset const &ds);

struct BinPlan
{
  NavigatorSignal nav;
  std::vector<std::vector<int>> spokes; // per bin, acquisition order
  std::vector<double> nav_mean;         // mean navigator value per bin
  std::vector<double> gt_nav_mean;      // mean ground-truth nav per bin, empty if unknown
};

BinPlan plan_bins(ExperimentConfig const &cfg, KSpaceDataset const &ds);

/// Coil-combined image of a NIK (or ICoNIK when kernel is given) prediction at
/// one navigator value. Grid points with |k| > kmax are zeroed first.
ComplexImage nik_image(NikModel const &nik, IcoKernel const *kernel, double nav, CoilMaps const &coils, double kmax,
                       bool *extrapolated = nullptr);

struct ReconOutput
{
  DynamicImage image;
  std::optional<Checkpoint> checkpoint;
  std::string log_name; // objective.csv, loss.csv, ...
  std::string log_csv;
  std::string extra_log_name;
  std::string extra_log_csv;
  Json manifest = Json::object();
};

/// Runs one method; iconik reuses method_root/nik/nik.ckpt when present and
/// writes it otherwise.
ReconOutput reconstruct(ExperimentConfig const &cfg, std::string const &method, DatasetFile const &data,
                        fs::path const &out_root, std::ostream &log);

/// Writes PNG states, complex dump, logs, checkpoint, resolved config and manifest.
void write_recon(ExperimentConfig const &cfg, ReconOutput const &rec, fs::path const &dir);

void run_recon(ExperimentConfig const &cfg, std::string const &method, fs::path const &dataset_path,
               fs::path const &out_root, std::ostream &log);

/// Ground truth: the stored phantom at the bin-0 mean ground-truth nav.
RealImage end_exhale_reference(ExperimentConfig const &cfg, DatasetFile const &data);

/// Metrics of state 0 of every reconstructed method under out_root; writes
/// metrics.csv and metrics.json there.
std::vector<MetricReport> run_eval(ExperimentConfig const &cfg, fs::path const &out_root, fs::path const &dataset_path,
                                   std::ostream &log);

struct AnimateResult
{
  int frames = 0;
  double seconds = 0.0;
  bool extrapolated = false;
  std::vector<double> navs;
};

/// Renders n_states frames at navigator values spanning [nav_lo, nav_hi]
/// (default: the checkpoint's training range) with one shared window.
AnimateResult run_animate(fs::path const &checkpoint, DatasetFile const &data, int n_states, fs::path const &out_dir,
                          double kmax, double window_percentile, std::ostream &log,
                          std::optional<std::pair<double, double>> nav_range = std::nullopt);

} // namespace iconik
