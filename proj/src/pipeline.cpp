#include "iconik/pipeline.hpp"
#include "iconik/error.hpp"
#include "iconik/geometry.hpp"
#include "iconik/nufft.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace iconik {

namespace {

std::string hex64(std::uint64_t v)
{
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string state_name(int s)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "state_%02d.png", s);
  return buf;
}

double shared_window(std::vector<RealImage> const &mags, double q)
{
  double w = 0.0;
  for (auto const &m : mags) { w = std::max(w, percentile(m, q)); }
  return w;
}

} // namespace

DatasetFile simulate_dataset(ExperimentConfig const &cfg)
{
  auto const &s = cfg.simulator;
  DatasetFile f;
  f.coils = coil_maps_analytic(s.n_c, s.H, s.W);
  auto const traj = golden_angle_trajectory(s.n_spokes, s.n_fe);
  MotionModel const motion = s.static_motion ? MotionModel::stationary() : s.motion;
  f.data = simulate_acquisition(s.phantom, motion, f.coils, traj, 0.0, s.seed);
  double const sigma = s.noise_rel * mean_center_magnitude(f.data);
  add_noise(f.data, sigma, s.seed);
  f.data.meta.noise_std = sigma;
  f.data.meta.provenance = "simulated";
  f.data.meta.phantom = phantom_to_json(s.phantom).dump();
  return f;
}

void run_simulate(ExperimentConfig const &cfg, fs::path const &dataset_path, std::ostream &log)
{
  auto const f = simulate_dataset(cfg);
  write_dataset(dataset_path, f.data, f.coils);
  auto const dir = dataset_path.parent_path() / "ground_truth";
  int const n = cfg.recon.n_bins;
  std::vector<RealImage> mags;
  for (int i = 0; i < n; ++i) {
    double const nav = n == 1 ? 0.0 : 1.0 - 2.0 * i / (n - 1);
    mags.push_back(magnitude(phantom_image(cfg.simulator.phantom, nav, cfg.simulator.H, cfg.simulator.W)));
  }
  double const w = shared_window(mags, cfg.eval.window_percentile);
  for (int i = 0; i < n; ++i) { write_png16(dir / state_name(i), mags[i], w); }
  auto const &m = f.data.meta;
  log << "dataset " << dataset_path.string() << ": n_spokes=" << m.n_spokes << " n_fe=" << m.n_fe << " n_c=" << m.n_c
      << " grid=" << m.H << "x" << m.W << " samples=" << f.data.samples() << " noise_std=" << m.noise_std << "\n";
}

NavigatorSignal navigator_for(ExperimentConfig const &cfg, KSpaceDataset const &ds)
{
  if (cfg.navigator.source == "oracle") { return oracle_navigator(ds); }
  return extract_navigator(ds, cfg.navigator.smooth_window);
}

BinPlan plan_bins(ExperimentConfig const &cfg, KSpaceDataset const &ds)
{
  BinPlan p;
  p.nav = navigator_for(cfg, ds);
  p.spokes = bin_assignments(p.nav, cfg.recon.n_bins);
  for (auto const &bin : p.spokes) {
    double s = 0.0, g = 0.0;
    for (int i : bin) {
      s += p.nav.values[i];
      if (ds.has_ground_truth()) { g += ds.gt_nav[i]; }
    }
    p.nav_mean.push_back(s / bin.size());
    if (ds.has_ground_truth()) { p.gt_nav_mean.push_back(g / bin.size()); }
  }
  return p;
}

ComplexImage nik_image(NikModel const &nik, IcoKernel const *kernel, double nav, CoilMaps const &coils, double kmax,
                       bool *extrapolated)
{
  GridPrediction g = kernel ? iconik_infer(nik, *kernel, nav, coils.H, coils.W) : infer_grid(nik, nav, coils.H, coils.W);
  auto const grid = cartesian_grid(coils.H, coils.W);
  for (auto &c : g.coils) {
    for (std::size_t p = 0; p < grid.size(); ++p) {
      if (std::hypot(grid[p].kx, grid[p].ky) > kmax) { c[p] = 0.0; }
    }
  }
  if (extrapolated) { *extrapolated = g.extrapolated; }
  return coil_combine_image(g.coils, coils);
}

namespace {

DynamicImage render_states(NikModel const &nik, IcoKernel const *kernel, BinPlan const &plan, CoilMaps const &coils,
                           double kmax, std::string method)
{
  DynamicImage img;
  img.method = std::move(method);
  for (std::size_t b = 0; b < plan.spokes.size(); ++b) {
    img.states.push_back(nik_image(nik, kernel, plan.nav_mean[b], coils, kmax));
    img.nav_ranges.emplace_back(plan.nav_mean[b], plan.nav_mean[b]);
  }
  return img;
}

std::vector<std::pair<double, double>> bin_ranges(BinPlan const &plan)
{
  std::vector<std::pair<double, double>> r;
  for (auto const &bin : plan.spokes) {
    double lo = 1e300, hi = -1e300;
    for (int i : bin) {
      lo = std::min(lo, plan.nav.values[i]);
      hi = std::max(hi, plan.nav.values[i]);
    }
    r.emplace_back(lo, hi);
  }
  return r;
}

NikModel train_for(ExperimentConfig const &cfg, KSpaceDataset ds, BinPlan const &plan, TrainLog &tlog, std::ostream &log)
{
  set_navigator(ds, plan.nav.values);
  NikArch arch = cfg.recon.nik.arch;
  arch.n_coils = ds.meta.n_c;
  auto const t0 = std::chrono::steady_clock::now();
  int const every = std::max(1, cfg.recon.nik.train.epochs / 10);
  auto model = train_nik(ds, arch, cfg.recon.nik.train, &tlog, [&](int e, double loss, NikModel const &) {
    if ((e + 1) % every == 0) {
      double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log << "  nik epoch " << e + 1 << " loss " << loss << " (" << secs << " s)\n" << std::flush;
    }
  });
  log << "nik best epoch " << model.state.best_epoch << " loss " << model.state.best_loss << " hash "
      << hex64(model.hash()) << "\n";
  return model;
}

} // namespace

ReconOutput reconstruct(ExperimentConfig const &cfg, std::string const &method, DatasetFile const &data,
                        fs::path const &out_root, std::ostream &log)
{
  if (std::find(known_methods().begin(), known_methods().end(), method) == known_methods().end()) {
    throw ConfigError("unknown method '" + method + "' (expected inufft, xdgrasp, nik or iconik)");
  }
  auto const &ds = data.data;
  auto const &coils = data.coils;
  if (coils.H != ds.meta.H || coils.W != ds.meta.W) { throw DataError("coil maps do not match the dataset grid"); }
  BinPlan const plan = plan_bins(cfg, ds);
  if (plan.nav.gt_correlation) { log << "navigator correlation with ground truth " << *plan.nav.gt_correlation << "\n"; }

  ReconOutput out;
  out.manifest["method"] = method;
  out.manifest["config_hash"] = cfg.hash();
  out.manifest["n_bins"] = cfg.recon.n_bins;
  out.manifest["nav_per_state"] = plan.nav_mean;
  out.extra_log_name = "navigator.csv";
  out.extra_log_csv = navigator_csv(plan.nav);

  if (method == "inufft" || method == "xdgrasp") {
    auto const bins = bin_by_navigator(ds, plan.nav, cfg.recon.n_bins);
    if (method == "inufft") {
      out.image = inufft_recon(bins, coils);
    } else {
      auto r = xdgrasp_recon(bins, coils, cfg.recon.xdgrasp);
      out.image = std::move(r.image);
      out.log_name = "objective.csv";
      out.log_csv = objective_csv(r.objective);
      out.manifest["lambda_spatial"] = r.lambda_spatial;
      out.manifest["lambda_temporal"] = r.lambda_temporal;
      out.manifest["line_search_failed"] = r.line_search_failed;
      log << "xdgrasp objective " << r.objective.front() << " -> " << r.objective.back() << "\n";
    }
    out.image.nav_ranges = bin_ranges(plan);
  } else if (method == "nik") {
    TrainLog tlog;
    auto model = train_for(cfg, ds, plan, tlog, log);
    out.image = render_states(model, nullptr, plan, coils, cfg.recon.nik.kmax, method);
    out.log_name = "loss.csv";
    out.log_csv = training_csv(tlog);
    out.manifest["nik_hash"] = hex64(model.hash());
    out.manifest["best_epoch"] = model.state.best_epoch;
    out.checkpoint = Checkpoint{std::move(model), std::nullopt};
  } else {
    auto const nik_path = out_root / "nik" / "nik.ckpt";
    NikModel nik;
    if (fs::exists(nik_path)) {
      nik = read_checkpoint(nik_path).nik;
      log << "reusing NIK checkpoint " << nik_path.string() << " hash " << hex64(nik.hash()) << "\n";
    } else {
      log << "no NIK checkpoint at " << nik_path.string() << ", training one\n";
      TrainLog tlog;
      nik = train_for(cfg, ds, plan, tlog, log);
      ReconOutput nik_out;
      nik_out.image = render_states(nik, nullptr, plan, coils, cfg.recon.nik.kmax, "nik");
      nik_out.log_name = "loss.csv";
      nik_out.log_csv = training_csv(tlog);
      nik_out.manifest = {{"method", "nik"}, {"config_hash", cfg.hash()}, {"nik_hash", hex64(nik.hash())},
                          {"nav_per_state", plan.nav_mean}};
      nik_out.checkpoint = Checkpoint{nik, std::nullopt};
      write_recon(cfg, nik_out, out_root / "nik");
    }
    if (nik.n_coils() != ds.meta.n_c) { throw DataError("NIK checkpoint coil count does not match the dataset"); }
    auto const before = nik.hash();
    KSpaceDataset navds = ds;
    set_navigator(navds, plan.nav.values);
    auto cal = calibrate_ico(nik, navds, cfg.recon.iconik.acr, cfg.recon.iconik.train, cfg.recon.iconik.ico);
    if (nik.hash() != before) { throw NumericError("NIK parameters changed during calibration"); }
    log << "ico calibration on " << cal.acr_samples << " samples: identity loss " << cal.identity_loss << " -> "
        << cal.final_loss << "; NIK hash " << hex64(before) << " (unchanged)\n";
    out.image = render_states(nik, &cal.kernel, plan, coils, cfg.recon.nik.kmax, method);
    out.log_name = "ico_loss.csv";
    out.log_csv = calibration_csv(cal);
    out.manifest["nik_hash"] = hex64(before);
    out.manifest["acr_samples"] = cal.acr_samples;
    out.manifest["identity_loss"] = cal.identity_loss;
    out.manifest["final_loss"] = cal.final_loss;
    out.checkpoint = Checkpoint{std::move(nik), std::move(cal.kernel)};
  }
  out.image.method = method;
  out.image.config_hash = cfg.hash();
  return out;
}

void write_recon(ExperimentConfig const &cfg, ReconOutput const &rec, fs::path const &dir)
{
  fs::create_directories(dir);
  std::vector<RealImage> mags;
  for (auto const &s : rec.image.states) { mags.push_back(magnitude(s)); }
  double const w = shared_window(mags, cfg.eval.window_percentile);
  Json files = Json::array();
  for (std::size_t i = 0; i < mags.size(); ++i) {
    write_png16(dir / state_name(static_cast<int>(i)), mags[i], w);
    files.push_back(state_name(static_cast<int>(i)));
  }
  write_complex_images(dir / "images.cimg", rec.image.states);
  if (!rec.log_name.empty()) { write_text(dir / rec.log_name, rec.log_csv); }
  if (!rec.extra_log_name.empty()) { write_text(dir / rec.extra_log_name, rec.extra_log_csv); }
  std::string const method = rec.manifest.value("method", rec.image.method);
  if (rec.checkpoint) { write_checkpoint(dir / (method + ".ckpt"), *rec.checkpoint); }
  write_text(dir / "config.json", cfg.resolved.dump(2) + "\n");
  Json m = rec.manifest;
  m["n_states"] = rec.image.states.size();
  m["window_max"] = w;
  m["png"] = files;
  Json ranges = Json::array();
  for (auto const &[lo, hi] : rec.image.nav_ranges) { ranges.push_back({lo, hi}); }
  m["nav_ranges"] = ranges;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

void run_recon(ExperimentConfig const &cfg, std::string const &method, fs::path const &dataset_path,
               fs::path const &out_root, std::ostream &log)
{
  auto const data = read_dataset(dataset_path);
  auto const t0 = std::chrono::steady_clock::now();
  auto const rec = reconstruct(cfg, method, data, out_root, log);
  write_recon(cfg, rec, out_root / method);
  double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log << method << ": " << rec.image.states.size() << " states written to " << (out_root / method).string() << " ("
      << secs << " s)\n";
}

RealImage end_exhale_reference(ExperimentConfig const &cfg, DatasetFile const &data)
{
  auto const &ds = data.data;
  if (ds.meta.phantom.empty() || !ds.has_ground_truth()) {
    throw DataError("missing reference: dataset carries no phantom or ground-truth motion");
  }
  EllipsePhantom phantom;
  try {
    phantom = phantom_from_json(Json::parse(ds.meta.phantom));
  } catch (nlohmann::json::exception const &e) {
    throw FormatError(std::string("stored phantom is not valid JSON: ") + e.what());
  }
  auto const plan = plan_bins(cfg, ds);
  return magnitude(phantom_image(phantom, plan.gt_nav_mean.at(0), ds.meta.H, ds.meta.W));
}

std::vector<MetricReport> run_eval(ExperimentConfig const &cfg, fs::path const &out_root, fs::path const &dataset_path,
                                   std::ostream &log)
{
  auto const data = read_dataset(dataset_path);
  auto const ref = end_exhale_reference(cfg, data);
  std::vector<MetricReport> rows;
  for (auto const &m : known_methods()) {
    auto const path = out_root / m / "images.cimg";
    if (!fs::exists(path)) { continue; }
    auto const states = read_complex_images(path);
    if (states.empty()) { throw DataError("no states in " + path.string()); }
    rows.push_back(evaluate(magnitude(states[0]), ref, m, 0));
  }
  if (rows.empty()) { throw DataError("no reconstructions found under " + out_root.string()); }
  write_text(out_root / "metrics.csv", metrics_csv(rows));
  write_text(out_root / "metrics.json", metrics_json(rows));
  log << metrics_csv(rows);
  return rows;
}

AnimateResult run_animate(fs::path const &checkpoint, DatasetFile const &data, int n_states, fs::path const &out_dir,
                          double kmax, double window_percentile, std::ostream &log,
                          std::optional<std::pair<double, double>> nav_range)
{
  if (n_states < 1) { throw ConfigError("animate: n_states must be >= 1"); }
  auto const t0 = std::chrono::steady_clock::now();
  auto const ckpt = read_checkpoint(checkpoint);
  double const lo = nav_range ? nav_range->first : ckpt.nik.nav_min;
  double const hi = nav_range ? nav_range->second : ckpt.nik.nav_max;
  AnimateResult r;
  std::vector<RealImage> mags;
  for (int i = 0; i < n_states; ++i) {
    double const nav = n_states == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n_states - 1);
    bool extra = false;
    mags.push_back(magnitude(nik_image(ckpt.nik, ckpt.ico ? &*ckpt.ico : nullptr, nav, data.coils, kmax, &extra)));
    r.extrapolated = r.extrapolated || extra;
    r.navs.push_back(nav);
  }
  if (r.extrapolated) {
    log << "warning: requested navigator range [" << lo << ", " << hi << "] exceeds the training range ["
        << ckpt.nik.nav_min << ", " << ckpt.nik.nav_max << "]; frames are extrapolated\n";
  }
  double const w = shared_window(mags, window_percentile);
  for (int i = 0; i < n_states; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03d.png", i);
    write_png16(out_dir / name, mags[i], w);
  }
  r.frames = n_states;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log << "rendered " << n_states << " frames to " << out_dir.string() << " in " << r.seconds << " s\n";
  return r;
}

} // namespace iconik
