// iconik command-line front end.

#include "iconik/error.hpp"
#include "iconik/parallel.hpp"
#include "iconik/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace iconik;

namespace {

int exit_code(ErrorKind k)
{
  switch (k) {
  case ErrorKind::Config: return 2;
  case ErrorKind::Data: return 3;
  case ErrorKind::Numeric: return 4;
  case ErrorKind::Format: return 5;
  case ErrorKind::Io: return 6;
  }
  return 1;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"iconik: motion-resolved radial MRI reconstruction with neural implicit k-space"};
  app.require_subcommand(1);

  std::string config_path, profile = "desk", out_dir, dataset, method = "nik", checkpoint;
  std::optional<std::uint64_t> seed;
  int n_states = 0;
  std::vector<double> nav_range;

  app.add_option("--config", config_path, "experiment configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--profile", profile, "default profile")->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--seed", seed, "top-level seed (sub-seeds derive from it)");
  app.add_option("--out", out_dir, "output directory (default: config output_dir)");
  app.add_option("--dataset", dataset, "dataset file (default: <out>/dataset.ikd)");

  auto *sim = app.add_subcommand("simulate", "simulate a radial acquisition and write a dataset");
  auto *nav = app.add_subcommand("navigator", "extract the self-gating navigator from a dataset");
  auto *rec = app.add_subcommand("recon", "reconstruct with one method");
  rec->add_option("--method", method, "inufft | xdgrasp | nik | iconik")
    ->check(CLI::IsMember({"inufft", "xdgrasp", "nik", "iconik"}));
  auto *ev = app.add_subcommand("eval", "metrics of every reconstruction against the end-exhale ground truth");
  auto *anim = app.add_subcommand("animate", "render motion states from a checkpoint");
  anim->add_option("--checkpoint", checkpoint, "NIK or ICoNIK checkpoint")->required()->check(CLI::ExistingFile);
  anim->add_option("--states", n_states, "number of frames (default: config eval.n_states)");
  anim->add_option("--nav-range", nav_range, "lo hi navigator range")->expected(2);

  // Options may be given before or after the subcommand name.
  for (auto *sc : {sim, nav, rec, ev, anim}) { sc->fallthrough(); }

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (char const *t = std::getenv("ICONIK_THREADS")) {
      int const n = std::atoi(t);
      if (n < 1) { throw ConfigError("ICONIK_THREADS must be a positive integer"); }
      set_thread_count(n);
    }
    Json overrides = Json::object();
    if (seed) { overrides["seed"] = *seed; }
    if (!out_dir.empty()) { overrides["output_dir"] = out_dir; }
    auto const cfg = load_config(config_path, parse_profile(profile), overrides);
    fs::path const out = cfg.output_dir;
    fs::path const ds_path = dataset.empty() ? out / "dataset.ikd" : fs::path(dataset);

    if (sim->parsed()) {
      run_simulate(cfg, ds_path, std::cout);
      write_text(out / "config.json", cfg.resolved.dump(2) + "\n");
    } else if (nav->parsed()) {
      auto const data = read_dataset(ds_path);
      auto const sig = navigator_for(cfg, data.data);
      write_text(out / "navigator.csv", navigator_csv(sig));
      std::cout << "navigator: " << sig.values.size() << " spokes";
      if (sig.gt_correlation) { std::cout << ", correlation with ground truth " << *sig.gt_correlation; }
      if (sig.sign_flipped) { std::cout << " (sign flipped)"; }
      std::cout << "\n";
    } else if (rec->parsed()) {
      run_recon(cfg, method, ds_path, out, std::cout);
    } else if (ev->parsed()) {
      run_eval(cfg, out, ds_path, std::cout);
    } else if (anim->parsed()) {
      auto const data = read_dataset(ds_path);
      std::optional<std::pair<double, double>> range;
      if (nav_range.size() == 2) { range = std::make_pair(nav_range[0], nav_range[1]); }
      run_animate(checkpoint, data, n_states > 0 ? n_states : cfg.eval.n_states, out / "animate",
                  cfg.recon.nik.kmax, cfg.eval.window_percentile, std::cout, range);
    }
  } catch (Error const &e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
