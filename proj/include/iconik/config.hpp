#pragma once

// Experiment configuration: JSON documents layered as built-in profile
// defaults, then an optional user file, then command-line overrides.

#include "iconik/classic_recon.hpp"
#include "iconik/ico.hpp"
#include "iconik/nik.hpp"
#include "iconik/simulator.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace iconik {

using Json = nlohmann::ordered_json;

enum class Profile
{
  Desk,
  Paper,
};

Profile parse_profile(std::string const &name);
std::string to_string(Profile p);

struct SimulatorConfig
{
  int H = 128;
  int W = 128;
  int n_fe = 128;
  int n_c = 4;
  int n_spokes = 600;
  double noise_rel = 0.05; // std of complex noise relative to the mean k = 0 magnitude
  bool static_motion = false;
  MotionModel motion;
  EllipsePhantom phantom;
  std::uint64_t seed = 1;
};

struct NavigatorConfig
{
  std::string source = "self"; // self | oracle
  int smooth_window = 5;
};

struct NikConfig
{
  NikArch arch;
  TrainConfig train;
  double kmax = 1.0; // Cartesian grid points beyond this radius are zeroed before the inverse FFT
};

struct IconikConfig
{
  AcrSpec acr;
  IcoConfig ico;
  TrainConfig train;
};

struct ReconConfig
{
  int n_bins = 4;
  XDGraspConfig xdgrasp;
  NikConfig nik;
  IconikConfig iconik;
};

struct EvalConfig
{
  int n_states = 20; // frames for animate
  std::vector<std::string> methods{"inufft", "xdgrasp", "nik", "iconik"};
  double window_percentile = 0.995;
};

struct ExperimentConfig
{
  Profile profile = Profile::Desk;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  SimulatorConfig simulator;
  NavigatorConfig navigator;
  ReconConfig recon;
  EvalConfig eval;

  Json resolved; // the full document the fields were read from

  /// FNV-1a over the resolved document's compact dump, as hex.
  std::string hash() const;
};

/// Built-in defaults for a profile as a complete document.
Json default_config_json(Profile p);

/// Parses text as JSON; errors carry line and column.
Json parse_config_text(std::string const &text, std::string const &origin);

/// Applies overlay on top of base (RFC 7386 merge patch).
Json merge_config(Json base, Json const &overlay);

/// Validates every field and rejects unknown keys. Throws ConfigError.
ExperimentConfig config_from_json(Json const &doc);

/// Profile defaults, then the file at path (if not empty), then overrides.
/// The file may name its own "profile", which then selects the base.
ExperimentConfig load_config(std::filesystem::path const &path, Profile fallback, Json const &overrides = Json::object());

Json phantom_to_json(EllipsePhantom const &p);
EllipsePhantom phantom_from_json(Json const &j);

std::vector<std::string> const &known_methods();

} // namespace iconik
