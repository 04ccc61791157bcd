#pragma once

// On-disk formats: dataset files, model checkpoints, complex image dumps and
// 16-bit grayscale PNG.

#include "iconik/ico.hpp"
#include "iconik/nik.hpp"
#include "iconik/simulator.hpp"
#include "iconik/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iconik {

namespace fs = std::filesystem;

inline constexpr char kDatasetMagic[] = "ICONIK-DATASET";
inline constexpr int kDatasetVersion = 1;
inline constexpr char kCheckpointMagic[] = "ICONIK-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

/// Text header (magic line, key=value lines, END) followed by binary
/// sections: coords (f64 LE, samples x 3), values (f32 LE interleaved,
/// samples x n_c x 2), spoke ids (i32), coil maps (f64 interleaved,
/// n_c x H x W x 2) and ground-truth nav (f64, per spoke) if present.
void write_dataset(fs::path const &path, KSpaceDataset const &ds, CoilMaps const &coils);

struct DatasetFile
{
  KSpaceDataset data;
  CoilMaps coils;
};

/// Throws FormatError on a bad magic, unknown version or inconsistent sizes.
DatasetFile read_dataset(fs::path const &path);

struct Checkpoint
{
  NikModel nik;
  std::optional<IcoKernel> ico;
};

/// Header records the architecture, encoding, scales and training state; the
/// NIK parameters follow as f32 LE and the optional ICo section as f64 LE.
void write_checkpoint(fs::path const &path, Checkpoint const &ckpt);
Checkpoint read_checkpoint(fs::path const &path);

/// Raw dump: "ICONIK-CIMG 1 <n> <H> <W>\n" then n x H x W complex f64 LE.
void write_complex_images(fs::path const &path, std::vector<ComplexImage> const &images);
std::vector<ComplexImage> read_complex_images(fs::path const &path);

/// Upper bound of the display window: the q-th quantile of the pixel values.
double percentile(RealImage const &img, double q);

/// Encodes img / window_max clamped to [0, 1] as 16-bit grayscale PNG.
std::vector<std::uint8_t> encode_png16(RealImage const &img, double window_max);
void write_png16(fs::path const &path, RealImage const &img, double window_max);

/// Decodes only what encode_png16 produces (8-bit depth or 16-bit gray,
/// non-interlaced). Values are returned as raw sample integers.
Array2<std::uint16_t> decode_png16(std::vector<std::uint8_t> const &bytes);

void write_text(fs::path const &path, std::string const &text);
std::string read_text(fs::path const &path);

} // namespace iconik
