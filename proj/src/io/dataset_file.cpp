#include "binary.hpp"
#include "iconik/io.hpp"

#include <fstream>
#include <sstream>

namespace iconik {

using io::Header;

void write_text(fs::path const &path, std::string const &text)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open for writing: " + path.string()); }
  os << text;
  if (!os) { throw IoError("write failed: " + path.string()); }
}

std::string read_text(fs::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw IoError("cannot open: " + path.string()); }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_dataset(fs::path const &path, KSpaceDataset const &ds, CoilMaps const &coils)
{
  ds.validate();
  if (coils.n_c != ds.meta.n_c) { throw DataError("dataset: coil map count does not match n_c"); }
  Header h;
  h.set("version", kDatasetVersion);
  h.set("n_spokes", ds.meta.n_spokes);
  h.set("n_fe", ds.meta.n_fe);
  h.set("n_c", ds.meta.n_c);
  h.set("H", ds.meta.H);
  h.set("W", ds.meta.W);
  h.set("samples", static_cast<long long>(ds.samples()));
  h.set("noise_std", ds.meta.noise_std);
  h.set("provenance", ds.meta.provenance.empty() ? std::string("unknown") : ds.meta.provenance);
  h.set("coil_H", coils.H);
  h.set("coil_W", coils.W);
  h.set("gt_nav", ds.has_ground_truth() ? 1 : 0);
  h.set("phantom_bytes", static_cast<long long>(ds.meta.phantom.size()));

  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open for writing: " + path.string()); }
  h.write(os, std::string(kDatasetMagic) + " " + std::to_string(kDatasetVersion));
  io::write_le(os, reinterpret_cast<double const *>(ds.coords.data()), ds.coords.size() * 3);
  io::write_le(os, reinterpret_cast<float const *>(ds.values.data()), ds.values.size() * 2);
  io::write_le(os, ds.spoke_ids.data(), ds.spoke_ids.size());
  for (auto const &m : coils.maps) { io::write_le(os, reinterpret_cast<double const *>(m.data()), m.size() * 2); }
  if (ds.has_ground_truth()) { io::write_le(os, ds.gt_nav.data(), ds.gt_nav.size()); }
  os.write(ds.meta.phantom.data(), static_cast<std::streamsize>(ds.meta.phantom.size()));
  if (!os) { throw IoError("write failed: " + path.string()); }
}

DatasetFile read_dataset(fs::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw IoError("cannot open dataset: " + path.string()); }
  int version = 0;
  Header const h = Header::read(is, kDatasetMagic, kDatasetVersion, version);

  DatasetFile f;
  auto &m = f.data.meta;
  m.n_spokes = static_cast<int>(h.integer("n_spokes"));
  m.n_fe = static_cast<int>(h.integer("n_fe"));
  m.n_c = static_cast<int>(h.integer("n_c"));
  m.H = static_cast<int>(h.integer("H"));
  m.W = static_cast<int>(h.integer("W"));
  m.noise_std = h.real("noise_std");
  m.provenance = h.str("provenance");
  long long const samples = h.integer("samples");
  int const cH = static_cast<int>(h.integer("coil_H")), cW = static_cast<int>(h.integer("coil_W"));
  long long const phantom_bytes = h.integer("phantom_bytes");
  bool const gt = h.integer("gt_nav") != 0;

  if (m.n_spokes < 1 || m.n_fe < 1 || m.n_c < 1 || m.H < 1 || m.W < 1 || cH < 1 || cW < 1 || phantom_bytes < 0 ||
      samples != static_cast<long long>(m.n_spokes) * m.n_fe || m.n_c > 1024 || samples > (1LL << 32)) {
    throw FormatError("dataset header counts are inconsistent");
  }
  std::size_t const n = static_cast<std::size_t>(samples);
  f.data.coords.resize(n);
  io::read_le(is, reinterpret_cast<double *>(f.data.coords.data()), n * 3, "coords");
  f.data.values.resize(n * m.n_c);
  io::read_le(is, reinterpret_cast<float *>(f.data.values.data()), n * m.n_c * 2, "values");
  f.data.spoke_ids.resize(m.n_spokes);
  io::read_le(is, f.data.spoke_ids.data(), f.data.spoke_ids.size(), "spoke_ids");
  f.coils.n_c = m.n_c;
  f.coils.H = cH;
  f.coils.W = cW;
  f.coils.maps.assign(m.n_c, ComplexImage(cH, cW));
  for (auto &map : f.coils.maps) { io::read_le(is, reinterpret_cast<double *>(map.data()), map.size() * 2, "coil_maps"); }
  if (gt) {
    f.data.gt_nav.resize(m.n_spokes);
    io::read_le(is, f.data.gt_nav.data(), f.data.gt_nav.size(), "gt_nav");
  }
  m.phantom.resize(static_cast<std::size_t>(phantom_bytes));
  is.read(m.phantom.data(), phantom_bytes);
  if (is.gcount() != phantom_bytes) { throw FormatError("truncated section: phantom"); }
  if (is.peek() != std::char_traits<char>::eof()) { throw FormatError("trailing bytes after the last section"); }
  try {
    f.data.validate();
  } catch (DataError const &e) {
    throw FormatError(std::string("dataset content invalid: ") + e.what());
  }
  return f;
}

void write_complex_images(fs::path const &path, std::vector<ComplexImage> const &images)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open for writing: " + path.string()); }
  std::size_t const H = images.empty() ? 0 : images[0].rows(), W = images.empty() ? 0 : images[0].cols();
  os << "ICONIK-CIMG 1 " << images.size() << ' ' << H << ' ' << W << '\n';
  for (auto const &img : images) {
    if (img.rows() != H || img.cols() != W) { throw DataError("complex dump: images differ in size"); }
    io::write_le(os, reinterpret_cast<double const *>(img.data()), img.size() * 2);
  }
  if (!os) { throw IoError("write failed: " + path.string()); }
}

std::vector<ComplexImage> read_complex_images(fs::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw IoError("cannot open: " + path.string()); }
  std::string line;
  std::getline(is, line);
  std::istringstream ls(line);
  std::string magic;
  int version = 0;
  std::size_t n = 0, H = 0, W = 0;
  if (!(ls >> magic >> version >> n >> H >> W) || magic != "ICONIK-CIMG" || version != 1 || n > 100000 ||
      H * W > (1u << 26)) {
    throw FormatError("bad complex image header in " + path.string());
  }
  std::vector<ComplexImage> out(n, ComplexImage(H, W));
  for (auto &img : out) { io::read_le(is, reinterpret_cast<double *>(img.data()), img.size() * 2, "images"); }
  return out;
}

} // namespace iconik
