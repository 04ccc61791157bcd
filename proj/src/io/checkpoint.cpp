#include "binary.hpp"
#include "iconik/io.hpp"

#include <fstream>

namespace iconik {

using io::Header;

void write_checkpoint(fs::path const &path, Checkpoint const &ckpt)
{
  auto const &m = ckpt.nik;
  auto const params = m.parameters();
  Header h;
  h.set("fourier_features", m.arch.fourier_features);
  h.set("layers", m.arch.layers);
  h.set("width", m.arch.width);
  h.set("n_coils", m.arch.n_coils);
  h.set("scale_nav", m.arch.scale_nav);
  h.set("scale_k", m.arch.scale_k);
  h.set("seed", m.arch.seed);
  h.set("value_scale", m.value_scale);
  h.set("nav_min", m.nav_min);
  h.set("nav_max", m.nav_max);
  h.set("epochs_run", m.state.epochs_run);
  h.set("best_epoch", m.state.best_epoch);
  h.set("best_loss", m.state.best_loss);
  h.set("n_params", static_cast<long long>(params.size()));
  h.set("nik_hash", m.hash());
  h.set("ico", ckpt.ico ? 1 : 0);
  if (ckpt.ico) {
    auto const &k = *ckpt.ico;
    k.validate();
    h.set("ico_n_c", k.n_c);
    h.set("ico_hidden", k.hidden);
    h.set("ico_n_fe", k.n_fe);
    h.set("ico_value_scale", k.value_scale);
    h.set("ico_params", static_cast<long long>(k.parameter_count()));
  }

  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open for writing: " + path.string()); }
  h.write(os, std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion));
  io::write_le(os, m.encoding.B.data(), m.encoding.B.size());
  io::write_le(os, params.data(), params.size());
  if (ckpt.ico) {
    auto const kp = ckpt.ico->parameters();
    io::write_le(os, reinterpret_cast<double const *>(kp.data()), kp.size() * 2);
  }
  if (!os) { throw IoError("write failed: " + path.string()); }
}

Checkpoint read_checkpoint(fs::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw IoError("cannot open checkpoint: " + path.string()); }
  int version = 0;
  Header const h = Header::read(is, kCheckpointMagic, kCheckpointVersion, version);

  NikArch arch;
  arch.fourier_features = static_cast<int>(h.integer("fourier_features"));
  arch.layers = static_cast<int>(h.integer("layers"));
  arch.width = static_cast<int>(h.integer("width"));
  arch.n_coils = static_cast<int>(h.integer("n_coils"));
  arch.scale_nav = h.real("scale_nav");
  arch.scale_k = h.real("scale_k");
  arch.seed = h.u64("seed");
  if (arch.fourier_features > 1 << 16 || arch.width > 1 << 16 || arch.layers > 256 || arch.n_coils > 1024) {
    throw FormatError("checkpoint architecture out of range");
  }
  try {
    arch.validate();
  } catch (ConfigError const &e) {
    throw FormatError(std::string("checkpoint architecture invalid: ") + e.what());
  }

  Checkpoint c;
  c.nik = NikModel(arch);
  c.nik.value_scale = h.real("value_scale");
  c.nik.nav_min = h.real("nav_min");
  c.nik.nav_max = h.real("nav_max");
  c.nik.state.epochs_run = static_cast<int>(h.integer("epochs_run"));
  c.nik.state.best_epoch = static_cast<int>(h.integer("best_epoch"));
  c.nik.state.best_loss = h.real("best_loss");
  if (static_cast<std::size_t>(h.integer("n_params")) != c.nik.mlp.parameter_count()) {
    throw FormatError("checkpoint parameter count does not match the architecture");
  }
  io::read_le(is, c.nik.encoding.B.data(), c.nik.encoding.B.size(), "encoding");
  std::vector<float> params(c.nik.mlp.parameter_count());
  io::read_le(is, params.data(), params.size(), "nik_parameters");
  c.nik.set_parameters(params);
  if (c.nik.hash() != h.u64("nik_hash")) { throw FormatError("checkpoint NIK hash mismatch (corrupted file)"); }

  if (h.integer("ico") != 0) {
    IcoKernel k = zero_kernel(static_cast<int>(h.integer("ico_n_c")), static_cast<int>(h.integer("ico_hidden")),
                              static_cast<int>(h.integer("ico_n_fe")));
    k.value_scale = h.real("ico_value_scale");
    if (static_cast<std::size_t>(h.integer("ico_params")) != k.parameter_count()) {
      throw FormatError("checkpoint ICo parameter count mismatch");
    }
    std::vector<cdouble> kp(k.parameter_count());
    io::read_le(is, reinterpret_cast<double *>(kp.data()), kp.size() * 2, "ico_parameters");
    k.set_parameters(kp);
    k.validate();
    c.ico = std::move(k);
  }
  if (is.peek() != std::char_traits<char>::eof()) { throw FormatError("trailing bytes in checkpoint"); }
  return c;
}

} // namespace iconik
