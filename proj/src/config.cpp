#include "iconik/config.hpp"
#include "iconik/error.hpp"
#include "iconik/io.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace iconik {

namespace {

// Reads fields of one JSON object and reports unknown keys.
class Reader
{
public:
  Reader(Json const &j, std::string path)
    : j_(j)
    , path_(std::move(path))
  {
    if (!j_.is_object()) { throw ConfigError(path_ + ": expected an object"); }
  }

  template <class T>
  void opt(char const *key, T &dst)
  {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) { return; }
    try {
      dst = it->template get<T>();
    } catch (nlohmann::json::exception const &) {
      throw ConfigError(path_ + "." + key + ": wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  template <class T>
  void req(char const *key, T &dst)
  {
    if (!j_.contains(key)) { throw ConfigError(path_ + "." + key + " is required"); }
    opt(key, dst);
  }

  Json const *child(char const *key)
  {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string sub(char const *key) const { return path_ + "." + key; }

  void finish() const
  {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) { throw ConfigError(path_ + ": unknown key '" + it.key() + "'"); }
    }
  }

private:
  Json const &j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, std::string const &msg)
{
  if (!ok) { throw ConfigError(msg); }
}

std::uint64_t fnv1a(std::string const &s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void read_loss(Json const *j, std::string const &path, HdrLossParams &p)
{
  if (!j) { return; }
  Reader r(*j, path);
  r.opt("sigma", p.sigma);
  r.opt("eps", p.eps);
  r.opt("lambda", p.lambda);
  r.finish();
}

void read_train(Json const *j, std::string const &path, TrainConfig &t)
{
  if (!j) { return; }
  Reader r(*j, path);
  r.opt("lr", t.lr);
  r.opt("batch_size", t.batch_size);
  r.opt("epochs", t.epochs);
  r.opt("seed", t.seed);
  r.opt("beta1", t.beta1);
  r.opt("beta2", t.beta2);
  r.opt("adam_eps", t.adam_eps);
  r.opt("lr_final_fraction", t.lr_final_fraction);
  r.opt("checkpoint_every", t.checkpoint_every);
  read_loss(r.child("loss"), r.sub("loss"), t.loss);
  r.finish();
  try {
    t.validate();
  } catch (ConfigError const &e) {
    throw ConfigError(path + ": " + e.what());
  }
}

} // namespace

Profile parse_profile(std::string const &name)
{
  if (name == "desk") { return Profile::Desk; }
  if (name == "paper") { return Profile::Paper; }
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

std::string to_string(Profile p) { return p == Profile::Desk ? "desk" : "paper"; }

std::vector<std::string> const &known_methods()
{
  static std::vector<std::string> const m{"inufft", "xdgrasp", "nik", "iconik"};
  return m;
}

std::string ExperimentConfig::hash() const
{
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(resolved.dump())));
  return buf;
}

Json phantom_to_json(EllipsePhantom const &p)
{
  Json arr = Json::array();
  for (auto const &e : p.ellipses) {
    arr.push_back({{"cx", e.cx}, {"cy", e.cy}, {"a", e.a}, {"b", e.b}, {"angle", e.angle},
                   {"amplitude", {e.amplitude.real(), e.amplitude.imag()}}, {"m_t", e.m_t}, {"m_s", e.m_s}});
  }
  return arr;
}

EllipsePhantom phantom_from_json(Json const &j)
{
  EllipsePhantom p;
  if (j.is_string()) {
    if (j.get<std::string>() == "abdomen") { return EllipsePhantom::abdomen(); }
    throw ConfigError("simulator.phantom: unknown preset '" + j.get<std::string>() + "'");
  }
  if (!j.is_array()) { throw ConfigError("simulator.phantom: expected a preset name or a list of ellipses"); }
  for (std::size_t i = 0; i < j.size(); ++i) {
    Reader r(j[i], "simulator.phantom[" + std::to_string(i) + "]");
    Ellipse e;
    std::vector<double> amp{1.0, 0.0};
    r.req("cx", e.cx);
    r.req("cy", e.cy);
    r.req("a", e.a);
    r.req("b", e.b);
    r.opt("angle", e.angle);
    r.opt("amplitude", amp);
    r.opt("m_t", e.m_t);
    r.opt("m_s", e.m_s);
    r.finish();
    check(amp.size() == 2, "simulator.phantom[" + std::to_string(i) + "].amplitude must be [re, im]");
    e.amplitude = {amp[0], amp[1]};
    p.ellipses.push_back(e);
  }
  return p;
}

Json default_config_json(Profile p)
{
  bool const desk = p == Profile::Desk;
  Json nik_train = desk ? Json{{"lr", 2e-3}, {"batch_size", 512}, {"epochs", 100}, {"lr_final_fraction", 0.05}}
                        : Json{{"lr", 3e-5}, {"batch_size", 10000}, {"epochs", 3000}, {"lr_final_fraction", 1.0}};
  nik_train["beta1"] = 0.9;
  nik_train["beta2"] = 0.999;
  nik_train["adam_eps"] = 1e-8;
  nik_train["checkpoint_every"] = 0;
  nik_train["loss"] = {{"sigma", 1.0}, {"eps", 1e-2}, {"lambda", 0.1}};
  Json ico_train = desk ? Json{{"lr", 1e-5}, {"batch_size", 1024}, {"epochs", 20}, {"lr_final_fraction", 1.0}}
                        : Json{{"lr", 3e-5}, {"batch_size", 10000}, {"epochs", 500}, {"lr_final_fraction", 1.0}};
  ico_train["loss"] = nik_train["loss"];

  return Json{
    {"profile", to_string(p)},
    {"seed", 1},
    {"output_dir", "out"},
    {"simulator",
     {{"H", 128},
      {"W", 128},
      {"n_fe", 128},
      {"n_c", 4},
      {"n_spokes", 600},
      {"noise_rel", 0.05},
      {"static", false},
      {"motion", {{"amplitude", 1.0}, {"period", 60.0}, {"phase", 0.0}, {"drift", 0.0}}},
      {"phantom", "abdomen"}}},
    {"navigator", {{"source", "self"}, {"smooth_window", 5}}},
    {"recon",
     {{"n_bins", 4},
      {"xdgrasp",
       {{"lambda_spatial", 0.01},
        {"lambda_temporal", 0.1},
        {"n_iter", 40},
        {"mu", 1e-7},
        {"density_weighting", true}}},
      {"nik",
       {{"arch",
         {{"fourier_features", desk ? 128 : 256},
          {"layers", desk ? 6 : 8},
          {"width", desk ? 128 : 512},
          {"scale_nav", 0.1},
          {"scale_k", 3.0}}},
        {"train", nik_train},
        {"kmax", 1.0}}},
      {"iconik",
       {{"acr_radius", 0.4}, {"hidden", 0}, {"offset", 2.0}, {"train", ico_train}}}}},
    {"eval", {{"n_states", 20}, {"methods", known_methods()}, {"window_percentile", 0.995}}},
  };
}

Json parse_config_text(std::string const &text, std::string const &origin)
{
  try {
    return Json::parse(text, nullptr, true, true);
  } catch (nlohmann::json::parse_error const &e) {
    std::size_t const pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t const line = 1 + std::count(text.begin(), text.begin() + pos, '\n');
    std::size_t const nl = text.rfind('\n', pos == 0 ? 0 : pos - 1);
    std::size_t const col = nl == std::string::npos ? pos + 1 : pos - nl;
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

Json merge_config(Json base, Json const &overlay)
{
  base.merge_patch(overlay);
  return base;
}

ExperimentConfig config_from_json(Json const &doc)
{
  ExperimentConfig c;
  c.resolved = doc;
  Reader top(doc, "config");
  std::string profile = "desk";
  top.opt("profile", profile);
  c.profile = parse_profile(profile);
  top.req("seed", c.seed);
  top.opt("output_dir", c.output_dir);

  // Sub-seeds default to fixed offsets from the top-level seed.
  c.simulator.seed = c.seed;
  c.recon.nik.arch.seed = c.seed + 1;
  c.recon.nik.train.seed = c.seed + 2;
  c.recon.iconik.ico.seed = c.seed + 3;
  c.recon.iconik.train.seed = c.seed + 4;

  if (auto const *s = top.child("simulator")) {
    auto &sc = c.simulator;
    Reader r(*s, "simulator");
    r.opt("H", sc.H);
    r.opt("W", sc.W);
    r.opt("n_fe", sc.n_fe);
    r.opt("n_c", sc.n_c);
    r.opt("n_spokes", sc.n_spokes);
    r.opt("noise_rel", sc.noise_rel);
    r.opt("static", sc.static_motion);
    r.opt("seed", sc.seed);
    if (auto const *m = r.child("motion")) {
      Reader mr(*m, "simulator.motion");
      mr.opt("amplitude", sc.motion.amplitude);
      mr.opt("period", sc.motion.period);
      mr.opt("phase", sc.motion.phase);
      mr.opt("drift", sc.motion.drift);
      mr.finish();
    }
    if (auto const *p = r.child("phantom")) { sc.phantom = phantom_from_json(*p); }
    r.finish();
  }
  if (c.simulator.phantom.ellipses.empty()) { c.simulator.phantom = EllipsePhantom::abdomen(); }
  {
    auto const &sc = c.simulator;
    check(is_pow2(sc.H) && is_pow2(sc.W) && sc.H >= 8 && sc.W >= 8, "simulator: H and W must be powers of two >= 8");
    check(sc.n_fe == sc.H && sc.n_fe == sc.W, "simulator: n_fe must equal H and W");
    check(sc.n_c >= 1 && sc.n_c <= 64, "simulator: n_c must be in [1, 64]");
    check(sc.n_spokes >= 1, "simulator: n_spokes must be >= 1");
    check(sc.noise_rel >= 0.0, "simulator: noise_rel must be >= 0");
    check(sc.motion.period > 0.0, "simulator.motion: period must be > 0");
    sc.phantom.validate();
  }

  if (auto const *n = top.child("navigator")) {
    Reader r(*n, "navigator");
    r.opt("source", c.navigator.source);
    r.opt("smooth_window", c.navigator.smooth_window);
    r.finish();
  }
  check(c.navigator.source == "self" || c.navigator.source == "oracle", "navigator.source must be self or oracle");
  check(c.navigator.smooth_window >= 1, "navigator.smooth_window must be >= 1");

  if (auto const *rj = top.child("recon")) {
    Reader r(*rj, "recon");
    r.opt("n_bins", c.recon.n_bins);
    if (auto const *x = r.child("xdgrasp")) {
      auto &xc = c.recon.xdgrasp;
      Reader xr(*x, "recon.xdgrasp");
      xr.opt("lambda_spatial", xc.lambda_spatial);
      xr.opt("lambda_temporal", xc.lambda_temporal);
      xr.opt("n_iter", xc.n_iter);
      xr.opt("mu", xc.mu);
      xr.opt("armijo_c", xc.armijo_c);
      xr.opt("backtrack", xc.backtrack);
      xr.opt("max_backtracks", xc.max_backtracks);
      xr.opt("restart_every", xc.restart_every);
      xr.opt("scale_by_initial_max", xc.scale_by_initial_max);
      xr.opt("density_weighting", xc.density_weighting);
      xr.finish();
      xc.validate();
    }
    if (auto const *nj = r.child("nik")) {
      auto &nc = c.recon.nik;
      Reader nr(*nj, "recon.nik");
      if (auto const *a = nr.child("arch")) {
        Reader ar(*a, "recon.nik.arch");
        ar.opt("fourier_features", nc.arch.fourier_features);
        ar.opt("layers", nc.arch.layers);
        ar.opt("width", nc.arch.width);
        ar.opt("scale_nav", nc.arch.scale_nav);
        ar.opt("scale_k", nc.arch.scale_k);
        ar.opt("seed", nc.arch.seed);
        ar.finish();
      }
      read_train(nr.child("train"), "recon.nik.train", nc.train);
      nr.opt("kmax", nc.kmax);
      nr.finish();
    }
    if (auto const *ij = r.child("iconik")) {
      auto &ic = c.recon.iconik;
      Reader ir(*ij, "recon.iconik");
      ir.opt("acr_radius", ic.acr.radius);
      ir.opt("hidden", ic.ico.hidden);
      ir.opt("offset", ic.ico.offset);
      ir.opt("seed", ic.ico.seed);
      read_train(ir.child("train"), "recon.iconik.train", ic.train);
      ir.finish();
    }
    r.finish();
  }
  c.recon.nik.arch.n_coils = c.simulator.n_c;
  check(c.recon.n_bins >= 1, "recon.n_bins must be >= 1");
  check(c.recon.nik.kmax > 0.0, "recon.nik.kmax must be > 0");
  c.recon.nik.arch.validate();
  c.recon.nik.train.validate();
  c.recon.iconik.acr.validate();
  c.recon.iconik.train.validate();
  check(c.recon.iconik.ico.hidden == 0 || c.recon.iconik.ico.hidden >= c.simulator.n_c,
        "recon.iconik.hidden must be 0 (auto) or >= n_c");
  check(c.recon.iconik.ico.offset > 0.0, "recon.iconik.offset must be > 0");

  if (auto const *e = top.child("eval")) {
    Reader r(*e, "eval");
    r.opt("n_states", c.eval.n_states);
    r.opt("methods", c.eval.methods);
    r.opt("window_percentile", c.eval.window_percentile);
    r.finish();
  }
  check(c.eval.n_states >= 1, "eval.n_states must be >= 1");
  check(c.eval.window_percentile > 0.0 && c.eval.window_percentile <= 1.0, "eval.window_percentile must be in (0, 1]");
  for (auto const &m : c.eval.methods) {
    check(std::find(known_methods().begin(), known_methods().end(), m) != known_methods().end(),
          "eval.methods: unknown method '" + m + "'");
  }
  top.finish();
  return c;
}

ExperimentConfig load_config(std::filesystem::path const &path, Profile fallback, Json const &overrides)
{
  Json overlay = Json::object();
  if (!path.empty()) {
    overlay = parse_config_text(read_text(path), path.string());
    if (!overlay.is_object()) { throw ConfigError(path.string() + ": top level must be an object"); }
  }
  Profile p = fallback;
  if (overlay.contains("profile") && overlay["profile"].is_string()) { p = parse_profile(overlay["profile"].get<std::string>()); }
  return config_from_json(merge_config(merge_config(default_config_json(p), overlay), overrides));
}

} // namespace iconik
