#include "magfilm/harness.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace magfilm {
namespace {

class Node {
 public:
  Node(YAML::Node n, std::string path, const std::string* source)
      : n_(std::move(n)), path_(std::move(path)), source_(source) {}

  [[noreturn]] void fail(const std::string& msg) const {
    const auto mark = n_.Mark();
    if (mark.is_null()) throw ConfigError(fmt::format("{}: {}: {}", *source_, path_, msg));
    throw ConfigError(fmt::format("{}:{}:{}: {}: {}", *source_, mark.line + 1, mark.column + 1, path_, msg));
  }

  bool has(const std::string& key) const { return n_.IsMap() && n_[key]; }

  Node at(const std::string& key) const {
    if (!n_.IsMap()) fail("expected a mapping");
    YAML::Node c = n_[key];
    if (!c) fail("missing key '" + key + "'");
    return Node(c, path_.empty() ? key : path_ + "." + key, source_);
  }

  Node item(std::size_t i) const {
    return Node(n_[i], fmt::format("{}[{}]", path_, i), source_);
  }

  std::size_t size() const {
    if (!n_.IsSequence()) fail("expected a sequence");
    return n_.size();
  }

  void allow_keys(std::initializer_list<const char*> keys) const {
    if (!n_.IsMap()) fail("expected a mapping");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& kv : n_) {
      const auto k = kv.first.as<std::string>();
      if (!ok.count(k)) Node(kv.first, path_.empty() ? k : path_ + "." + k, source_).fail("unknown key");
    }
  }

  double real() const {
    if (!n_.IsScalar()) fail("expected a number");
    try {
      const double v = n_.as<double>();
      if (!std::isfinite(v)) fail("expected a finite number");
      return v;
    } catch (const YAML::BadConversion&) {
      fail("expected a number, got '" + n_.Scalar() + "'");
    }
  }

  long long integer() const {
    if (!n_.IsScalar()) fail("expected an integer");
    try {
      return n_.as<long long>();
    } catch (const YAML::BadConversion&) {
      fail("expected an integer, got '" + n_.Scalar() + "'");
    }
  }

  bool boolean() const {
    if (!n_.IsScalar()) fail("expected true or false");
    try {
      return n_.as<bool>();
    } catch (const YAML::BadConversion&) {
      fail("expected true or false, got '" + n_.Scalar() + "'");
    }
  }

  std::string text() const {
    if (!n_.IsScalar()) fail("expected a string");
    return n_.Scalar();
  }

  std::vector<double> reals(std::size_t expected = 0) const {
    const std::size_t n = size();
    if (expected && n != expected) fail(fmt::format("expected {} numbers, got {}", expected, n));
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(item(i).real());
    return out;
  }

  Vec3 vec3() const {
    const auto v = reals(3);
    return Vec3(v[0], v[1], v[2]);
  }

  template <class F>
  auto guarded(F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const ModelError& e) {
      fail(e.what());
    }
  }

 private:
  YAML::Node n_;
  std::string path_;
  const std::string* source_;
};

double positive(const Node& n) {
  const double v = n.real();
  if (!(v > 0.0)) n.fail("must be > 0");
  return v;
}

double nonnegative(const Node& n) {
  const double v = n.real();
  if (!(v >= 0.0)) n.fail("must be >= 0");
  return v;
}

int int_at_least(const Node& n, int lo) {
  const long long v = n.integer();
  if (v < lo || v > 1 << 20) n.fail(fmt::format("must be an integer >= {}", lo));
  return static_cast<int>(v);
}

void parse_geometry(const Node& n, GeometrySpec& g) {
  n.allow_keys({"nx", "ny", "nz", "Lx", "Ly", "h", "h_list", "dirichlet_edge"});
  if (n.has("nx")) g.nx = int_at_least(n.at("nx"), 3);
  if (n.has("ny")) g.ny = int_at_least(n.at("ny"), 3);
  if (n.has("nz")) g.nz = int_at_least(n.at("nz"), 2);
  if (n.has("Lx")) g.lx = positive(n.at("Lx"));
  if (n.has("Ly")) g.ly = positive(n.at("Ly"));
  if (n.has("h")) {
    g.h = positive(n.at("h"));
    if (g.h > 1.0) n.at("h").fail("thickness must lie in (0, 1]");
  }
  if (n.has("h_list")) {
    const Node l = n.at("h_list");
    g.h_list = l.reals();
    if (g.h_list.empty()) l.fail("h_list must not be empty");
    for (std::size_t i = 0; i < g.h_list.size(); ++i) {
      if (!(g.h_list[i] > 0.0 && g.h_list[i] <= 1.0)) l.item(i).fail("thickness must lie in (0, 1]");
      if (i > 0 && !(g.h_list[i] < g.h_list[i - 1])) l.item(i).fail("h_list must be strictly decreasing");
    }
  }
  if (n.has("dirichlet_edge")) {
    const Node e = n.at("dirichlet_edge");
    g.edge = e.guarded([&] { return parse_edge(e.text()); });
  }
}

Mat6 parse_elasticity(const Node& n) {
  n.allow_keys({"lame", "voigt"});
  if (n.has("lame") == n.has("voigt")) n.fail("give exactly one of 'lame' or 'voigt'");
  if (n.has("lame")) {
    const auto l = n.at("lame").reals(2);
    Mat6 c = Mat6::Zero();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) c(i, j) = l[0];
      c(i, i) = l[0] + 2.0 * l[1];
      c(i + 3, i + 3) = l[1];
    }
    return c;
  }
  const Node v = n.at("voigt");
  if (v.size() != 6) v.fail("voigt table needs 6 rows");
  Mat6 c;
  for (int i = 0; i < 6; ++i) {
    const auto row = v.item(i).reals(6);
    for (int j = 0; j < 6; ++j) c(i, j) = row[j];
  }
  return c;
}

ThicknessScaling parse_scaling(const Node& n) {
  n.allow_keys({"kind", "c", "a", "b"});
  const std::string kind = n.at("kind").text();
  return n.guarded([&] {
    if (kind == "constant") return ThicknessScaling::constant(n.at("c").real());
    if (kind == "inverse") return ThicknessScaling::inverse(n.at("c").real());
    if (kind == "linear") return ThicknessScaling::linear(n.at("a").real(), n.at("b").real());
    n.at("kind").fail("unknown scaling kind '" + kind + "' (constant, inverse, linear)");
  });
}

std::vector<Vec3> read_axes_file(const Node& n, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) n.fail("cannot open axes file '" + path.string() + "'");
  std::vector<Vec3> axes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    for (auto& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream ss(line);
    Vec3 a;
    if (!(ss >> a(0) >> a(1) >> a(2))) {
      n.fail(fmt::format("axes file '{}' line {}: expected three numbers", path.string(), lineno));
    }
    axes.push_back(a);
  }
  return axes;
}

AnisotropyModel parse_anisotropy(const Node& n, const GeometrySpec& g, const std::filesystem::path& base) {
  n.allow_keys({"kind", "K_p", "K3", "axes", "axes_file", "f"});
  const std::string kind = n.at("kind").text();
  const double kp = n.has("K_p") ? nonnegative(n.at("K_p")) : 0.0;
  const double k3 = n.has("K3") ? nonnegative(n.at("K3")) : 0.0;
  const ThicknessScaling f = n.has("f") ? parse_scaling(n.at("f")) : ThicknessScaling::inverse(1.0);
  if (kind == "uniaxial" || kind == "cubic") {
    const Node ax = n.at("axes");
    std::vector<Vec3> axes;
    for (std::size_t i = 0; i < ax.size(); ++i) axes.push_back(ax.item(i).vec3());
    return ax.guarded([&] {
      if (kind == "cubic") return AnisotropyModel::cubic(kp, k3, axes, f);
      if (axes.size() != 1) ax.fail("uniaxial anisotropy takes one axis");
      return AnisotropyModel::uniaxial(kp, k3, axes[0], f);
    });
  }
  if (kind == "tabulated") {
    const Node file = n.at("axes_file");
    auto axes = read_axes_file(file, base / file.text());
    if (axes.size() != static_cast<std::size_t>(g.nx) * g.ny) {
      file.fail(fmt::format("axes file has {} rows, grid has {} planar nodes", axes.size(), g.nx * g.ny));
    }
    return file.guarded([&] { return AnisotropyModel::tabulated(kp, k3, std::move(axes), f); });
  }
  n.at("kind").fail("unknown anisotropy kind '" + kind + "' (uniaxial, cubic, tabulated)");
}

OffplaneYield parse_r3(const Node& n) {
  if (!n.has("kind")) return n.guarded([&] { return OffplaneYield::constant(nonnegative(n)); });
  n.allow_keys({"kind", "value", "r0", "r1", "rows"});
  const std::string kind = n.at("kind").text();
  if (kind == "constant") return n.guarded([&] { return OffplaneYield::constant(nonnegative(n.at("value"))); });
  if (kind == "linear") return n.guarded([&] { return OffplaneYield::linear(n.at("r0").real(), n.at("r1").real()); });
  if (kind == "table") {
    const Node rows = n.at("rows");
    std::vector<std::pair<double, double>> t;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows.item(i).reals(2);
      t.emplace_back(r[0], r[1]);
    }
    return rows.guarded([&] { return OffplaneYield::table(std::move(t)); });
  }
  n.at("kind").fail("unknown R3 kind '" + kind + "' (constant, linear, table)");
}

DissipationParams parse_dissipation(const Node& n) {
  n.allow_keys({"R_p", "R3"});
  const double rp = n.has("R_p") ? nonnegative(n.at("R_p")) : 0.0;
  const OffplaneYield r3 = n.has("R3") ? parse_r3(n.at("R3")) : OffplaneYield::constant(0.0);
  return n.guarded([&] { return DissipationParams::make(rp, r3); });
}

std::vector<std::pair<double, double>> scalar_rows(const Node& n) {
  std::vector<std::pair<double, double>> rows;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto r = n.item(i).reals(2);
    rows.emplace_back(r[0], r[1]);
  }
  return rows;
}

std::vector<std::pair<double, Vec3>> field_rows(const Node& n) {
  std::vector<std::pair<double, Vec3>> rows;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto r = n.item(i).reals(4);
    rows.emplace_back(r[0], Vec3(r[1], r[2], r[3]));
  }
  return rows;
}

// H(t) = offset + amplitude sin(2 pi t / period), sampled into linear rows.
std::vector<std::pair<double, Vec3>> sine_rows(const Node& n) {
  n.allow_keys({"amplitude", "offset", "period", "cycles", "samples_per_period"});
  const Vec3 amp = n.at("amplitude").vec3();
  const Vec3 off = n.has("offset") ? n.at("offset").vec3() : Vec3::Zero();
  const double period = n.has("period") ? positive(n.at("period")) : 1.0;
  const double cycles = n.has("cycles") ? positive(n.at("cycles")) : 1.0;
  const int per = n.has("samples_per_period") ? int_at_least(n.at("samples_per_period"), 4) : 40;
  const int total = static_cast<int>(std::ceil(cycles * per - 1e-9));
  std::vector<std::pair<double, Vec3>> rows;
  for (int i = 0; i <= total; ++i) {
    const double t = period * i / per;
    rows.emplace_back(t, Vec3(off + amp * std::sin(2.0 * std::numbers::pi * i / per)));
  }
  return rows;
}

void parse_loading(const Node& n, RunConfig& cfg) {
  n.allow_keys({"mode", "lambda", "field", "field_sine", "steps", "horizon"});
  const ModeKind mode = n.has("mode") ? n.at("mode").guarded([&] { return parse_mode(n.at("mode").text()); })
                                      : ModeKind::none;
  std::vector<std::pair<double, double>> lam = {{0.0, 0.0}};
  std::vector<std::pair<double, Vec3>> field = {{0.0, Vec3::Zero()}};
  if (n.has("lambda")) lam = scalar_rows(n.at("lambda"));
  if (n.has("field") && n.has("field_sine")) n.fail("give at most one of 'field' and 'field_sine'");
  if (n.has("field")) field = field_rows(n.at("field"));
  if (n.has("field_sine")) field = sine_rows(n.at("field_sine"));
  if (n.has("steps")) cfg.steps = int_at_least(n.at("steps"), 1);

  auto lf = n.guarded([&] { return PiecewiseLinear<double>(lam); });
  auto ff = n.guarded([&] { return PiecewiseLinear<Vec3>(field); });
  if (lam.size() == 1 && field.size() == 1) {
    const double T = n.has("horizon") ? positive(n.at("horizon")) : 1.0;
    cfg.schedule = LoadSchedule::constant(T, lam[0].second, field[0].second, mode);
    return;
  }
  if (n.has("horizon")) n.at("horizon").fail("horizon is only used for constant loading");
  LoadSchedule s(mode, std::move(lf), std::move(ff));
  if (lam.size() > 1 && field.size() > 1 && lam.back().first != field.back().first) {
    n.fail("lambda and field tables must end at the same time");
  }
  cfg.schedule = std::move(s);
}

void parse_solver(const Node& n, SolverConfig& s) {
  n.allow_keys({"tol_outer", "tol_cg", "tol_prox", "tol_step", "max_outer", "max_cg", "max_prox", "prox_step",
                "cautious_move", "backtrack", "n_stability_samples", "perturbation_scale", "tol_stability", "competitor_search",
                "competitor_samples", "audit_each_step"});
  if (n.has("tol_outer")) s.tol_outer = positive(n.at("tol_outer"));
  if (n.has("tol_cg")) s.tol_cg = positive(n.at("tol_cg"));
  if (n.has("tol_prox")) s.tol_prox = positive(n.at("tol_prox"));
  if (n.has("tol_step")) s.tol_step = positive(n.at("tol_step"));
  if (n.has("max_outer")) s.max_outer = int_at_least(n.at("max_outer"), 1);
  if (n.has("max_cg")) s.max_cg = int_at_least(n.at("max_cg"), 1);
  if (n.has("max_prox")) s.max_prox = int_at_least(n.at("max_prox"), 1);
  if (n.has("prox_step")) s.prox_step = positive(n.at("prox_step"));
  if (n.has("cautious_move")) s.cautious_move = nonnegative(n.at("cautious_move"));
  if (n.has("backtrack")) {
    s.backtrack = positive(n.at("backtrack"));
    if (s.backtrack >= 1.0) n.at("backtrack").fail("must lie in (0, 1)");
  }
  if (n.has("n_stability_samples")) s.n_stability_samples = int_at_least(n.at("n_stability_samples"), 0);
  if (n.has("perturbation_scale")) s.perturbation_scale = positive(n.at("perturbation_scale"));
  if (n.has("tol_stability")) s.tol_stability = positive(n.at("tol_stability"));
  if (n.has("competitor_search")) s.competitor_search = n.at("competitor_search").boolean();
  if (n.has("competitor_samples")) s.competitor_samples = int_at_least(n.at("competitor_samples"), 0);
  if (n.has("audit_each_step")) s.audit_each_step = n.at("audit_each_step").boolean();
}

}  // namespace

Experiment parse_experiment(const std::string& name) {
  if (name == "static") return Experiment::static_min;
  if (name == "evolve") return Experiment::evolve;
  if (name == "gamma-sweep") return Experiment::gamma_sweep;
  if (name == "stray-diag") return Experiment::stray_diag;
  if (name == "validate") return Experiment::validate;
  throw ModelError("unknown experiment '" + name + "' (static, evolve, gamma-sweep, stray-diag, validate)");
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::static_min: return "static";
    case Experiment::evolve: return "evolve";
    case Experiment::gamma_sweep: return "gamma-sweep";
    case Experiment::stray_diag: return "stray-diag";
    case Experiment::validate: return "validate";
  }
  return "?";
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

Materials RunConfig::materials() const {
  Materials m;
  m.m_sat = m_sat;
  m.alpha = alpha;
  m.elasticity = ElasticityTensor::from_voigt(elasticity_voigt);
  m.anisotropy = anisotropy;
  m.dissipation = dissipation;
  return m;
}

Vec3 RunConfig::initial_axis() const {
  if (initial_direction) return initial_direction->normalized();
  return anisotropy.easy_axes(0)[0];
}

RunConfig parse_config(const std::string& text, const std::string& source, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.source = source;
  cfg.sha256 = sha256_hex(text);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}:{}: {}", source, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  const Node n(root, "", &cfg.source);
  if (!root.IsMap()) n.fail("top level must be a mapping");
  n.allow_keys({"experiment", "model", "seed", "output_dir", "geometry", "material", "loading", "solver", "stray",
                "initial", "output"});
  if (n.has("experiment")) {
    const Node e = n.at("experiment");
    cfg.experiment = e.guarded([&] { return parse_experiment(e.text()); });
  }
  if (n.has("model")) {
    const Node m = n.at("model");
    const auto s = m.text();
    if (s == "plate") cfg.model = ModelKind::plate;
    else if (s == "bulk") cfg.model = ModelKind::bulk;
    else m.fail("unknown model '" + s + "' (plate, bulk)");
  }
  if (n.has("seed")) {
    const Node s = n.at("seed");
    const long long v = s.integer();
    if (v < 0) s.fail("seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(v);
  }
  cfg.solver.rng_seed = cfg.seed;
  if (n.has("output_dir")) cfg.output_dir = n.at("output_dir").text();
  if (n.has("geometry")) parse_geometry(n.at("geometry"), cfg.geometry);

  const Node mat = n.at("material");
  mat.allow_keys({"m_sat", "alpha", "elasticity", "anisotropy", "dissipation"});
  if (mat.has("m_sat")) cfg.m_sat = positive(mat.at("m_sat"));
  if (mat.has("alpha")) cfg.alpha = nonnegative(mat.at("alpha"));
  cfg.elasticity_voigt = mat.has("elasticity") ? parse_elasticity(mat.at("elasticity"))
                                               : parse_elasticity(Node(YAML::Load("{lame: [1, 1]}"), "material.elasticity", &cfg.source));
  if (mat.has("anisotropy")) cfg.anisotropy = parse_anisotropy(mat.at("anisotropy"), cfg.geometry, base_dir);
  if (mat.has("dissipation")) cfg.dissipation = parse_dissipation(mat.at("dissipation"));

  if (n.has("loading")) parse_loading(n.at("loading"), cfg);
  if (n.has("solver")) parse_solver(n.at("solver"), cfg.solver);
  if (n.has("stray")) {
    const Node s = n.at("stray");
    s.allow_keys({"padding_factor", "nz_cap"});
    if (s.has("padding_factor")) cfg.stray.padding_factor = int_at_least(s.at("padding_factor"), 2);
    if (s.has("nz_cap")) cfg.stray.nz_cap = int_at_least(s.at("nz_cap"), 2);
  }
  if (n.has("initial")) {
    const Node i = n.at("initial");
    i.allow_keys({"direction"});
    if (i.has("direction")) {
      const Node d = i.at("direction");
      const Vec3 v = d.vec3();
      if (!(v.norm() > 0.0)) d.fail("direction must be nonzero");
      cfg.initial_direction = v;
    }
  }
  if (n.has("output")) {
    const Node o = n.at("output");
    o.allow_keys({"snapshots"});
    if (o.has("snapshots")) cfg.snapshots = o.at("snapshots").boolean();
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("{}: cannot open config file", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), path.parent_path());
}

}  // namespace magfilm
