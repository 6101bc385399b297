#pragma once

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <openssl/evp.h>

#include "reflect/control.hpp"
#include "reflect/costbounds.hpp"
#include "reflect/discretize.hpp"
#include "reflect/geometry.hpp"
#include "reflect/grid.hpp"
#include "reflect/io.hpp"
#include "reflect/parallel.hpp"
#include "reflect/transfer.hpp"

namespace reflect {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

//---------------------------------------------------------------------------//
// Strict reading
//---------------------------------------------------------------------------//

namespace detail {

/// Object reader that remembers which keys were consumed; finish() rejects the rest.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const Json& require(const std::string& key) {
    const Json* v = get(key);
    if (!v) throw ConfigError("missing key '" + key + "' in " + where_);
    return *v;
  }

  template <class T>
  T as(const Json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("key '" + key + "' in " + where_ + " has the wrong type");
    }
  }

  template <class T>
  T value(const std::string& key, T fallback) {
    const Json* v = get(key);
    return v ? as<T>(*v, key) : fallback;
  }

  template <class T>
  T required(const std::string& key) {
    return as<T>(require(key), key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      (void)v;
      if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where_);
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// number | [numbers] | {"linspace": [a, b, n]} | {"logspace": [a, b, n]} (base 10).
inline std::vector<double> parse_values(const Json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) {
    std::vector<double> out;
    for (const Json& x : j) {
      if (!x.is_number()) throw ConfigError(where + " must contain numbers only");
      out.push_back(x.get<double>());
    }
    if (out.empty()) throw ConfigError(where + " must not be empty");
    return out;
  }
  if (j.is_object() && j.size() == 1) {
    const auto& [kind, spec] = *j.items().begin();
    if ((kind == "linspace" || kind == "logspace") && spec.is_array() && spec.size() == 3 &&
        spec[0].is_number() && spec[1].is_number() && spec[2].is_number_integer()) {
      const double a = spec[0].get<double>();
      const double b = spec[1].get<double>();
      const long n = spec[2].get<long>();
      if (n < 1) throw ConfigError(where + ": point count must be >= 1");
      std::vector<double> out;
      for (long i = 0; i < n; ++i) {
        const double t = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
        out.push_back(kind == "logspace" ? std::pow(10.0, t) : t);
      }
      return out;
    }
  }
  throw ConfigError(where + " must be a number, a list, or {\"linspace\"|\"logspace\": [a, b, n]}");
}

/// Applies "K=<v>,D1=<v>,D2=<v>,D3=<v>" (any subset) to the constants.
inline void apply_constants_override(UniversalConstants& c, const std::string& spec) {
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("constants entry '" + item + "' is not NAME=value");
    const std::string name = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
      throw ConfigError("constants entry '" + item + "' has a malformed value");
    if (name == "K") c.K = v;
    else if (name == "D1") c.D[1] = v;
    else if (name == "D2") c.D[2] = v;
    else if (name == "D3") c.D[3] = v;
    else throw ConfigError("unknown constant '" + name + "'");
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

//---------------------------------------------------------------------------//
// Typed parameters
//---------------------------------------------------------------------------//

enum class Command { bounds_sweep, geometry_certify, intertwine_check, transfer_run };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::bounds_sweep: return "bounds-sweep";
    case Command::geometry_certify: return "geometry-certify";
    case Command::intertwine_check: return "intertwine-check";
    case Command::transfer_run: return "transfer-run";
  }
  return "?";
}

struct BoundsSweepParams {
  std::string formula;  // thick | domain | fractional | equidistributed | equidistributed_domain
  std::optional<DomainSpec> domain;
  std::vector<double> gamma{0.25};
  std::vector<double> a;
  std::vector<double> T;
  std::vector<double> theta{0.75};
  std::vector<double> G{1.0};
  std::vector<double> delta{0.25};
  PotentialNorms norms;
  int d = 0;
  std::string plot_x = "T";
};

struct CertifyParams {
  RegionSet set;
  std::vector<double> a;
  std::optional<Window> window;
  int resolution = 64;
  int offsets_per_axis = 16;
  MeasureMode measure = MeasureMode::midpoint;
  std::string symmetrize = "none";  // none | halfspace | orthant | sector
  double theta = 0.0;
  std::optional<double> gamma;
  std::optional<Window> symmetrized_window;
};

/// A symmetric parent grid, its half, coefficients on the half and a control set on the half.
struct SystemSpec {
  GridSpec grid;
  BoundaryCondition bc = BoundaryCondition::dirichlet;
  Eigen::MatrixXd A;
  double V = 0.0;
  std::optional<RegionSet> control;
};

struct IntertwineParams {
  SystemSpec system;
  std::vector<double> times{0.01, 0.1, 1.0};
  double phi_power = 0.75;
  std::optional<std::vector<double>> lambda_grid;
  bool dump_matrices = false;
};

struct TransferParams {
  SystemSpec system;
  double T = 0.5;
  QuadratureSpec quadrature;
  std::optional<double> epsilon;
  int random_data = 0;
  std::vector<int> modes;
  bool trajectories = false;
  bool operator_cost = false;
};

struct ExperimentConfig {
  Command command = Command::bounds_sweep;
  std::variant<BoundsSweepParams, CertifyParams, IntertwineParams, TransferParams> params;
  Json parameters_echo;
  std::optional<std::string> out_dir;
  std::string format = "json";
  UniversalConstants constants;
  std::optional<std::uint64_t> seed;
  int threads = 1;

  bool needs_seed() const {
    const auto* t = std::get_if<TransferParams>(&params);
    return t && t->random_data > 0;
  }
};

namespace detail {

inline Window parse_window(const Json& j, const std::string& where) {
  Reader r(j, where);
  Window w{r.required<std::vector<double>>("lo"), r.required<std::vector<double>>("hi")};
  r.finish();
  return w;
}

inline RegionSet parse_region(const Json& j, const std::string& where) {
  try {
    return region_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline SystemSpec parse_system(Reader& r, const std::string& where) {
  SystemSpec s;
  {
    Reader g(r.require("grid"), where + ".grid");
    const std::string shape = g.required<std::string>("shape");
    if (shape == "sym_interval") s.grid.shape = GridShape::sym_interval;
    else if (shape == "rectangle") s.grid.shape = GridShape::rectangle;
    else throw ConfigError(where + ".grid.shape must be sym_interval or rectangle");
    s.grid.L = g.value<double>("L", 1.0);
    s.grid.cells = g.required<int>("cells");
    s.grid.dimension = g.value<int>("dimension", shape == "sym_interval" ? 1 : 2);
    g.finish();
    if (shape == "sym_interval" && s.grid.dimension != 1)
      throw ConfigError(where + ".grid: sym_interval is one-dimensional");
  }
  const std::string bc = r.value<std::string>("bc", "dirichlet");
  if (bc == "dirichlet") s.bc = BoundaryCondition::dirichlet;
  else if (bc == "neumann") s.bc = BoundaryCondition::neumann;
  else throw ConfigError(where + ".bc must be dirichlet or neumann");
  const int d = s.grid.dimension;
  s.A = Eigen::MatrixXd::Identity(d, d);
  if (const Json* a = r.get("A")) {
    if (a->is_number()) {
      s.A *= a->get<double>();
    } else {
      const auto rows = r.as<std::vector<std::vector<double>>>(*a, "A");
      if (static_cast<int>(rows.size()) != d) throw ConfigError(where + ".A must be " + std::to_string(d) + "x" + std::to_string(d));
      for (int i = 0; i < d; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != d)
          throw ConfigError(where + ".A must be square");
        for (int j = 0; j < d; ++j) s.A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
  }
  s.V = r.value<double>("V", 0.0);
  if (const Json* c = r.get("control")) s.control = parse_region(*c, where + ".control");
  return s;
}

inline BoundsSweepParams parse_bounds(const Json& j) {
  Reader r(j, "parameters");
  BoundsSweepParams p;
  p.formula = r.required<std::string>("formula");
  static const std::set<std::string> formulas{"thick", "domain", "fractional", "equidistributed",
                                              "equidistributed_domain"};
  if (!formulas.count(p.formula)) throw ConfigError("unknown formula '" + p.formula + "'");
  if (const Json* dj = r.get("domain")) {
    Reader dr(*dj, "parameters.domain");
    DomainSpec dom;
    const std::string kind = dr.required<std::string>("kind");
    if (kind == "halfspace") dom.kind = DomainKind::halfspace;
    else if (kind == "orthant") dom.kind = DomainKind::orthant;
    else if (kind == "sector") dom.kind = DomainKind::sector;
    else if (kind == "triangle") dom.kind = DomainKind::triangle;
    else if (kind == "prism") dom.kind = DomainKind::prism;
    else throw ConfigError("unknown domain kind '" + kind + "'");
    dom.n = dr.value<int>("n", 2);
    if (const Json* L = dr.get("L")) dom.L = dr.as<double>(*L, "L");
    dr.finish();
    p.domain = dom;
  }
  const bool needs_domain = p.formula == "domain" || p.formula == "equidistributed_domain";
  if (needs_domain != p.domain.has_value())
    throw ConfigError(needs_domain ? "formula '" + p.formula + "' needs parameters.domain"
                                   : "parameters.domain is only used by domain formulas");
  const bool thick_family = p.formula == "thick" || p.formula == "domain" || p.formula == "fractional";
  p.T = parse_values(r.require("T"), "parameters.T");
  if (thick_family) {
    p.gamma = parse_values(r.require("gamma"), "parameters.gamma");
    p.a = r.required<std::vector<double>>("a");
    p.d = r.value<int>("d", static_cast<int>(p.a.size()));
    if (p.formula == "fractional") p.theta = parse_values(r.require("theta"), "parameters.theta");
  } else {
    p.G = parse_values(r.require("G"), "parameters.G");
    p.delta = parse_values(r.require("delta"), "parameters.delta");
    p.norms.sup_norm = r.value<double>("V_sup", 0.0);
    p.norms.neg_sup_norm = r.value<double>("V_neg", 0.0);
    p.d = r.value<int>("d", 2);
  }
  p.plot_x = r.value<std::string>("plot_x", "T");
  r.finish();
  return p;
}

inline CertifyParams parse_certify(const Json& j) {
  Reader r(j, "parameters");
  CertifyParams p;
  p.set = parse_region(r.require("set"), "parameters.set");
  p.a = r.required<std::vector<double>>("a");
  if (const Json* w = r.get("window")) p.window = parse_window(*w, "parameters.window");
  p.resolution = r.value<int>("resolution", 64);
  p.offsets_per_axis = r.value<int>("offsets_per_axis", 16);
  const std::string m = r.value<std::string>("measure", "midpoint");
  if (m == "midpoint") p.measure = MeasureMode::midpoint;
  else if (m == "exact") p.measure = MeasureMode::exact_if_available;
  else throw ConfigError("parameters.measure must be midpoint or exact");
  p.symmetrize = r.value<std::string>("symmetrize", "none");
  if (p.symmetrize != "none" && p.symmetrize != "halfspace" && p.symmetrize != "orthant" &&
      p.symmetrize != "sector")
    throw ConfigError("parameters.symmetrize must be none, halfspace, orthant or sector");
  p.theta = r.value<double>("theta", 0.0);
  if (const Json* g = r.get("gamma")) p.gamma = r.as<double>(*g, "gamma");
  if (const Json* w = r.get("symmetrized_window"))
    p.symmetrized_window = parse_window(*w, "parameters.symmetrized_window");
  r.finish();
  if (p.symmetrize != "none" && !p.symmetrized_window)
    throw ConfigError("symmetrized sets are not periodic; parameters.symmetrized_window is required");
  return p;
}

inline IntertwineParams parse_intertwine(const Json& j) {
  Reader r(j, "parameters");
  IntertwineParams p;
  p.system = parse_system(r, "parameters");
  if (const Json* t = r.get("times")) p.times = parse_values(*t, "parameters.times");
  p.phi_power = r.value<double>("phi_power", 0.75);
  if (const Json* l = r.get("lambda_grid")) p.lambda_grid = parse_values(*l, "parameters.lambda_grid");
  p.dump_matrices = r.value<bool>("dump_matrices", false);
  r.finish();
  return p;
}

inline TransferParams parse_transfer(const Json& j) {
  Reader r(j, "parameters");
  TransferParams p;
  p.system = parse_system(r, "parameters");
  if (!p.system.control) throw ConfigError("transfer-run needs parameters.control");
  p.T = r.required<double>("T");
  if (const Json* q = r.get("quadrature")) {
    Reader qr(*q, "parameters.quadrature");
    p.quadrature.nodes = qr.value<int>("nodes", 32);
    const std::string rule = qr.value<std::string>("rule", "gauss_legendre");
    if (rule == "gauss_legendre") p.quadrature.rule = QuadratureRule::gauss_legendre;
    else if (rule == "trapezoid") p.quadrature.rule = QuadratureRule::trapezoid;
    else throw ConfigError("parameters.quadrature.rule must be gauss_legendre or trapezoid");
    qr.finish();
  }
  if (const Json* e = r.get("epsilon"); e && !e->is_null()) p.epsilon = r.as<double>(*e, "epsilon");
  {
    Reader dr(r.require("data"), "parameters.data");
    p.random_data = dr.value<int>("random", 0);
    p.modes = dr.value<std::vector<int>>("modes", {});
    dr.finish();
    if (p.random_data < 0) throw ConfigError("parameters.data.random must be >= 0");
    if (p.random_data == 0 && p.modes.empty()) throw ConfigError("parameters.data selects no data");
  }
  p.trajectories = r.value<bool>("trajectories", false);
  p.operator_cost = r.value<bool>("operator_cost", false);
  r.finish();
  return p;
}

}  // namespace detail

/// Strict parse; every unknown key anywhere in the document is an error.
inline ExperimentConfig parse_config(const Json& j) {
  try {
    detail::Reader r(j, "config");
    ExperimentConfig cfg;
    const std::string cmd = r.required<std::string>("command");
    const Json& params = r.require("parameters");
    if (cmd == "bounds-sweep") {
      cfg.command = Command::bounds_sweep;
      cfg.params = detail::parse_bounds(params);
    } else if (cmd == "geometry-certify") {
      cfg.command = Command::geometry_certify;
      cfg.params = detail::parse_certify(params);
    } else if (cmd == "intertwine-check") {
      cfg.command = Command::intertwine_check;
      cfg.params = detail::parse_intertwine(params);
    } else if (cmd == "transfer-run") {
      cfg.command = Command::transfer_run;
      cfg.params = detail::parse_transfer(params);
    } else {
      throw ConfigError("unknown command '" + cmd + "'");
    }
    cfg.parameters_echo = params;
    if (const Json* o = r.get("output")) {
      detail::Reader orr(*o, "config.output");
      if (const Json* d = orr.get("dir")) cfg.out_dir = orr.as<std::string>(*d, "dir");
      cfg.format = orr.value<std::string>("format", "json");
      orr.finish();
    }
    if (const Json* c = r.get("constants")) {
      detail::Reader cr(*c, "config.constants");
      cfg.constants.K = cr.value<double>("K", 1.0);
      for (int d : {1, 2, 3}) cfg.constants.D[d] = cr.value<double>("D" + std::to_string(d), 1.0);
      cr.finish();
      apply_constants_override(cfg.constants, "");
    }
    if (const Json* s = r.get("seed")) {
      if (!s->is_number_integer() || (s->is_number_integer() && !s->is_number_unsigned() && s->get<std::int64_t>() < 0))
        throw ConfigError("config.seed must be a non-negative integer");
      cfg.seed = s->get<std::uint64_t>();
    }
    cfg.threads = r.value<int>("threads", 1);
    r.finish();
    if (cfg.format != "csv" && cfg.format != "json") throw ConfigError("format must be csv or json");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Effective settings that determine the outputs. Output directory and thread count are excluded.
inline Json config_echo(const ExperimentConfig& cfg) {
  Json constants{{"K", cfg.constants.K}};
  for (const auto& [d, v] : cfg.constants.D) constants["D" + std::to_string(d)] = v;
  Json j{{"command", to_string(cfg.command)}, {"format", cfg.format}, {"constants", constants}};
  j["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  j["parameters"] = cfg.parameters_echo;
  return j;
}

//---------------------------------------------------------------------------//
// Run
//---------------------------------------------------------------------------//

/// Artifacts are held in memory, written in name order, and the manifest last.
class ArtifactSet {
 public:
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  const std::map<std::string, std::string>& files() const noexcept { return files_; }
  const std::string& at(const std::string& name) const { return files_.at(name); }
  bool contains(const std::string& name) const { return files_.count(name) > 0; }

  std::string manifest(const Json& echo) const {
    Json arts = Json::array();
    for (const auto& [name, content] : files_)
      arts.push_back(Json{{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    Json m{{"command", echo.at("command")}, {"config_sha256", sha256_hex(echo.dump())}, {"artifacts", arts}};
    return m.dump(2) + "\n";
  }

  void write(const std::filesystem::path& dir, const Json& echo) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files_) write_file(dir / name, content);
    write_file(dir / "manifest.json", manifest(echo));
  }

 private:
  static void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + p.string());
  }

  std::map<std::string, std::string> files_;
};

struct RunResult {
  int status = 0;  // 0 ok, 3 numerical check failed, 4 intertwining check failed
  ArtifactSet artifacts;
  std::string summary;
};

/// Writes a long-format (x, series, y) CSV.
inline void emit_plot_data(std::span<const PlotPoint> results, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << plot_csv(results);
}

namespace detail {

/// Uniform in [-1, 1) from the top 53 bits; identical on every platform.
inline double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

inline std::vector<Eigen::VectorXd> random_unit_data(std::size_t count, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd u(n);
    do {
      for (Eigen::Index k = 0; k < n; ++k) u[k] = uniform_pm1(rng);
    } while (u.norm() == 0.0);
    out.push_back(u / u.norm());
  }
  return out;
}

struct BuiltPair {
  GridDomain full;
  GridDomain half;
  DiscreteSystem half_sys;
  DiscreteSystem full_sys;
  ReflectionOperators ops;
};

inline BuiltPair build_pair(const SystemSpec& s) {
  GridDomain full = build_grid(s.grid);
  GridDomain half = half_domain(full);
  const CoefficientField fh = CoefficientField::constant(half, s.A, s.V);
  const CoefficientField ff = reflect_coefficients(fh, half, full);
  std::vector<char> wh(half.size(), 0);
  if (s.control) wh = control_cells(half, *s.control);
  const std::vector<char> wf = mirror_control(wh, half, full);
  DiscreteSystem hs = assemble_operator(half, fh, s.bc, wh);
  DiscreteSystem fs = assemble_operator(full, ff, s.bc, wf);
  ReflectionOperators ops = build_reflection_operators(half, full, s.bc);
  return {std::move(full), std::move(half), std::move(hs), std::move(fs), std::move(ops)};
}

inline std::string label(const std::string& name, double v) { return name + "=" + format_number(v); }

inline RunResult run_bounds(const ExperimentConfig& cfg, const BoundsSweepParams& p, const Json& echo) {
  const bool equi = p.formula == "equidistributed" || p.formula == "equidistributed_domain";
  // Axes in nesting order; the last varies fastest.
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  if (equi) {
    axes = {{"G", p.G}, {"delta", p.delta}, {"T", p.T}};
  } else {
    axes = {{"gamma", p.gamma}};
    if (p.formula == "fractional") axes.emplace_back("theta", p.theta);
    axes.emplace_back("T", p.T);
  }
  const auto x_axis = std::find_if(axes.begin(), axes.end(), [&](const auto& ax) { return ax.first == p.plot_x; });
  if (x_axis == axes.end()) throw ConfigError("plot_x '" + p.plot_x + "' is not a swept parameter");

  std::size_t total = 1;
  for (const auto& ax : axes) total *= ax.second.size();
  std::vector<BoundResult> rows(total);
  std::vector<std::map<std::string, double>> points(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
      points[i][it->first] = it->second[rem % it->second.size()];
      rem /= it->second.size();
    }
  }
  parallel_for(total, cfg.threads, [&](std::size_t i) {
    const auto& pt = points[i];
    const double T = pt.at("T");
    if (p.formula == "thick") {
      rows[i] = cost_bound_thick(pt.at("gamma"), p.a, T, p.d, cfg.constants);
    } else if (p.formula == "domain") {
      rows[i] = cost_bound_domain(*p.domain, pt.at("gamma"), p.a, T, cfg.constants);
    } else if (p.formula == "fractional") {
      rows[i] = cost_bound_fractional(pt.at("gamma"), p.a, T, p.d, pt.at("theta"), cfg.constants);
    } else if (p.formula == "equidistributed") {
      rows[i] = cost_bound_equidistributed(pt.at("G"), pt.at("delta"), T, p.norms, p.d, cfg.constants);
    } else {
      rows[i] = cost_bound_equidistributed_domain(*p.domain, pt.at("G"), pt.at("delta"), T, p.norms,
                                                  cfg.constants);
    }
  });

  RunResult res;
  if (cfg.format == "csv") {
    res.artifacts.add("bounds.csv", bounds_csv(rows));
  } else {
    Json arr = Json::array();
    for (const auto& b : rows) arr.push_back(bound_json(b));
    res.artifacts.add("bounds.json", Json{{"rows", arr}, {"config", echo}}.dump(2) + "\n");
  }
  std::vector<PlotPoint> plot;
  plot.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::string series = rows[i].formula_tag;
    for (const auto& [name, vals] : axes)
      if (name != p.plot_x && vals.size() > 1) series += ";" + label(name, points[i].at(name));
    plot.push_back({points[i].at(p.plot_x), series, rows[i].log_value});
  }
  // Group by series, keeping x in sweep order inside each series.
  std::stable_sort(plot.begin(), plot.end(), [](const PlotPoint& a, const PlotPoint& b) { return a.series < b.series; });
  res.artifacts.add("plot.csv", plot_csv(plot));
  res.summary = std::to_string(total) + " bound evaluations";
  return res;
}

inline RunResult run_certify(const ExperimentConfig& cfg, const CertifyParams& p, const Json& echo) {
  const ThicknessReport base =
      certify_thickness(p.set, p.a, p.window, p.resolution, p.offsets_per_axis, p.measure);
  Json out{{"set", region_json(p.set)}, {"report", thickness_report_json(base)}};
  std::vector<std::pair<std::string, ThicknessReport>> stages{{"input", base}};
  if (p.symmetrize != "none") {
    const ThicknessParams given(p.gamma.value_or(base.gamma_estimate), p.a,
                                p.gamma ? "given" : "estimated");
    SymmetrizedSet sym;
    if (p.symmetrize == "halfspace") sym = symmetrize_halfspace(p.set, given);
    else if (p.symmetrize == "orthant") sym = symmetrize_orthant(p.set, given);
    else sym = symmetrize_sector(p.set, given, p.theta);
    const ThicknessReport rep = certify_thickness(sym.set, sym.params.a, p.symmetrized_window, p.resolution,
                                                  p.offsets_per_axis, p.measure);
    out["symmetrization"] = Json{{"kind", p.symmetrize},
                                 {"input_params", thickness_params_json(given)},
                                 {"params", thickness_params_json(sym.params)},
                                 {"set", region_json(sym.set)},
                                 {"report", thickness_report_json(rep)},
                                 {"certified_gamma_holds", rep.gamma_estimate >= sym.params.gamma}};
    stages.emplace_back("symmetrized", rep);
  }
  out["config"] = echo;
  RunResult res;
  res.artifacts.add("certify.json", out.dump(2) + "\n");
  if (cfg.format == "csv") {
    std::ostringstream os;
    os << "stage,gamma_estimate,resolution,offsets_per_axis,exact_measure\n";
    for (const auto& [stage, r] : stages)
      os << stage << ',' << format_number(r.gamma_estimate) << ',' << r.resolution << ',' << r.offsets_per_axis
         << ',' << (r.exact_measure ? "true" : "false") << '\n';
    res.artifacts.add("certify.csv", os.str());
  }
  res.summary = "gamma_estimate " + format_number(base.gamma_estimate);
  return res;
}

/// Midpoints between consecutive distinct eigenvalues of either operator.
inline std::vector<double> default_lambda_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  std::vector<double> ev(a.data(), a.data() + a.size());
  ev.insert(ev.end(), b.data(), b.data() + b.size());
  std::sort(ev.begin(), ev.end());
  std::vector<double> grid;
  for (std::size_t i = 1; i < ev.size(); ++i)
    if (ev[i] - ev[i - 1] > 1e-6) grid.push_back(0.5 * (ev[i] + ev[i - 1]));
  return grid;
}

inline RunResult run_intertwine(const ExperimentConfig& cfg, const IntertwineParams& p, const Json& echo) {
  const BuiltPair pair = build_pair(p.system);
  const AbstractSystem big = AbstractSystem::from_discrete(pair.full_sys);
  const AbstractSystem small = AbstractSystem::from_discrete(pair.half_sys);
  const IntertwinerTriple t = IntertwinerTriple::from_reflection(pair.ops);

  std::vector<DefectReport> defects;
  {
    const double d = check_discrete_intertwining(pair.ops, pair.half_sys.H, pair.full_sys.H);
    const double thr = 1e-12 * std::max({max_abs(pair.half_sys.H), max_abs(pair.full_sys.H), 1.0});
    defects.push_back({"Xstar H~ = H Xstar", d, thr, d <= thr});
  }
  defects.push_back(check_control_intertwining(t, big, small));
  {
    const bool ok = check_control_commutation(pair.ops, pair.half_sys.control, pair.full_sys.control);
    defects.push_back({"Xstar chi~ = chi Xstar", ok ? 0.0 : 1.0, 0.0, ok});
  }
  {
    const Eigen::MatrixXd XsX = Eigen::MatrixXd(pair.ops.Xstar) * Eigen::MatrixXd(pair.ops.X);
    const double d = (XsX - 2.0 * Eigen::MatrixXd::Identity(XsX.rows(), XsX.cols())).cwiseAbs().maxCoeff();
    defects.push_back({"Xstar X = 2 I", d, 0.0, d == 0.0});
  }
  {
    Eigen::VectorXd f(static_cast<Eigen::Index>(pair.half.size()));
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = std::sin(1.3 * static_cast<double>(i) + 0.2);
    const double d = discrete_gradient_relation(pair.ops, pair.half, pair.full, f);
    defects.push_back({"grad X f = lambda U grad f o M", d, 1e-12 * std::max(f.cwiseAbs().maxCoeff() / pair.full.h(), 1.0),
                       d <= 1e-12 * std::max(f.cwiseAbs().maxCoeff() / pair.full.h(), 1.0)});
  }
  defects.push_back(check_semigroup_commutation(t, big, small, p.times));
  const std::vector<double> grid =
      p.lambda_grid ? *p.lambda_grid
                    : default_lambda_grid(big.spectrum().eigenvalues(), small.spectrum().eigenvalues());
  const SpectralReport sp = spectral_intertwining(t, big, small, fractional_power(p.phi_power), grid);
  DefectReport fn = sp.function;
  fn.relation = "Y phi(H~) = phi(H) Y, phi(s) = s^" + format_number(p.phi_power);
  defects.push_back(fn);
  defects.push_back(sp.projectors);

  RunResult res;
  Json arr = Json::array();
  for (const auto& d : defects) arr.push_back(defect_json(d));
  Json out{{"defects", arr},
           {"lambdas_checked", sp.lambdas_checked},
           {"lambdas_skipped", sp.lambdas_skipped},
           {"yhat_norm", t.yhat_norm},
           {"z_norm", t.z_norm},
           {"half", system_header_json(pair.half_sys)},
           {"full", system_header_json(pair.full_sys)},
           {"config", echo}};
  res.artifacts.add("defects.json", out.dump(2) + "\n");
  if (cfg.format == "csv") res.artifacts.add("defects.csv", defects_csv(defects));
  if (p.dump_matrices) {
    res.artifacts.add("system_half.json", system_header_json(pair.half_sys).dump(2) + "\n");
    res.artifacts.add("system_full.json", system_header_json(pair.full_sys).dump(2) + "\n");
    res.artifacts.add("H_half.csv", triplets_csv(pair.half_sys.H));
    res.artifacts.add("H_full.csv", triplets_csv(pair.full_sys.H));
  }
  const bool ok = std::all_of(defects.begin(), defects.end(), [](const DefectReport& d) { return d.pass; });
  res.status = ok ? 0 : 4;
  res.summary = ok ? "all relations hold" : "intertwining relation failed";
  return res;
}

inline RunResult run_transfer(const ExperimentConfig& cfg, const TransferParams& p, const Json& echo) {
  const BuiltPair pair = build_pair(p.system);
  const auto n = static_cast<Eigen::Index>(pair.half.size());
  std::vector<Eigen::VectorXd> data;
  if (!p.modes.empty()) {
    const AbstractSystem small = AbstractSystem::from_discrete(pair.half_sys);
    const Eigen::MatrixXd& Q = small.spectrum().eigenvectors();
    for (int k : p.modes) {
      if (k < 1 || k > n) throw ConfigError("mode index " + std::to_string(k) + " out of range");
      Eigen::VectorXd u = Q.col(k - 1);
      // Fix the sign so the output does not depend on the eigensolver's choice.
      Eigen::Index imax = 0;
      u.cwiseAbs().maxCoeff(&imax);
      if (u[imax] < 0) u = -u;
      data.push_back(u);
    }
  }
  if (p.random_data > 0) {
    const auto r = random_unit_data(static_cast<std::size_t>(p.random_data), n, *cfg.seed);
    data.insert(data.end(), r.begin(), r.end());
  }
  TransferOptions opt;
  opt.threads = cfg.threads;
  opt.keep_trajectories = p.trajectories;
  const TransferReport rep =
      transfer_experiment(pair.half_sys, pair.full_sys, pair.ops, p.T, data, p.quadrature, p.epsilon, opt);

  Json out = transfer_report_json(rep, echo);
  if (p.operator_cost) {
    out["operator_cost_half"] = number_json(
        observed_cost_operator(AbstractSystem::from_discrete(pair.half_sys), p.T, p.quadrature, p.epsilon));
    out["operator_cost_full"] = number_json(
        observed_cost_operator(AbstractSystem::from_discrete(pair.full_sys), p.T, p.quadrature, p.epsilon));
  }
  RunResult res;
  res.artifacts.add("transfer.json", out.dump(2) + "\n");
  if (cfg.format == "csv") res.artifacts.add("transfer.csv", transfer_csv(rep));
  if (p.trajectories)
    for (const auto& d : rep.data) {
      char name[48];
      std::snprintf(name, sizeof name, "trajectory_%04zu.csv", d.index);
      res.artifacts.add(name, trajectory_csv(rep.times, d.v_trajectory));
    }
  std::vector<PlotPoint> plot;
  for (const char* series : {"direct_half_cost", "full_cost", "half_cost"})
    for (const auto& d : rep.data) {
      const double y = std::string(series) == "half_cost"   ? d.half_cost
                       : std::string(series) == "full_cost" ? d.full_cost
                                                            : d.direct_half_cost;
      plot.push_back({static_cast<double>(d.index), series, y});
    }
  res.artifacts.add("plot.csv", plot_csv(plot));
  res.status = rep.all_pass() ? 0 : 3;
  res.summary = std::to_string(rep.data.size()) + " data, min cost margin " +
                format_number(rep.data.empty() ? 0.0 : rep.min_cost_margin());
  return res;
}

}  // namespace detail

/// Computes every artifact in memory. Nothing is written here.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.needs_seed() && !cfg.seed) throw ConfigError("random data requested but no seed given");
  const Json echo = config_echo(cfg);
  return std::visit(
      [&](const auto& p) -> RunResult {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, BoundsSweepParams>) return detail::run_bounds(cfg, p, echo);
        else if constexpr (std::is_same_v<P, CertifyParams>) return detail::run_certify(cfg, p, echo);
        else if constexpr (std::is_same_v<P, IntertwineParams>) return detail::run_intertwine(cfg, p, echo);
        else return detail::run_transfer(cfg, p, echo);
      },
      cfg.params);
}

/// run_experiment followed by writing the artifacts and, last, manifest.json.
inline RunResult run(const ExperimentConfig& cfg) {
  if (!cfg.out_dir) throw ConfigError("no output directory given");
  RunResult res = run_experiment(cfg);
  res.artifacts.write(*cfg.out_dir, config_echo(cfg));
  return res;
}

}  // namespace reflect
