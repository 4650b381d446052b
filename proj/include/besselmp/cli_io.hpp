#pragma once

// Run configuration (key=value or flat JSON), BMPF field files, CSV writers,
// and the per-mode orchestration behind the bessel-mp command.

#include "besselmp/kernels.hpp"
#include "besselmp/solvers.hpp"
#include "besselmp/verify.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace besselmp {

inline constexpr const char* artifact_version = "0.1.0";

// ---------------------------------------------------------------------------
// BMPF: "BMPF", u32 version, u8 dim, u64 n, f64 length per axis, f64 values,
// all little-endian, values row-major.

inline constexpr std::uint32_t bmpf_version = 1;

class field_format_error : public std::runtime_error {
public:
  field_format_error(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

private:
  std::uint64_t offset_;
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

template <class T>
T get_le(const std::string& in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_field(const Field& u) {
  const Grid& g = u.grid();
  std::string out = "BMPF";
  detail::put_le<std::uint32_t>(out, bmpf_version);
  out.push_back(static_cast<char>(g.dim));
  detail::put_le<std::uint64_t>(out, g.n);
  for (int d = 0; d < g.dim; ++d) detail::put_le(out, std::bit_cast<std::uint64_t>(g.length[d]));
  for (double v : u.values()) detail::put_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Field decode_field(const std::string& bytes) {
  std::size_t at = 0;
  auto need = [&](std::size_t k, const std::string& what) {
    if (bytes.size() - at < k) throw field_format_error("truncated file: missing " + what, bytes.size());
  };
  static constexpr char magic[] = "BMPF";
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size()) throw field_format_error("truncated file: missing magic", bytes.size());
    if (bytes[i] != magic[i]) throw field_format_error("bad magic (expected \"BMPF\")", i);
  }
  at = 4;
  need(4, "version");
  const auto version = detail::get_le<std::uint32_t>(bytes, at);
  if (version != bmpf_version)
    throw field_format_error("unsupported BMPF version " + std::to_string(version) + " (reader supports " +
                                 std::to_string(bmpf_version) + ")",
                             at);
  at += 4;
  need(1, "dimension");
  const int dim = static_cast<unsigned char>(bytes[at]);
  if (dim < 1 || dim > 3) throw field_format_error("dimension " + std::to_string(dim) + " outside 1..3", at);
  at += 1;
  need(8, "point count");
  const auto n = detail::get_le<std::uint64_t>(bytes, at);
  if (n < 8) throw field_format_error("point count " + std::to_string(n) + " below 8", at);
  at += 8;
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  for (int d = 0; d < dim; ++d) {
    need(8, "box length");
    lengths[d] = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, at));
    if (!(std::isfinite(lengths[d]) && lengths[d] > 0.0))
      throw field_format_error("box length must be positive and finite", at);
    at += 8;
  }
  if (std::pow(static_cast<double>(n), dim) * 8.0 > static_cast<double>(bytes.size() - at))
    throw field_format_error("truncated file: missing values", bytes.size());
  std::uint64_t count = 1;
  for (int d = 0; d < dim; ++d) count *= n;
  const Grid g = make_grid(dim, static_cast<std::size_t>(n), lengths);
  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i, at += 8) {
    values[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, at));
    if (!std::isfinite(values[i])) throw field_format_error("non-finite value", at);
  }
  if (at != bytes.size()) throw field_format_error("trailing bytes after payload", at);
  return Field(g, std::move(values));
}

inline void save_field(const std::filesystem::path& path, const Field& u) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = encode_field(u);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline Field load_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_field(buf.str());
}

// ---------------------------------------------------------------------------
// Configuration

enum class RunMode { solve, two_solutions, verify, probe_geometry, kernel_table };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::two_solutions: return "two-solutions";
    case RunMode::verify: return "verify";
    case RunMode::probe_geometry: return "probe-geometry";
    case RunMode::kernel_table: return "kernel-table";
    default: return "solve";
  }
}

inline std::optional<RunMode> parse_mode(std::string_view s) {
  for (RunMode m : {RunMode::solve, RunMode::two_solutions, RunMode::verify, RunMode::probe_geometry,
                    RunMode::kernel_table})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{"superquadratic", "mass_split", "splitting", "coercivity",
                                              "sublevel",       "holder",     "embedding"};
  return names;
}

struct RunConfig {
  RunMode mode = RunMode::solve;
  // grid
  int dim = 1;
  std::size_t n = 256;
  double box_length = 40.0;
  // problem
  double alpha = 0.75;
  double lambda = 1.0;
  double mu = 0.01;
  double p = 1.5;
  double q = 4.0;
  std::string potential = "coercive";  // coercive | well | constant
  double well_r0 = 1.0;
  double well_height = 50.0;
  double well_width = 1.0;
  double constant_value = 1.0;
  std::string xi = "gaussian";
  // solvers
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  std::size_t path_nodes = 41;
  std::vector<double> rho_grid;  // empty: derived from the ray through the ground bump
  std::size_t samples_per_rho = 64;
  std::string metric = "automatic";
  double delta = 1e-3;
  bool sweep = false;
  std::vector<double> sweep_lambda{100.0, 200.0, 400.0};
  std::vector<double> sweep_mu{0.05, 0.02, 0.01};
  // verify
  std::vector<std::string> checks;  // empty: defaults for the potential
  double tau = 1.5;
  double scan_lo = 1e-3;
  double scan_hi = 1e3;
  double mass_split_lambda = 100.0;
  double mass_split_b = 10.0;
  std::size_t mass_split_trials = 100;
  std::vector<double> separations;  // empty: 0, 0.5, ... up to 15 or the box limit
  std::vector<double> coercivity_radii{0.0, 2.0, 4.0, 8.0, 16.0};
  double sublevel_b = 0.0;    // 0: the well height, or 1 for other potentials
  double holder_beta = 0.0;   // 0: 0.9 * 2 alpha
  std::string holder_field;   // BMPF file; empty runs the n -> 2n refinement study
  std::vector<double> embedding_s{2.0, 4.0};
  std::size_t embedding_trials = 1000;
  std::size_t embedding_band = 0;
  // kernel table
  std::vector<double> kernel_alpha{0.5, 1.0, 1.5, 2.0};
  std::vector<double> kernel_dim{1.0, 2.0, 3.0};
  std::vector<double> kernel_radii{0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  // run
  std::uint64_t seed = 1;
  std::string out = "out";
};

class config_error : public std::invalid_argument {
public:
  explicit config_error(std::vector<std::string> errors)
      : std::invalid_argument(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s = "invalid configuration:";
    for (const auto& m : e) s += "\n  " + m;
    return s;
  }
  std::vector<std::string> errors_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline nlohmann::json scalar_value(const std::string& token) {
  if (token == "true") return true;
  if (token == "false") return false;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec == std::errc() && ptr == token.data() + token.size()) return v;
  return token;
}

inline nlohmann::json text_value(const std::string& raw) {
  if (raw.find(',') == std::string::npos) return scalar_value(raw);
  nlohmann::json arr = nlohmann::json::array();
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) arr.push_back(scalar_value(trim(item)));
  return arr;
}

struct KeyDef {
  std::function<void(RunConfig&, const nlohmann::json&, std::vector<std::string>&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

template <class T>
KeyDef number_key(T RunConfig::*member) {
  return {[member](RunConfig& c, const nlohmann::json& v, std::vector<std::string>& errors) {
            if (!v.is_number()) {
              errors.push_back("expects a number, got " + v.dump());
              return;
            }
            const double x = v.get<double>();
            if constexpr (std::is_integral_v<T>) {
              if (x < 0.0 || x != std::floor(x) || x > 9.007199254740992e15) {
                errors.push_back("expects a non-negative integer, got " + v.dump());
                return;
              }
            }
            c.*member = static_cast<T>(x);
          },
          [member](const RunConfig& c) { return nlohmann::json(c.*member); }};
}

inline KeyDef string_key(std::string RunConfig::*member) {
  return {[member](RunConfig& c, const nlohmann::json& v, std::vector<std::string>& errors) {
            if (v.is_string()) c.*member = v.get<std::string>();
            else if (v.is_number()) c.*member = v.dump();
            else errors.push_back("expects a string, got " + v.dump());
          },
          [member](const RunConfig& c) { return nlohmann::json(c.*member); }};
}

inline KeyDef bool_key(bool RunConfig::*member) {
  return {[member](RunConfig& c, const nlohmann::json& v, std::vector<std::string>& errors) {
            if (v.is_boolean()) c.*member = v.get<bool>();
            else errors.push_back("expects true or false, got " + v.dump());
          },
          [member](const RunConfig& c) { return nlohmann::json(c.*member); }};
}

inline KeyDef list_key(std::vector<double> RunConfig::*member) {
  return {[member](RunConfig& c, const nlohmann::json& v, std::vector<std::string>& errors) {
            std::vector<double> out;
            const nlohmann::json arr = v.is_array() ? v : nlohmann::json::array({v});
            for (const auto& x : arr) {
              if (!x.is_number()) {
                errors.push_back("expects a list of numbers, got " + v.dump());
                return;
              }
              out.push_back(x.get<double>());
            }
            c.*member = std::move(out);
          },
          [member](const RunConfig& c) { return nlohmann::json(c.*member); }};
}

inline KeyDef string_list_key(std::vector<std::string> RunConfig::*member) {
  return {[member](RunConfig& c, const nlohmann::json& v, std::vector<std::string>& errors) {
            std::vector<std::string> out;
            const nlohmann::json arr = v.is_array() ? v : nlohmann::json::array({v});
            for (const auto& x : arr) {
              if (!x.is_string()) {
                errors.push_back("expects a list of names, got " + v.dump());
                return;
              }
              out.push_back(x.get<std::string>());
            }
            c.*member = std::move(out);
          },
          [member](const RunConfig& c) { return nlohmann::json(c.*member); }};
}

inline const std::map<std::string, KeyDef>& config_keys() {
  static const std::map<std::string, KeyDef> keys = [] {
    std::map<std::string, KeyDef> k;
    k["mode"] = {[](RunConfig& c, const nlohmann::json& v, std::vector<std::string>& errors) {
                   const auto m = v.is_string() ? parse_mode(v.get<std::string>()) : std::nullopt;
                   if (m) c.mode = *m;
                   else errors.push_back("unknown mode " + v.dump() +
                                         " (solve, two-solutions, verify, probe-geometry, kernel-table)");
                 },
                 [](const RunConfig& c) { return nlohmann::json(to_string(c.mode)); }};
    k["dim"] = number_key(&RunConfig::dim);
    k["n"] = number_key(&RunConfig::n);
    k["box_length"] = number_key(&RunConfig::box_length);
    k["alpha"] = number_key(&RunConfig::alpha);
    k["lambda"] = number_key(&RunConfig::lambda);
    k["mu"] = number_key(&RunConfig::mu);
    k["p"] = number_key(&RunConfig::p);
    k["q"] = number_key(&RunConfig::q);
    k["potential"] = string_key(&RunConfig::potential);
    k["well_r0"] = number_key(&RunConfig::well_r0);
    k["well_height"] = number_key(&RunConfig::well_height);
    k["well_width"] = number_key(&RunConfig::well_width);
    k["constant_value"] = number_key(&RunConfig::constant_value);
    k["xi"] = string_key(&RunConfig::xi);
    k["tol"] = number_key(&RunConfig::tol);
    k["max_iter"] = number_key(&RunConfig::max_iter);
    k["path_nodes"] = number_key(&RunConfig::path_nodes);
    k["rho_grid"] = list_key(&RunConfig::rho_grid);
    k["samples_per_rho"] = number_key(&RunConfig::samples_per_rho);
    k["metric"] = string_key(&RunConfig::metric);
    k["delta"] = number_key(&RunConfig::delta);
    k["sweep"] = bool_key(&RunConfig::sweep);
    k["sweep_lambda"] = list_key(&RunConfig::sweep_lambda);
    k["sweep_mu"] = list_key(&RunConfig::sweep_mu);
    k["checks"] = string_list_key(&RunConfig::checks);
    k["tau"] = number_key(&RunConfig::tau);
    k["scan_lo"] = number_key(&RunConfig::scan_lo);
    k["scan_hi"] = number_key(&RunConfig::scan_hi);
    k["mass_split_lambda"] = number_key(&RunConfig::mass_split_lambda);
    k["mass_split_b"] = number_key(&RunConfig::mass_split_b);
    k["mass_split_trials"] = number_key(&RunConfig::mass_split_trials);
    k["separations"] = list_key(&RunConfig::separations);
    k["coercivity_radii"] = list_key(&RunConfig::coercivity_radii);
    k["sublevel_b"] = number_key(&RunConfig::sublevel_b);
    k["holder_beta"] = number_key(&RunConfig::holder_beta);
    k["holder_field"] = string_key(&RunConfig::holder_field);
    k["embedding_s"] = list_key(&RunConfig::embedding_s);
    k["embedding_trials"] = number_key(&RunConfig::embedding_trials);
    k["embedding_band"] = number_key(&RunConfig::embedding_band);
    k["kernel_alpha"] = list_key(&RunConfig::kernel_alpha);
    k["kernel_dim"] = list_key(&RunConfig::kernel_dim);
    k["kernel_radii"] = list_key(&RunConfig::kernel_radii);
    k["seed"] = number_key(&RunConfig::seed);
    k["out"] = string_key(&RunConfig::out);
    return k;
  }();
  return keys;
}

inline bool increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

}  // namespace detail

/// Entries of a config text in file order: key=value lines ('#' starts a
/// comment, lists are comma-separated) or one flat JSON object. Syntax
/// problems and repeated keys are appended to errors.
inline std::vector<std::pair<std::string, nlohmann::json>> parse_entries(const std::string& text,
                                                                         std::vector<std::string>& errors) {
  std::vector<std::pair<std::string, nlohmann::json>> entries;
  const std::string body = detail::trim(text);
  if (!body.empty() && body.front() == '{') {
    std::vector<std::string> order;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body, [&](int depth, nlohmann::json::parse_event_t ev, nlohmann::json& parsed) {
        if (ev == nlohmann::json::parse_event_t::key && depth == 1) order.push_back(parsed.get<std::string>());
        return true;
      });
    } catch (const nlohmann::json::parse_error& ex) {
      errors.push_back(std::string("JSON syntax: ") + ex.what());
      return entries;
    }
    // nlohmann keeps the last duplicate; the callback saw every key
    std::map<std::string, int> seen;
    for (const auto& key : order) {
      if (seen[key]++ == 1) errors.push_back("key '" + key + "' given more than once");
      if (seen[key] == 1) entries.emplace_back(key, doc[key]);
    }
    for (const auto& [key, value] : entries)
      if (value.is_object() || value.is_null()) errors.push_back(key + ": nested objects and null are not allowed");
    return entries;
  }

  std::map<std::string, std::string> first_value;
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
      continue;
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string raw = detail::trim(t.substr(eq + 1));
    if (key.empty() || raw.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }
    if (const auto it = first_value.find(key); it != first_value.end()) {
      errors.push_back("line " + std::to_string(lineno) + ": key '" + key + "' given more than once ('" +
                       it->second + "' and '" + raw + "')");
      continue;
    }
    first_value[key] = raw;
    entries.emplace_back(key, detail::text_value(raw));
  }
  return entries;
}

inline ProblemSpec make_spec(const RunConfig& c) {
  const std::array<double, 3> lengths{c.box_length, c.box_length, c.box_length};
  ProblemParams p;
  p.alpha = c.alpha;
  p.lambda = c.lambda;
  p.mu = c.mu;
  p.p = c.p;
  p.nonlinearity = PowerNonlinearity{c.q};
  if (c.potential == "well") p.potential = WellPotential{c.well_r0, c.well_height, c.well_width};
  else if (c.potential == "constant") p.potential = ConstantPotential{c.constant_value};
  else p.potential = CoercivePotential{};
  p.weight = GaussianWeight{};
  return ProblemSpec(make_grid(c.dim, c.n, lengths), p);
}

/// Every range violation in c, in a fixed order.
inline std::vector<std::string> validate_config(const RunConfig& c) {
  std::vector<std::string> e;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) e.push_back(msg);
  };
  require(c.dim >= 1 && c.dim <= 3, "dim must be 1, 2 or 3");
  require(c.n >= 8, "n must be at least 8");
  require(c.box_length > 0.0 && std::isfinite(c.box_length), "box_length must be positive");
  require(c.alpha > 0.0 && c.alpha < 1.0, "alpha = " + std::to_string(c.alpha) + " violates 0 < alpha < 1");
  require(c.lambda > 0.0, "lambda = " + std::to_string(c.lambda) + " violates lambda > 0");
  require(c.mu >= 0.0, "mu = " + std::to_string(c.mu) + " violates mu >= 0");
  require(c.p > 1.0 && c.p < 2.0, "p = " + std::to_string(c.p) + " violates 1 < p < 2");
  require(c.q > 2.0, "q = " + std::to_string(c.q) + " violates q > 2");
  require(c.potential == "coercive" || c.potential == "well" || c.potential == "constant",
          "potential must be coercive, well or constant");
  if (c.potential == "well") {
    require(c.well_r0 > 0.0, "well_r0 must be positive");
    require(c.well_height > 0.0, "well_height must be positive");
    require(c.well_width > 0.0, "well_width must be positive");
  }
  if (c.potential == "constant") require(c.constant_value >= 0.0, "constant_value must be non-negative");
  require(c.xi == "gaussian", "xi must be gaussian");
  require(c.tol > 0.0, "tol must be positive");
  require(c.max_iter >= 1, "max_iter must be at least 1");
  require(c.path_nodes >= 3, "path_nodes must be at least 3");
  require(c.samples_per_rho >= 1, "samples_per_rho must be at least 1");
  require(c.rho_grid.empty() || (c.rho_grid.front() > 0.0 && detail::increasing(c.rho_grid)),
          "rho_grid must be positive and strictly increasing");
  require(c.metric == "automatic" || c.metric == "weighted" || c.metric == "bessel",
          "metric must be automatic, weighted or bessel");
  require(c.delta > 0.0, "delta must be positive");
  require(!c.sweep_lambda.empty() && !c.sweep_mu.empty(), "sweep_lambda and sweep_mu must be non-empty");
  for (double l : c.sweep_lambda) require(l > 0.0, "sweep_lambda entries must be positive");
  for (double m : c.sweep_mu) require(m >= 0.0, "sweep_mu entries must be non-negative");
  for (const auto& name : c.checks)
    require(std::find(known_checks().begin(), known_checks().end(), name) != known_checks().end(),
            "unknown check '" + name + "'");
  require(c.scan_lo > 0.0 && c.scan_hi > c.scan_lo, "need 0 < scan_lo < scan_hi");
  require(c.mass_split_lambda > 0.0, "mass_split_lambda must be positive");
  require(c.mass_split_b > 0.0, "mass_split_b must be positive");
  require(c.mass_split_trials >= 1, "mass_split_trials must be at least 1");
  require(c.separations.empty() || (c.separations.front() >= 0.0 && detail::increasing(c.separations)),
          "separations must be non-negative and strictly increasing");
  require(!c.coercivity_radii.empty() && c.coercivity_radii.front() >= 0.0 && detail::increasing(c.coercivity_radii),
          "coercivity_radii must be non-negative and strictly increasing");
  require(c.holder_beta >= 0.0 && c.holder_beta < 2.0, "holder_beta must lie in [0, 2)");
  for (double s : c.embedding_s) require(s >= 2.0, "embedding_s entries must be at least 2");
  require(c.embedding_trials >= 1, "embedding_trials must be at least 1");
  for (double a : c.kernel_alpha) require(a > 0.0, "kernel_alpha entries must be positive");
  for (double d : c.kernel_dim) require(d == 1.0 || d == 2.0 || d == 3.0, "kernel_dim entries must be 1, 2 or 3");
  for (double r : c.kernel_radii) require(r > 0.0, "kernel_radii entries must be positive");
  require(!c.out.empty(), "out must be a directory path");
  if (e.empty()) {
    try {
      make_spec(c);
    } catch (const invalid_spec& ex) {
      for (const auto& m : ex.errors()) e.push_back(m);
    } catch (const std::exception& ex) {
      e.push_back(ex.what());
    }
  }
  return e;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, def] : detail::config_keys()) j[key] = def.get(c);
  return j;
}

/// Applies entries on top of the defaults and validates; throws config_error
/// listing every problem found.
inline RunConfig parse_config(const std::string& text) {
  std::vector<std::string> errors;
  const auto entries = parse_entries(text, errors);
  RunConfig c;
  const auto& keys = detail::config_keys();
  for (const auto& [key, value] : entries) {
    const auto it = keys.find(key);
    if (it == keys.end()) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    std::vector<std::string> local;
    it->second.set(c, value, local);
    for (const auto& m : local) errors.push_back(key + ": " + m);
  }
  if (errors.empty()) errors = validate_config(c);
  else
    for (const auto& m : validate_config(c)) errors.push_back(m);
  if (!errors.empty()) throw config_error(std::move(errors));
  return c;
}

// ---------------------------------------------------------------------------
// Reports

struct StageReport {
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  nlohmann::json result = nlohmann::json::object();
};

struct RunReport {
  std::string version = artifact_version;
  std::string mode;
  nlohmann::json config = nlohmann::json::object();
  std::vector<StageReport> stages;

  bool passed() const {
    if (stages.empty()) return false;
    for (const auto& s : stages)
      if (!s.passed) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stages)
      st.push_back({{"name", s.name},
                    {"status", s.passed ? "PASSED" : "FAILED"},
                    {"seconds", s.seconds},
                    {"result", s.result}});
    return {{"artifact_version", version},
            {"mode", mode},
            {"status", passed() ? "PASSED" : "FAILED"},
            {"config", config},
            {"stages", st}};
  }

  static RunReport from_json(const nlohmann::json& j) {
    RunReport r;
    r.version = j.at("artifact_version").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.config = j.at("config");
    for (const auto& s : j.at("stages"))
      r.stages.push_back({s.at("name").get<std::string>(), s.at("status").get<std::string>() == "PASSED",
                          s.at("seconds").get<double>(), s.at("result")});
    return r;
  }
};

/// 0 iff every requested stage passed.
inline int exit_code(const RunReport& r) { return r.passed() ? 0 : 1; }

inline nlohmann::json summarize(const GeometryProbe& p) {
  return {{"rho", p.rho},
          {"eta", p.eta},
          {"mu0_estimate", p.mu0_estimate},
          {"e_norm", p.e_norm},
          {"e_energy", p.e_energy},
          {"sample_count", p.sample_count},
          {"rho_grid", p.rho_grid},
          {"sphere_minima", p.sphere_minima}};
}

inline nlohmann::json summarize(const ProblemSpec& spec, const SolveReport& s) {
  return {{"classification", to_string(s.classification)},
          {"converged", s.converged},
          {"energy", s.energy},
          {"residual_norm", s.residual_norm},
          {"lambda_norm", s.solution.size() ? lambda_norm(spec, s.solution) : 0.0},
          {"iterations", s.iterations},
          {"restarts", s.restarts},
          {"climb_start", s.climb_start},
          {"message", s.message}};
}

inline void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  out << std::setprecision(17) << "iter,energy,residual_norm,step_size,max_node_index\n";
  for (const auto& r : trace)
    out << r.iter << ',' << r.energy << ',' << r.residual_norm << ',' << r.step_size << ',' << r.max_node_index << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// Grid coordinates followed by one column per named field.
inline void write_profile_csv(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, const Field*>>& fields) {
  if (fields.empty()) return;
  const Grid& g = fields.front().second->grid();
  std::ofstream out(path);
  out << std::setprecision(17);
  static constexpr const char* axes[] = {"x", "y", "z"};
  for (int d = 0; d < g.dim; ++d) out << (d ? "," : "") << axes[d];
  for (const auto& [name, f] : fields) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.point(i);
    for (int d = 0; d < g.dim; ++d) out << (d ? "," : "") << x[d];
    for (const auto& [name, f] : fields) out << ',' << (*f)[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

namespace detail {

inline MetricKind metric_kind(const std::string& s) {
  if (s == "weighted") return MetricKind::weighted;
  if (s == "bessel") return MetricKind::bessel;
  return MetricKind::automatic;
}

inline ProbeOptions probe_options(const RunConfig& c) {
  ProbeOptions o;
  o.rho_grid = c.rho_grid;
  o.samples_per_rho = c.samples_per_rho;
  o.seed = c.seed;
  o.metric = metric_kind(c.metric);
  return o;
}

inline MountainPassOptions mountain_pass_options(const RunConfig& c) {
  MountainPassOptions o;
  o.path_nodes = c.path_nodes;
  o.tol = c.tol;
  o.max_iter = c.max_iter;
  o.metric = metric_kind(c.metric);
  o.seed = c.seed;
  return o;
}

inline BallOptions ball_options(const RunConfig& c) {
  BallOptions o;
  o.tol = c.tol;
  o.max_iter = c.max_iter;
  o.metric = metric_kind(c.metric);
  return o;
}

/// Assumptions each potential class is meant to satisfy.
inline std::vector<std::string> expected_assumptions(const std::string& potential) {
  if (potential == "well") return {"f1", "f2", "f3", "V3", "V4", "xi"};
  return {"f1", "f2", "f3", "V1", "V2", "xi"};
}

inline std::vector<std::string> default_checks(const std::string& potential) {
  if (potential == "well") return {"superquadratic", "mass_split", "sublevel", "embedding"};
  if (potential == "constant") return {"superquadratic", "splitting", "embedding"};
  return {"superquadratic", "splitting", "coercivity", "embedding", "holder"};
}

class Runner {
public:
  Runner(const RunConfig& c) : cfg_(c), dir_(c.out) {
    std::filesystem::create_directories(dir_);
    report_.mode = to_string(c.mode);
    report_.config = config_to_json(c);
  }

  /// Runs body, timing it; an exception marks the stage failed with its
  /// message and stops later stages when fatal is set.
  bool stage(const std::string& name, const std::function<bool(nlohmann::json&)>& body) {
    StageReport s;
    s.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      s.passed = body(s.result);
    } catch (const std::exception& ex) {
      s.passed = false;
      s.result["error"] = ex.what();
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report_.stages.push_back(std::move(s));
    return report_.stages.back().passed;
  }

  const RunConfig& cfg() const { return cfg_; }
  const std::filesystem::path& dir() const { return dir_; }
  RunReport& report() { return report_; }

  void finish() {
    std::ofstream out(dir_ / "report.json");
    out << report_.to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir_ / "report.json").string());
  }

private:
  RunConfig cfg_;
  std::filesystem::path dir_;
  RunReport report_;
};

inline void assumptions_stage(Runner& run, const ProblemSpec& spec) {
  run.stage("assumptions", [&](nlohmann::json& out) {
    const ValidationReport v = validate_assumptions(spec);
    bool ok = true;
    const auto expected = expected_assumptions(run.cfg().potential);
    for (const auto& c : v.checks) {
      out[c.name] = {{"pass", c.pass}, {"advisory", c.advisory}, {"detail", c.detail}};
      if (std::find(expected.begin(), expected.end(), c.name) != expected.end()) ok = ok && c.pass;
    }
    out["required"] = expected;
    return ok;
  });
}

/// Stages for a finished experiment; seconds is its wall time, charged to the
/// summary stage.
inline void two_solution_stages(Runner& run, const ProblemSpec& spec, const TwoSolutionResult& res, double seconds) {
  run.stage("probe", [&](nlohmann::json& out) {
    if (res.failed_stage == "probe") {
      out["error"] = res.message;
      return false;
    }
    out = summarize(res.probe);
    save_field(run.dir() / "e.bmpf", res.probe.e);
    return true;
  });
  if (res.failed_stage == "probe") return;
  run.stage("mountain_pass", [&](nlohmann::json& out) {
    if (res.mountain_pass.solution.size() == 0) {
      out["error"] = res.message;
      return false;
    }
    out = summarize(spec, res.mountain_pass);
    save_field(run.dir() / "mountain_pass.bmpf", res.mountain_pass.solution);
    write_trace_csv(run.dir() / "trace.csv", res.mountain_pass.trace);
    out["field_file"] = "mountain_pass.bmpf";
    return res.mountain_pass.converged;
  });
  run.stage("ball_min", [&](nlohmann::json& out) {
    if (res.ball.solution.size() == 0) {
      out["error"] = res.message;
      return false;
    }
    out = summarize(spec, res.ball);
    save_field(run.dir() / "ball_min.bmpf", res.ball.solution);
    write_trace_csv(run.dir() / "trace_ball.csv", res.ball.trace);
    out["field_file"] = "ball_min.bmpf";
    return res.ball.converged;
  });
  if (res.mountain_pass.solution.size() && res.ball.solution.size())
    write_profile_csv(run.dir() / "profile.csv",
                      {{"mountain_pass", &res.mountain_pass.solution}, {"ball_min", &res.ball.solution}});
  run.stage("two_solutions", [&](nlohmann::json& out) {
    out = {{"lambda", spec.lambda()},
           {"mu", spec.mu()},
           {"m_lambda", res.ball.energy},
           {"eta", res.probe.eta},
           {"c_lambda", res.mountain_pass.energy},
           {"distinctness", res.distinctness},
           {"level_order_holds", res.ball.energy < 0.0 && 0.0 < res.probe.eta && res.probe.eta <= res.mountain_pass.energy},
           {"failed_stage", res.failed_stage},
           {"message", res.message}};
    return res.success;
  });
  run.report().stages.back().seconds += seconds;
}

inline void run_solve(Runner& run) {
  const ProblemSpec spec = make_spec(run.cfg());
  assumptions_stage(run, spec);
  GeometryProbe probe;
  if (!run.stage("probe", [&](nlohmann::json& out) {
        probe = probe_geometry(spec, probe_options(run.cfg()));
        out = summarize(probe);
        save_field(run.dir() / "e.bmpf", probe.e);
        return true;
      }))
    return;
  SolveReport mp;
  run.stage("mountain_pass", [&](nlohmann::json& out) {
    MountainPassOptions o = mountain_pass_options(run.cfg());
    o.rho = probe.rho;
    mp = mountain_pass_solve(spec, probe.e, o);
    out = summarize(spec, mp);
    out["eta"] = probe.eta;
    out["field_file"] = "mountain_pass.bmpf";
    save_field(run.dir() / "mountain_pass.bmpf", mp.solution);
    write_trace_csv(run.dir() / "trace.csv", mp.trace);
    write_profile_csv(run.dir() / "profile.csv", {{"mountain_pass", &mp.solution}});
    return mp.converged && mp.energy >= probe.eta - run.cfg().tol;
  });
  if (mp.snapshots.empty()) return;
  run.stage("ps_diagnostics", [&](nlohmann::json& out) {
    const PsReport ps = ps_diagnostics(spec, mp.snapshots);
    out = {{"iterates", ps.rows.size()},
           {"violations", ps.violations},
           {"max_norm", ps.max_norm},
           {"implied_bound", ps.implied_bound},
           {"level", ps.level},
           {"embedding_constant", ps.embedding_constant},
           {"xi_norm", ps.xi_norm}};
    return ps.violations == 0;
  });
}

inline void run_two_solutions(Runner& run) {
  const RunConfig& c = run.cfg();
  const ProblemSpec base = make_spec(c);
  TwoSolutionOptions opts;
  opts.probe = probe_options(c);
  opts.mountain_pass = mountain_pass_options(c);
  opts.ball = ball_options(c);
  opts.delta = c.delta;
  if (!c.sweep) {
    const auto t0 = std::chrono::steady_clock::now();
    const TwoSolutionResult res = two_solution_experiment(base, opts);
    two_solution_stages(run, base, res,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return;
  }
  std::vector<std::pair<double, double>> candidates;
  for (double l : c.sweep_lambda)
    for (double m : c.sweep_mu) candidates.emplace_back(l, m);
  std::vector<SweepEntry> entries;
  run.stage("sweep", [&](nlohmann::json& out) {
    entries = two_solution_sweep(base, candidates, opts);
    out["attempts"] = nlohmann::json::array();
    for (const auto& e : entries)
      out["attempts"].push_back({{"lambda", e.lambda},
                                 {"mu", e.mu},
                                 {"success", e.result.success},
                                 {"failed_stage", e.result.failed_stage},
                                 {"message", e.result.message}});
    return !entries.empty() && entries.back().result.success;
  });
  if (!entries.empty()) two_solution_stages(run, base.with_lambda(entries.back().lambda).with_mu(entries.back().mu),
                                            entries.back().result, 0.0);
}

inline void run_probe(Runner& run) {
  const ProblemSpec spec = make_spec(run.cfg());
  run.stage("probe", [&](nlohmann::json& out) {
    const GeometryProbe probe = probe_geometry(spec, probe_options(run.cfg()));
    out = summarize(probe);
    out["field_file"] = "e.bmpf";
    save_field(run.dir() / "e.bmpf", probe.e);
    return true;
  });
}

inline std::vector<double> default_separations(const ProblemSpec& spec, const Field& w) {
  const double limit = std::min(15.0, 0.5 * spec.grid().length[0] - effective_support_radius(w) - spec.grid().spacing(0));
  std::vector<double> s;
  for (double x = 0.0; x <= limit + 1e-12; x += 0.5) s.push_back(x);
  return s;
}

inline double solve_holder(const RunConfig& c, std::size_t n, double beta, nlohmann::json& out) {
  RunConfig fine = c;
  fine.n = n;
  const ProblemSpec spec = make_spec(fine);
  const GeometryProbe probe = probe_geometry(spec, probe_options(fine));
  MountainPassOptions o = mountain_pass_options(fine);
  o.rho = probe.rho;
  const SolveReport mp = mountain_pass_solve(spec, probe.e, o);
  const double h = holder_estimate(mp.solution, beta);
  out.push_back({{"n", n}, {"converged", mp.converged}, {"energy", mp.energy}, {"residual_norm", mp.residual_norm},
                 {"estimate", h}});
  if (!mp.converged) throw solver_error("mountain pass did not converge at n = " + std::to_string(n));
  return h;
}

inline void run_verify(Runner& run) {
  const RunConfig& c = run.cfg();
  const ProblemSpec spec = make_spec(c);
  const std::vector<std::string> checks = c.checks.empty() ? default_checks(c.potential) : c.checks;
  auto record_stage = [&](const std::string& name, const std::function<CheckRecord()>& body) {
    run.stage(name, [&](nlohmann::json& out) {
      const CheckRecord rec = body();
      out = rec.to_json();
      return rec.pass;
    });
  };
  for (const auto& name : checks) {
    if (name == "superquadratic") {
      record_stage(name, [&] { return check_superquadratic_bound(spec, c.tau, c.scan_lo, c.scan_hi).record; });
    } else if (name == "mass_split") {
      record_stage(name, [&] {
        if (c.potential != "well") throw std::invalid_argument("mass_split needs potential = well");
        auto rec = check_mass_split(spec, c.mass_split_lambda, c.mass_split_b, c.mass_split_trials, c.seed).record;
        return rec;
      });
    } else if (name == "splitting") {
      record_stage(name, [&] {
        const Field u0 = Field::from_function(spec.grid(), [](std::span<const double> x) {
          double r2 = 0.0;
          for (double v : x) r2 += v * v;
          return std::exp(-r2);
        });
        const auto seps = c.separations.empty() ? default_separations(spec, u0) : c.separations;
        return check_splitting(spec, u0, u0, seps).record;
      });
    } else if (name == "coercivity") {
      record_stage(name, [&] {
        const double b = c.sublevel_b > 0.0 ? c.sublevel_b : 1.0;
        return coercivity_probe(spec.params().potential, c.dim, c.coercivity_radii, b).record;
      });
    } else if (name == "sublevel") {
      record_stage(name, [&] {
        CheckRecord rec;
        rec.checker = "sublevel_measure";
        const double b = c.sublevel_b > 0.0 ? c.sublevel_b : (c.potential == "well" ? c.well_height : 1.0);
        rec.params = {{"b", b}};
        rec.witnesses.push_back({{"measure", superlevel_measure(spec.potential(), b)}});
        rec.pass = true;
        return rec;
      });
    } else if (name == "holder") {
      record_stage(name, [&] {
        CheckRecord rec;
        rec.checker = "holder";
        const double beta = c.holder_beta > 0.0 ? c.holder_beta : std::min(0.9 * 2.0 * c.alpha, 1.99);
        rec.params = {{"beta", beta}};
        if (!c.holder_field.empty()) {
          const Field u = load_field(c.holder_field);
          rec.params["field"] = c.holder_field;
          rec.witnesses.push_back({{"estimate", holder_estimate(u, beta)}});
          rec.pass = true;
          return rec;
        }
        const double coarse = solve_holder(c, c.n, beta, rec.witnesses);
        const double fine = solve_holder(c, 2 * c.n, beta, rec.witnesses);
        const double drift = std::abs(fine / coarse - 1.0);
        rec.params["relative_drift"] = drift;
        rec.params["drift_limit"] = 0.05;
        rec.pass = drift < 0.05;
        return rec;
      });
    } else if (name == "embedding") {
      record_stage(name, [&] {
        return estimate_embedding_constants(c.alpha, spec.grid(), c.embedding_s, c.embedding_trials, c.seed,
                                            c.embedding_band)
            .record;
      });
    }
  }
}

inline void run_kernel_table(Runner& run) {
  const RunConfig& c = run.cfg();
  run.stage("kernel_table", [&](nlohmann::json& out) {
    std::ofstream csv(run.dir() / "kernel_table.csv");
    csv << std::setprecision(17) << "radius,alpha,dim,G_value,est_error\n";
    std::size_t rows = 0;
    nlohmann::json failures = nlohmann::json::array();
    for (double d : c.kernel_dim)
      for (double a : c.kernel_alpha)
        for (double r : c.kernel_radii) {
          try {
            const KernelEval k = bessel_kernel(r, a, static_cast<int>(d));
            csv << k.radius << ',' << k.order << ',' << k.dim << ',' << k.value << ',' << k.est_error << '\n';
            ++rows;
          } catch (const std::exception& ex) {
            failures.push_back({{"radius", r}, {"alpha", a}, {"dim", d}, {"error", ex.what()}});
          }
        }
    if (!csv) throw std::runtime_error("cannot write kernel_table.csv");
    out = {{"rows", rows}, {"file", "kernel_table.csv"}, {"failures", failures}};
    return failures.empty();
  });
}

}  // namespace detail

/// Executes the configured mode, writing report.json plus the mode's traces,
/// profiles and BMPF fields into config.out. Stage failures are recorded in
/// the report, never thrown.
inline RunReport run(const RunConfig& config) {
  detail::Runner r(config);
  switch (config.mode) {
    case RunMode::solve: detail::run_solve(r); break;
    case RunMode::two_solutions: detail::run_two_solutions(r); break;
    case RunMode::verify: detail::run_verify(r); break;
    case RunMode::probe_geometry: detail::run_probe(r); break;
    case RunMode::kernel_table: detail::run_kernel_table(r); break;
  }
  r.finish();
  return r.report();
}

}  // namespace besselmp
