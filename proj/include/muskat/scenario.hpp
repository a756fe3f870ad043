#ifndef MUSKAT_SCENARIO_HPP
#define MUSKAT_SCENARIO_HPP

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "muskat/diagnostics.hpp"
#include "muskat/errors.hpp"
#include "muskat/functionals.hpp"
#include "muskat/grid.hpp"
#include "muskat/jko.hpp"
#include "muskat/pde_ref.hpp"

namespace muskat {

using json = nlohmann::json;

/// Named initial pair. Unset lists and zero lengths take preset defaults at parse time.
struct InitialProfile {
  std::string preset = "offset-bump";
  std::vector<double> centers;  ///< one per component
  double radius = 0.0;          ///< offset-bump support half-width
  double power = 3.0;           ///< offset-bump profile (1 - s^2)^power
  std::vector<double> widths;   ///< gaussian-pair standard deviations

  friend bool operator==(const InitialProfile&, const InitialProfile&) = default;
};

struct OutputConfig {
  std::string directory = "runs/default";
  std::vector<double> output_times;  ///< empty: {0, T}

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ScenarioConfig {
  double length = 1.0;
  std::size_t cells = 128;
  ModelParams params;
  std::size_t steps = 100;
  JkoConfig jko;
  std::optional<PdeConfig> pde;
  InitialProfile profile;
  OutputConfig outputs;

  Grid grid() const { return Grid(length, cells); }
  double final_time() const { return static_cast<double>(steps) * params.tau; }

  /// Output times with the {0, T} default applied.
  std::vector<double> snapshot_times() const {
    if (!outputs.output_times.empty()) return outputs.output_times;
    return {0.0, final_time()};
  }

  /// Profile with the preset defaults for this domain length filled in.
  InitialProfile resolved_profile() const;

  void validate() const;
};

/// Minimum distance in cells between a non-flat support and the walls.
inline constexpr double kClearanceCells = 10.0;

namespace detail {

inline void check_keys(const json& obj, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("section '" + section + "' must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in section '" + section + "'");
  }
}

inline double get_number(const json& obj, const std::string& section, const char* key) {
  if (!obj.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in section '" + section + "'");
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(section + "." + key + " must be a number");
  return v.get<double>();
}

inline double get_number(const json& obj, const std::string& section, const char* key, double fallback) {
  return obj.contains(key) ? get_number(obj, section, key) : fallback;
}

inline std::size_t get_count(const json& obj, const std::string& section, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(section + "." + key + " must be a nonnegative integer");
  }
  return static_cast<std::size_t>(v.get<long long>());
}

inline std::vector<double> get_list(const json& obj, const std::string& section, const char* key) {
  if (!obj.contains(key)) return {};
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(section + "." + key + " must be an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) throw ConfigError(section + "." + key + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline void fill_profile_defaults(InitialProfile& pr, double L) {
  if (pr.preset == "offset-bump") {
    if (pr.centers.empty()) pr.centers = {0.35 * L, 0.65 * L};
    if (pr.radius == 0.0) pr.radius = 0.25 * L;
  } else if (pr.preset == "gaussian-pair") {
    if (pr.centers.empty()) pr.centers = {0.35 * L, 0.65 * L};
    if (pr.widths.empty()) pr.widths = {0.06 * L, 0.06 * L};
  }
}

/// Support half-width of component k, or a negative value for full support.
inline double support_radius(const InitialProfile& pr, std::size_t k) {
  if (pr.preset == "offset-bump") return pr.radius;
  if (pr.preset == "gaussian-pair") return 4.0 * pr.widths[k];
  return -1.0;
}

inline void validate_profile(const InitialProfile& pr, const Grid& grid) {
  if (pr.preset == "flat") return;
  if (pr.preset != "offset-bump" && pr.preset != "gaussian-pair") {
    throw ConfigError("unknown initial profile preset '" + pr.preset + "'");
  }
  if (pr.centers.size() != 2) throw ConfigError(pr.preset + ": exactly two centers required");
  if (pr.preset == "offset-bump") {
    if (!(pr.radius > 0.0) || !std::isfinite(pr.radius)) throw ConfigError("offset-bump: radius > 0 required");
    if (!(pr.power >= 2.0) || !std::isfinite(pr.power)) throw ConfigError("offset-bump: power >= 2 required");
  } else {
    if (pr.widths.size() != 2) throw ConfigError("gaussian-pair: exactly two widths required");
    for (double w : pr.widths) {
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("gaussian-pair: widths > 0 required");
    }
  }
  const double clearance = kClearanceCells * grid.dx();
  for (std::size_t k = 0; k < 2; ++k) {
    const double r = support_radius(pr, k);
    const double lo = pr.centers[k] - r;
    const double hi = pr.centers[k] + r;
    if (!(lo >= clearance - 1e-12 * grid.length() && hi <= grid.length() - clearance + 1e-12 * grid.length())) {
      throw ConfigError(pr.preset + ": support [" + std::to_string(lo) + ", " + std::to_string(hi) +
                        "] lies closer than 10 dx to the boundary");
    }
  }
}

}  // namespace detail

inline InitialProfile ScenarioConfig::resolved_profile() const {
  InitialProfile pr = profile;
  detail::fill_profile_defaults(pr, length);
  return pr;
}

inline void ScenarioConfig::validate() const {
  const Grid g = grid();
  params.validate();
  jko.validate();
  if (steps == 0) throw ConfigError("jko: steps >= 1 required");
  if (pde) pde->validate(g);
  detail::validate_profile(resolved_profile(), g);
  double horizon = final_time();
  if (pde) horizon = std::max(horizon, pde->t_end);
  double last = -1.0;
  for (double t : outputs.output_times) {
    if (!std::isfinite(t) || t < 0.0 || t > horizon * (1.0 + 1e-12)) {
      throw ConfigError("outputs: output time " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]");
    }
    if (!(t > last)) throw ConfigError("outputs: output_times must increase strictly");
    last = t;
  }
  if (outputs.directory.empty()) throw ConfigError("outputs: directory must not be empty");
}

inline json to_json(const ScenarioConfig& c) {
  json j;
  j["grid"] = {{"L", c.length}, {"n", c.cells}};
  j["params"] = {{"A", c.params.A}, {"B", c.params.B}, {"a", c.params.a},
                 {"b", c.params.b}, {"c", c.params.c}, {"tau", c.params.tau}};
  j["jko"] = {{"steps", c.steps},
              {"inner_tol", c.jko.inner_tol},
              {"inner_max_iters", c.jko.inner_max_iters},
              {"positivity_floor", c.jko.positivity_floor},
              {"m_quadrature", c.jko.m_quadrature}};
  if (c.pde) j["pde"] = {{"dt", c.pde->dt}, {"t_end", c.pde->t_end}, {"theta", c.pde->theta}};
  const InitialProfile prof = c.resolved_profile();
  json pr = {{"preset", prof.preset}};
  if (prof.preset == "offset-bump") {
    pr["centers"] = prof.centers;
    pr["radius"] = prof.radius;
    pr["power"] = prof.power;
  } else if (prof.preset == "gaussian-pair") {
    pr["centers"] = prof.centers;
    pr["widths"] = prof.widths;
  }
  j["initial_profile"] = pr;
  j["outputs"] = {{"directory", c.outputs.directory}, {"output_times", c.outputs.output_times}};
  return j;
}

inline ScenarioConfig config_from_json(const json& j) {
  detail::check_keys(j, "<root>", {"grid", "params", "jko", "pde", "initial_profile", "outputs"});
  for (const char* required : {"grid", "params", "initial_profile"}) {
    if (!j.contains(required)) throw ConfigError("missing section '" + std::string(required) + "'");
  }
  ScenarioConfig c;

  const json& g = j.at("grid");
  detail::check_keys(g, "grid", {"L", "n"});
  c.length = detail::get_number(g, "grid", "L");
  if (!g.contains("n")) throw ConfigError("missing key 'n' in section 'grid'");
  c.cells = detail::get_count(g, "grid", "n", 0);

  const json& p = j.at("params");
  detail::check_keys(p, "params", {"A", "B", "a", "b", "c", "tau"});
  c.params.A = detail::get_number(p, "params", "A");
  c.params.B = detail::get_number(p, "params", "B");
  c.params.a = detail::get_number(p, "params", "a");
  c.params.b = detail::get_number(p, "params", "b");
  c.params.c = detail::get_number(p, "params", "c");
  c.params.tau = detail::get_number(p, "params", "tau");

  if (j.contains("jko")) {
    const json& k = j.at("jko");
    detail::check_keys(k, "jko", {"steps", "inner_tol", "inner_max_iters", "positivity_floor", "m_quadrature"});
    c.steps = detail::get_count(k, "jko", "steps", c.steps);
    c.jko.inner_tol = detail::get_number(k, "jko", "inner_tol", c.jko.inner_tol);
    c.jko.inner_max_iters = detail::get_count(k, "jko", "inner_max_iters", c.jko.inner_max_iters);
    c.jko.positivity_floor = detail::get_number(k, "jko", "positivity_floor", c.jko.positivity_floor);
    c.jko.m_quadrature = detail::get_count(k, "jko", "m_quadrature", c.jko.m_quadrature);
  }

  if (j.contains("pde")) {
    const json& d = j.at("pde");
    detail::check_keys(d, "pde", {"dt", "t_end", "theta"});
    PdeConfig pc;
    pc.dt = detail::get_number(d, "pde", "dt", pc.dt);
    pc.t_end = detail::get_number(d, "pde", "t_end", pc.t_end);
    pc.theta = detail::get_number(d, "pde", "theta", pc.theta);
    c.pde = pc;
  }

  const json& pr = j.at("initial_profile");
  if (!pr.is_object() || !pr.contains("preset") || !pr.at("preset").is_string()) {
    throw ConfigError("initial_profile.preset must be a string");
  }
  c.profile.preset = pr.at("preset").get<std::string>();
  if (c.profile.preset == "flat") {
    detail::check_keys(pr, "initial_profile", {"preset"});
  } else if (c.profile.preset == "offset-bump") {
    detail::check_keys(pr, "initial_profile", {"preset", "centers", "radius", "power"});
    c.profile.centers = detail::get_list(pr, "initial_profile", "centers");
    c.profile.radius = detail::get_number(pr, "initial_profile", "radius", 0.0);
    c.profile.power = detail::get_number(pr, "initial_profile", "power", 3.0);
  } else if (c.profile.preset == "gaussian-pair") {
    detail::check_keys(pr, "initial_profile", {"preset", "centers", "widths"});
    c.profile.centers = detail::get_list(pr, "initial_profile", "centers");
    c.profile.widths = detail::get_list(pr, "initial_profile", "widths");
  } else {
    throw ConfigError("unknown initial profile preset '" + c.profile.preset + "'");
  }
  detail::fill_profile_defaults(c.profile, c.length);

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    detail::check_keys(o, "outputs", {"directory", "output_times"});
    if (o.contains("directory")) {
      if (!o.at("directory").is_string()) throw ConfigError("outputs.directory must be a string");
      c.outputs.directory = o.at("directory").get<std::string>();
    }
    c.outputs.output_times = detail::get_list(o, "outputs", "output_times");
  }
  c.validate();
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline ScenarioConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// FNV-1a over the canonical echo; 16 hex digits.
inline std::string config_hash(const ScenarioConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline GridField bump_profile(const Grid& grid, double center, double radius, double power) {
  GridField h = GridField::sample(grid, [&](double x) {
    const double s = (x - center) / radius;
    return std::abs(s) >= 1.0 ? 0.0 : std::pow(1.0 - s * s, power);
  });
  return h;
}

/// Gaussian cut at 4 sigma and shifted down so the profile is continuous there.
inline GridField gaussian_profile(const Grid& grid, double center, double sigma) {
  const double floor = std::exp(-8.0);
  return GridField::sample(grid, [&](double x) {
    const double s = (x - center) / sigma;
    return std::abs(s) >= 4.0 ? 0.0 : std::exp(-0.5 * s * s) - floor;
  });
}

inline void normalize_unit_mass(GridField& h, const std::string& name) {
  const double m = integrate(h);
  if (!(m > 0.0)) throw ConfigError(name + ": profile has no mass on this grid");
  h *= 1.0 / m;
}

/// Distance from the discrete support to the walls, in cells.
inline double discrete_clearance_cells(const GridField& h) {
  std::size_t first = h.size();
  std::size_t last = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] > 0.0) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == h.size()) return 0.0;
  return static_cast<double>(std::min(first, h.size() - 1 - last));
}

}  // namespace detail

/// Nonnegative unit-mass pair for a named preset.
inline DensityPair make_initial(const InitialProfile& profile, const Grid& grid) {
  InitialProfile pr = profile;
  detail::fill_profile_defaults(pr, grid.length());
  detail::validate_profile(pr, grid);
  if (pr.preset == "flat") {
    return {GridField::constant(grid, 1.0 / grid.length()), GridField::constant(grid, 1.0 / grid.length())};
  }
  DensityPair out;
  if (pr.preset == "offset-bump") {
    out = {detail::bump_profile(grid, pr.centers[0], pr.radius, pr.power),
           detail::bump_profile(grid, pr.centers[1], pr.radius, pr.power)};
  } else {
    out = {detail::gaussian_profile(grid, pr.centers[0], pr.widths[0]),
           detail::gaussian_profile(grid, pr.centers[1], pr.widths[1])};
  }
  detail::normalize_unit_mass(out.f, pr.preset + " f");
  detail::normalize_unit_mass(out.g, pr.preset + " g");
  for (const GridField* h : {&out.f, &out.g}) {
    if (detail::discrete_clearance_cells(*h) < kClearanceCells) {
      throw ConfigError(pr.preset + ": discrete support closer than 10 cells to the boundary");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// output files

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with a provenance comment line, a header row and '\n' endings.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& hash, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "# config-hash " << hash << '\n';
    for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
    out_ << '\n';
  }

  void comment(const std::string& text) { out_ << "# " << text << '\n'; }

  CsvWriter& cell(double v) { return raw(format_double(v)); }
  CsvWriter& cell(std::size_t v) { return raw(std::to_string(v)); }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }

  std::ofstream out_;
  bool first_ = true;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json verdict_json(const Verdict& v) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); };
  return {{"pass", v.pass}, {"asserted", v.asserted}, {"slack", num(v.slack)}, {"lhs", num(v.lhs)},
          {"rhs", num(v.rhs)}, {"violations", v.violations}, {"note", v.note}};
}

/// Relative directories resolve against MUSKAT_OUTPUT_ROOT when it is set.
inline std::filesystem::path resolve_output_dir(const std::string& directory) {
  std::filesystem::path dir(directory);
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("MUSKAT_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0') return std::filesystem::path(root) / dir;
  return dir;
}

inline void write_fields(const std::filesystem::path& path, const std::string& hash, const DensityPair& s,
                         const ModelParams& p, double delta, double t) {
  CsvWriter w(path, hash, {"x", "f", "g", "j_f", "w_f", "j_g", "w_g"});
  w.comment("t " + format_double(t));
  const FluxFields flux = flux_fields(s, p, delta);
  for (std::size_t i = 0; i < s.f.size(); ++i) {
    w.cell(s.grid().center(i)).cell(s.f[i]).cell(s.g[i]).cell(flux.j_f[i]).cell(flux.w_f[i]).cell(flux.j_g[i]).cell(
        flux.w_g[i]);
    w.end_row();
  }
}

inline void write_steps(const std::filesystem::path& path, const std::string& hash, const TrajectoryReport& traj) {
  CsvWriter w(path, hash,
              {"step", "t", "w2_f", "w2_g", "energy", "entropy_f", "entropy_g", "el_resid_f", "el_bound_f",
               "el_resid_g", "el_bound_g", "inner_iters"});
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    const StepReport& r = traj.steps[k];
    w.cell(k + 1).cell(static_cast<double>(k + 1) * traj.tau()).cell(r.w2_f).cell(r.w2_g).cell(r.energy_after);
    w.cell(r.entropy_f).cell(r.entropy_g).cell(r.el_residual_f).cell(r.el_bound_f).cell(r.el_residual_g);
    w.cell(r.el_bound_g).cell(r.inner_iters);
    w.end_row();
  }
}

inline void write_trajectory(const std::filesystem::path& path, const std::string& hash,
                             const TrajectoryReport& traj) {
  CsvWriter w(path, hash, {"step", "i", "f", "g"});
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const DensityPair& s = traj.states[k];
    for (std::size_t i = 0; i < s.f.size(); ++i) {
      w.cell(k).cell(i).cell(s.f[i]).cell(s.g[i]);
      w.end_row();
    }
  }
}

/// Inverse of write_trajectory; %.17g round-trips exactly.
inline std::vector<DensityPair> read_trajectory(const std::filesystem::path& path, const Grid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<DensityPair> states;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "step,i,f,g") throw ConfigError("trajectory file: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string field[4];
    for (std::string& f : field) {
      if (!std::getline(row, f, ',')) throw ConfigError("trajectory file: short row '" + line + "'");
    }
    const auto k = static_cast<std::size_t>(std::stoull(field[0]));
    const auto i = static_cast<std::size_t>(std::stoull(field[1]));
    if (k == states.size()) states.push_back({GridField(grid), GridField(grid)});
    if (k + 1 != states.size() || i >= grid.size()) throw ConfigError("trajectory file: rows out of order");
    states[k].f[i] = std::strtod(field[2].c_str(), nullptr);
    states[k].g[i] = std::strtod(field[3].c_str(), nullptr);
  }
  if (states.empty()) throw ConfigError("trajectory file: no states");
  return states;
}

// ---------------------------------------------------------------------------
// orchestration

enum class RunMode { jko, pde, compare, refine };

struct RunOptions {
  std::vector<double> tau_list;    ///< refine only
  std::optional<double> t_probe;   ///< refine only; default T
};

/// exit_code: 0 all hard verdicts pass, 1 a hard verdict failed, 2 error.
struct RunOutcome {
  int exit_code = 0;
  std::filesystem::path directory;
  std::vector<std::string> failed;
  std::string error;
};

namespace detail {

inline json verdicts_document(const DiagnosticsRecord& rec, const std::string& hash, double tol, double delta,
                              std::vector<std::string>& failed) {
  json v = json::object();
  for (const auto& [name, verdict] : rec.verdicts) {
    v[name] = verdict_json(verdict);
    if (verdict.asserted && !verdict.pass) failed.push_back(name);
  }
  return {{"config_hash", hash},
          {"tol_disc", tol},
          {"flux_threshold", delta},
          {"verdicts", v},
          {"failed", failed},
          {"status", failed.empty() ? "pass" : "fail"}};
}

inline void write_error(const std::filesystem::path& dir, const std::string& hash, const std::string& kind,
                        const std::string& message) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return;
  json j = {{"status", "error"}, {"error_type", kind}, {"message", message}};
  if (!hash.empty()) j["config_hash"] = hash;
  std::ofstream out(dir / "error.json", std::ios::binary | std::ios::trunc);
  if (out) out << j.dump(2) << '\n';
}

inline const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const SolverError*>(&e)) return "solver";
  return "internal";
}

inline std::size_t step_of(double t, double tau) { return static_cast<std::size_t>(std::floor(t / tau + 1e-9)); }

inline RunOutcome run_jko_mode(const ScenarioConfig& cfg, const std::filesystem::path& dir, const std::string& hash) {
  const Grid grid = cfg.grid();
  const DensityPair init = make_initial(cfg.profile, grid);
  const TrajectoryReport traj = run_trajectory(init, cfg.params, cfg.jko, cfg.steps);
  const double delta = cfg.jko.flux_threshold(grid);
  const double tol = tol_disc(grid, cfg.jko.mass_points(grid));
  write_steps(dir / "steps.csv", hash, traj);
  write_trajectory(dir / "trajectory.csv", hash, traj);
  for (double t : cfg.snapshot_times()) {
    if (t > cfg.final_time() * (1.0 + 1e-12)) continue;
    const std::size_t k = std::min(step_of(t, traj.tau()), cfg.steps);
    write_fields(dir / ("fields_" + std::to_string(k) + ".csv"), hash, traj.states[k], cfg.params, delta, t);
  }
  const DiagnosticsRecord rec = run_diagnostics(traj, cfg.params, delta, tol);
  RunOutcome out;
  write_json(dir / "verdicts.json", verdicts_document(rec, hash, tol, delta, out.failed));
  out.exit_code = out.failed.empty() ? 0 : 1;
  return out;
}

inline const PdeConfig& require_pde(const ScenarioConfig& cfg) {
  if (!cfg.pde) throw ConfigError("this mode needs a 'pde' section");
  return *cfg.pde;
}

inline RunOutcome run_pde_mode(const ScenarioConfig& cfg, const std::filesystem::path& dir, const std::string& hash) {
  const Grid grid = cfg.grid();
  const PdeConfig& pc = require_pde(cfg);
  std::vector<double> times;
  for (double t : cfg.snapshot_times()) {
    if (t <= pc.t_end * (1.0 + 1e-12)) times.push_back(t);
  }
  const PdeRun run = pde_run(make_initial(cfg.profile, grid), cfg.params, pc, times);
  const double delta = cfg.jko.flux_threshold(grid);
  CsvWriter energy(dir / "pde_energy.csv", hash, {"t", "energy", "entropy_f", "entropy_g"});
  for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
    const PdeSnapshot& s = run.snapshots[k];
    energy.cell(s.t).cell(s.energy).cell(s.entropy_f).cell(s.entropy_g);
    energy.end_row();
    write_fields(dir / ("pde_fields_" + std::to_string(k) + ".csv"), hash, s.state, cfg.params, delta, s.t);
  }
  write_json(dir / "pde_summary.json", {{"config_hash", hash},
                                        {"steps", run.steps},
                                        {"max_clipped", run.max_clipped},
                                        {"warning_steps", run.warning_steps},
                                        {"worst_energy_rise", run.worst_energy_rise},
                                        {"energy_nonincreasing", run.energy_nonincreasing}});
  return {};
}

inline RunOutcome run_compare_mode(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                                   const std::string& hash) {
  const Grid grid = cfg.grid();
  const PdeConfig& pc = require_pde(cfg);
  const DensityPair init = make_initial(cfg.profile, grid);
  std::vector<double> times;
  const double horizon = std::min(pc.t_end, cfg.final_time());
  for (double t : cfg.snapshot_times()) {
    if (t <= horizon * (1.0 + 1e-12)) times.push_back(t);
  }
  const TrajectoryReport traj = run_trajectory(init, cfg.params, cfg.jko, cfg.steps);
  const PdeRun run = pde_run(init, cfg.params, pc, times);
  std::vector<double> matched;
  for (const PdeSnapshot& s : run.snapshots) {
    if (s.t <= horizon * (1.0 + 1e-12)) matched.push_back(s.t);
  }
  CsvWriter w(dir / "compare.csv", hash, {"t", "l2_f", "l2_g", "l1_f", "l1_g", "l2"});
  for (const ErrorRow& r : compare_trajectories(traj, run, matched)) {
    w.cell(r.t).cell(r.l2_f).cell(r.l2_g).cell(r.l1_f).cell(r.l1_g).cell(r.l2());
    w.end_row();
  }
  return {};
}

inline RunOutcome run_refine_mode(const ScenarioConfig& cfg, const RunOptions& opt, const std::filesystem::path& dir,
                                  const std::string& hash) {
  if (opt.tau_list.size() < 2) throw ConfigError("refine: --tau-list needs at least two step sizes");
  for (double tau : opt.tau_list) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("refine: time step tau > 0 required");
  }
  const double t_probe = opt.t_probe.value_or(cfg.final_time());
  if (!(t_probe > 0.0) || !std::isfinite(t_probe)) throw ConfigError("refine: t_probe > 0 required");
  const DensityPair init = make_initial(cfg.profile, cfg.grid());
  const std::vector<CauchyRow> rows = tau_refinement_study(init, cfg.params, cfg.jko, opt.tau_list, t_probe);
  CsvWriter w(dir / "refine.csv", hash, {"tau_coarse", "tau_fine", "distance"});
  w.comment("t_probe " + format_double(t_probe));
  for (const CauchyRow& r : rows) {
    w.cell(r.tau_coarse).cell(r.tau_fine).cell(r.distance);
    w.end_row();
  }
  return {};
}

}  // namespace detail

/// Runs one mode of a validated config; errors are written to error.json and mapped to exit code 2.
inline RunOutcome run_scenario(const ScenarioConfig& cfg, RunMode mode, const RunOptions& opt = {}) {
  RunOutcome out;
  out.directory = resolve_output_dir(cfg.outputs.directory);
  std::string hash;
  try {
    cfg.validate();
    hash = config_hash(cfg);
    std::filesystem::create_directories(out.directory);
    std::filesystem::remove(out.directory / "error.json");
    write_json(out.directory / "config.json", {{"config_hash", hash}, {"config", to_json(cfg)}});
    RunOutcome r;
    switch (mode) {
      case RunMode::jko: r = detail::run_jko_mode(cfg, out.directory, hash); break;
      case RunMode::pde: r = detail::run_pde_mode(cfg, out.directory, hash); break;
      case RunMode::compare: r = detail::run_compare_mode(cfg, out.directory, hash); break;
      case RunMode::refine: r = detail::run_refine_mode(cfg, opt, out.directory, hash); break;
    }
    out.exit_code = r.exit_code;
    out.failed = r.failed;
  } catch (const std::exception& e) {
    out.exit_code = 2;
    out.error = e.what();
    detail::write_error(out.directory, hash, detail::error_kind(e), e.what());
  }
  return out;
}

/// Parses and runs; parse failures go to error.json in the directory named by the
/// raw document when it can be read, else under MUSKAT_OUTPUT_ROOT when set.
inline RunOutcome run_config_file(const std::filesystem::path& path, RunMode mode, const RunOptions& opt = {}) {
  ScenarioConfig cfg;
  try {
    cfg = parse_config(path);
  } catch (const std::exception& e) {
    RunOutcome out;
    out.exit_code = 2;
    out.error = e.what();
    std::optional<std::filesystem::path> dir;
    try {
      std::ifstream in(path, std::ios::binary);
      const json raw = json::parse(in);
      dir = resolve_output_dir(raw.at("outputs").at("directory").get<std::string>());
    } catch (const std::exception&) {
      const char* root = std::getenv("MUSKAT_OUTPUT_ROOT");
      if (root != nullptr && *root != '\0') dir = std::filesystem::path(root);
    }
    if (dir) {
      out.directory = *dir;
      detail::write_error(*dir, "", detail::error_kind(e), e.what());
    }
    return out;
  }
  return run_scenario(cfg, mode, opt);
}

/// Re-runs diagnostics on a finished run-jko directory; writes diagnose.json.
inline RunOutcome diagnose_run(const std::filesystem::path& dir) {
  RunOutcome out;
  out.directory = dir;
  try {
    std::ifstream in(dir / "config.json", std::ios::binary);
    if (!in) throw ConfigError("cannot open " + (dir / "config.json").string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("parse error: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("config")) throw ConfigError("config.json: missing 'config'");
    const ScenarioConfig cfg = config_from_json(doc.at("config"));
    const std::string hash = config_hash(cfg);
    const Grid grid = cfg.grid();
    TrajectoryReport traj;
    traj.params = cfg.params;
    traj.states = read_trajectory(dir / "trajectory.csv", grid);
    const double delta = cfg.jko.flux_threshold(grid);
    const double tol = tol_disc(grid, cfg.jko.mass_points(grid));
    const DiagnosticsRecord rec = run_diagnostics(traj, cfg.params, delta, tol);
    write_json(dir / "diagnose.json", detail::verdicts_document(rec, hash, tol, delta, out.failed));
    out.exit_code = out.failed.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    out.exit_code = 2;
    out.error = e.what();
    detail::write_error(dir, "", detail::error_kind(e), e.what());
  }
  return out;
}

}  // namespace muskat

#endif  // MUSKAT_SCENARIO_HPP
