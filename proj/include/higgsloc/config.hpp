#pragma once

// Scenario configuration: a flat "key = value" text format with [section]
// headers. Every key has a default; unknown keys, duplicates and malformed
// values are rejected with line numbers.

#include <array>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "higgsloc/choquard.hpp"
#include "higgsloc/core.hpp"
#include "higgsloc/evolution.hpp"

namespace higgsloc {

inline constexpr std::array<std::string_view, 7> kScenarioNames = {
    "verify-residuals",    "soliton-propagation", "free-spreading",       "choquard-stationary",
    "yukawa-oracle",       "perturbation-stability", "param-sweep"};

inline bool is_scenario_name(std::string_view s) {
  for (auto n : kScenarioNames)
    if (n == s) return true;
  return false;
}

inline std::string scenario_list() {
  std::string out;
  for (auto n : kScenarioNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

struct ScenarioConfig {
  std::string scenario;
  PhysicalParams params;

  // [soliton]
  Family family{Family::OneD_B};
  double omega{0.0};  ///< ThreeD_A frequency; alpha follows from the dispersion relation
  double alpha{0.0};  ///< ThreeD_A: when > 0, overrides omega
  double gamma{0.0};
  double epsilon{0.0};
  double mu{0.5};
  Variant13 variant_13{Variant13::as_printed_sech};
  bool at_rest{false};  ///< replace m by the value giving OneD_B V_s = 0
  double x0{0.0};

  // [grid]
  std::size_t n{4096};
  double length{0.0};  ///< 0: widths / k rounded to a carrier-periodic length
  double widths{80.0};

  // [run]
  double T{20.0};
  double dt{0.0};  ///< 0: the largest step the stability guard allows
  std::size_t stride{100};
  std::size_t snapshot_stride{0};
  std::uint64_t seed{1};
  std::string output_dir{"out"};
  EvolutionMode mode{EvolutionMode::coupled};
  bool stability_guard{true};

  // [toggles]
  CouplingConvention convention{CouplingConvention::motion_equation};
  bool source_coupling{true};

  // [checks]
  bool scheme_checks{true};

  // [free]
  double sigma0{0.0};  ///< 0: match the soliton's initial width
  double free_length_factor{4.0};

  // [perturbation]
  PerturbationKind perturbation{PerturbationKind::amplitude_noise};
  double strength{0.01};

  // [yukawa]
  std::size_t yukawa_n1{128};
  std::size_t yukawa_n3{32};
  std::size_t yukawa_sources{4};
  double yukawa_length{0.0};  ///< 0: 48 / m

  // [audit]
  std::size_t audit_n{1024};
  double audit_widths{40.0};

  // [sweep]
  std::string sweep_base{"soliton-propagation"};
  std::string sweep_key{"params.m"};
  std::string sweep_values{"0.3, 0.4, 0.5"};
  std::size_t sweep_workers{0};  ///< 0: hardware concurrency

  bool operator==(const ScenarioConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Value formatting

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(x))
    return std::nullopt;
  return x;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int x{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return x;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  return std::nullopt;
}

struct ConfigField {
  std::string name;  ///< "section.key", or "key" for the root section
  std::string type;
  std::function<bool(ScenarioConfig&, std::string_view)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <class T>
ConfigField number_field(std::string name, T ScenarioConfig::*member) {
  if constexpr (std::is_same_v<T, double>) {
    return {std::move(name), "real",
            [member](ScenarioConfig& c, std::string_view v) {
              auto x = parse_double(v);
              if (!x) return false;
              c.*member = *x;
              return true;
            },
            [member](const ScenarioConfig& c) { return format_double(c.*member); }};
  } else {
    return {std::move(name), "non-negative integer",
            [member](ScenarioConfig& c, std::string_view v) {
              auto x = parse_int<T>(v);
              if (!x) return false;
              c.*member = *x;
              return true;
            },
            [member](const ScenarioConfig& c) { return std::to_string(c.*member); }};
  }
}

inline ConfigField param_field(std::string name, double PhysicalParams::*member) {
  return {std::move(name), "real",
          [member](ScenarioConfig& c, std::string_view v) {
            auto x = parse_double(v);
            if (!x) return false;
            c.params.*member = *x;
            return true;
          },
          [member](const ScenarioConfig& c) { return format_double(c.params.*member); }};
}

inline ConfigField bool_field(std::string name, bool ScenarioConfig::*member) {
  return {std::move(name), "true|false",
          [member](ScenarioConfig& c, std::string_view v) {
            auto x = parse_bool(v);
            if (!x) return false;
            c.*member = *x;
            return true;
          },
          [member](const ScenarioConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

inline ConfigField string_field(std::string name, std::string ScenarioConfig::*member) {
  return {std::move(name), "text",
          [member](ScenarioConfig& c, std::string_view v) {
            c.*member = std::string(v);
            return true;
          },
          [member](const ScenarioConfig& c) { return c.*member; }};
}

template <class E, class Parse>
ConfigField enum_field(std::string name, std::string type, E ScenarioConfig::*member,
                       Parse parse) {
  return {std::move(name), std::move(type),
          [member, parse](ScenarioConfig& c, std::string_view v) {
            auto x = parse(v);
            if (!x) return false;
            c.*member = *x;
            return true;
          },
          [member](const ScenarioConfig& c) { return std::string(to_string(c.*member)); }};
}

}  // namespace detail

/// Every accepted key, in serialization order.
inline const std::vector<detail::ConfigField>& config_fields() {
  using namespace detail;
  using C = ScenarioConfig;
  static const std::vector<ConfigField> fields = {
      {"scenario", "scenario name",
       [](C& c, std::string_view v) {
         c.scenario = std::string(v);
         return true;
       },
       [](const C& c) { return c.scenario; }},
      param_field("params.M", &PhysicalParams::M),
      param_field("params.m", &PhysicalParams::m),
      param_field("params.v", &PhysicalParams::v),
      enum_field("soliton.family", "ThreeD_A|ThreeD_B|OneD_A|OneD_B", &C::family, parse_family),
      number_field("soliton.omega", &C::omega),
      number_field("soliton.alpha", &C::alpha),
      number_field("soliton.gamma", &C::gamma),
      number_field("soliton.epsilon", &C::epsilon),
      number_field("soliton.mu", &C::mu),
      enum_field("soliton.variant_13", "as_printed_sech|corrected_sech_squared", &C::variant_13,
                 parse_variant13),
      bool_field("soliton.at_rest", &C::at_rest),
      number_field("soliton.x0", &C::x0),
      number_field("grid.n", &C::n),
      number_field("grid.length", &C::length),
      number_field("grid.widths", &C::widths),
      number_field("run.T", &C::T),
      number_field("run.dt", &C::dt),
      number_field("run.stride", &C::stride),
      number_field("run.snapshot_stride", &C::snapshot_stride),
      number_field("run.seed", &C::seed),
      string_field("run.output_dir", &C::output_dir),
      enum_field("run.mode", "coupled|choquard", &C::mode, parse_mode),
      bool_field("run.stability_guard", &C::stability_guard),
      enum_field("toggles.coupling_convention", "motion_equation|printed_static", &C::convention,
                 parse_coupling),
      bool_field("toggles.source_coupling", &C::source_coupling),
      bool_field("checks.scheme", &C::scheme_checks),
      number_field("free.sigma0", &C::sigma0),
      number_field("free.length_factor", &C::free_length_factor),
      enum_field("perturbation.kind", "amplitude_noise|phase_noise|width_rescale",
                 &C::perturbation, parse_perturbation),
      number_field("perturbation.strength", &C::strength),
      number_field("yukawa.n1", &C::yukawa_n1),
      number_field("yukawa.n3", &C::yukawa_n3),
      number_field("yukawa.sources", &C::yukawa_sources),
      number_field("yukawa.length", &C::yukawa_length),
      number_field("audit.n", &C::audit_n),
      number_field("audit.widths", &C::audit_widths),
      string_field("sweep.base", &C::sweep_base),
      string_field("sweep.key", &C::sweep_key),
      string_field("sweep.values", &C::sweep_values),
      number_field("sweep.workers", &C::sweep_workers),
  };
  return fields;
}

inline const detail::ConfigField* find_config_field(std::string_view name) {
  for (const auto& f : config_fields())
    if (f.name == name) return &f;
  return nullptr;
}

/// Sets one key; `line` is used for error messages only.
inline void set_config_value(ScenarioConfig& c, std::string_view key, std::string_view value,
                             int line = 0) {
  const auto* f = find_config_field(key);
  if (!f) throw ConfigError("unknown key '" + std::string(key) + "'", line);
  if (!f->set(c, value))
    throw ConfigError("type mismatch for '" + std::string(key) + "': expected " + f->type +
                          ", got '" + std::string(value) + "'",
                      line);
}

/// Applies "key=value" (key in section.key form).
inline void apply_override(ScenarioConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set_config_value(c, detail::trim(assignment.substr(0, eq)),
                   detail::trim(assignment.substr(eq + 1)));
}

/// Strict parse. Comments start with '#' or ';'. Keys before the first
/// section header live in the root section (only `scenario`).
inline ScenarioConfig parse_config(std::string_view text) {
  ScenarioConfig c;
  std::string section;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", line_no);
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError("empty section name", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (auto it = seen.find(full); it != seen.end())
      throw ConfigError("duplicate key '" + full + "' (first set on line " +
                            std::to_string(it->second) + ", again on line " +
                            std::to_string(line_no) + ")",
                        line_no);
    seen.emplace(full, line_no);
    set_config_value(c, full, value, line_no);
    if (end == text.size()) break;
  }
  if (!seen.contains("scenario")) throw ConfigError("missing required key 'scenario'");
  return c;
}

/// Full config with every key, grouped by section; parse_config inverts it.
inline std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : config_fields()) {
    const auto dot = f.name.find('.');
    std::string sec = dot == std::string::npos ? "" : f.name.substr(0, dot);
    std::string key = dot == std::string::npos ? f.name : f.name.substr(dot + 1);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << key << " = " << f.get(c) << "\n";
  }
  return out.str();
}

/// Range checks that do not depend on the physics (parse succeeded, values
/// may still be unusable). Physical constraints are left to validate_params.
inline void check_config(const ScenarioConfig& c) {
  if (!is_scenario_name(c.scenario))
    throw ConfigError("unknown scenario '" + c.scenario + "'; valid scenarios: " +
                      scenario_list());
  if (!(c.T >= 0.0)) throw ConfigError("run.T must be >= 0");
  if (c.dt < 0.0) throw ConfigError("run.dt must be >= 0 (0 selects the guard limit)");
  if (c.stride < 1) throw ConfigError("run.stride must be >= 1");
  if (c.length < 0.0) throw ConfigError("grid.length must be >= 0");
  if (!(c.widths > 0.0)) throw ConfigError("grid.widths must be > 0");
  if (c.strength < 0.0) throw ConfigError("perturbation.strength must be >= 0");
  if (c.scenario == "param-sweep") {
    if (c.sweep_base == "param-sweep" || !is_scenario_name(c.sweep_base))
      throw ConfigError("sweep.base must name a non-sweep scenario; valid scenarios: " +
                        scenario_list());
    if (!find_config_field(c.sweep_key) || c.sweep_key == "scenario")
      throw ConfigError("sweep.key '" + c.sweep_key + "' is not a config key");
  }
}

}  // namespace higgsloc
