#pragma once

// Experiment configuration: a flat `key = value` text file with `#` comments.
//
//   model = perc            # perc | renorm | aniso | contact
//   family = dense-epsilon  # dense-epsilon | sparse-support | power-law | explicit-table | one-sided-1d
//   family.level = 0.5
//   k = 1, 2, 4, 8          # or: auto (the construction's k_star)
//   horizon = 100
//   replicas = 1000
//   seed = 1
//
// Command-line flags go through the same setter, so a bad value reports the
// flag name instead of a file position.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrperc/errors.hpp"
#include "lrperc/lattice.hpp"

namespace lrperc::harness {

class ConfigError : public Error {
 public:
  ConfigError(std::string where, std::string key, const std::string& what)
      : Error(where + (key.empty() ? "" : ": " + key) + ": " + what), where_(std::move(where)), key_(std::move(key)) {}
  const std::string& where() const noexcept { return where_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::string where_;
  std::string key_;
};

enum class ExperimentModel { perc, renorm, aniso, contact };

inline std::string to_string(ExperimentModel m) {
  switch (m) {
    case ExperimentModel::perc: return "perc";
    case ExperimentModel::renorm: return "renorm";
    case ExperimentModel::aniso: return "aniso";
    case ExperimentModel::contact: return "contact";
  }
  return "unknown";
}

inline std::optional<ExperimentModel> experiment_model_from_string(const std::string& s) {
  for (auto m : {ExperimentModel::perc, ExperimentModel::renorm, ExperimentModel::aniso, ExperimentModel::contact})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

enum class OutputFormat { csv, json };

/// Family description as written in the config; built on demand so the same
/// text can serve as probabilities (perc, aniso) or as birth rates (contact).
struct FamilySpec {
  FamilyKind kind = FamilyKind::dense_epsilon;
  int dim = 1;
  double level = 0.5;
  std::int64_t stride = 1;
  double constant = 1.0;
  double exponent = 2.0;
  bool one_sided = true;
  std::vector<double> values;                     // one-sided-1d: values[n-1] at n
  std::vector<std::pair<std::int64_t, double>> table;  // explicit-table, dimension 1

  ConnectionFamily build(ValueDomain domain = ValueDomain::probability) const {
    switch (kind) {
      case FamilyKind::dense_epsilon: return ConnectionFamily::dense_epsilon(dim, level, one_sided, domain);
      case FamilyKind::sparse_support: return ConnectionFamily::sparse_support(dim, stride, level, one_sided, domain);
      case FamilyKind::power_law: return ConnectionFamily::power_law(dim, constant, exponent, one_sided, domain);
      case FamilyKind::one_sided_1d: return ConnectionFamily::one_sided_1d(values, domain);
      case FamilyKind::explicit_table: {
        std::map<Point, double> entries;
        for (const auto& [y, v] : table) entries[Point{y}] = v;
        return ConnectionFamily::explicit_table(1, std::move(entries), domain);
      }
    }
    throw InvalidArgument("unknown family kind");
  }
};

struct ExperimentConfig {
  ExperimentModel model = ExperimentModel::perc;
  FamilySpec family;
  double epsilon = 0.49;
  double delta = 0.05;
  std::vector<std::int64_t> k_list;  // empty means auto
  double horizon = 100.0;
  std::uint64_t replicas = 1000;
  std::uint64_t seed0 = 1;
  std::int64_t j_max = 30;
  double sigma = 0.9;
  double lambda_lower = 1.0;
  double death_rate = 1.0;
  std::int64_t window = 0;  // contact boundary radius, 0 picks a default
  double confidence = 0.95;
  bool coupled = true;
  std::string out = ".";
  OutputFormat format = OutputFormat::csv;
  bool svg = false;
  bool timing = false;
  double sabotage = 0.0;
  unsigned workers = 0;  // 0 defers to LRPERC_WORKERS / hardware

  bool k_auto() const noexcept { return k_list.empty(); }

  /// Apply one `key = value` pair; `where` names the source for error messages.
  void set(const std::string& key, const std::string& value, const std::string& where);

  /// Cross-field checks once every key is in.
  void validate(const std::string& where = "config") const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct ValueParser {
  const std::string& key;
  const std::string& where;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(where, key, what); }

  double real(const std::string& v) const {
    std::size_t used = 0;
    double out = 0;
    try {
      out = std::stod(v, &used);
    } catch (...) {
      fail("expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(out)) fail("expected a finite number, got '" + v + "'");
    return out;
  }

  std::int64_t integer(const std::string& v) const {
    std::size_t used = 0;
    long long out = 0;
    try {
      out = std::stoll(v, &used);
    } catch (...) {
      fail("expected an integer, got '" + v + "'");
    }
    if (used != v.size()) fail("expected an integer, got '" + v + "'");
    return out;
  }

  std::uint64_t count(const std::string& v) const {
    const auto n = integer(v);
    if (n < 0) fail("must be >= 0");
    return static_cast<std::uint64_t>(n);
  }

  std::uint64_t unsigned64(const std::string& v) const {
    std::size_t used = 0;
    unsigned long long out = 0;
    if (!v.empty() && v[0] == '-') fail("must be >= 0");
    try {
      out = std::stoull(v, &used, 0);
    } catch (...) {
      fail("expected an unsigned integer, got '" + v + "'");
    }
    if (used != v.size()) fail("expected an unsigned integer, got '" + v + "'");
    return out;
  }

  bool boolean(const std::string& v) const {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail("expected true or false, got '" + v + "'");
  }

  double unit_open(const std::string& v) const {
    const double x = real(v);
    if (!(x > 0.0 && x < 1.0)) fail("must lie in (0, 1)");
    return x;
  }
};

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& raw, const std::string& where) {
  const std::string value = detail::trim(raw);
  const detail::ValueParser p{key, where};
  if (value.empty()) p.fail("missing value");

  if (key == "model") {
    auto m = experiment_model_from_string(value);
    if (!m) p.fail("unknown model '" + value + "' (perc, renorm, aniso, contact)");
    model = *m;
  } else if (key == "family" || key == "family.kind") {
    try {
      family.kind = family_kind_from_string(value);
    } catch (const InvalidArgument& e) {
      p.fail(e.what());
    }
  } else if (key == "family.dim") {
    const auto d = p.integer(value);
    if (d < 1 || d > kMaxDim) p.fail("dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
    family.dim = static_cast<int>(d);
  } else if (key == "family.level") {
    family.level = p.real(value);
  } else if (key == "family.stride") {
    family.stride = p.integer(value);
  } else if (key == "family.constant") {
    family.constant = p.real(value);
  } else if (key == "family.exponent") {
    family.exponent = p.real(value);
  } else if (key == "family.one_sided") {
    family.one_sided = p.boolean(value);
  } else if (key == "family.values") {
    family.values.clear();
    for (const auto& v : detail::split_list(value)) family.values.push_back(p.real(v));
  } else if (key == "family.table") {
    family.table.clear();
    for (const auto& item : detail::split_list(value)) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) p.fail("table entries look like y:value, got '" + item + "'");
      family.table.emplace_back(p.integer(item.substr(0, colon)), p.real(item.substr(colon + 1)));
    }
  } else if (key == "epsilon") {
    epsilon = p.unit_open(value);
  } else if (key == "delta") {
    delta = p.unit_open(value);
  } else if (key == "k") {
    k_list.clear();
    if (value == "auto") return;
    for (const auto& v : detail::split_list(value)) {
      const auto k = p.integer(v);
      if (k < 1) p.fail("truncation ranges must be >= 1");
      if (!k_list.empty() && k <= k_list.back()) p.fail("k list must be strictly increasing");
      k_list.push_back(k);
    }
    if (k_list.empty()) p.fail("empty k list");
  } else if (key == "horizon" || key == "T") {
    horizon = p.real(value);
    if (horizon < 0) p.fail("must be >= 0");
  } else if (key == "replicas" || key == "N") {
    replicas = p.count(value);
  } else if (key == "seed" || key == "seed0") {
    seed0 = p.unsigned64(value);
  } else if (key == "j_max") {
    j_max = p.integer(value);
    if (j_max < 0) p.fail("must be >= 0");
  } else if (key == "sigma") {
    sigma = p.real(value);
    if (!(sigma >= 0.0 && sigma <= 1.0)) p.fail("must lie in [0, 1]");
  } else if (key == "lambda_lower") {
    lambda_lower = p.real(value);
    if (!(lambda_lower > 0.0)) p.fail("must be > 0");
  } else if (key == "death_rate") {
    death_rate = p.real(value);
    if (death_rate < 0.0) p.fail("must be >= 0");
  } else if (key == "window") {
    window = p.integer(value);
    if (window < 0) p.fail("must be >= 0");
  } else if (key == "confidence") {
    confidence = p.unit_open(value);
  } else if (key == "coupling") {
    if (value == "coupled") {
      coupled = true;
    } else if (value == "independent") {
      coupled = false;
    } else {
      p.fail("expected coupled or independent");
    }
  } else if (key == "out") {
    out = value;
  } else if (key == "format") {
    if (value == "csv") {
      format = OutputFormat::csv;
    } else if (value == "json") {
      format = OutputFormat::json;
    } else {
      p.fail("expected csv or json");
    }
  } else if (key == "svg") {
    svg = p.boolean(value);
  } else if (key == "timing") {
    timing = p.boolean(value);
  } else if (key == "sabotage") {
    sabotage = p.real(value);
    if (!(sabotage >= 0.0 && sabotage <= 1.0)) p.fail("must lie in [0, 1]");
  } else if (key == "workers") {
    const auto w = p.count(value);
    if (w > 4096) p.fail("at most 4096 workers");
    workers = static_cast<unsigned>(w);
  } else {
    throw ConfigError(where, key, "unknown key");
  }
}

inline void ExperimentConfig::validate(const std::string& where) const {
  auto fail = [&](const std::string& key, const std::string& what) { throw ConfigError(where, key, what); };
  try {
    family.build(model == ExperimentModel::contact ? ValueDomain::rate : ValueDomain::probability);
  } catch (const Error& e) {
    fail("family", e.what());
  }
  if ((model == ExperimentModel::perc || model == ExperimentModel::aniso) && horizon != std::floor(horizon))
    fail("horizon", "discrete models need an integer horizon");
  if ((model == ExperimentModel::aniso || model == ExperimentModel::renorm) && family.dim != 1)
    fail("family.dim", to_string(model) + " runs in dimension 1");
  if (model == ExperimentModel::aniso && horizon < 1) fail("horizon", "aniso needs horizon >= 1");
  if (model == ExperimentModel::renorm && !k_auto())
    fail("k", "renorm always runs at k_star; use k = auto");
  if (model == ExperimentModel::contact && k_auto() && family.dim != 1)
    fail("k", "k = auto for contact needs a one-dimensional rate family");
}

/// Parse config text; `name` prefixes error positions (name:line).
inline ExperimentConfig parse_config(std::istream& is, const std::string& name = "config") {
  ExperimentConfig cfg;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto where = name + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "", "expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where, "", "missing key");
    cfg.set(key, line.substr(eq + 1), where);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "", "cannot open config file");
  return parse_config(in, path);
}

/// Canonical `key = value` listing, echoed into reports.
inline std::vector<std::pair<std::string, std::string>> describe(const ExperimentConfig& c) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  std::string ks = "auto";
  if (!c.k_auto()) {
    ks.clear();
    for (std::size_t i = 0; i < c.k_list.size(); ++i) ks += (i ? "," : "") + std::to_string(c.k_list[i]);
  }
  std::vector<std::pair<std::string, std::string>> out{
      {"model", to_string(c.model)},
      {"family", to_string(c.family.kind)},
      {"family.dim", std::to_string(c.family.dim)},
      {"epsilon", num(c.epsilon)},
      {"delta", num(c.delta)},
      {"k", ks},
      {"horizon", num(c.horizon)},
      {"replicas", std::to_string(c.replicas)},
      {"seed", std::to_string(c.seed0)},
      {"j_max", std::to_string(c.j_max)},
      {"coupling", c.coupled ? "coupled" : "independent"},
  };
  switch (c.family.kind) {
    case FamilyKind::dense_epsilon: out.emplace_back("family.level", num(c.family.level)); break;
    case FamilyKind::sparse_support:
      out.emplace_back("family.stride", std::to_string(c.family.stride));
      out.emplace_back("family.level", num(c.family.level));
      break;
    case FamilyKind::power_law:
      out.emplace_back("family.constant", num(c.family.constant));
      out.emplace_back("family.exponent", num(c.family.exponent));
      break;
    default: break;
  }
  if (c.model == ExperimentModel::aniso) out.emplace_back("sigma", num(c.sigma));
  if (c.model == ExperimentModel::contact) {
    out.emplace_back("lambda_lower", num(c.lambda_lower));
    out.emplace_back("death_rate", num(c.death_rate));
  }
  if (c.sabotage > 0) out.emplace_back("sabotage", num(c.sabotage));
  return out;
}

}  // namespace lrperc::harness
