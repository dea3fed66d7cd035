#pragma once

// Truncation sweeps: one SweepRow per k, written as CSV / JSON rows, a plain
// column file for plotting, and an optional standalone SVG chart.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lrperc/aniso.hpp"
#include "lrperc/contact.hpp"
#include "lrperc/edge_sampler.hpp"
#include "lrperc/harness/config.hpp"
#include "lrperc/parallel.hpp"
#include "lrperc/renorm.hpp"
#include "lrperc/renorm_verify.hpp"

namespace lrperc::harness {

struct SweepRow {
  std::string model;
  std::int64_t k = 0;
  double T = 0.0;
  std::uint64_t N = 0;
  double theta_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  std::uint64_t seed0 = 0;
  double wall_time = 0.0;  // seconds
};

inline unsigned resolve_workers(const ExperimentConfig& c) {
  return c.workers > 0 ? c.workers : default_worker_count();
}

inline ConnectionFamily experiment_family(const ExperimentConfig& c) {
  return c.family.build(c.model == ExperimentModel::contact ? ValueDomain::rate : ValueDomain::probability);
}

inline AnisoConfig aniso_config(const ExperimentConfig& c, TruncationRange k = TruncationRange::untruncated()) {
  return AnisoConfig{c.sigma, c.family.build(), k};
}

inline ContactModel contact_model(const ExperimentConfig& c, TruncationRange k) {
  return ContactModel{c.family.build(ValueDomain::rate), k, c.death_rate};
}

/// Renormalization constants of the configured model. For aniso, the
/// threshold scales with sigma: q_n > epsilon gives sigma q_n > sigma epsilon.
inline RenormParams experiment_params(const ExperimentConfig& c) {
  switch (c.model) {
    case ExperimentModel::perc:
    case ExperimentModel::renorm: return derive_parameters(c.family.build(), c.epsilon, c.delta);
    case ExperimentModel::aniso:
      return derive_parameters(aniso_config(c).induced_family(), c.sigma * c.epsilon, c.delta);
    case ExperimentModel::contact:
      return derive_contact_parameters(c.family.build(ValueDomain::rate), c.lambda_lower, c.delta).renorm;
  }
  throw InvalidArgument("unknown model");
}

/// The configured k list, or {k_star} for `k = auto`.
inline std::vector<std::int64_t> resolve_k_list(const ExperimentConfig& c) {
  if (!c.k_auto()) return c.k_list;
  try {
    return {experiment_params(c).k_star};
  } catch (const Error& e) {
    throw ConfigError("config", "k", std::string("cannot derive k_star: ") + e.what());
  }
}

/// Seed for the row at position `index`: the shared seed0 when coupled,
/// a separate stream per row otherwise.
inline std::uint64_t row_seed(const ExperimentConfig& c, std::size_t index) {
  return c.coupled ? c.seed0 : stream_seed(c.seed0, 1000 + index);
}

/// One pipeline run at truncation k; fills every SweepRow field.
inline SweepRow run_point(const ExperimentConfig& c, std::int64_t k, std::uint64_t seed, unsigned workers) {
  const auto start = std::chrono::steady_clock::now();
  SweepRow row;
  row.model = to_string(c.model);
  row.k = k;
  row.T = c.horizon;
  row.N = c.replicas;
  row.seed0 = seed;
  if (c.replicas == 0) throw ConfigError("config", "replicas", "need at least one replica");
  const auto range = TruncationRange::at(k);
  SurvivalEstimate est;
  switch (c.model) {
    case ExperimentModel::perc: {
      const auto ind = survival_indicators(c.family.build(), range, static_cast<std::int64_t>(c.horizon), c.replicas,
                                           seed, workers);
      est = summarize_indicators(ind, static_cast<std::int64_t>(c.horizon), range, seed, c.confidence);
      break;
    }
    case ExperimentModel::aniso: {
      const auto ind = aniso_survival_indicators(aniso_config(c, range), static_cast<std::int64_t>(c.horizon),
                                                 c.replicas, seed, workers);
      est = summarize_indicators(ind, static_cast<std::int64_t>(c.horizon), range, seed, c.confidence);
      break;
    }
    case ExperimentModel::contact: {
      ContactRunOptions opts;
      opts.window_radius = c.window;
      est = contact_survival(contact_model(c, range), c.horizon, c.replicas, seed, workers, opts, c.confidence)
                .estimate;
      break;
    }
    case ExperimentModel::renorm: {
      const auto params = experiment_params(c);
      const auto traces = explore_replicas(c.family.build(), params, c.j_max, c.replicas, seed, workers);
      std::vector<std::uint8_t> ind;
      ind.reserve(traces.size());
      for (const auto& t : traces) ind.push_back(t.reached_level() ? 1 : 0);
      est = summarize_indicators(ind, c.j_max, TruncationRange::at(params.k_star), seed, c.confidence);
      row.k = params.k_star;
      row.T = static_cast<double>(c.j_max);
      break;
    }
  }
  row.theta_hat = est.theta_hat;
  row.ci_lo = est.ci_lo;
  row.ci_hi = est.ci_hi;
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

/// Runs every k in order. `on_row` sees each row as soon as it exists, so
/// callers can flush partial output before a later row throws.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c, unsigned workers = 0,
                                       const std::function<void(const SweepRow&)>& on_row = {}) {
  c.validate();
  if (workers == 0) workers = resolve_workers(c);
  const auto ks = resolve_k_list(c);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    rows.push_back(run_point(c, ks[i], row_seed(c, i), workers));
    if (on_row) on_row(rows.back());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Writers

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline constexpr std::string_view kCsvHeader = "model,k,T,N,theta_hat,ci_lo,ci_hi,seed0,wall_time";

/// CSV line in SweepRow field order. wall_time is "-" unless `timing`, which
/// keeps repeated runs byte-identical.
inline std::string csv_line(const SweepRow& r, bool timing) {
  return r.model + "," + std::to_string(r.k) + "," + format_number(r.T) + "," + std::to_string(r.N) + "," +
         format_number(r.theta_hat) + "," + format_number(r.ci_lo) + "," + format_number(r.ci_hi) + "," +
         std::to_string(r.seed0) + "," + (timing ? format_number(r.wall_time) : "-");
}

inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool timing) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) os << csv_line(r, timing) << '\n';
}

inline nlohmann::ordered_json row_json(const SweepRow& r, bool timing) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["k"] = r.k;
  j["T"] = r.T;
  j["N"] = r.N;
  j["theta_hat"] = r.theta_hat;
  j["ci_lo"] = r.ci_lo;
  j["ci_hi"] = r.ci_hi;
  j["seed0"] = r.seed0;
  if (timing) {
    j["wall_time"] = r.wall_time;
  } else {
    j["wall_time"] = nullptr;
  }
  return j;
}

inline nlohmann::ordered_json sweep_json(const ExperimentConfig& c, const std::vector<SweepRow>& rows) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : describe(c)) cfg[k] = v;
  j["config"] = cfg;
  j["coupling"] = c.coupled ? "coupled: rows share per-edge uniforms across k, so the curve is monotone by construction"
                            : "independent: each row uses its own seed stream";
  j["confidence"] = c.confidence;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(row_json(r, c.timing));
  return j;
}

/// Whitespace-separated columns: k theta_hat ci_lo ci_hi.
inline void write_plot_data(std::ostream& os, const ExperimentConfig& c, const std::vector<SweepRow>& rows) {
  os << "# " << to_string(c.model) << " T=" << format_number(c.horizon) << " N=" << c.replicas
     << (c.coupled ? " coupled" : " independent") << '\n';
  os << "# k theta_hat ci_lo ci_hi\n";
  for (const auto& r : rows)
    os << r.k << ' ' << format_number(r.theta_hat) << ' ' << format_number(r.ci_lo) << ' '
       << format_number(r.ci_hi) << '\n';
}

/// Self-contained SVG line chart of theta_hat against k with CI whiskers.
inline void write_svg(std::ostream& os, const std::string& title, const std::vector<SweepRow>& rows) {
  const double width = 640, height = 400, left = 60, right = 20, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  double kmin = 0, kmax = 1;
  if (!rows.empty()) {
    kmin = static_cast<double>(rows.front().k);
    kmax = static_cast<double>(rows.back().k);
    if (kmax <= kmin) kmax = kmin + 1;
  }
  auto sx = [&](double k) { return left + (k - kmin) / (kmax - kmin) * pw; };
  auto sy = [&](double v) { return top + (1.0 - v) * ph; };
  auto f = [](double v) { return format_number(v); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"15\">"
     << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  for (double v : {0.0, 0.25, 0.5, 0.75, 1.0})
    os << "<text x=\"" << left - 8 << "\" y=\"" << f(sy(v) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << f(v) << "</text>\n";
  for (const auto& r : rows)
    os << "<text x=\"" << f(sx(static_cast<double>(r.k))) << "\" y=\"" << top + ph + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << r.k << "</text>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">k</text>\n";
  if (!rows.empty()) {
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& r : rows) os << f(sx(static_cast<double>(r.k))) << ',' << f(sy(r.theta_hat)) << ' ';
    os << "\"/>\n";
    for (const auto& r : rows) {
      const auto x = f(sx(static_cast<double>(r.k)));
      os << "<line x1=\"" << x << "\" y1=\"" << f(sy(r.ci_lo)) << "\" x2=\"" << x << "\" y2=\"" << f(sy(r.ci_hi))
         << "\" stroke=\"gray\"/>\n";
      os << "<circle cx=\"" << x << "\" cy=\"" << f(sy(r.theta_hat)) << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
  }
  os << "</svg>\n";
}

}  // namespace lrperc::harness
