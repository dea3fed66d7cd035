#pragma once

// Machine-readable invariant suite. Every check ends PASS, FAIL or NO DATA;
// the exit code is 0 when all pass, 1 on any failure, 3 when nothing failed
// but some check had no data. Config errors (exit 2) never reach this layer.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrperc/aniso.hpp"
#include "lrperc/contact.hpp"
#include "lrperc/edge_sampler.hpp"
#include "lrperc/harness/config.hpp"
#include "lrperc/harness/sweep.hpp"
#include "lrperc/renorm.hpp"
#include "lrperc/renorm_verify.hpp"

namespace lrperc::harness {

enum class CheckStatus { pass, fail, no_data };

inline std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "PASS";
    case CheckStatus::fail: return "FAIL";
    case CheckStatus::no_data: return "NO DATA";
  }
  return "?";
}

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNoData = 3;

struct SuiteCheck {
  std::string name;
  CheckStatus status = CheckStatus::no_data;
  std::uint64_t evaluations = 0;
  std::uint64_t violations = 0;
  std::optional<Interval> ci;
  std::string detail;
};

struct SuiteReport {
  std::vector<SuiteCheck> checks;

  CheckStatus status() const {
    bool missing = false;
    for (const auto& c : checks) {
      if (c.status == CheckStatus::fail) return CheckStatus::fail;
      missing = missing || c.status == CheckStatus::no_data;
    }
    return missing || checks.empty() ? CheckStatus::no_data : CheckStatus::pass;
  }

  int exit_code() const {
    switch (status()) {
      case CheckStatus::pass: return kExitPass;
      case CheckStatus::fail: return kExitFail;
      case CheckStatus::no_data: return kExitNoData;
    }
    return kExitFail;
  }

  const SuiteCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Line oracle that flips each queried bond state with probability `rate`,
/// keyed so that repeated queries agree. rate = 0 is the honest configuration.
class SabotagedLine {
 public:
  SabotagedLine(SeededConfig honest, double rate) : honest_(std::move(honest)), rate_(rate) {}

  bool operator()(std::int64_t x, std::int64_t t, std::int64_t y) const {
    const bool open = honest_(x, t, y);
    if (rate_ <= 0.0) return open;
    const double u = KeyHasher(stream_seed(honest_.seed(), kSabotageStream)).add(x).add(t).add(y).unit();
    return u < rate_ ? !open : open;
  }

  const SeededConfig& honest() const noexcept { return honest_; }

 private:
  SeededConfig honest_;
  double rate_;
};

struct SuiteOptions {
  std::int64_t identity_radius = 50;
  std::uint64_t aniso_traces = 0;      // 0: max(1, replicas / 10)
  std::uint64_t contact_samples = 0;   // 0: max(1, replicas / 10)
  std::int64_t contact_slabs = 64;
  std::optional<std::vector<ExplorationTrace>> external_traces;  // from --trace
};

namespace detail {

inline SuiteCheck named(std::string name) {
  SuiteCheck c;
  c.name = std::move(name);
  return c;
}

inline SuiteCheck no_data(std::string name, std::string why) {
  SuiteCheck c;
  c.name = std::move(name);
  c.status = CheckStatus::no_data;
  c.detail = std::move(why);
  return c;
}

inline void tally(SuiteCheck& c, bool ok, const std::string& what) {
  ++c.evaluations;
  if (!ok) {
    if (c.violations == 0) c.detail = what;
    ++c.violations;
  }
}

inline void finish(SuiteCheck& c) {
  if (c.evaluations == 0) {
    c.status = CheckStatus::no_data;
    if (c.detail.empty()) c.detail = "no data";
  } else {
    c.status = c.violations == 0 ? CheckStatus::pass : CheckStatus::fail;
  }
}

/// One line naming the earliest violated check of a trace report.
inline std::string first_failure(const VerificationReport& rep) {
  const TraceCheck* best = nullptr;
  for (const auto& c : rep.checks)
    if (!c.passed() && (!best || c.first_step < best->first_step)) best = &c;
  if (!best) return "ok";
  return best->name + " at step " + std::to_string(best->first_step.value_or(-1)) + ": " + best->detail;
}

inline std::uint64_t subsample(std::uint64_t configured, std::uint64_t replicas) {
  if (configured > 0) return configured;
  return replicas == 0 ? 0 : std::max<std::uint64_t>(1, replicas / 10);
}

}  // namespace detail

/// Runs every check against the configuration. Sample sizes follow
/// `replicas`, `j_max` and `horizon`; `sabotage` corrupts the sampled edge
/// states that the lift-soundness checks then re-validate.
inline SuiteReport run_verification_suite(const ExperimentConfig& c, const SuiteOptions& opt = {},
                                          unsigned workers = 0) {
  if (workers == 0) workers = resolve_workers(c);
  SuiteReport report;
  const auto family = c.family.build();
  const auto T = static_cast<std::int64_t>(c.horizon);

  // Parameters and coordinates.
  std::optional<RenormParams> params;
  {
    auto chk = detail::named("parameters");
    try {
      params = derive_parameters(family, c.epsilon, c.delta);
      check_parameters(*params);
      detail::tally(chk, true, "");
      chk.detail = "L0=" + std::to_string(params->L0) + " L1=" + std::to_string(params->L1) +
                   " R=" + std::to_string(params->R) + " L2=" + std::to_string(params->L2) +
                   " k_star=" + std::to_string(params->k_star);
    } catch (const Error& e) {
      detail::tally(chk, false, e.what());
      params.reset();
    }
    detail::finish(chk);
    report.checks.push_back(chk);
  }
  if (params) {
    auto chk = detail::named("coordinate-identities");
    detail::tally(chk, coordinate_identities_hold(*params, opt.identity_radius), "identity violated");
    for (std::int64_t j = 0; j <= 8; ++j)
      for (std::int64_t i = -j; i <= j; i += 2)
        detail::tally(chk, steering_holds(*params, {i, j}), "steering fails at " + std::to_string(i) + "," +
                                                              std::to_string(j));
    detail::finish(chk);
    report.checks.push_back(chk);
  } else {
    report.checks.push_back(detail::no_data("coordinate-identities", "parameters unavailable"));
  }

  // Renormalized traces on the fine lattice, sampled from the (possibly
  // sabotaged) configuration and verified against the honest one.
  std::vector<ExplorationTrace> traces;
  if (params && c.replicas > 0) {
    traces.resize(c.replicas);
    const auto truncated = truncate(family, params->k_star);
    parallel_for_index(c.replicas, workers, [&](std::size_t i) {
      const auto seed = mix_seed(c.seed0, i + 1);
      traces[i] = explore_renormalized(SabotagedLine(SeededConfig(seed, truncated), c.sabotage), *params, c.j_max,
                                       seed);
    });
  }
  if (traces.empty()) {
    report.checks.push_back(detail::no_data("trace-invariants", "empty trace list"));
    report.checks.push_back(detail::no_data("domination", "empty trace list"));
  } else {
    auto chk = detail::named("trace-invariants");
    const auto truncated = truncate(family, params->k_star);
    std::vector<VerificationReport> reps(traces.size());
    parallel_for_index(traces.size(), workers,
                       [&](std::size_t i) { reps[i] = verify_trace(traces[i], SeededConfig(traces[i].seed, truncated)); });
    for (std::size_t i = 0; i < reps.size(); ++i)
      detail::tally(chk, reps[i].ok(), "trace " + std::to_string(i) + ": " + detail::first_failure(reps[i]));
    detail::finish(chk);
    report.checks.push_back(chk);

    const auto dom = domination_report(traces, c.delta, ComparisonMode::independent, c.confidence);
    auto d = detail::named("domination");
    d.evaluations = dom.steps;
    d.violations = dom.steps - dom.good;
    d.ci = dom.ci;
    d.status = dom.pass ? CheckStatus::pass : CheckStatus::fail;
    char buf[160];
    std::snprintf(buf, sizeof buf, "good frequency %.6f, Wilson lower %.6f vs threshold %.4f, %llu/%llu reached level",
                  dom.frequency, dom.ci.lo, dom.threshold, static_cast<unsigned long long>(dom.reached_level),
                  static_cast<unsigned long long>(dom.traces));
    d.detail = buf;
    report.checks.push_back(d);
  }

  if (opt.external_traces) {
    auto chk = detail::named("external-traces");
    for (std::size_t i = 0; i < opt.external_traces->size(); ++i) {
      const auto& t = (*opt.external_traces)[i];
      const auto rep = verify_trace(t, SeededConfig(t.seed, truncate(family, t.params.k_star)));
      detail::tally(chk, rep.ok(), "trace " + std::to_string(i) + ": " + detail::first_failure(rep));
    }
    detail::finish(chk);
    if (chk.evaluations == 0) chk.detail = "no data: empty trace list";
    report.checks.push_back(chk);
  }

  // Coupling: survival indicators never decrease along the k list.
  // With k = auto the sampled checks run at k in {1, 2, 4, 8}; k_star itself
  // makes clusters too wide for a quick suite.
  std::vector<std::int64_t> ks = c.k_auto() ? std::vector<std::int64_t>{1, 2, 4, 8} : c.k_list;
  if (c.replicas == 0 || ks.size() < 2 || T < 1) {
    report.checks.push_back(detail::no_data("coupling-monotone", "needs replicas, horizon >= 1 and two k values"));
  } else {
    auto chk = detail::named("coupling-monotone");
    std::vector<std::vector<std::uint8_t>> rows;
    for (auto k : ks) rows.push_back(survival_indicators(family, TruncationRange::at(k), T, c.replicas, c.seed0, workers));
    for (std::size_t i = 0; i < c.replicas; ++i)
      for (std::size_t r = 1; r < rows.size(); ++r)
        detail::tally(chk, rows[r - 1][i] <= rows[r][i],
                      "replica " + std::to_string(i + 1) + " survives at k=" + std::to_string(ks[r - 1]) +
                          " but not at k=" + std::to_string(ks[r]));
    detail::finish(chk);
    report.checks.push_back(chk);
  }

  // Certificate soundness: open paths found in the sampled configuration are
  // open in the honest one.
  if (c.replicas == 0 || T < 1 || ks.empty() || family.dim() != 1) {
    report.checks.push_back(detail::no_data("certificate-soundness", "needs replicas, horizon >= 1, a k and d = 1"));
  } else {
    auto chk = detail::named("certificate-soundness");
    const auto truncated = truncate(family, ks.back());
    const auto support = truncated.support();
    std::vector<Point> disp;
    for (const auto& w : support) disp.push_back(w.y);
    std::vector<std::int8_t> verdict(c.replicas, -1);
    std::vector<std::string> why(c.replicas);
    parallel_for_index(c.replicas, workers, [&](std::size_t i) {
      const auto seed = mix_seed(c.seed0, i + 1);
      const SabotagedLine sampled(SeededConfig(seed, truncated), c.sabotage);
      ExploreOptions eo;
      eo.track_parents = true;
      auto open = [&](const Vertex& v, std::size_t d) { return sampled(v.x[0], v.t, disp[d][0]); };
      const auto r = explore_with(open, disp, T, Vertex{Point{0}, 0}, eo);
      if (!r.survived) return;
      const auto path = certificate_path(r);
      verdict[i] = 1;
      for (std::size_t s = 1; s < path.size(); ++s) {
        if (!sampled.honest().is_open(OrientedEdge{path[s - 1], path[s].x - path[s - 1].x})) {
          verdict[i] = 0;
          why[i] = "replica " + std::to_string(i + 1) + ": bond " + std::to_string(s) + " is closed";
          break;
        }
      }
    });
    for (std::size_t i = 0; i < c.replicas; ++i)
      if (verdict[i] >= 0) detail::tally(chk, verdict[i] == 1, why[i]);
    detail::finish(chk);
    report.checks.push_back(chk);
  }

  // Anisotropic model: lifted certificates and bond sharing of renormalized
  // traces in the induced model.
  if (c.replicas == 0 || T < 1 || family.dim() != 1) {
    report.checks.push_back(detail::no_data("aniso-lift-soundness", "needs replicas, horizon >= 1 and d = 1"));
  } else {
    auto chk = detail::named("aniso-lift-soundness");
    const auto cfg = aniso_config(c, ks.empty() ? TruncationRange::untruncated() : TruncationRange::at(ks.back()));
    std::vector<std::int8_t> verdict(c.replicas, -1);
    std::vector<std::string> why(c.replicas);
    parallel_for_index(c.replicas, workers, [&](std::size_t i) {
      const auto seed = mix_seed(c.seed0, i + 1);
      const auto r = explore_aniso(AnisoSample(seed, cfg, c.sabotage), T);
      if (!r.survived) return;
      const auto check = validate_lift(AnisoSample(seed, cfg), r.lifted);
      verdict[i] = check.valid ? 1 : 0;
      if (!check.valid) why[i] = "replica " + std::to_string(i + 1) + ": " + check.detail;
    });
    for (std::size_t i = 0; i < c.replicas; ++i)
      if (verdict[i] >= 0) detail::tally(chk, verdict[i] == 1, why[i]);
    detail::finish(chk);
    if (chk.evaluations == 0) chk.detail = "no surviving replica to lift";
    report.checks.push_back(chk);
  }
  {
    const auto n = detail::subsample(opt.aniso_traces, c.replicas);
    std::optional<RenormParams> ap;
    try {
      if (n > 0 && family.dim() == 1) ap = derive_parameters(aniso_config(c).induced_family(), c.sigma * c.epsilon, c.delta);
    } catch (const Error&) {
    }
    if (!ap) {
      report.checks.push_back(detail::no_data("aniso-bond-sharing", "no replicas or no induced parameters"));
    } else {
      auto chk = detail::named("aniso-bond-sharing");
      auto cfg = aniso_config(c, TruncationRange::at(ap->k_star));
      std::vector<std::string> why(n);
      std::vector<std::uint64_t> shared(n, 0);
      parallel_for_index(n, workers, [&](std::size_t i) {
        const auto seed = mix_seed(c.seed0, i + 1);
        const AnisoSample sample(seed, cfg);
        const auto trace = explore_renormalized(sample, *ap, c.j_max, seed);
        const auto rep = verify_trace(trace, sample);
        const auto sharing = underlying_bond_sharing(trace, sample);
        shared[i] = sharing.shared_vertical;
        if (!rep.ok()) why[i] = "trace " + std::to_string(i + 1) + ": " + detail::first_failure(rep);
        else if (!sharing.ok()) why[i] = "trace " + std::to_string(i + 1) + ": " + sharing.range_one.detail +
                                         sharing.horizontal.detail;
      });
      std::uint64_t total_shared = 0;
      for (std::size_t i = 0; i < n; ++i) {
        detail::tally(chk, why[i].empty(), why[i]);
        total_shared += shared[i];
      }
      detail::finish(chk);
      if (chk.violations == 0)
        chk.detail = std::to_string(total_shared) + " vertical bonds shared, all between horizontal neighbours";
      report.checks.push_back(chk);
    }
  }

  // Contact process: every discretized open bond is a k-connection.
  {
    const auto n = c.replicas == 0 ? 0 : std::max<std::uint64_t>(4, detail::subsample(opt.contact_samples, c.replicas));
    std::optional<ContactModel> model;
    try {
      if (n > 0 && family.dim() == 1) {
        const std::int64_t k = ks.empty() ? 3 : std::min<std::int64_t>(ks.front(), 8);
        model = ContactModel{c.family.build(ValueDomain::rate), TruncationRange::at(k), c.death_rate};
        model->validate();
      }
    } catch (const Error&) {
      model.reset();
    }
    if (!model) {
      report.checks.push_back(detail::no_data("contact-certification", "no replicas or no rate family"));
    } else {
      auto chk = detail::named("contact-certification");
      const double tau = choose_tau(c.delta);
      const auto k = model->k.k();
      const std::int64_t width = 16 + 4 * k;
      const auto slabs = opt.contact_slabs;
      std::vector<std::uint64_t> evals(n, 0);
      std::vector<std::string> why(n);
      parallel_for_index(n, workers, [&](std::size_t i) {
        const auto seed = mix_seed(c.seed0, i + 1);
        const auto sample =
            sample_graphical(seed, *model, Window{Point{0}, Point{width}, tau * static_cast<double>(slabs)});
        const DiscretizedContact<GraphicalSample> disc(sample, tau);
        for (std::int64_t t = 0; t < slabs; ++t)
          for (std::int64_t x = 0; x + k <= width; ++x)
            for (std::int64_t y = 1; y <= k; ++y) {
              if (!disc(x, t, y)) continue;
              ++evals[i];
              const double a = tau * static_cast<double>(t);
              if (why[i].empty() && !k_connected(sample, Point{x}, a, Point{x + y}, a + tau, k))
                why[i] = "sample " + std::to_string(i + 1) + ": bond (" + std::to_string(x) + "," +
                         std::to_string(t) + ")+" + std::to_string(y) + " not k-connected";
            }
      });
      for (std::size_t i = 0; i < n; ++i) {
        chk.evaluations += evals[i];
        if (!why[i].empty()) {
          if (chk.violations == 0) chk.detail = why[i];
          ++chk.violations;
        }
      }
      detail::finish(chk);
      report.checks.push_back(chk);
    }
  }
  return report;
}

inline nlohmann::ordered_json report_json(const ExperimentConfig& c, const SuiteReport& r) {
  nlohmann::ordered_json j;
  j["status"] = to_string(r.status());
  j["exit_code"] = r.exit_code();
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : describe(c)) cfg[k] = v;
  j["config"] = cfg;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& chk : r.checks) {
    nlohmann::ordered_json e;
    e["name"] = chk.name;
    e["status"] = to_string(chk.status);
    e["evaluations"] = chk.evaluations;
    e["violations"] = chk.violations;
    if (chk.ci) {
      e["ci_lo"] = chk.ci->lo;
      e["ci_hi"] = chk.ci->hi;
    }
    e["detail"] = chk.detail;
    j["checks"].push_back(e);
  }
  return j;
}

}  // namespace lrperc::harness
