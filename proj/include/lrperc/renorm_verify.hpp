#pragma once

// Replay verification of exploration traces, the pooled good-frequency
// report, coarse site-percolation comparison fields, and the line-oriented
// trace format.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lrperc/edge_sampler.hpp"
#include "lrperc/parallel.hpp"
#include "lrperc/renorm.hpp"
#include "lrperc/rng.hpp"
#include "lrperc/stats.hpp"

namespace lrperc {

struct TraceCheck {
  std::string name;
  std::uint64_t evaluations = 0;
  std::uint64_t violations = 0;
  std::optional<std::int64_t> first_step;
  std::string detail;  // description of the first violation

  bool passed() const noexcept { return violations == 0; }
};

struct VerificationReport {
  std::vector<TraceCheck> checks;
  std::size_t steps = 0;

  bool ok() const noexcept {
    for (const auto& c : checks)
      if (!c.passed()) return false;
    return true;
  }

  const TraceCheck& check(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw InvalidArgument("no check named '" + std::string(name) + "'");
  }

  /// Earliest offending step over all checks.
  std::optional<std::int64_t> first_violation() const {
    std::optional<std::int64_t> out;
    for (const auto& c : checks)
      if (c.first_step && (!out || *c.first_step < *out)) out = c.first_step;
    return out;
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
      os << c.name << ": " << (c.passed() ? "ok" : "VIOLATED") << " (" << c.evaluations << " evaluations";
      if (!c.passed()) os << ", " << c.violations << " violations, first at step " << *c.first_step << ": " << c.detail;
      os << ")\n";
    }
    return os.str();
  }
};

namespace detail {

struct EdgeKey {
  std::int64_t x, t, y;
  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& e) const noexcept {
    return static_cast<std::size_t>(KeyHasher(0).add(e.x).add(e.t).add(e.y).state());
  }
};

class CheckBook {
 public:
  explicit CheckBook(std::initializer_list<const char*> names) {
    for (auto n : names) checks_.push_back({n, 0, 0, std::nullopt, {}});
  }

  void expect(std::size_t idx, bool ok, std::int64_t step, const std::string& what = {}) {
    auto& c = checks_[idx];
    ++c.evaluations;
    if (ok) return;
    ++c.violations;
    if (!c.first_step) {
      c.first_step = step;
      c.detail = what;
    }
  }

  std::vector<TraceCheck> take() { return std::move(checks_); }

 private:
  std::vector<TraceCheck> checks_;
};

inline std::string vertex_string(const CoarseVertex& v) {
  return "(" + std::to_string(v.i) + "," + std::to_string(v.j) + ")";
}

}  // namespace detail

/// Replays a trace against `open` and re-checks, after every step:
///  a_connected       A stays connected in G*
///  b_boundary        B is contained in the exterior boundary of A
///  c_fresh_edges     no fine bond is queried at two distinct steps
///  d_reachability    every boundary vertex outside B has a fine vertex of its
///                    interval reached through bonds queried open at good steps
///  minimal_order     x_n is the minimal vertex of (boundary of A_n) \ B_n
///  anchor            u_n lies in I_{x_n}, is reached, and is the leftmost such vertex
///  steering          T+ for anchors in [z-R, z], T- for (z, z+R]; T- at the origin
///  outcome           the recorded good flag equals the replayed event
///  interval_disjoint intervals and target segments of each layer are disjoint
///  displacement_bound every queried displacement lies in [1, k_star]
///  parameters        the recorded parameters satisfy their defining relations
///  final_sets        recorded A and B equal the replayed sets
///  stop_reason       the recorded stop reason matches the final state
template <LineOracle F>
VerificationReport verify_trace(const ExplorationTrace& trace, const F& open) {
  enum : std::size_t {
    a_connected, b_boundary, c_fresh, d_reach, minimal_order, anchor_ok, steering, outcome,
    interval_disjoint, displacement_bound, parameters, final_sets, stop_reason
  };
  detail::CheckBook book{"a_connected", "b_boundary", "c_fresh_edges", "d_reachability", "minimal_order", "anchor",
                         "steering", "outcome", "interval_disjoint", "displacement_bound", "parameters",
                         "final_sets", "stop_reason"};
  VerificationReport report;
  report.steps = trace.steps.size();
  const auto& p = trace.params;

  try {
    check_parameters(p);
    book.expect(parameters, true, 0);
  } catch (const std::exception& e) {
    book.expect(parameters, false, 0, e.what());
    report.checks = book.take();
    return report;
  }

  std::set<CoarseVertex> A, B;
  std::unordered_set<detail::EdgeKey, detail::EdgeKeyHash> queried;
  std::map<std::int64_t, std::set<std::int64_t>> reached;  // layer -> fine x
  reached[0].insert(0);

  auto boundary = [&]() {
    std::set<CoarseVertex> out;
    for (const auto& a : A)
      for (const auto& c : coarse_children(a))
        if (!A.contains(c)) out.insert(c);
    return out;
  };
  auto reached_in = [&](const FineInterval& iv) -> std::optional<std::int64_t> {
    auto layer = reached.find(iv.layer);
    if (layer == reached.end()) return std::nullopt;
    auto it = layer->second.lower_bound(iv.lo);
    if (it == layer->second.end() || *it > iv.hi) return std::nullopt;
    return *it;
  };

  // Distinct vertices of one layer sit a_L2 - a_1 apart; both their
  // intervals and the two segments of one event must be separated.
  const bool spaced = p.aL2() - p.a1() > 2 * p.R;
  const bool seg_minus = p.a1() + p.aL1() < p.a1() + p.aL2();
  const bool seg_plus = p.a1() + p.a2L1() < p.aL2() + p.aL1();

  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& st = trace.steps[s];
    const auto n = static_cast<std::int64_t>(s);
    const auto& v = st.vertex;
    const auto tag = " at " + detail::vertex_string(v);

    if (st.n != n || !is_coarse(v)) {
      book.expect(minimal_order, false, n, "malformed step" + tag);
      continue;
    }
    book.expect(interval_disjoint, spaced && seg_minus && seg_plus, n, "intervals or segments overlap" + tag);

    // Selection.
    if (n == 0) {
      book.expect(minimal_order, v == CoarseVertex{0, 0}, n, "exploration must start at (0,0)");
    } else {
      std::set<CoarseVertex> frontier;
      for (const auto& c : boundary())
        if (!B.contains(c)) frontier.insert(c);
      book.expect(minimal_order, !frontier.empty() && *frontier.begin() == v, n,
                  frontier.empty() ? "boundary exhausted before step" : "expected " + detail::vertex_string(*frontier.begin()) + tag);
    }

    // Anchor and steering.
    const auto iv = interval_of(p, v);
    const auto z = z_coordinate(p, v);
    if (!st.anchor) {
      book.expect(anchor_ok, false, n, "missing anchor" + tag);
    } else if (n == 0) {
      book.expect(anchor_ok, *st.anchor == 0, n, "origin anchor must be 0");
      book.expect(steering, st.sign == EventSign::minus, n, "origin uses T-");
    } else {
      const auto left = reached_in(iv);
      book.expect(anchor_ok, iv.contains(*st.anchor) && left && *left == *st.anchor, n,
                  "anchor " + std::to_string(*st.anchor) + " is not the leftmost reached vertex" + tag);
      const auto want = *st.anchor <= z ? EventSign::plus : EventSign::minus;
      book.expect(steering, st.sign == want, n, std::string("expected T") + sign_char(want) + tag);
    }

    // Event replay with a query log.
    std::vector<std::pair<detail::EdgeKey, bool>> log;
    if (st.anchor) {
      auto logged = [&](std::int64_t x, std::int64_t t, std::int64_t y) {
        const bool o = open(x, t, y);
        log.push_back({{x, t, y}, o});
        return o;
      };
      const auto ev = event_T(logged, *st.anchor, 2 * v.j, st.sign, p);
      book.expect(outcome, ev.occurred == st.good, n,
                  std::string("event ") + (ev.occurred ? "occurred" : "failed") + " but step is recorded " +
                      (st.good ? "good" : "bad") + tag);
    } else {
      book.expect(outcome, false, n, "no anchor to replay" + tag);
    }
    for (const auto& [e, o] : log) {
      book.expect(displacement_bound, e.y >= 1 && e.y <= p.k_star, n,
                  "displacement " + std::to_string(e.y) + " outside [1, k_star]");
      book.expect(c_fresh, queried.insert(e).second, n,
                  "bond (" + std::to_string(e.x) + "," + std::to_string(e.t) + ")+" + std::to_string(e.y) +
                      " queried twice");
    }

    // Claimed outcome updates the sets and, for good steps, the reach structure.
    if (st.good) {
      bool adjacent = n == 0;
      for (const auto& q : coarse_parents(v)) adjacent = adjacent || A.contains(q);
      book.expect(a_connected, adjacent && !A.contains(v), n, "new good vertex not attached to A" + tag);
      A.insert(v);
      if (st.anchor && reached[2 * v.j].contains(*st.anchor))
        for (const auto& [e, o] : log)
          if (o && reached[e.t].contains(e.x)) reached[e.t + 1].insert(e.x + e.y);
    } else {
      B.insert(v);
    }

    bool b_ok = true;
    const auto bd = boundary();
    for (const auto& b : B) b_ok = b_ok && bd.contains(b);
    // The origin may be bad only as the last step with A empty.
    if (A.empty() && B.size() == 1 && *B.begin() == CoarseVertex{0, 0}) b_ok = true;
    book.expect(b_boundary, b_ok, n, "B leaves the exterior boundary of A" + tag);

    for (const auto& c : bd) {
      if (B.contains(c)) continue;
      book.expect(d_reach, reached_in(interval_of(p, c)).has_value(), n,
                  "no reached vertex in the interval of " + detail::vertex_string(c));
    }

    const bool last = s + 1 == trace.steps.size();
    if (!last && st.good && v.j == trace.j_max)
      book.expect(stop_reason, false, n, "level reached before the final step");
    if (!last && !st.good && n == 0) book.expect(stop_reason, false, n, "origin bad but exploration continued");
  }

  // Final state.
  const auto last_n = static_cast<std::int64_t>(trace.steps.size()) - 1;
  book.expect(final_sets,
              std::vector<CoarseVertex>(A.begin(), A.end()) == trace.good_set &&
                  std::vector<CoarseVertex>(B.begin(), B.end()) == trace.bad_set,
              last_n, "recorded A/B differ from replay");
  if (trace.steps.empty()) {
    book.expect(stop_reason, false, 0, "empty trace");
  } else {
    const auto& fin = trace.steps.back();
    StopReason expected = StopReason::frontier_exhausted;
    if (fin.n == 0 && !fin.good)
      expected = StopReason::origin_bad;
    else if (fin.good && fin.vertex.j == trace.j_max)
      expected = StopReason::level_reached;
    bool ok = expected == trace.stop;
    if (ok && expected == StopReason::frontier_exhausted) {
      for (const auto& c : boundary()) ok = ok && B.contains(c);
    }
    book.expect(stop_reason, ok, last_n, "recorded " + to_string(trace.stop) + ", replay gives " + to_string(expected));
  }

  report.checks = book.take();
  return report;
}

// ---------------------------------------------------------------------------
// Pooled good-frequency

enum class ComparisonMode { independent, one_dependent };

inline std::string to_string(ComparisonMode m) {
  return m == ComparisonMode::independent ? "independent" : "one-dependent";
}

struct DepthBucket {
  std::int64_t lo = 0;  // history depth n, inclusive
  std::int64_t hi = 0;
  std::uint64_t steps = 0;
  std::uint64_t good = 0;

  double frequency() const noexcept { return steps ? static_cast<double>(good) / static_cast<double>(steps) : 0.0; }
};

struct DominationReport {
  std::uint64_t traces = 0;
  std::uint64_t steps = 0;
  std::uint64_t good = 0;
  double frequency = 0.0;
  Interval ci;
  double confidence = 0.95;
  double delta = 0.0;
  double threshold = 0.0;  // 1 - delta - slack
  bool pass = false;
  ComparisonMode mode = ComparisonMode::independent;
  std::uint64_t reached_level = 0;  // traces stopping with level-reached
  std::vector<DepthBucket> by_depth;
};

/// Pools every step of every trace; PASS iff the Wilson lower bound of the
/// good-frequency is at least 1 - delta - slack. Depth buckets are
/// {0}, {1}, [2,3], [4,7], ...
inline DominationReport domination_report(std::span<const ExplorationTrace> traces, double delta,
                                          ComparisonMode mode = ComparisonMode::independent,
                                          double confidence = 0.95, double slack = 0.01) {
  if (traces.empty()) throw InvalidArgument("domination report needs at least one trace");
  DominationReport r;
  r.traces = traces.size();
  r.delta = delta;
  r.confidence = confidence;
  r.mode = mode;
  r.threshold = 1.0 - delta - slack;
  auto bucket_of = [](std::int64_t n) {
    std::size_t b = 0;
    while (n > 0) {
      n >>= 1;
      ++b;
    }
    return b;
  };
  for (const auto& t : traces) {
    if (t.reached_level()) ++r.reached_level;
    for (const auto& st : t.steps) {
      ++r.steps;
      r.good += st.good ? 1 : 0;
      const auto b = bucket_of(st.n);
      while (r.by_depth.size() <= b) {
        const auto k = r.by_depth.size();
        const std::int64_t lo = k == 0 ? 0 : std::int64_t{1} << (k - 1);
        const std::int64_t hi = k == 0 ? 0 : (std::int64_t{1} << k) - 1;
        r.by_depth.push_back({lo, hi, 0, 0});
      }
      ++r.by_depth[b].steps;
      r.by_depth[b].good += st.good ? 1 : 0;
    }
  }
  r.frequency = r.steps ? static_cast<double>(r.good) / static_cast<double>(r.steps) : 0.0;
  r.ci = wilson_interval(r.good, r.steps, confidence);
  r.pass = r.steps > 0 && r.ci.lo >= r.threshold;
  return r;
}

/// Site states of a comparison field on G*. Independent: Bernoulli(density)
/// per site. One-dependent: W_{i,j} ~ Bernoulli(sqrt(density)) i.i.d. and the
/// site (i,j) is open iff W_{i,j} and W_{i-2,j}, so horizontal neighbours share
/// a variable while the marginal stays `density`.
class CoarseSiteField {
 public:
  CoarseSiteField(std::uint64_t seed, double density, ComparisonMode mode)
      : seed_(seed), density_(density), mode_(mode), root_(std::sqrt(density)) {
    if (!(density >= 0.0 && density <= 1.0)) throw InvalidArgument("density must lie in [0,1]");
  }

  bool open(const CoarseVertex& v) const {
    if (mode_ == ComparisonMode::independent) return draw(v) < density_;
    return draw(v) < root_ && draw({v.i - 2, v.j}) < root_;
  }

 private:
  double draw(const CoarseVertex& v) const { return KeyHasher(seed_).add(v.i).add(v.j).unit(); }

  std::uint64_t seed_;
  double density_;
  ComparisonMode mode_;
  double root_;
};

/// Whether the open cluster of (0,0) in G* reaches layer `level`.
inline bool coarse_site_survives(const CoarseSiteField& field, std::int64_t level) {
  if (!field.open({0, 0})) return false;
  std::vector<std::int64_t> layer{0};
  for (std::int64_t j = 1; j <= level && !layer.empty(); ++j) {
    std::vector<std::int64_t> next;
    for (auto i : layer) {
      for (auto c : {i - 1, i + 1})
        if ((next.empty() || next.back() < c) && field.open({c, j})) next.push_back(c);
    }
    layer = std::move(next);
  }
  return !layer.empty();
}

/// Survival to coarse level `level` of the comparison field, replicas seeded by mix_seed(seed0, i).
inline SurvivalEstimate coarse_site_survival(double density, std::int64_t level, std::uint64_t replicas,
                                             std::uint64_t seed0, ComparisonMode mode = ComparisonMode::independent,
                                             unsigned workers = 1, double confidence = 0.95) {
  if (replicas == 0) throw InvalidArgument("need at least one replica");
  std::vector<std::uint8_t> hits(replicas, 0);
  parallel_for_index(replicas, workers, [&](std::size_t i) {
    hits[i] = coarse_site_survives(CoarseSiteField(mix_seed(seed0, i + 1), density, mode), level) ? 1 : 0;
  });
  return summarize_indicators(hits, level, TruncationRange::untruncated(), seed0, confidence);
}

/// Explorations of replicas i = 1..N with seeds mix_seed(seed0, i).
inline std::vector<ExplorationTrace> explore_replicas(const ConnectionFamily& family, const RenormParams& params,
                                                      std::int64_t j_max, std::uint64_t replicas,
                                                      std::uint64_t seed0, unsigned workers = 1) {
  std::vector<ExplorationTrace> out(replicas);
  const auto truncated = truncate(family, params.k_star);
  parallel_for_index(replicas, workers, [&](std::size_t i) {
    const auto seed = mix_seed(seed0, i + 1);
    out[i] = explore_renormalized(SeededConfig(seed, truncated), params, j_max, seed);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Trace text format
//
//   # lrperc-trace 1
//   # seed <u64>
//   # j_max <int>
//   # model dry|contact
//   # epsilon <double>      (17 significant digits)
//   # delta <double>
//   # L0 <int>  # L1 <int>  # L2 <int>  # R <int>  # k_star <int>
//   # a <a_1> <a_2> ...
//   # stop frontier-exhausted|level-reached|origin-bad
//   <n> <i> <j> <u or -> <-|+> <0|1>
//
// Header lines may come in any order; A and B are rebuilt from the steps.

inline void write_trace(std::ostream& os, const ExplorationTrace& t) {
  const auto& p = t.params;
  os << "# lrperc-trace 1\n";
  os << "# seed " << t.seed << "\n";
  os << "# j_max " << t.j_max << "\n";
  os << "# model " << to_string(p.model) << "\n";
  os << std::setprecision(17);
  os << "# epsilon " << p.epsilon << "\n";
  os << "# delta " << p.delta << "\n";
  os << "# L0 " << p.L0 << "\n# L1 " << p.L1 << "\n# L2 " << p.L2 << "\n# R " << p.R << "\n# k_star " << p.k_star
     << "\n";
  os << "# a";
  for (auto v : p.a) os << ' ' << v;
  os << "\n# stop " << to_string(t.stop) << "\n";
  for (const auto& s : t.steps) {
    os << s.n << ' ' << s.vertex.i << ' ' << s.vertex.j << ' ';
    if (s.anchor)
      os << *s.anchor;
    else
      os << '-';
    os << ' ' << sign_char(s.sign) << ' ' << (s.good ? 1 : 0) << '\n';
  }
}

inline ExplorationTrace read_trace(std::istream& is) {
  ExplorationTrace t;
  std::string line;
  std::size_t lineno = 0;
  bool saw_magic = false;
  std::set<CoarseVertex> A, B;
  auto fail = [&](const std::string& what) -> void {
    throw InvalidArgument("trace line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      auto& p = t.params;
      if (key == "lrperc-trace") {
        saw_magic = true;
      } else if (key == "seed") {
        ls >> t.seed;
      } else if (key == "j_max") {
        ls >> t.j_max;
      } else if (key == "model") {
        std::string m;
        ls >> m;
        if (m != "dry" && m != "contact") fail("unknown model '" + m + "'");
        p.model = m == "dry" ? RenormModel::dry : RenormModel::contact;
      } else if (key == "epsilon") {
        ls >> p.epsilon;
      } else if (key == "delta") {
        ls >> p.delta;
      } else if (key == "L0") {
        ls >> p.L0;
      } else if (key == "L1") {
        ls >> p.L1;
      } else if (key == "L2") {
        ls >> p.L2;
      } else if (key == "R") {
        ls >> p.R;
      } else if (key == "k_star") {
        ls >> p.k_star;
      } else if (key == "a") {
        std::int64_t v;
        while (ls >> v) p.a.push_back(v);
        ls.clear();
      } else if (key == "stop") {
        std::string r;
        ls >> r;
        t.stop = stop_reason_from_string(r);
      } else {
        continue;
      }
      if (ls.fail()) fail("bad value for '" + key + "'");
      continue;
    }
    ExplorationStep s;
    std::string u, sign;
    int good = 0;
    if (!(ls >> s.n >> s.vertex.i >> s.vertex.j >> u >> sign >> good)) fail("expected 'n i j u sign good'");
    if (u != "-") {
      try {
        std::size_t used = 0;
        s.anchor = std::stoll(u, &used);
        if (used != u.size()) fail("bad anchor '" + u + "'");
      } catch (const std::logic_error&) {
        fail("bad anchor '" + u + "'");
      }
    }
    if (sign != "-" && sign != "+") fail("sign must be - or +");
    if (good != 0 && good != 1) fail("good flag must be 0 or 1");
    s.sign = sign == "-" ? EventSign::minus : EventSign::plus;
    s.good = good == 1;
    (s.good ? A : B).insert(s.vertex);
    t.steps.push_back(s);
  }
  if (!saw_magic) throw InvalidArgument("not a trace file (missing '# lrperc-trace' header)");
  t.good_set.assign(A.begin(), A.end());
  t.bad_set.assign(B.begin(), B.end());
  return t;
}

}  // namespace lrperc
