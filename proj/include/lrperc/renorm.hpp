#pragma once

// Block renormalization for one-sided long-range oriented percolation on
// Z x Z_+.
//
// Seed events T-/T+ at a fine vertex open two-step paths into two target
// segments two layers up. The coarse lattice G* = {(i,j) : i+j even} indexes
// disjoint fine intervals I_{i,j} = [z_{i,j} - R, z_{i,j} + R] x {2j}; the
// exploration declares coarse vertices good or bad one at a time, always
// picking the minimal vertex of the unexplored exterior boundary and steering
// the event sign by where its anchor sits inside I_{i,j}.

#include <algorithm>
#include <array>
#include <compare>
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lrperc/edge_sampler.hpp"
#include "lrperc/errors.hpp"
#include "lrperc/lattice.hpp"
#include "lrperc/stats.hpp"

namespace lrperc {

/// A one-dimensional bond oracle: open(x, t, y) for <(x,t), (x+y,t+1)>.
template <class F>
concept LineOracle = requires(const F& f, std::int64_t x, std::int64_t t, std::int64_t y) {
  { f(x, t, y) } -> std::convertible_to<bool>;
};

/// Which binomial conditions fix L0 and L1.
///  dry:     P(Bin(L0,e) >= 1) > 1 - delta/3,  P(Bin(L1,e) >= L0) > 1 - delta/3
///  contact: P(Bin(L0,e) >  0) > 1 - delta/8,  P(Bin(L1,e) >  L0) > 1 - delta/8
enum class RenormModel { dry, contact };

inline std::string to_string(RenormModel m) { return m == RenormModel::dry ? "dry" : "contact"; }

struct RenormParams {
  double epsilon = 0.0;
  double delta = 0.0;
  RenormModel model = RenormModel::dry;
  std::vector<std::int64_t> a;  // a_1, a_2, ... (at least max(2 L1, L2) terms)
  std::int64_t L0 = 0;
  std::int64_t L1 = 0;
  std::int64_t L2 = 0;
  std::int64_t R = 0;
  std::int64_t k_star = 0;  // a_{L2}, the truncation range the construction lives in

  std::int64_t a_at(std::int64_t n) const {
    if (n < 1 || n > static_cast<std::int64_t>(a.size()))
      throw InvalidArgument("support index " + std::to_string(n) + " outside derived prefix");
    return a[static_cast<std::size_t>(n - 1)];
  }
  std::int64_t a1() const { return a_at(1); }
  std::int64_t aL1() const { return a_at(L1); }
  std::int64_t a2L1() const { return a_at(2 * L1); }
  std::int64_t aL2() const { return a_at(L2); }
};

inline double binomial_threshold(RenormModel model, double delta) {
  return 1.0 - delta / (model == RenormModel::dry ? 3.0 : 8.0);
}

/// Smallest n >= lo with P(Bin(n, p) >= m) > threshold (monotone in n).
inline std::int64_t minimal_trials(std::int64_t m, double p, double threshold, std::int64_t lo) {
  auto ok = [&](std::int64_t n) { return n >= m && binomial_tail_at_least(n, m, p) > threshold; };
  lo = std::max<std::int64_t>(lo, std::max<std::int64_t>(m, 1));
  if (ok(lo)) return lo;
  std::int64_t hi = lo;
  for (;;) {
    if (hi > (std::int64_t{1} << 40)) throw InvalidArgument("binomial condition unattainable");
    hi *= 2;
    if (ok(hi)) break;
  }
  std::int64_t bad = hi / 2;
  while (hi - bad > 1) {
    std::int64_t mid = bad + (hi - bad) / 2;
    (ok(mid) ? hi : bad) = mid;
  }
  return hi;
}

/// Complete a parameter set from an increasing support prefix. The prefix
/// must reach index 2 L1; `extend` is called with a required length whenever
/// more terms are needed to locate L2.
template <class Extend>
RenormParams complete_parameters(double epsilon, double delta, RenormModel model, std::int64_t L0, std::int64_t L1,
                                 Extend&& extend) {
  RenormParams p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.model = model;
  p.L0 = L0;
  p.L1 = L1;
  p.a = extend(2 * L1);
  p.R = std::max(p.aL1(), p.a2L1() - p.aL1());
  const std::int64_t bound = p.a1() + 3 * p.R;
  for (;;) {
    auto it = std::upper_bound(p.a.begin(), p.a.end(), bound);
    if (it != p.a.end()) {
      p.L2 = static_cast<std::int64_t>(it - p.a.begin()) + 1;
      break;
    }
    p.a = extend(static_cast<std::int64_t>(p.a.size()) * 2);
  }
  p.k_star = p.aL2();
  const auto keep = std::max(2 * p.L1, p.L2);
  p.a.resize(static_cast<std::size_t>(keep));
  return p;
}

/// L0, L1 minimal for the model's binomial conditions; R = max(a_{L1},
/// a_{2L1} - a_{L1}); L2 minimal with a_{L2} > a_1 + 3R.
inline RenormParams derive_parameters(const ConnectionFamily& family, double epsilon, double delta,
                                      RenormModel model = RenormModel::dry, const ScanOptions& scan = {}) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0,1)");
  const double thr = binomial_threshold(model, delta);
  const std::int64_t L0 = minimal_trials(1, epsilon, thr, 1);
  const std::int64_t need = model == RenormModel::dry ? L0 : L0 + 1;
  const std::int64_t L1 = minimal_trials(need, epsilon, thr, need);
  // The support threshold is epsilon for bond families; rate families
  // supply their own threshold through derive_contact_parameters.
  return complete_parameters(epsilon, delta, model, L0, L1,
                             [&](std::int64_t m) { return support_above(family, epsilon, m, scan); });
}

/// Throws InvalidArgument naming the first violated defining relation.
inline void check_parameters(const RenormParams& p) {
  const double thr = binomial_threshold(p.model, p.delta);
  const std::int64_t need = p.model == RenormModel::dry ? p.L0 : p.L0 + 1;
  if (!(binomial_tail_at_least(p.L0, 1, p.epsilon) > thr)) throw InvalidArgument("L0 violates its binomial condition");
  if (p.L1 < need || !(binomial_tail_at_least(p.L1, need, p.epsilon) > thr))
    throw InvalidArgument("L1 violates its binomial condition");
  for (std::size_t n = 1; n < p.a.size(); ++n)
    if (p.a[n] <= p.a[n - 1]) throw InvalidArgument("support prefix is not strictly increasing");
  if (p.a.empty() || p.a.front() < 1) throw InvalidArgument("support prefix must be positive");
  if (p.R != std::max(p.aL1(), p.a2L1() - p.aL1())) throw InvalidArgument("R differs from max(a_L1, a_2L1 - a_L1)");
  if (!(p.aL2() > p.a1() + 3 * p.R)) throw InvalidArgument("a_L2 <= a_1 + 3R");
  if (p.k_star != p.aL2()) throw InvalidArgument("k_star differs from a_L2");
}

// ---------------------------------------------------------------------------
// Coarse lattice G*

/// Vertex of G*; ordered by layer j, then i.
struct CoarseVertex {
  std::int64_t i = 0;
  std::int64_t j = 0;

  friend bool operator==(const CoarseVertex&, const CoarseVertex&) = default;
  friend std::strong_ordering operator<=>(const CoarseVertex& a, const CoarseVertex& b) {
    if (auto c = a.j <=> b.j; c != 0) return c;
    return a.i <=> b.i;
  }
};

inline bool is_coarse(const CoarseVertex& v) noexcept { return v.j >= 0 && ((v.i + v.j) & 1) == 0; }

inline std::int64_t z_coordinate(const RenormParams& p, const CoarseVertex& v) {
  if (!is_coarse(v))
    throw ParityViolation("(" + std::to_string(v.i) + "," + std::to_string(v.j) + ") is not a vertex of G*");
  return v.j * p.aL1() + (v.i + v.j) / 2 * p.aL2() + (v.j - v.i) / 2 * p.a1();
}

struct FineInterval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::int64_t layer = 0;

  bool contains(std::int64_t x) const noexcept { return lo <= x && x <= hi; }
};

/// I_{i,j} = [z - R, z + R] x {2j}.
inline FineInterval interval_of(const RenormParams& p, const CoarseVertex& v) {
  const auto z = z_coordinate(p, v);
  return {z - p.R, z + p.R, 2 * v.j};
}

inline std::array<CoarseVertex, 2> coarse_children(const CoarseVertex& v) {
  return {CoarseVertex{v.i - 1, v.j + 1}, CoarseVertex{v.i + 1, v.j + 1}};
}

inline std::array<CoarseVertex, 2> coarse_parents(const CoarseVertex& v) {
  return {CoarseVertex{v.i - 1, v.j - 1}, CoarseVertex{v.i + 1, v.j - 1}};
}

// ---------------------------------------------------------------------------
// Seed events

enum class EventSign { minus, plus };

inline char sign_char(EventSign s) { return s == EventSign::minus ? '-' : '+'; }

/// First-step index range scanned by the event: [1, a_L1] for T-, [a_L1 + 1, a_2L1] for T+.
inline std::pair<std::int64_t, std::int64_t> event_range(const RenormParams& p, EventSign sign) {
  return sign == EventSign::minus ? std::pair{std::int64_t{1}, p.aL1()} : std::pair{p.aL1() + 1, p.a2L1()};
}

/// The two layer-(t+2) segments an occurring event reaches.
///   T-: [x + 2a_1, x + a_1 + a_L1]        and [x + a_1 + a_L2, x + a_L1 + a_L2]
///   T+: [x + a_1 + a_L1, x + a_1 + a_2L1] and [x + a_L2 + a_L1, x + a_L2 + a_2L1]
inline std::pair<FineInterval, FineInterval> event_segments(const RenormParams& p, std::int64_t x, std::int64_t t,
                                                            EventSign sign) {
  if (sign == EventSign::minus)
    return {FineInterval{x + 2 * p.a1(), x + p.a1() + p.aL1(), t + 2},
            FineInterval{x + p.a1() + p.aL2(), x + p.aL1() + p.aL2(), t + 2}};
  return {FineInterval{x + p.a1() + p.aL1(), x + p.a1() + p.a2L1(), t + 2},
          FineInterval{x + p.aL2() + p.aL1(), x + p.aL2() + p.a2L1(), t + 2}};
}

struct EventOutcome {
  bool occurred = false;
  std::vector<std::int64_t> first_layer;   // x + i for each open first bond (layer t+1)
  std::vector<std::int64_t> near_targets;  // x + i + a_1 where R_i holds (layer t+2)
  std::vector<std::int64_t> far_targets;   // x + i + a_L2 where S_i holds (layer t+2)
};

/// Evaluates T-^{(x,t)} or T+^{(x,t)}: (union of R_i) and (union of S_i) over
/// the sign's index range. R_i: <(x,t),(x+i,t+1)> and <(x+i,t+1),(x+i+a_1,t+2)>
/// open; S_i: same first bond, second displacement a_L2. Second bonds are
/// only queried behind an open first bond.
template <LineOracle F>
EventOutcome event_T(const F& open, std::int64_t x, std::int64_t t, EventSign sign, const RenormParams& p) {
  EventOutcome out;
  const auto [lo, hi] = event_range(p, sign);
  const auto a1 = p.a1(), aL2 = p.aL2();
  for (std::int64_t i = lo; i <= hi; ++i) {
    if (!open(x, t, i)) continue;
    out.first_layer.push_back(x + i);
    if (open(x + i, t + 1, a1)) out.near_targets.push_back(x + i + a1);
    if (open(x + i, t + 1, aL2)) out.far_targets.push_back(x + i + aL2);
  }
  out.occurred = !out.near_targets.empty() && !out.far_targets.empty();
  return out;
}

// ---------------------------------------------------------------------------
// Exploration

enum class StopReason { frontier_exhausted, level_reached, origin_bad };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::frontier_exhausted: return "frontier-exhausted";
    case StopReason::level_reached: return "level-reached";
    case StopReason::origin_bad: return "origin-bad";
  }
  return "unknown";
}

inline StopReason stop_reason_from_string(const std::string& s) {
  for (auto r : {StopReason::frontier_exhausted, StopReason::level_reached, StopReason::origin_bad})
    if (to_string(r) == s) return r;
  throw InvalidArgument("unknown stop reason '" + s + "'");
}

struct ExplorationStep {
  std::int64_t n = 0;
  CoarseVertex vertex;
  std::optional<std::int64_t> anchor;  // u_n, fine position inside I_{vertex}
  EventSign sign = EventSign::minus;
  bool good = false;
};

struct ExplorationTrace {
  RenormParams params;
  std::uint64_t seed = 0;
  std::int64_t j_max = 0;
  std::vector<ExplorationStep> steps;
  std::vector<CoarseVertex> good_set;  // A, sorted by the coarse order
  std::vector<CoarseVertex> bad_set;   // B, sorted by the coarse order
  StopReason stop = StopReason::frontier_exhausted;

  bool reached_level() const noexcept { return stop == StopReason::level_reached; }
};

/// Runs the good/bad exploration from the origin until the unexplored
/// boundary is empty or a vertex of layer j_max becomes good.
///
/// The anchor of a coarse vertex is the leftmost fine vertex of its interval
/// that an earlier good event reached; only bonds queried by earlier events
/// inform it.
template <LineOracle F>
ExplorationTrace explore_renormalized(const F& open, const RenormParams& params, std::int64_t j_max,
                                      std::uint64_t seed = 0) {
  if (j_max < 0) throw InvalidArgument("j_max must be >= 0");
  ExplorationTrace trace;
  trace.params = params;
  trace.seed = seed;
  trace.j_max = j_max;

  std::set<CoarseVertex> good, bad, frontier;
  std::map<CoarseVertex, std::int64_t> leftmost;

  auto record_witnesses = [&](const CoarseVertex& parent, const EventOutcome& ev) {
    for (const auto& child : coarse_children(parent)) {
      const auto iv = interval_of(params, child);
      for (const auto* targets : {&ev.near_targets, &ev.far_targets})
        for (auto w : *targets) {
          if (!iv.contains(w)) continue;
          auto [it, inserted] = leftmost.emplace(child, w);
          if (!inserted) it->second = std::min(it->second, w);
        }
    }
  };

  CoarseVertex x{0, 0};
  std::int64_t anchor = 0;
  EventSign sign = EventSign::minus;
  for (std::int64_t n = 0;; ++n) {
    const auto ev = event_T(open, anchor, 2 * x.j, sign, params);
    trace.steps.push_back({n, x, anchor, sign, ev.occurred});
    frontier.erase(x);
    if (ev.occurred) {
      good.insert(x);
      record_witnesses(x, ev);
      for (const auto& c : coarse_children(x))
        if (!good.contains(c) && !bad.contains(c)) frontier.insert(c);
      if (x.j == j_max) {
        trace.stop = StopReason::level_reached;
        break;
      }
    } else {
      bad.insert(x);
      if (n == 0) {
        trace.stop = StopReason::origin_bad;
        break;
      }
    }
    if (frontier.empty()) {
      trace.stop = StopReason::frontier_exhausted;
      break;
    }
    x = *frontier.begin();
    auto it = leftmost.find(x);
    if (it == leftmost.end())
      throw Error("exploration invariant broken: no reached vertex in the interval of (" + std::to_string(x.i) + "," +
                  std::to_string(x.j) + ")");
    anchor = it->second;
    sign = anchor <= z_coordinate(params, x) ? EventSign::plus : EventSign::minus;
  }
  trace.good_set.assign(good.begin(), good.end());
  trace.bad_set.assign(bad.begin(), bad.end());
  return trace;
}

/// Derives parameters from the family and explores P^{k_star} with the given seed.
inline ExplorationTrace explore_renormalized(std::uint64_t seed, const ConnectionFamily& family, double epsilon,
                                             double delta, std::int64_t j_max) {
  const auto params = derive_parameters(family, epsilon, delta);
  const SeededConfig config(seed, truncate(family, params.k_star));
  return explore_renormalized(config, params, j_max, seed);
}

// ---------------------------------------------------------------------------
// Deterministic arithmetic checks

/// z_{i+2,j} - z_{i,j} = a_L2 - a_1, z_{i-1,j+1} - z_{i,j} = a_1 + a_L1 and
/// z_{i+1,j+1} - z_{i,j} = a_L1 + a_L2 for all |i| <= radius, 0 <= j <= radius.
inline bool coordinate_identities_hold(const RenormParams& p, std::int64_t radius) {
  for (std::int64_t j = 0; j <= radius; ++j)
    for (std::int64_t i = -radius; i <= radius; ++i) {
      if (((i + j) & 1) != 0) continue;
      const auto z = z_coordinate(p, {i, j});
      if (z_coordinate(p, {i + 2, j}) - z != p.aL2() - p.a1()) return false;
      if (z_coordinate(p, {i - 1, j + 1}) - z != p.a1() + p.aL1()) return false;
      if (z_coordinate(p, {i + 1, j + 1}) - z != p.aL1() + p.aL2()) return false;
    }
  return true;
}

/// For every anchor u in I_v: the steered event's target segments lie inside
/// the intervals of both children.
inline bool steering_holds(const RenormParams& p, const CoarseVertex& v) {
  const auto z = z_coordinate(p, v);
  const auto [left, right] = coarse_children(v);
  const auto il = interval_of(p, left), ir = interval_of(p, right);
  for (std::int64_t u = z - p.R; u <= z + p.R; ++u) {
    const auto sign = u <= z ? EventSign::plus : EventSign::minus;
    const auto [lo, hi] = event_range(p, sign);
    // Exact reachable ranges for first steps i in [lo, hi].
    if (!(il.contains(u + lo + p.a1()) && il.contains(u + hi + p.a1()))) return false;
    if (!(ir.contains(u + lo + p.aL2()) && ir.contains(u + hi + p.aL2()))) return false;
  }
  return true;
}

}  // namespace lrperc
