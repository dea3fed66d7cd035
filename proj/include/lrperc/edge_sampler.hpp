#pragma once

// Lazily sampled Bernoulli bond configurations on Z^d x Z_+, cluster
// exploration, and Monte Carlo survival estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lrperc/errors.hpp"
#include "lrperc/lattice.hpp"
#include "lrperc/parallel.hpp"
#include "lrperc/rng.hpp"
#include "lrperc/stats.hpp"

namespace lrperc {

/// The keyed uniform attached to a bond. Absorbs seed, from.x, from.t and
/// the displacement, in that order.
inline double uniform_for(std::uint64_t seed, const OrientedEdge& edge) noexcept {
  return KeyHasher(seed).add(edge.from.x.coords()).add(edge.from.t).add(edge.displacement.coords()).unit();
}

/// Same value as uniform_for for a one-dimensional edge.
inline double uniform_for_line(std::uint64_t seed, std::int64_t x, std::int64_t t, std::int64_t y) noexcept {
  return KeyHasher(seed).add(x).add(t).add(y).unit();
}

/// A percolation configuration omega: bond e is open iff U(seed, e) < p^k_y.
/// Sharing the seed across truncation ranges couples all P^k monotonically.
class SeededConfig {
 public:
  SeededConfig(std::uint64_t seed, TruncatedFamily family) : seed_(seed), family_(std::move(family)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  const TruncatedFamily& family() const noexcept { return family_; }

  bool is_open(const OrientedEdge& edge) const {
    if (edge.from.x.dim() != family_.dim())
      throw DimensionMismatch("edge base has dimension " + std::to_string(edge.from.x.dim()));
    const double p = family_.probability_of(edge.displacement);
    return p > 0.0 && uniform_for(seed_, edge) < p;
  }

  /// Line oracle <(x,t),(x+y,t+1)> for one-dimensional families.
  bool operator()(std::int64_t x, std::int64_t t, std::int64_t y) const {
    if (family_.dim() != 1) throw DimensionMismatch("line oracle needs a one-dimensional family");
    const double p = family_.probability_of(Point{y});
    return p > 0.0 && uniform_for_line(seed_, x, t, y) < p;
  }

 private:
  std::uint64_t seed_;
  TruncatedFamily family_;
};

struct ClusterSlice {
  std::int64_t t = 0;
  std::vector<Point> reached;  // sorted
};

struct ExploreOptions {
  std::size_t frontier_cap = std::size_t{1} << 22;
  bool keep_slices = true;     // false keeps only the final slice
  bool track_parents = false;  // needs keep_slices
};

struct ExploreResult {
  std::vector<ClusterSlice> slices;
  /// parents[t][i]: index in slice t-1 of one predecessor of slices[t].reached[i].
  std::vector<std::vector<std::uint32_t>> parents;
  bool survived = false;
};

/// Breadth-first exploration of the cluster of `origin` over T layers.
///
/// `open(from, i)` decides the bond from `from` along displacements[i]. Only
/// bonds out of reached vertices are ever asked for.
template <class OpenFn>
ExploreResult explore_with(OpenFn&& open, std::span<const Point> displacements, std::int64_t horizon,
                           const Vertex& origin, const ExploreOptions& options = {}) {
  if (horizon < 0) throw InvalidArgument("horizon must be >= 0");
  if (options.track_parents && !options.keep_slices)
    throw InvalidArgument("parent tracking needs keep_slices");

  ExploreResult result;
  ClusterSlice current{origin.t, {origin.x}};
  std::vector<std::pair<Point, std::uint32_t>> next;

  if (options.keep_slices) {
    result.slices.reserve(static_cast<std::size_t>(horizon) + 1);
    result.slices.push_back(current);
    if (options.track_parents) result.parents.emplace_back();
  }

  for (std::int64_t step = 0; step < horizon; ++step) {
    next.clear();
    for (std::uint32_t idx = 0; idx < current.reached.size(); ++idx) {
      const Vertex from{current.reached[idx], current.t};
      for (std::size_t d = 0; d < displacements.size(); ++d)
        if (open(from, d)) next.emplace_back(from.x + displacements[d], idx);
    }
    std::sort(next.begin(), next.end());
    ClusterSlice slice{current.t + 1, {}};
    std::vector<std::uint32_t> parent;
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (i > 0 && next[i].first == next[i - 1].first) continue;
      slice.reached.push_back(next[i].first);
      if (options.track_parents) parent.push_back(next[i].second);
    }
    if (slice.reached.size() > options.frontier_cap)
      throw FrontierOverflow("frontier of " + std::to_string(slice.reached.size()) + " vertices at layer " +
                             std::to_string(slice.t) + " exceeds cap " + std::to_string(options.frontier_cap));
    current = std::move(slice);
    if (options.keep_slices) {
      result.slices.push_back(current);
      if (options.track_parents) result.parents.push_back(std::move(parent));
    }
    if (current.reached.empty() && !options.keep_slices) {
      current.t = origin.t + horizon;
      break;
    }
  }
  result.survived = !current.reached.empty();
  if (!options.keep_slices) result.slices.push_back(std::move(current));
  return result;
}

/// Exact finite-horizon cluster {x : origin ~> (x, t)} for t = origin.t .. origin.t + T.
inline ExploreResult explore(const SeededConfig& config, std::int64_t horizon, const Vertex& origin,
                             const ExploreOptions& options = {}) {
  if (origin.x.dim() != config.family().dim()) throw DimensionMismatch("origin dimension differs from family");
  const auto support = config.family().support();
  std::vector<Point> displacements;
  std::vector<double> probabilities;
  for (const auto& w : support) {
    displacements.push_back(w.y);
    probabilities.push_back(w.value);
  }
  const auto seed = config.seed();
  auto open = [&](const Vertex& from, std::size_t i) {
    return uniform_for(seed, OrientedEdge{from, displacements[i]}) < probabilities[i];
  };
  return explore_with(open, displacements, horizon, origin, options);
}

/// One open path origin -> layer T, read back through the parent links.
inline std::vector<Vertex> certificate_path(const ExploreResult& result) {
  if (!result.survived || result.parents.size() != result.slices.size())
    throw InvalidArgument("certificate needs a surviving exploration with parent tracking");
  std::vector<Vertex> path(result.slices.size());
  std::size_t idx = 0;
  for (std::size_t t = result.slices.size(); t-- > 0;) {
    path[t] = Vertex{result.slices[t].reached[idx], result.slices[t].t};
    if (t > 0) idx = result.parents[t][idx];
  }
  return path;
}

struct SurvivalEstimate {
  double theta_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  std::uint64_t n_samples = 0;
  std::uint64_t successes = 0;
  std::int64_t horizon = 0;
  TruncationRange k = TruncationRange::untruncated();
  std::uint64_t seed0 = 0;
  double confidence = 0.95;

  /// Binomial standard error at the point estimate.
  double standard_error() const {
    return n_samples ? std::sqrt(theta_hat * (1.0 - theta_hat) / static_cast<double>(n_samples)) : 1.0;
  }
};

struct EstimateOptions {
  unsigned workers = 1;
  double confidence = 0.95;
};

/// Fold per-replica indicators (in replica order) into a Wilson estimate.
inline SurvivalEstimate summarize_indicators(std::span<const std::uint8_t> indicators, std::int64_t horizon,
                                             TruncationRange k, std::uint64_t seed0, double confidence) {
  if (indicators.empty()) throw InvalidArgument("need at least one replica");
  std::uint64_t hits = 0;
  for (auto v : indicators) hits += v ? 1 : 0;
  SurvivalEstimate est;
  est.n_samples = indicators.size();
  est.successes = hits;
  est.theta_hat = static_cast<double>(hits) / static_cast<double>(indicators.size());
  const auto ci = wilson_interval(hits, indicators.size(), confidence);
  est.ci_lo = ci.lo;
  est.ci_hi = ci.hi;
  est.horizon = horizon;
  est.k = k;
  est.seed0 = seed0;
  est.confidence = confidence;
  return est;
}

/// Survival to layer T of replicas i = 1..N with seeds mix_seed(seed0, i).
inline std::vector<std::uint8_t> survival_indicators(const ConnectionFamily& family, TruncationRange k,
                                                     std::int64_t horizon, std::uint64_t replicas,
                                                     std::uint64_t seed0, unsigned workers = 1) {
  if (replicas == 0) throw InvalidArgument("need at least one replica");
  const TruncatedFamily truncated(family, k);
  const auto support = truncated.support();
  std::vector<Point> displacements;
  std::vector<double> probabilities;
  for (const auto& w : support) {
    displacements.push_back(w.y);
    probabilities.push_back(w.value);
  }
  const Vertex origin{Point::zero(family.dim()), 0};
  std::vector<std::uint8_t> out(replicas, 0);
  ExploreOptions opts;
  opts.keep_slices = false;
  parallel_for_index(replicas, workers, [&](std::size_t i) {
    const auto seed = mix_seed(seed0, i + 1);
    auto open = [&](const Vertex& from, std::size_t d) {
      return uniform_for(seed, OrientedEdge{from, displacements[d]}) < probabilities[d];
    };
    out[i] = explore_with(open, displacements, horizon, origin, opts).survived ? 1 : 0;
  });
  return out;
}

/// theta_k(T) = P^k(origin ~> layer T) with a Wilson interval.
inline SurvivalEstimate estimate_survival(const ConnectionFamily& family, TruncationRange k, std::int64_t horizon,
                                          std::uint64_t replicas, std::uint64_t seed0,
                                          const EstimateOptions& options = {}) {
  const auto ind = survival_indicators(family, k, horizon, replicas, seed0, options.workers);
  return summarize_indicators(ind, horizon, k, seed0, options.confidence);
}

}  // namespace lrperc
