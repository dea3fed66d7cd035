#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lrperc/edge_sampler.hpp"

namespace lrperc {
namespace {

OrientedEdge line_edge(std::int64_t x, std::int64_t t, std::int64_t y) { return {{Point{x}, t}, Point{y}}; }

TEST(UniformFor, Deterministic) {
  auto e = OrientedEdge{{Point{3, -4}, 17}, Point{-2, 9}};
  EXPECT_EQ(uniform_for(42, e), uniform_for(42, e));
  EXPECT_EQ(uniform_for(1, line_edge(5, 2, 3)), uniform_for_line(1, 5, 2, 3));
  double u = uniform_for(42, e);
  EXPECT_GE(u, 0.0);
  EXPECT_LT(u, 1.0);
}

TEST(UniformFor, KolmogorovSmirnovUniformity) {
  // One million distinct edges under a fixed seed; KS critical value at
  // significance 0.01 is 1.628 / sqrt(n).
  std::vector<double> u;
  u.reserve(1000000);
  for (std::int64_t x = 0; x < 100; ++x)
    for (std::int64_t t = 0; t < 100; ++t)
      for (std::int64_t y = 1; y <= 100; ++y) u.push_back(uniform_for_line(2024, x, t, y));
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(UniformFor, SeedAvalanche) {
  int changed = 0, total = 0;
  for (std::int64_t x = 0; x < 1000; ++x)
    for (std::int64_t y = 1; y <= 100; ++y) {
      ++total;
      if (uniform_for_line(7, x, 3, y) != uniform_for_line(8, x, 3, y)) ++changed;
    }
  EXPECT_GE(changed, static_cast<int>(std::ceil(0.999 * total)));
}

TEST(IsOpen, ExtremeProbabilities) {
  SeededConfig zero(1, truncate(ConnectionFamily::one_sided_1d({0.0, 1.0}), 5));
  for (std::uint64_t s = 0; s < 500; ++s) {
    SeededConfig c(s, zero.family());
    EXPECT_FALSE(c.is_open(line_edge(static_cast<std::int64_t>(s), 0, 1)));
    EXPECT_TRUE(c.is_open(line_edge(static_cast<std::int64_t>(s), 0, 2)));
    EXPECT_FALSE(c.is_open(line_edge(0, 0, 3)));
  }
}

TEST(IsOpen, DimensionMismatch) {
  SeededConfig c(1, truncate(ConnectionFamily::dense_epsilon(2, 0.5, false), 2));
  EXPECT_THROW(c.is_open(line_edge(0, 0, 1)), DimensionMismatch);
  EXPECT_THROW(c(0, 0, 1), DimensionMismatch);
}

TEST(IsOpen, MarginalFrequency) {
  auto fam = truncate(ConnectionFamily::dense_epsilon(1, 0.25), 4);
  const int n = 100000;
  int open = 0;
  for (int s = 0; s < n; ++s) open += SeededConfig(static_cast<std::uint64_t>(s), fam).is_open(line_edge(10, 3, 2));
  const double se = std::sqrt(0.25 * 0.75 / n);
  EXPECT_NEAR(static_cast<double>(open) / n, 0.25, 3 * se);
}

TEST(IsOpen, MonotoneInTruncation) {
  auto base = ConnectionFamily::power_law(1, 0.9, 0.5);
  for (std::uint64_t s = 0; s < 200; ++s)
    for (std::int64_t y = 1; y <= 12; ++y) {
      bool prev = false;
      for (std::int64_t k = 1; k <= 12; ++k) {
        bool now = SeededConfig(s, truncate(base, k))(0, 0, y);
        EXPECT_TRUE(!prev || now);
        prev = now;
      }
    }
}

TEST(Explore, ZeroFamilyDiesImmediately) {
  SeededConfig c(3, truncate(ConnectionFamily::dense_epsilon(1, 0.0), 3));
  auto r = explore(c, 4, {Point{0}, 0});
  ASSERT_EQ(r.slices.size(), 5u);
  EXPECT_EQ(r.slices[0].reached, std::vector<Point>{Point{0}});
  for (std::size_t t = 1; t < r.slices.size(); ++t) EXPECT_TRUE(r.slices[t].reached.empty());
  EXPECT_FALSE(r.survived);
  EXPECT_TRUE(explore(c, 0, {Point{0}, 0}).survived);
}

TEST(Explore, DeterministicLine) {
  SeededConfig c(3, truncate(ConnectionFamily::one_sided_1d({1.0}), 10));
  auto r = explore(c, 20, {Point{0}, 0});
  EXPECT_TRUE(r.survived);
  for (std::int64_t t = 0; t <= 20; ++t) EXPECT_EQ(r.slices[static_cast<std::size_t>(t)].reached, std::vector<Point>{Point{t}});
}

// Path-enumeration oracle: every displacement sequence of length t whose
// bonds are all open contributes its endpoint.
std::set<Point> endpoints_by_paths(const SeededConfig& c, const std::vector<Point>& disps, const Vertex& origin,
                                   std::int64_t t) {
  std::set<Point> out;
  const auto n = disps.size();
  std::size_t total = 1;
  for (std::int64_t i = 0; i < t; ++i) total *= n;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    Vertex v = origin;
    bool ok = true;
    for (std::int64_t i = 0; i < t && ok; ++i) {
      const auto& y = disps[rest % n];
      rest /= n;
      ok = c.is_open({v, y});
      v = {v.x + y, v.t + 1};
    }
    if (ok) out.insert(v.x);
  }
  return out;
}

TEST(Explore, SliceTwoMatchesBruteForce) {
  auto fam = truncate(ConnectionFamily::dense_epsilon(1, 0.5), 2);
  const std::vector<Point> disps{Point{1}, Point{2}};
  for (std::uint64_t s = 0; s < 200; ++s) {
    SeededConfig c(s, fam);
    auto r = explore(c, 2, {Point{0}, 0});
    auto oracle = endpoints_by_paths(c, disps, {Point{0}, 0}, 2);
    EXPECT_EQ(std::set<Point>(r.slices[2].reached.begin(), r.slices[2].reached.end()), oracle);
  }
}

TEST(Explore, SliceExactnessTwoDimensions) {
  // 8 displacements (the nonzero points of the unit box), T = 3.
  auto fam = truncate(ConnectionFamily::dense_epsilon(2, 0.35, false), 1);
  std::vector<Point> disps;
  for (const auto& w : fam.support()) disps.push_back(w.y);
  ASSERT_EQ(disps.size(), 8u);
  for (std::uint64_t s = 0; s < 50; ++s) {
    SeededConfig c(s, fam);
    const Vertex origin{Point{2, -1}, 5};
    auto r = explore(c, 3, origin);
    for (std::int64_t t = 0; t <= 3; ++t) {
      auto oracle = endpoints_by_paths(c, disps, origin, t);
      const auto& got = r.slices[static_cast<std::size_t>(t)].reached;
      EXPECT_EQ(std::set<Point>(got.begin(), got.end()), oracle) << "seed " << s << " t " << t;
      EXPECT_EQ(r.slices[static_cast<std::size_t>(t)].t, 5 + t);
    }
  }
}

TEST(Explore, FrontierOverflow) {
  SeededConfig c(1, truncate(ConnectionFamily::dense_epsilon(1, 1.0), 5));
  ExploreOptions opts;
  opts.frontier_cap = 10;
  EXPECT_THROW(explore(c, 5, {Point{0}, 0}, opts), FrontierOverflow);
}

TEST(Explore, CertificatePathIsOpen) {
  SeededConfig c(9, truncate(ConnectionFamily::dense_epsilon(1, 0.6), 3));
  ExploreOptions opts;
  opts.track_parents = true;
  auto r = explore(c, 30, {Point{0}, 0}, opts);
  ASSERT_TRUE(r.survived);
  auto path = certificate_path(r);
  ASSERT_EQ(path.size(), 31u);
  for (std::size_t i = 1; i < path.size(); ++i) EXPECT_TRUE(c.is_open({path[i - 1], path[i].x - path[i - 1].x}));
}

TEST(EstimateSurvival, CertainLine) {
  auto est = estimate_survival(ConnectionFamily::one_sided_1d({1.0}), TruncationRange::at(3), 25, 100, 1);
  EXPECT_EQ(est.theta_hat, 1.0);
  EXPECT_LE(est.ci_lo, est.theta_hat);
  EXPECT_EQ(est.ci_hi, 1.0);
}

TEST(EstimateSurvival, SingleBranchChain) {
  const double truth = std::pow(0.8, 10);
  auto est = estimate_survival(ConnectionFamily::one_sided_1d({0.8}), TruncationRange::at(1), 10, 10000, 77);
  EXPECT_NEAR(est.theta_hat, truth, 3 * std::sqrt(truth * (1 - truth) / 10000));
  EXPECT_LE(est.ci_lo, est.theta_hat);
  EXPECT_GE(est.ci_hi, est.theta_hat);
}

TEST(EstimateSurvival, ZeroFamilyDegenerateInterval) {
  auto est = estimate_survival(ConnectionFamily::dense_epsilon(1, 0.0), TruncationRange::at(2), 5, 50, 1);
  EXPECT_EQ(est.theta_hat, 0.0);
  EXPECT_EQ(est.ci_lo, 0.0);
  EXPECT_GT(est.ci_hi, 0.0);
  EXPECT_LT(est.ci_hi, 0.1);
}

TEST(EstimateSurvival, RejectsZeroReplicas) {
  EXPECT_THROW(estimate_survival(ConnectionFamily::dense_epsilon(1, 0.5), TruncationRange::at(2), 5, 0, 1),
               InvalidArgument);
}

TEST(EstimateSurvival, IdenticalAcrossWorkerCounts) {
  auto fam = ConnectionFamily::dense_epsilon(1, 0.4);
  auto a = survival_indicators(fam, TruncationRange::at(3), 30, 300, 5, 1);
  auto b = survival_indicators(fam, TruncationRange::at(3), 30, 300, 5, 4);
  EXPECT_EQ(a, b);
}

TEST(EstimateSurvival, IntervalShrinksWithSamples) {
  auto fam = ConnectionFamily::dense_epsilon(1, 0.4);
  auto small = estimate_survival(fam, TruncationRange::at(3), 20, 100, 5);
  auto large = estimate_survival(fam, TruncationRange::at(3), 20, 3000, 5);
  EXPECT_LT(large.ci_hi - large.ci_lo, small.ci_hi - small.ci_lo);
}

TEST(Coupling, SurvivalMonotoneInRangePerSeed) {
  auto fam = ConnectionFamily::dense_epsilon(1, 0.3);
  const std::vector<std::int64_t> ks{1, 2, 3, 5};
  std::vector<std::vector<std::uint8_t>> rows;
  for (auto k : ks) rows.push_back(survival_indicators(fam, TruncationRange::at(k), 40, 1000, 99));
  int survivors_top = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    for (std::size_t j = 1; j < ks.size(); ++j) EXPECT_LE(rows[j - 1][i], rows[j][i]);
    survivors_top += rows.back()[i];
  }
  EXPECT_GT(survivors_top, 0);
}

}  // namespace
}  // namespace lrperc
