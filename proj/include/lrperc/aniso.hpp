#pragma once

// Anisotropic oriented percolation on Z^2 with short vertical bonds
// <(x,y),(x,y+1)> (probability sigma) and long horizontal bonds
// <(x,y),(x+n,y)> (probability q_n), and the induced bond model on Z x Z_+
// where <(x,y),(x+n,y+1)> is open iff the horizontal bond <(x,y),(x+n,y)>
// and the vertical bond <(x+n,y),(x+n,y+1)> are both open.
//
// Induced bonds sharing an end vertex share their vertical bond, so the
// induced field is one-dependent rather than independent.

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "lrperc/edge_sampler.hpp"
#include "lrperc/errors.hpp"
#include "lrperc/lattice.hpp"
#include "lrperc/parallel.hpp"
#include "lrperc/renorm.hpp"
#include "lrperc/renorm_verify.hpp"
#include "lrperc/rng.hpp"

namespace lrperc {

struct AnisoConfig {
  double sigma = 1.0;
  ConnectionFamily q = ConnectionFamily::one_sided_1d({});
  TruncationRange k = TruncationRange::untruncated();

  void validate() const {
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw InvalidArgument("sigma must lie in [0,1]");
    if (!q.is_one_sided_1d()) throw InvalidArgument("horizontal family must be one-sided in dimension 1");
    if (q.domain() != ValueDomain::probability) throw InvalidArgument("horizontal family must hold probabilities");
  }

  /// The induced bond family p_n = sigma q_n.
  ConnectionFamily induced_family() const { return q.scaled(sigma); }
};

/// <(x,y),(x,y+1)>
struct VerticalBond {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const VerticalBond&, const VerticalBond&) = default;
};

/// <(x,y),(x+n,y)>, n >= 1
struct HorizontalBond {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t n = 1;
  friend bool operator==(const HorizontalBond&, const HorizontalBond&) = default;
};

using AnisoBond = std::variant<VerticalBond, HorizontalBond>;

inline constexpr std::int64_t kVerticalStream = 1;
inline constexpr std::int64_t kHorizontalStream = 2;
inline constexpr std::int64_t kSabotageStream = 3;

inline double aniso_uniform(std::uint64_t seed, const AnisoBond& bond) noexcept {
  if (const auto* v = std::get_if<VerticalBond>(&bond))
    return KeyHasher(stream_seed(seed, kVerticalStream)).add(v->x).add(v->y).unit();
  const auto& h = std::get<HorizontalBond>(bond);
  return KeyHasher(stream_seed(seed, kHorizontalStream)).add(h.x).add(h.y).add(h.n).unit();
}

/// A sampled configuration of the anisotropic model. A nonzero sabotage
/// rate flips the state of that fraction of bonds (keyed); it exists only to
/// exercise certificate validation.
class AnisoSample {
 public:
  AnisoSample(std::uint64_t seed, AnisoConfig config, double sabotage = 0.0)
      : seed_(seed), config_(std::move(config)), sabotage_(sabotage) {
    config_.validate();
    if (!(sabotage >= 0.0 && sabotage <= 1.0)) throw InvalidArgument("sabotage rate must lie in [0,1]");
  }

  std::uint64_t seed() const noexcept { return seed_; }
  const AnisoConfig& config() const noexcept { return config_; }

  double probability_of(const AnisoBond& bond) const {
    if (std::holds_alternative<VerticalBond>(bond)) return config_.sigma;
    const auto n = std::get<HorizontalBond>(bond).n;
    if (n < 1) throw InvalidArgument("horizontal bonds need n >= 1");
    return config_.k.admits(n) ? config_.q.value_of(Point{n}) : 0.0;
  }

  bool is_open(const AnisoBond& bond) const {
    const double p = probability_of(bond);
    bool open = p > 0.0 && aniso_uniform(seed_, bond) < p;
    if (sabotage_ > 0.0 && flipped(bond)) open = !open;
    return open;
  }

  bool vertical_open(std::int64_t x, std::int64_t y) const { return is_open(VerticalBond{x, y}); }
  bool horizontal_open(std::int64_t x, std::int64_t y, std::int64_t n) const {
    return is_open(HorizontalBond{x, y, n});
  }

  /// Induced bond <(x,t),(x+n,t+1)>.
  bool operator()(std::int64_t x, std::int64_t t, std::int64_t n) const {
    if (n < 1) return false;
    return horizontal_open(x, t, n) && vertical_open(x + n, t);
  }

 private:
  bool flipped(const AnisoBond& bond) const {
    KeyHasher h(stream_seed(seed_, kSabotageStream));
    if (const auto* v = std::get_if<VerticalBond>(&bond))
      h.add(0).add(v->x).add(v->y);
    else {
      const auto& b = std::get<HorizontalBond>(bond);
      h.add(1).add(b.x).add(b.y).add(b.n);
    }
    return h.unit() < sabotage_;
  }

  std::uint64_t seed_;
  AnisoConfig config_;
  double sabotage_;
};

inline bool aniso_bond_open(std::uint64_t seed, const AnisoConfig& config, const AnisoBond& bond) {
  return AnisoSample(seed, config).is_open(bond);
}

inline bool induced_is_open(std::uint64_t seed, const AnisoConfig& config, std::int64_t x, std::int64_t y,
                            std::int64_t n) {
  if (n < 1) throw InvalidArgument("induced bonds need n >= 1");
  return AnisoSample(seed, config)(x, y, n);
}

/// The two bonds of the anisotropic model behind one induced bond.
inline std::pair<HorizontalBond, VerticalBond> lift_bond(std::int64_t x, std::int64_t t, std::int64_t n) {
  return {HorizontalBond{x, t, n}, VerticalBond{x + n, t}};
}

struct AnisoExploreResult {
  ExploreResult induced;
  bool survived = false;
  std::vector<Vertex> path;       // induced certificate, layers 0..T
  std::vector<AnisoBond> lifted;  // horizontal, vertical, horizontal, ...
};

/// Explores the induced model from (0,0) to layer T and, on survival, lifts
/// one open induced path to the alternating bond path in the anisotropic model.
inline AnisoExploreResult explore_aniso(const AnisoSample& sample, std::int64_t horizon,
                                        std::size_t frontier_cap = std::size_t{1} << 22) {
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  const auto& cfg = sample.config();
  const auto support = TruncatedFamily(cfg.induced_family(), cfg.k).support();
  std::vector<Point> displacements;
  for (const auto& w : support) displacements.push_back(w.y);
  ExploreOptions opts;
  opts.track_parents = true;
  opts.frontier_cap = frontier_cap;
  auto open = [&](const Vertex& from, std::size_t d) { return sample(from.x[0], from.t, displacements[d][0]); };
  AnisoExploreResult out;
  out.induced = explore_with(open, displacements, horizon, Vertex{Point{0}, 0}, opts);
  out.survived = out.induced.survived;
  if (out.survived) {
    out.path = certificate_path(out.induced);
    for (std::size_t i = 1; i < out.path.size(); ++i) {
      const auto [h, v] = lift_bond(out.path[i - 1].x[0], out.path[i - 1].t, out.path[i].x[0] - out.path[i - 1].x[0]);
      out.lifted.push_back(h);
      out.lifted.push_back(v);
    }
  }
  return out;
}

inline AnisoExploreResult explore_aniso(std::uint64_t seed, const AnisoConfig& config, std::int64_t horizon) {
  return explore_aniso(AnisoSample(seed, config), horizon);
}

struct LiftCheck {
  bool valid = true;
  std::size_t checked = 0;
  std::optional<std::size_t> first_bad;  // index into the bond list
  std::string detail;
};

/// Re-validates a lifted certificate: the bonds alternate horizontal/vertical,
/// chain end to end from (0,0), and are each open in `sample`.
inline LiftCheck validate_lift(const AnisoSample& sample, std::span<const AnisoBond> bonds) {
  LiftCheck r;
  std::int64_t x = 0, y = 0;
  auto fail = [&](std::size_t i, std::string what) {
    if (r.valid) {
      r.valid = false;
      r.first_bad = i;
      r.detail = std::move(what);
    }
  };
  if (bonds.size() % 2 != 0) fail(bonds.size(), "odd number of bonds");
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    ++r.checked;
    const auto& b = bonds[i];
    const bool want_h = i % 2 == 0;
    if (want_h) {
      const auto* h = std::get_if<HorizontalBond>(&b);
      if (!h || h->x != x || h->y != y) {
        fail(i, "bond " + std::to_string(i) + " does not continue the path horizontally");
        break;
      }
      x += h->n;
    } else {
      const auto* v = std::get_if<VerticalBond>(&b);
      if (!v || v->x != x || v->y != y) {
        fail(i, "bond " + std::to_string(i) + " does not continue the path vertically");
        break;
      }
      y += 1;
    }
    if (!sample.is_open(b)) fail(i, "bond " + std::to_string(i) + " is closed");
  }
  return r;
}

inline void write_bonds(std::ostream& os, std::span<const AnisoBond> bonds) {
  for (const auto& b : bonds) {
    if (const auto* v = std::get_if<VerticalBond>(&b))
      os << "V " << v->x << ' ' << v->y << '\n';
    else {
      const auto& h = std::get<HorizontalBond>(b);
      os << "H " << h.x << ' ' << h.y << ' ' << h.n << '\n';
    }
  }
}

inline std::vector<AnisoBond> read_bonds(std::istream& is) {
  std::vector<AnisoBond> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "V") {
      VerticalBond v;
      if (ls >> v.x >> v.y) {
        out.push_back(v);
        continue;
      }
    } else if (tag == "H") {
      HorizontalBond h;
      if (ls >> h.x >> h.y >> h.n && h.n >= 1) {
        out.push_back(h);
        continue;
      }
    }
    throw InvalidArgument("bond list line " + std::to_string(lineno) + ": expected 'V x y' or 'H x y n'");
  }
  return out;
}

/// Survival indicators of the induced model for replicas i = 1..N.
inline std::vector<std::uint8_t> aniso_survival_indicators(const AnisoConfig& config, std::int64_t horizon,
                                                           std::uint64_t replicas, std::uint64_t seed0,
                                                           unsigned workers = 1) {
  if (replicas == 0) throw InvalidArgument("need at least one replica");
  config.validate();
  const auto support = TruncatedFamily(config.induced_family(), config.k).support();
  std::vector<Point> displacements;
  for (const auto& w : support) displacements.push_back(w.y);
  const Vertex origin{Point{0}, 0};
  ExploreOptions opts;
  opts.keep_slices = false;
  std::vector<std::uint8_t> out(replicas, 0);
  parallel_for_index(replicas, workers, [&](std::size_t i) {
    const AnisoSample sample(mix_seed(seed0, i + 1), config);
    auto open = [&](const Vertex& from, std::size_t d) { return sample(from.x[0], from.t, displacements[d][0]); };
    out[i] = explore_with(open, displacements, horizon, origin, opts).survived ? 1 : 0;
  });
  return out;
}

/// Renormalized exploration of the induced model at truncation k_star,
/// with parameters derived from p_n = sigma q_n.
inline ExplorationTrace aniso_explore_renormalized(std::uint64_t seed, AnisoConfig config, double epsilon,
                                                   double delta, std::int64_t j_max, RenormParams* params_out = nullptr) {
  const auto params = derive_parameters(config.induced_family(), epsilon, delta);
  config.k = TruncationRange::at(params.k_star);
  if (params_out) *params_out = params;
  return explore_renormalized(AnisoSample(seed, config), params, j_max, seed);
}

struct BondSharingReport {
  TraceCheck horizontal;  // horizontal bonds consulted at two steps (must not happen)
  TraceCheck range_one;   // vertical bonds shared by steps that are not neighbours in a layer
  std::uint64_t shared_vertical = 0;  // vertical bonds consulted at two steps
  std::uint64_t vertical_total = 0;

  bool ok() const noexcept { return horizontal.passed() && range_one.passed(); }
};

/// Replays a trace in the anisotropic model. Each induced query touches one
/// horizontal and one vertical bond. Horizontal bonds are never revisited,
/// while a vertical bond is shared whenever two events aim at the same end
/// vertex; that can only happen for coarse vertices (i,j), (i+2,j) whose
/// target segments meet inside their common child's interval.
inline BondSharingReport underlying_bond_sharing(const ExplorationTrace& trace, const AnisoSample& sample) {
  BondSharingReport r;
  r.horizontal.name = "aniso_fresh_horizontal";
  r.range_one.name = "aniso_vertical_range_one";
  std::unordered_set<detail::EdgeKey, detail::EdgeKeyHash> horizontal;
  std::unordered_map<detail::EdgeKey, CoarseVertex, detail::EdgeKeyHash> vertical;
  auto flag = [](TraceCheck& c, bool ok, std::int64_t step, const std::string& what) {
    ++c.evaluations;
    if (ok) return;
    ++c.violations;
    if (!c.first_step) {
      c.first_step = step;
      c.detail = what;
    }
  };
  for (const auto& st : trace.steps) {
    if (!st.anchor) continue;
    std::unordered_set<detail::EdgeKey, detail::EdgeKeyHash> h_step, v_step;
    auto logged = [&](std::int64_t x, std::int64_t t, std::int64_t n) {
      h_step.insert({x, t, n});
      v_step.insert({x + n, t, 0});
      return sample(x, t, n);
    };
    event_T(logged, *st.anchor, 2 * st.vertex.j, st.sign, trace.params);
    for (const auto& e : h_step)
      flag(r.horizontal, horizontal.insert(e).second, st.n,
           "horizontal bond at (" + std::to_string(e.x) + "," + std::to_string(e.t) + ") consulted again");
    for (const auto& e : v_step) {
      ++r.vertical_total;
      auto [it, inserted] = vertical.emplace(e, st.vertex);
      if (inserted) continue;
      ++r.shared_vertical;
      const auto& prev = it->second;
      const bool neighbours = prev.j == st.vertex.j && (prev.i - st.vertex.i == 2 || st.vertex.i - prev.i == 2);
      flag(r.range_one, neighbours, st.n,
           "vertical bond at (" + std::to_string(e.x) + "," + std::to_string(e.t) + ") shared with " +
               detail::vertex_string(prev));
    }
  }
  return r;
}

}  // namespace lrperc
