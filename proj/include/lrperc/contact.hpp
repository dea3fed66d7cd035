#pragma once

// Long-range contact process through its graphical representation: death
// marks D^x (Poisson, rate 1 per site) and birth arrows B^{(x,x+y)} (Poisson,
// rate lambda_y per ordered pair), k-connection, survival estimation, and the
// tau-slab discretization onto the oriented lattice.
//
// Each Poisson process is split into unit-time blocks; the events of one
// block come from a keyed stream over (seed, process identity, block), so any
// process can be read lazily over any time range. Raising k only adds birth
// processes and leaves existing ones untouched.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lrperc/edge_sampler.hpp"
#include "lrperc/errors.hpp"
#include "lrperc/lattice.hpp"
#include "lrperc/parallel.hpp"
#include "lrperc/renorm.hpp"
#include "lrperc/rng.hpp"
#include "lrperc/stats.hpp"

namespace lrperc {

/// Birth rates (lambda_y); a ConnectionFamily over ValueDomain::rate.
using RateFamily = ConnectionFamily;

struct ContactModel {
  RateFamily rates = ConnectionFamily::dense_epsilon(1, 0.0, true, ValueDomain::rate);
  TruncationRange k = TruncationRange::at(1);
  double death_rate = 1.0;

  void validate() const {
    if (rates.domain() != ValueDomain::rate) throw InvalidArgument("contact rates need ValueDomain::rate");
    if (!k.is_finite()) throw InvalidArgument("contact process needs a finite range k");
    if (!(death_rate >= 0.0) || !std::isfinite(death_rate)) throw InvalidArgument("death rate must be >= 0");
  }

  int dim() const noexcept { return rates.dim(); }

  double birth_rate(const Point& y) const { return y.is_zero() ? 0.0 : TruncatedFamily(rates, k).probability_of(y); }

  /// Displacements y != 0 with ||y|| <= k and lambda_y > 0, with their rates.
  std::vector<WeightedDisplacement> birth_support() const {
    std::vector<WeightedDisplacement> out;
    for (const auto& w : TruncatedFamily(rates, k).support())
      if (!w.y.is_zero()) out.push_back(w);
    return out;
  }
};

inline constexpr std::int64_t kDeathStream = 11;
inline constexpr std::int64_t kBirthStream = 12;

/// Event times of a rate-`rate` Poisson process in [block, block + 1).
inline void poisson_block(std::uint64_t key, double rate, std::int64_t block, std::vector<double>& out) {
  if (!(rate > 0.0)) return;
  KeyedStream s(KeyHasher(key).add(block).state());
  double t = static_cast<double>(block);
  const double end = t + 1.0;
  for (;;) {
    t += -std::log1p(-s.unit()) / rate;
    if (t >= end) break;
    out.push_back(t);
  }
}

/// Lazily evaluated graphical representation over all of Z^d x [0, inf).
class PoissonField {
 public:
  PoissonField(std::uint64_t seed, ContactModel model) : seed_(seed), model_(std::move(model)) { model_.validate(); }

  std::uint64_t seed() const noexcept { return seed_; }
  const ContactModel& model() const noexcept { return model_; }

  /// Death times of D^x in [a, b].
  std::vector<double> death_times(const Point& x, double a, double b) const {
    return collect(death_key(x), model_.death_rate, a, b);
  }

  /// Birth times of B^{(x, x+y)} in [a, b].
  std::vector<double> birth_times(const Point& x, const Point& y, double a, double b) const {
    return collect(birth_key(x, y), model_.birth_rate(y), a, b);
  }

  bool has_death(const Point& x, double a, double b) const { return any(death_key(x), model_.death_rate, a, b); }
  bool has_birth(const Point& x, const Point& y, double a, double b) const {
    return any(birth_key(x, y), model_.birth_rate(y), a, b);
  }

  std::uint64_t death_key(const Point& x) const {
    return KeyHasher(stream_seed(seed_, kDeathStream)).add(x.coords()).state();
  }
  std::uint64_t birth_key(const Point& x, const Point& y) const {
    return KeyHasher(stream_seed(seed_, kBirthStream)).add(x.coords()).add(y.coords()).state();
  }

 private:
  static std::vector<double> collect(std::uint64_t key, double rate, double a, double b) {
    std::vector<double> out, block;
    if (!(rate > 0.0) || b < a) return out;
    for (auto n = static_cast<std::int64_t>(std::floor(a)); static_cast<double>(n) <= b; ++n) {
      block.clear();
      poisson_block(key, rate, n, block);
      for (double t : block)
        if (t >= a && t <= b) out.push_back(t);
    }
    return out;
  }
  static bool any(std::uint64_t key, double rate, double a, double b) {
    std::vector<double> block;
    if (!(rate > 0.0) || b < a) return false;
    for (auto n = static_cast<std::int64_t>(std::floor(a)); static_cast<double>(n) <= b; ++n) {
      block.clear();
      poisson_block(key, rate, n, block);
      for (double t : block)
        if (t >= a && t <= b) return true;
    }
    return false;
  }

  std::uint64_t seed_;
  ContactModel model_;
};

/// A box of sites [lo, hi] (coordinatewise, inclusive) and a time horizon [0, horizon].
struct Window {
  Point lo;
  Point hi;
  double horizon = 0.0;

  bool contains(const Point& x) const {
    if (x.dim() != lo.dim()) throw DimensionMismatch("site dimension differs from window");
    for (int i = 0; i < x.dim(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  std::vector<Point> sites() const {
    std::vector<Point> out;
    Point p = lo;
    for (;;) {
      out.push_back(p);
      int i = 0;
      while (i < p.dim() && p[i] == hi[i]) {
        p[i] = lo[i];
        ++i;
      }
      if (i == p.dim()) break;
      ++p[i];
    }
    return out;
  }

  std::uint64_t site_count() const {
    std::uint64_t n = 1;
    for (int i = 0; i < lo.dim(); ++i) n *= static_cast<std::uint64_t>(hi[i] - lo[i] + 1);
    return n;
  }
};

struct ContactEvent {
  enum class Kind { death, birth };
  double time = 0.0;
  Kind kind = Kind::death;
  Point site;    // death site or birth source
  Point target;  // birth target (unused for deaths)

  /// Deaths precede births at equal times.
  friend bool operator<(const ContactEvent& a, const ContactEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind == Kind::death;
    if (a.site != b.site) return a.site < b.site;
    return a.target < b.target;
  }
};

/// The graphical representation restricted to a finite window: every death
/// process of a window site and every birth process between window sites,
/// materialized from the same keyed streams as PoissonField.
class GraphicalSample {
 public:
  GraphicalSample(const PoissonField& field, Window window, std::uint64_t max_processes = std::uint64_t{1} << 22)
      : seed_(field.seed()), model_(field.model()), window_(std::move(window)) {
    if (window_.lo.dim() != model_.dim() || window_.hi.dim() != model_.dim())
      throw DimensionMismatch("window dimension differs from rate family");
    for (int i = 0; i < window_.lo.dim(); ++i)
      if (window_.hi[i] < window_.lo[i]) throw InvalidArgument("empty window");
    if (!(window_.horizon >= 0.0) || !std::isfinite(window_.horizon))
      throw InvalidArgument("window horizon must be finite and >= 0");
    const auto support = model_.birth_support();
    const auto sites = window_.site_count();
    if (sites * (1 + support.size()) > max_processes)
      throw CapacityExceeded("window holds " + std::to_string(sites) + " sites x " +
                             std::to_string(1 + support.size()) + " processes, above the cap of " +
                             std::to_string(max_processes));
    for (const auto& x : window_.sites()) {
      for (double t : field.death_times(x, 0.0, window_.horizon)) events_.push_back({t, ContactEvent::Kind::death, x, x});
      for (const auto& w : support) {
        const auto to = x + w.y;
        if (!window_.contains(to)) continue;
        for (double t : field.birth_times(x, w.y, 0.0, window_.horizon))
          events_.push_back({t, ContactEvent::Kind::birth, x, to});
      }
    }
    std::sort(events_.begin(), events_.end());
  }

  std::uint64_t seed() const noexcept { return seed_; }
  const ContactModel& model() const noexcept { return model_; }
  const Window& window() const noexcept { return window_; }
  /// All events, sorted by time (deaths first at ties).
  const std::vector<ContactEvent>& events() const noexcept { return events_; }

  bool has_death(const Point& x, double a, double b) const {
    check(x, a, b);
    return scan(a, b, [&](const ContactEvent& e) { return e.kind == ContactEvent::Kind::death && e.site == x; });
  }
  bool has_birth(const Point& x, const Point& y, double a, double b) const {
    check(x, a, b);
    const auto to = x + y;
    check(to, a, b);
    return scan(a, b, [&](const ContactEvent& e) {
      return e.kind == ContactEvent::Kind::birth && e.site == x && e.target == to;
    });
  }

  std::size_t death_count(const Point& x) const {
    return static_cast<std::size_t>(std::count_if(events_.begin(), events_.end(), [&](const ContactEvent& e) {
      return e.kind == ContactEvent::Kind::death && e.site == x;
    }));
  }

  /// Index of the first event with time >= t.
  std::size_t lower_index(double t) const {
    return static_cast<std::size_t>(std::lower_bound(events_.begin(), events_.end(), t,
                                                     [](const ContactEvent& e, double v) { return e.time < v; }) -
                                    events_.begin());
  }

  void check(const Point& x, double a, double b) const {
    if (!window_.contains(x)) throw OutOfWindow("site " + x.to_string() + " outside the sampled window");
    if (a < 0.0 || b > window_.horizon || a > b)
      throw OutOfWindow("time range [" + std::to_string(a) + ", " + std::to_string(b) + "] outside [0, " +
                        std::to_string(window_.horizon) + "]");
  }

 private:
  template <class Pred>
  bool scan(double a, double b, Pred&& pred) const {
    for (auto i = lower_index(a); i < events_.size() && events_[i].time <= b; ++i)
      if (pred(events_[i])) return true;
    return false;
  }

  std::uint64_t seed_;
  ContactModel model_;
  Window window_;
  std::vector<ContactEvent> events_;
};

inline GraphicalSample sample_graphical(std::uint64_t seed, const ContactModel& model, const Window& window,
                                        std::uint64_t max_processes = std::uint64_t{1} << 22) {
  return GraphicalSample(PoissonField(seed, model), window, max_processes);
}

/// One event per line, in time order: "D <site> <time>" or "B <from> <to> <time>".
inline void write_events(std::ostream& os, const GraphicalSample& sample) {
  os << std::setprecision(17);
  for (const auto& e : sample.events()) {
    if (e.kind == ContactEvent::Kind::death)
      os << "D " << e.site.to_string() << ' ' << e.time << '\n';
    else
      os << "B " << e.site.to_string() << ' ' << e.target.to_string() << ' ' << e.time << '\n';
  }
}

/// (x,s) k-connected to (y,t): evolve the occupied set from {x} through the
/// events in (s, t] in time order. A death empties its site; a birth u -> v
/// with u occupied and ||v - u|| <= k occupies v.
inline bool k_connected(const GraphicalSample& sample, const Point& x, double s, const Point& y, double t,
                        std::int64_t k) {
  sample.check(x, s, t);
  sample.check(y, s, t);
  if (k < 1) throw InvalidArgument("k must be >= 1");
  const auto& ev = sample.events();
  auto dies_at = [&](const Point& site, double when) {
    for (auto i = sample.lower_index(when); i < ev.size() && ev[i].time == when; ++i)
      if (ev[i].kind == ContactEvent::Kind::death && ev[i].site == site) return true;
    return false;
  };
  if (dies_at(x, s)) return false;
  if (s == t) return x == y;
  std::vector<Point> occupied{x};
  auto occ = [&](const Point& p) { return std::find(occupied.begin(), occupied.end(), p) != occupied.end(); };
  for (auto i = sample.lower_index(s); i < ev.size() && ev[i].time <= t; ++i) {
    const auto& e = ev[i];
    if (e.time <= s) continue;
    if (e.kind == ContactEvent::Kind::death) {
      std::erase(occupied, e.site);
    } else if (occ(e.site) && (e.target - e.site).norm_inf() <= k && !occ(e.target)) {
      occupied.push_back(e.target);
    }
  }
  return occ(y);
}

struct PointHash {
  std::size_t operator()(const Point& p) const noexcept {
    return static_cast<std::size_t>(KeyHasher(0).add(p.coords()).state());
  }
};

struct ContactRunOptions {
  std::int64_t window_radius = 0;       // sites with ||x|| >= radius flag the run; 0 picks a default
  std::size_t occupancy_cap = 1 << 20;  // FrontierOverflow above this many occupied sites
};

struct ContactRun {
  bool survived = false;   // occupied set nonempty on all of [0, horizon]
  bool flagged = false;    // stopped early because occupancy reached the window boundary
  double end_time = 0.0;   // extinction time, flag time, or horizon
  std::size_t max_occupied = 1;
};

/// Default boundary radius: k times a generous bound on how far births can
/// carry the process in time `horizon`.
inline std::int64_t default_contact_radius(const ContactModel& model, double horizon) {
  double total = 0.0;
  for (const auto& w : model.birth_support()) total += w.value;
  const double hops = 4.0 * total * horizon + 16.0;
  return model.k.k() * static_cast<std::int64_t>(std::ceil(hops));
}

/// Runs the process started from {0} on the lazy field up to `horizon`.
inline ContactRun run_contact(const PoissonField& field, double horizon, const ContactRunOptions& options = {}) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and >= 0");
  const auto& model = field.model();
  const auto support = model.birth_support();
  const auto radius = options.window_radius > 0 ? options.window_radius : default_contact_radius(model, horizon);

  struct Pending {
    double time;
    int kind;  // 0 death, 1 birth
    Point site;
    std::size_t disp;
    std::uint64_t gen;
    bool operator>(const Pending& o) const {
      if (time != o.time) return time > o.time;
      return kind > o.kind;
    }
  };
  std::unordered_map<Point, std::uint64_t, PointHash> occupied;  // site -> generation
  std::uint64_t next_gen = 1;
  occupied.emplace(Point::zero(model.dim()), next_gen++);

  ContactRun run;
  std::vector<double> buf;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pq;
  auto schedule = [&](const Point& site, std::uint64_t gen, std::int64_t block, double after, bool inclusive,
                      double end) {
    auto keep = [&](double t) { return (inclusive ? t >= after : t > after) && t <= end; };
    buf.clear();
    poisson_block(field.death_key(site), model.death_rate, block, buf);
    for (double t : buf)
      if (keep(t)) pq.push({t, 0, site, 0, gen});
    for (std::size_t d = 0; d < support.size(); ++d) {
      buf.clear();
      poisson_block(field.birth_key(site, support[d].y), support[d].value, block, buf);
      for (double t : buf)
        if (keep(t)) pq.push({t, 1, site, d, gen});
    }
  };

  for (std::int64_t block = 0; static_cast<double>(block) < horizon || block == 0; ++block) {
    const double start = static_cast<double>(block);
    const double end = std::min(start + 1.0, horizon);
    for (const auto& [site, gen] : occupied) schedule(site, gen, block, start, true, end);
    while (!pq.empty()) {
      const auto e = pq.top();
      pq.pop();
      auto it = occupied.find(e.site);
      if (it == occupied.end() || it->second != e.gen) continue;
      if (e.kind == 0) {
        occupied.erase(it);
        if (occupied.empty()) {
          run.end_time = e.time;
          return run;
        }
        continue;
      }
      const auto target = e.site + support[e.disp].y;
      if (occupied.contains(target)) continue;
      const auto gen = next_gen++;
      occupied.emplace(target, gen);
      run.max_occupied = std::max(run.max_occupied, occupied.size());
      if (target.norm_inf() >= radius) {
        run.survived = true;
        run.flagged = true;
        run.end_time = e.time;
        return run;
      }
      if (occupied.size() > options.occupancy_cap)
        throw FrontierOverflow("contact process occupies more than " + std::to_string(options.occupancy_cap) +
                               " sites");
      schedule(target, gen, block, e.time, false, end);
    }
    if (end >= horizon) break;
  }
  run.survived = true;
  run.end_time = horizon;
  return run;
}

struct ContactSurvival {
  SurvivalEstimate estimate;  // flagged replicas count as surviving
  std::uint64_t flagged = 0;
  std::vector<std::uint8_t> indicators;
};

/// Survival of xi_{t,k} on [0, horizon] for replicas i = 1..N with seeds mix_seed(seed0, i).
/// Flagged replicas were alive when they reached the boundary and are counted
/// as surviving, which keeps the per-seed indicator monotone in k.
inline ContactSurvival contact_survival(const ContactModel& model, double horizon, std::uint64_t replicas,
                                        std::uint64_t seed0, unsigned workers = 1,
                                        const ContactRunOptions& options = {}, double confidence = 0.95) {
  if (replicas == 0) throw InvalidArgument("need at least one replica");
  model.validate();
  std::vector<std::uint8_t> hits(replicas, 0), flags(replicas, 0);
  parallel_for_index(replicas, workers, [&](std::size_t i) {
    const auto run = run_contact(PoissonField(mix_seed(seed0, i + 1), model), horizon, options);
    hits[i] = run.survived ? 1 : 0;
    flags[i] = run.flagged ? 1 : 0;
  });
  ContactSurvival out;
  out.estimate = summarize_indicators(hits, static_cast<std::int64_t>(std::ceil(horizon)), model.k, seed0, confidence);
  for (auto f : flags) out.flagged += f;
  out.indicators = std::move(hits);
  return out;
}

// ---------------------------------------------------------------------------
// Slab discretization

/// tau = 0.99 * (-ln(1 - delta/4)), so that P(D^0 meets [0, tau]) = 1 - e^{-tau} < delta/4.
inline double choose_tau(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  return 0.99 * -std::log1p(-delta / 4.0);
}

/// epsilon = (1 - delta/4)^2 (1 - e^{-lambda tau}).
inline double contact_epsilon(double delta, double lambda_lower, double tau) {
  return (1.0 - delta / 4.0) * (1.0 - delta / 4.0) * -std::expm1(-lambda_lower * tau);
}

/// Bond <(x,n),(x+y,n+1)> is open iff D^x and D^{x+y} miss [tau n, tau(n+1)]
/// and B^{(x,x+y)} meets it. For y = 0 the bond is open iff D^x misses the slab.
template <class Source>
class DiscretizedContact {
 public:
  DiscretizedContact(const Source& source, double tau) : source_(&source), tau_(tau) {
    if (!(tau > 0.0)) throw InvalidArgument("tau must be > 0");
  }

  double tau() const noexcept { return tau_; }

  bool is_open(const Vertex& from, const Point& y) const {
    if (from.t < 0) throw InvalidArgument("slab index must be >= 0");
    const double a = tau_ * static_cast<double>(from.t), b = tau_ * static_cast<double>(from.t + 1);
    if constexpr (requires { source_->check(from.x, a, b); }) {
      source_->check(from.x, a, b);
      source_->check(from.x + y, a, b);
    }
    if (source_->has_death(from.x, a, b)) return false;
    if (y.is_zero()) return true;
    if (source_->model().birth_rate(y) <= 0.0) return false;
    if (source_->has_death(from.x + y, a, b)) return false;
    return source_->has_birth(from.x, y, a, b);
  }

  /// Line oracle for one-dimensional rate families.
  bool operator()(std::int64_t x, std::int64_t n, std::int64_t y) const { return is_open({Point{x}, n}, Point{y}); }

 private:
  const Source* source_;
  double tau_;
};

/// Exact marginal probability of a y != 0 discretized bond with death rate 1.
inline double discretized_bond_probability(double tau, double lambda_y) {
  return std::exp(-2.0 * tau) * -std::expm1(-lambda_y * tau);
}

struct ContactParams {
  RenormParams renorm;
  double tau = 0.0;
  double lambda_lower = 0.0;
};

/// tau from delta, epsilon = (1 - delta/4)^2 (1 - e^{-lambda tau}), L0 and L1
/// from the delta/8 conditions, support a_n = indices with lambda_n > lambda.
inline ContactParams derive_contact_parameters(const RateFamily& rates, double lambda_lower, double delta,
                                               const ScanOptions& scan = {}) {
  if (rates.domain() != ValueDomain::rate) throw InvalidArgument("contact rates need ValueDomain::rate");
  if (!(lambda_lower > 0.0)) throw InvalidArgument("lambda_lower must be > 0");
  ContactParams out;
  out.tau = choose_tau(delta);
  out.lambda_lower = lambda_lower;
  const double eps = contact_epsilon(delta, lambda_lower, out.tau);
  const double thr = binomial_threshold(RenormModel::contact, delta);
  const auto L0 = minimal_trials(1, eps, thr, 1);
  const auto L1 = minimal_trials(L0 + 1, eps, thr, L0 + 1);
  out.renorm = complete_parameters(eps, delta, RenormModel::contact, L0, L1,
                                   [&](std::int64_t m) { return support_above(rates, lambda_lower, m, scan); });
  return out;
}

struct ContactItems {
  bool a = false;             // D^x misses the first slab
  std::int64_t b_count = 0;   // indices i <= L1 with D^{x+a_i} empty and B^{(x,x+a_i)} nonempty on the first slab
  bool b = false;             // b_count >= L0
  bool c = false;             // some index of (b) also crosses the second slab by +a_1
  bool all() const noexcept { return a && b && c; }
};

/// Items (a)-(c) at base (x, slab n); together they imply that some R_i occurs.
template <class Source>
ContactItems contact_items(const Source& source, const ContactParams& cp, std::int64_t x, std::int64_t n) {
  const auto& p = cp.renorm;
  const double t0 = cp.tau * static_cast<double>(n), t1 = cp.tau * static_cast<double>(n + 1),
               t2 = cp.tau * static_cast<double>(n + 2);
  ContactItems it;
  it.a = !source.has_death(Point{x}, t0, t1);
  for (std::int64_t i = 1; i <= p.L1; ++i) {
    const auto ai = p.a_at(i);
    if (source.has_death(Point{x + ai}, t0, t1) || !source.has_birth(Point{x}, Point{ai}, t0, t1)) continue;
    ++it.b_count;
    if (!it.c && !source.has_death(Point{x + ai}, t1, t2) && !source.has_death(Point{x + ai + p.a1()}, t1, t2) &&
        source.has_birth(Point{x + ai}, Point{p.a1()}, t1, t2))
      it.c = true;
  }
  it.b = it.b_count >= p.L0;
  return it;
}

/// Renormalized exploration on the discretized configuration at truncation k_star.
inline ExplorationTrace contact_explore_renormalized(std::uint64_t seed, ContactModel model, const ContactParams& cp,
                                                     std::int64_t j_max) {
  model.k = TruncationRange::at(cp.renorm.k_star);
  const PoissonField field(seed, model);
  return explore_renormalized(DiscretizedContact<PoissonField>(field, cp.tau), cp.renorm, j_max, seed);
}

}  // namespace lrperc
