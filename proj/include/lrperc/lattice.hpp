#pragma once

// Oriented lattice Z^d x Z_+, connection-probability families, truncation,
// support sequences and the projection onto one axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdio>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lrperc/errors.hpp"

namespace lrperc {

inline constexpr int kMaxDim = 4;

/// Integer vector in Z^d, 1 <= d <= kMaxDim, stored inline.
class Point {
 public:
  Point() = default;
  Point(std::initializer_list<std::int64_t> coords) {
    if (coords.size() == 0 || coords.size() > kMaxDim)
      throw InvalidArgument("point dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    dim_ = static_cast<int>(coords.size());
    std::copy(coords.begin(), coords.end(), c_.begin());
  }

  static Point zero(int dim) {
    if (dim < 1 || dim > kMaxDim)
      throw InvalidArgument("point dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    Point p;
    p.dim_ = dim;
    return p;
  }
  static Point axis(int dim, int axis_index, std::int64_t value) {
    Point p = zero(dim);
    p.c_.at(static_cast<std::size_t>(axis_index)) = value;
    return p;
  }

  int dim() const noexcept { return dim_; }
  std::int64_t operator[](int i) const noexcept { return c_[static_cast<std::size_t>(i)]; }
  std::int64_t& operator[](int i) noexcept { return c_[static_cast<std::size_t>(i)]; }
  std::span<const std::int64_t> coords() const noexcept {
    return {c_.data(), static_cast<std::size_t>(dim_)};
  }

  std::int64_t norm_inf() const noexcept {
    std::int64_t n = 0;
    for (int i = 0; i < dim_; ++i) n = std::max(n, c_[i] < 0 ? -c_[i] : c_[i]);
    return n;
  }
  bool is_zero() const noexcept { return norm_inf() == 0; }

  friend Point operator+(Point a, const Point& b) {
    check_same(a, b);
    for (int i = 0; i < a.dim_; ++i) a.c_[i] += b.c_[i];
    return a;
  }
  friend Point operator-(Point a, const Point& b) {
    check_same(a, b);
    for (int i = 0; i < a.dim_; ++i) a.c_[i] -= b.c_[i];
    return a;
  }

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;

  std::string to_string() const {
    std::string s;
    for (int i = 0; i < dim_; ++i) {
      if (i) s += ',';
      s += std::to_string(c_[i]);
    }
    return s;
  }

 private:
  static void check_same(const Point& a, const Point& b) {
    if (a.dim_ != b.dim_) throw DimensionMismatch("point dimensions differ");
  }

  int dim_ = 1;  // compared first
  std::array<std::int64_t, kMaxDim> c_{};
};

struct Vertex {
  Point x;
  std::int64_t t = 0;

  friend bool operator==(const Vertex&, const Vertex&) = default;
  friend auto operator<=>(const Vertex&, const Vertex&) = default;
};

/// Bond <(x,t), (x+y,t+1)>.
struct OrientedEdge {
  Vertex from;
  Point displacement;

  Vertex to() const { return {from.x + displacement, from.t + 1}; }
};

/// Cutoff k for ||y||_inf, or the explicit untruncated tag.
class TruncationRange {
 public:
  static constexpr TruncationRange untruncated() noexcept { return TruncationRange{}; }
  static TruncationRange at(std::int64_t k) {
    if (k < 1) throw InvalidArgument("truncation range must be >= 1, got " + std::to_string(k));
    TruncationRange r;
    r.k_ = k;
    return r;
  }

  bool is_finite() const noexcept { return k_.has_value(); }
  std::int64_t k() const {
    if (!k_) throw InvalidArgument("untruncated range has no finite k");
    return *k_;
  }
  bool admits(std::int64_t norm) const noexcept { return !k_ || norm <= *k_; }

  TruncationRange tighter(const TruncationRange& other) const noexcept {
    if (!k_) return other;
    if (!other.k_) return *this;
    return *k_ <= *other.k_ ? *this : other;
  }

  std::string to_string() const { return k_ ? std::to_string(*k_) : "inf"; }

  friend bool operator==(const TruncationRange&, const TruncationRange&) = default;
  /// Untruncated orders above every finite range.
  friend std::strong_ordering operator<=>(const TruncationRange& a, const TruncationRange& b) {
    if (a.k_ && b.k_) return *a.k_ <=> *b.k_;
    if (!a.k_ && !b.k_) return std::strong_ordering::equal;
    return a.k_ ? std::strong_ordering::less : std::strong_ordering::greater;
  }

 private:
  constexpr TruncationRange() noexcept = default;
  std::optional<std::int64_t> k_;
};

enum class FamilyKind { dense_epsilon, sparse_support, power_law, explicit_table, one_sided_1d };

inline std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::dense_epsilon: return "dense-epsilon";
    case FamilyKind::sparse_support: return "sparse-support";
    case FamilyKind::power_law: return "power-law";
    case FamilyKind::explicit_table: return "explicit-table";
    case FamilyKind::one_sided_1d: return "one-sided-1d";
  }
  return "unknown";
}

inline FamilyKind family_kind_from_string(const std::string& s) {
  for (auto k : {FamilyKind::dense_epsilon, FamilyKind::sparse_support, FamilyKind::power_law,
                 FamilyKind::explicit_table, FamilyKind::one_sided_1d})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown family kind '" + s + "'");
}

/// Probabilities are clamped to [0, 1]; rates (contact births) are any value >= 0.
enum class ValueDomain { probability, rate };

struct WeightedDisplacement {
  Point y;
  double value = 0.0;
};

struct ScanOptions {
  std::int64_t bound = 1'000'000;  // per axis
};

/// The family (p_y) of connection probabilities, or (lambda_y) of birth rates.
///
/// Immutable value type. Table storage is shared between copies.
class ConnectionFamily {
 public:
  static ConnectionFamily dense_epsilon(int dim, double level, bool one_sided = true,
                                        ValueDomain domain = ValueDomain::probability) {
    ConnectionFamily f(FamilyKind::dense_epsilon, dim, domain, one_sided);
    f.level_ = level;
    f.validate_level(level);
    return f;
  }

  /// Value `level` on displacements whose coordinates are all multiples of `stride`.
  static ConnectionFamily sparse_support(int dim, std::int64_t stride, double level, bool one_sided = true,
                                         ValueDomain domain = ValueDomain::probability) {
    if (stride < 1) throw InvalidArgument("sparse-support stride must be >= 1");
    ConnectionFamily f(FamilyKind::sparse_support, dim, domain, one_sided);
    f.level_ = level;
    f.stride_ = stride;
    f.validate_level(level);
    return f;
  }

  /// C / ||y||_inf^s, capped at 1 in the probability domain.
  static ConnectionFamily power_law(int dim, double constant, double exponent, bool one_sided = true,
                                    ValueDomain domain = ValueDomain::probability) {
    if (!(constant >= 0.0) || !std::isfinite(constant)) throw InvalidArgument("power-law constant must be >= 0");
    if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw InvalidArgument("power-law exponent must be >= 0");
    ConnectionFamily f(FamilyKind::power_law, dim, domain, one_sided);
    f.constant_ = constant;
    f.exponent_ = exponent;
    return f;
  }

  static ConnectionFamily explicit_table(int dim, std::map<Point, double> entries,
                                         ValueDomain domain = ValueDomain::probability) {
    ConnectionFamily f(FamilyKind::explicit_table, dim, domain, false);
    for (const auto& [y, v] : entries) {
      if (y.dim() != dim) throw DimensionMismatch("table entry " + y.to_string() + " has wrong dimension");
      f.validate_level(v);
    }
    std::erase_if(entries, [](const auto& e) { return e.second == 0.0; });
    f.table_ = std::make_shared<const std::map<Point, double>>(std::move(entries));
    f.include_zero_ = true;  // tables say what they say
    return f;
  }

  /// values[n-1] is the value at displacement n >= 1; zero elsewhere.
  static ConnectionFamily one_sided_1d(std::vector<double> values,
                                       ValueDomain domain = ValueDomain::probability) {
    ConnectionFamily f(FamilyKind::one_sided_1d, 1, domain, true);
    for (double v : values) f.validate_level(v);
    f.sequence_ = std::make_shared<const std::vector<double>>(std::move(values));
    return f;
  }

  /// Toggle whether y = 0 carries the kind's value (dense, sparse, power-law only).
  ConnectionFamily with_zero(bool include) const {
    ConnectionFamily f = *this;
    f.include_zero_ = include;
    return f;
  }

  /// Multiply every value by `factor` (e.g. sigma * q_n in the induced aniso
  /// model). Probabilities are clamped to 1 after scaling.
  ConnectionFamily scaled(double factor) const {
    if (!(factor >= 0.0) || !std::isfinite(factor)) throw InvalidArgument("scale factor must be >= 0");
    ConnectionFamily f = *this;
    f.multiplier_ *= factor;
    return f;
  }

  int dim() const noexcept { return dim_; }
  FamilyKind kind() const noexcept { return kind_; }
  ValueDomain domain() const noexcept { return domain_; }
  bool one_sided() const noexcept { return one_sided_; }
  bool include_zero() const noexcept { return include_zero_; }
  double level() const noexcept { return level_ * multiplier_; }
  std::int64_t stride() const noexcept { return stride_; }
  double constant() const noexcept { return constant_; }
  double exponent() const noexcept { return exponent_; }
  double multiplier() const noexcept { return multiplier_; }
  const std::map<Point, double>* table() const noexcept { return table_.get(); }
  const std::vector<double>* sequence() const noexcept { return sequence_.get(); }

  /// p_y (or lambda_y). Pure.
  double value_of(const Point& y) const {
    if (y.dim() != dim_)
      throw DimensionMismatch("displacement has dimension " + std::to_string(y.dim()) + ", family has " +
                              std::to_string(dim_));
    return clamp(raw_value(y) * multiplier_);
  }

  /// True when p_n = 0 for all n <= 0 in dimension one.
  bool is_one_sided_1d() const {
    if (dim_ != 1) return false;
    switch (kind_) {
      case FamilyKind::explicit_table:
        return table_->empty() || table_->begin()->first[0] > 0;
      case FamilyKind::one_sided_1d:
        return true;
      default:
        return one_sided_ && !include_zero_;
    }
  }

  /// Largest ||y||_inf with nonzero value, or nullopt if the support is unbounded.
  std::optional<std::int64_t> support_extent() const {
    switch (kind_) {
      case FamilyKind::explicit_table: {
        std::int64_t m = 0;
        for (const auto& e : *table_) m = std::max(m, e.first.norm_inf());
        return m;
      }
      case FamilyKind::one_sided_1d: {
        for (std::size_t n = sequence_->size(); n > 0; --n)
          if ((*sequence_)[n - 1] * multiplier_ > 0.0) return static_cast<std::int64_t>(n);
        return 0;
      }
      case FamilyKind::dense_epsilon:
      case FamilyKind::sparse_support:
        if (level() == 0.0) return 0;
        return std::nullopt;
      case FamilyKind::power_law:
        if (constant_ * multiplier_ == 0.0) return 0;
        return std::nullopt;
    }
    return std::nullopt;
  }

  /// Displacements with ||y||_inf <= k and nonzero value, ordered by norm then
  /// lexicographically.
  std::vector<WeightedDisplacement> support_within(std::int64_t k) const {
    std::vector<WeightedDisplacement> out;
    if (k < 0) return out;
    if (kind_ == FamilyKind::explicit_table) {
      for (const auto& [y, v] : *table_)
        if (y.norm_inf() <= k && v * multiplier_ > 0.0) out.push_back({y, clamp(v * multiplier_)});
    } else if (kind_ == FamilyKind::one_sided_1d) {
      const auto n_max = std::min<std::int64_t>(k, static_cast<std::int64_t>(sequence_->size()));
      for (std::int64_t n = 1; n <= n_max; ++n) {
        double v = clamp((*sequence_)[static_cast<std::size_t>(n - 1)] * multiplier_);
        if (v > 0.0) out.push_back({Point{n}, v});
      }
    } else if (dim_ == 1) {
      for (std::int64_t n = one_sided_ ? 0 : -k; n <= k; ++n) {
        Point y{n};
        double v = value_of(y);
        if (v > 0.0) out.push_back({y, v});
      }
    } else {
      Point y = Point::zero(dim_);
      enumerate_box(k, 0, y, out);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      auto na = a.y.norm_inf(), nb = b.y.norm_inf();
      return na != nb ? na < nb : a.y < b.y;
    });
    return out;
  }

  std::string describe() const {
    std::string s = to_string(kind_) + " d=" + std::to_string(dim_);
    switch (kind_) {
      case FamilyKind::dense_epsilon: s += " level=" + fmt_double(level()); break;
      case FamilyKind::sparse_support:
        s += " stride=" + std::to_string(stride_) + " level=" + fmt_double(level());
        break;
      case FamilyKind::power_law:
        s += " C=" + fmt_double(constant_ * multiplier_) + " s=" + fmt_double(exponent_);
        break;
      case FamilyKind::explicit_table: s += " entries=" + std::to_string(table_->size()); break;
      case FamilyKind::one_sided_1d: s += " length=" + std::to_string(sequence_->size()); break;
    }
    if (one_sided_ && kind_ != FamilyKind::explicit_table) s += " one-sided";
    return s;
  }

 private:
  ConnectionFamily(FamilyKind kind, int dim, ValueDomain domain, bool one_sided)
      : kind_(kind), dim_(dim), domain_(domain), one_sided_(one_sided) {
    if (dim < 1 || dim > kMaxDim) throw InvalidArgument("family dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    if (one_sided && dim != 1) throw InvalidArgument("one-sided families are defined in dimension 1 only");
  }

  static std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

  void validate_level(double v) const {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("family values must be finite and >= 0");
    if (domain_ == ValueDomain::probability && v > 1.0) throw InvalidArgument("probabilities must lie in [0, 1]");
  }

  double clamp(double v) const noexcept {
    return domain_ == ValueDomain::probability ? std::min(v, 1.0) : v;
  }

  bool sign_admissible(const Point& y) const noexcept {
    if (y.is_zero()) return include_zero_;
    return !one_sided_ || y[0] > 0;
  }

  double raw_value(const Point& y) const {
    switch (kind_) {
      case FamilyKind::dense_epsilon:
        return sign_admissible(y) ? level_ : 0.0;
      case FamilyKind::sparse_support: {
        if (!sign_admissible(y)) return 0.0;
        for (auto c : y.coords())
          if (c % stride_ != 0) return 0.0;
        return level_;
      }
      case FamilyKind::power_law: {
        if (!sign_admissible(y)) return 0.0;
        auto n = y.norm_inf();
        if (n == 0) return constant_;
        return constant_ / std::pow(static_cast<double>(n), exponent_);
      }
      case FamilyKind::explicit_table: {
        auto it = table_->find(y);
        return it == table_->end() ? 0.0 : it->second;
      }
      case FamilyKind::one_sided_1d: {
        auto n = y[0];
        if (n < 1 || n > static_cast<std::int64_t>(sequence_->size())) return 0.0;
        return (*sequence_)[static_cast<std::size_t>(n - 1)];
      }
    }
    return 0.0;
  }

  void enumerate_box(std::int64_t k, int axis, Point& y, std::vector<WeightedDisplacement>& out) const {
    if (axis == dim_) {
      double v = value_of(y);
      if (v > 0.0) out.push_back({y, v});
      return;
    }
    for (std::int64_t c = -k; c <= k; ++c) {
      y[axis] = c;
      enumerate_box(k, axis + 1, y, out);
    }
    y[axis] = 0;
  }

  FamilyKind kind_;
  int dim_;
  ValueDomain domain_;
  bool one_sided_;
  bool include_zero_ = false;
  double level_ = 0.0;
  std::int64_t stride_ = 1;
  double constant_ = 0.0;
  double exponent_ = 0.0;
  double multiplier_ = 1.0;
  std::shared_ptr<const std::map<Point, double>> table_;
  std::shared_ptr<const std::vector<double>> sequence_;
};

/// (p^k_y): the base family with every displacement beyond range k set to zero.
class TruncatedFamily {
 public:
  TruncatedFamily(ConnectionFamily base, TruncationRange range) : base_(std::move(base)), range_(range) {}

  const ConnectionFamily& base() const noexcept { return base_; }
  TruncationRange range() const noexcept { return range_; }
  int dim() const noexcept { return base_.dim(); }

  double probability_of(const Point& y) const {
    if (y.dim() != base_.dim())
      throw DimensionMismatch("displacement has dimension " + std::to_string(y.dim()) + ", family has " +
                              std::to_string(base_.dim()));
    return range_.admits(y.norm_inf()) ? base_.value_of(y) : 0.0;
  }

  /// Every displacement with nonzero truncated value; needs a finite range or
  /// a finitely supported base.
  std::vector<WeightedDisplacement> support() const {
    if (range_.is_finite()) return base_.support_within(range_.k());
    auto extent = base_.support_extent();
    if (!extent)
      throw InvalidArgument("untruncated family " + base_.describe() + " has unbounded support");
    return base_.support_within(*extent);
  }

 private:
  ConnectionFamily base_;
  TruncationRange range_;
};

inline TruncatedFamily truncate(const ConnectionFamily& family, TruncationRange range) {
  return TruncatedFamily(family, range);
}
inline TruncatedFamily truncate(const ConnectionFamily& family, std::int64_t k) {
  return TruncatedFamily(family, TruncationRange::at(k));
}
inline TruncatedFamily truncate(const TruncatedFamily& family, std::int64_t k) {
  return TruncatedFamily(family.base(), family.range().tighter(TruncationRange::at(k)));
}
inline TruncatedFamily untruncated(const ConnectionFamily& family) {
  return TruncatedFamily(family, TruncationRange::untruncated());
}

/// (a_1, ..., a_m): the first m positive indices with p_i > epsilon.
inline std::vector<std::int64_t> support_above(const ConnectionFamily& family, double epsilon, std::int64_t m,
                                               const ScanOptions& scan = {}) {
  if (!family.is_one_sided_1d()) throw InvalidArgument("support_above needs a one-sided family in dimension 1");
  if (m < 1) throw InvalidArgument("support_above needs m >= 1");
  const bool prob = family.domain() == ValueDomain::probability;
  if (!(epsilon > 0.0) || (prob && !(epsilon < 1.0)))
    throw InvalidArgument("epsilon must lie in (0,1) for probabilities or be > 0 for rates");

  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(std::min<std::int64_t>(m, 1 << 20)));
  auto insufficient = [&](std::size_t found) {
    return InsufficientSupport("only " + std::to_string(found) + " displacement(s) with value > " +
                               std::to_string(epsilon) + " below scan bound " + std::to_string(scan.bound) +
                               " (needed " + std::to_string(m) + ") for " + family.describe());
  };
  switch (family.kind()) {
    case FamilyKind::dense_epsilon:
    case FamilyKind::sparse_support: {
      if (!(family.level() > epsilon)) throw insufficient(0);
      const std::int64_t step = family.kind() == FamilyKind::dense_epsilon ? 1 : family.stride();
      for (std::int64_t n = 1; n <= m; ++n) out.push_back(n * step);
      return out;
    }
    default:
      break;
  }
  for (std::int64_t n = 1; n <= scan.bound && static_cast<std::int64_t>(out.size()) < m; ++n)
    if (family.value_of(Point{n}) > epsilon) out.push_back(n);
  if (static_cast<std::int64_t>(out.size()) < m) throw insufficient(out.size());
  return out;
}

enum class AxisSign { minus = -1, plus = 1 };

/// One-dimensional family q on a projected axis together with the witness map
/// m -> y (y_axis = sign * m, p_y = q_m).
struct ProjectedFamily {
  ConnectionFamily family;
  int axis = 1;  // 1-based
  AxisSign sign = AxisSign::plus;
  bool analytic = false;  // representatives are sign * m * e_axis
  std::map<std::int64_t, Point> table_representatives;

  Point representative(std::int64_t m) const {
    if (analytic) return Point::axis(family_dim, axis - 1, static_cast<int>(sign) * m);
    auto it = table_representatives.find(m);
    if (it == table_representatives.end())
      throw InvalidArgument("no representative for projected index " + std::to_string(m));
    return it->second;
  }

  int family_dim = 1;  // dimension of the source family
};

/// Project {y : p_y > epsilon} onto one signed axis, q_m = max p_y over the
/// fibre y_axis = sign * m. Raises NoInfiniteProjection when the projected
/// support is (analytically) finite, or for tables, has fewer than
/// `min_count` points up to the scan bound.
inline ProjectedFamily project_family(const ConnectionFamily& family, int axis, AxisSign sign, double epsilon,
                                      const ScanOptions& scan = {}, std::size_t min_count = 1) {
  const int d = family.dim();
  if (axis < 1 || axis > d) throw InvalidArgument("axis must lie in [1, " + std::to_string(d) + "]");
  ProjectedFamily out{family, axis, sign, false, {}, d};

  auto none = [&]() {
    return NoInfiniteProjection("projection of {y : p_y > " + std::to_string(epsilon) + "} onto axis " +
                                std::to_string(axis) + (sign == AxisSign::plus ? "+" : "-") + " of " +
                                family.describe() + " is not infinite");
  };

  if (d == 1 && family.is_one_sided_1d() && sign == AxisSign::plus) {
    // Identity, but still subject to the support requirement.
    out.family = family;
    if (family.kind() == FamilyKind::explicit_table || family.kind() == FamilyKind::one_sided_1d) {
      for (const auto& w : family.support_within(scan.bound))
        if (w.value > epsilon) out.table_representatives.emplace(w.y[0], w.y);
      if (out.table_representatives.size() < min_count) throw none();
    } else {
      out.analytic = true;
    }
    return out;
  }

  const auto domain = family.domain();
  switch (family.kind()) {
    case FamilyKind::dense_epsilon:
    case FamilyKind::sparse_support:
    case FamilyKind::power_law: {
      if (family.one_sided() && sign == AxisSign::minus) throw none();
      const double far_value = family.kind() == FamilyKind::power_law
                                   ? (family.exponent() == 0.0 ? family.value_of(Point::axis(d, axis - 1, 1)) : 0.0)
                                   : family.level();
      if (!(far_value > epsilon)) throw none();
      out.analytic = true;
      if (family.kind() == FamilyKind::dense_epsilon)
        out.family = ConnectionFamily::dense_epsilon(1, family.level(), true, domain);
      else if (family.kind() == FamilyKind::sparse_support)
        out.family = ConnectionFamily::sparse_support(1, family.stride(), family.level(), true, domain);
      else
        out.family = ConnectionFamily::power_law(1, family.constant() * family.multiplier(), 0.0, true, domain);
      return out;
    }
    case FamilyKind::explicit_table:
    case FamilyKind::one_sided_1d: {
      std::map<Point, double> q;
      auto consider = [&](const Point& y, double v) {
        const auto c = y[axis - 1] * static_cast<int>(sign);
        if (c < 1 || c > scan.bound || !(v > epsilon)) return;
        Point key{c};
        auto it = q.find(key);
        if (it == q.end() || v > it->second) {
          q[key] = v;
          out.table_representatives[c] = y;
        }
      };
      if (family.kind() == FamilyKind::explicit_table) {
        for (const auto& [y, v] : *family.table()) consider(y, family.value_of(y));
      } else {
        for (const auto& w : family.support_within(scan.bound)) consider(w.y, w.value);
      }
      if (q.size() < min_count) throw none();
      out.family = ConnectionFamily::explicit_table(1, std::move(q), domain);
      return out;
    }
  }
  throw none();
}

}  // namespace lrperc
