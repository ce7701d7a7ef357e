#ifndef FASTSLOW_JET_HPP
#define FASTSLOW_JET_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastslow/errors.hpp"

namespace fsm {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr int kMaxJetVars = 8;
inline constexpr int kMaxJetDegree = 255;

/// Exponent tuple of a monomial. Ordered graded-lexicographically: lower total
/// degree first, then larger leading exponents first (x^2 < xy < y^2).
class MultiIndex {
 public:
  MultiIndex() = default;

  explicit MultiIndex(int num_vars) : n_(checked_arity(num_vars)) {}

  MultiIndex(std::initializer_list<int> exps) : n_(checked_arity(static_cast<int>(exps.size()))) {
    int i = 0;
    for (int e : exps) set(i++, e);
  }

  explicit MultiIndex(std::span<const int> exps) : n_(checked_arity(static_cast<int>(exps.size()))) {
    for (int i = 0; i < n_; ++i) set(i, exps[i]);
  }

  static MultiIndex unit(int num_vars, int var) {
    MultiIndex m(num_vars);
    m.set(var, 1);
    return m;
  }

  int num_vars() const { return n_; }
  int degree() const { return deg_; }
  int operator[](int i) const { return exps_[static_cast<std::size_t>(i)]; }

  void set(int i, int e) {
    if (i < 0 || i >= n_) throw StructuralError("multi-index variable out of range");
    if (e < 0) throw StructuralError("negative exponent in multi-index");
    const int deg = deg_ - exps_[static_cast<std::size_t>(i)] + e;
    if (e > kMaxJetDegree || deg > kMaxJetDegree) throw StructuralError("multi-index degree too large");
    exps_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(e);
    deg_ = static_cast<std::uint8_t>(deg);
  }

  MultiIndex operator+(const MultiIndex& o) const {
    if (o.n_ != n_) throw StructuralError("multi-index arity mismatch");
    MultiIndex r(n_);
    for (int i = 0; i < n_; ++i) r.set(i, (*this)[i] + o[i]);
    return r;
  }

  friend bool operator==(const MultiIndex& a, const MultiIndex& b) {
    return a.n_ == b.n_ && a.exps_ == b.exps_;
  }

  friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b) {
    if (a.n_ != b.n_) return a.n_ <=> b.n_;
    if (a.deg_ != b.deg_) return a.deg_ <=> b.deg_;
    for (int i = 0; i < a.n_; ++i) {
      if (a[i] != b[i]) return b[i] <=> a[i];
    }
    return std::strong_ordering::equal;
  }

  std::string to_string() const {
    std::string s = "(";
    for (int i = 0; i < n_; ++i) {
      if (i) s += ',';
      s += std::to_string((*this)[i]);
    }
    return s + ")";
  }

 private:
  static std::uint8_t checked_arity(int n) {
    if (n < 0 || n > kMaxJetVars) throw StructuralError("jet arity outside [0, " + std::to_string(kMaxJetVars) + "]");
    return static_cast<std::uint8_t>(n);
  }

  std::array<std::uint8_t, kMaxJetVars> exps_{};
  std::uint8_t n_ = 0;
  std::uint8_t deg_ = 0;
};

/// All multi-indices of exactly the given degree in graded-lex order.
inline std::vector<MultiIndex> homogeneous_monomials(int num_vars, int degree) {
  std::vector<MultiIndex> out;
  if (num_vars == 0) {
    if (degree == 0) out.emplace_back(0);
    return out;
  }
  std::vector<int> e(static_cast<std::size_t>(num_vars), 0);
  // Enumerate compositions with the leading exponent decreasing.
  auto rec = [&](auto&& self, int var, int remaining) -> void {
    if (var == num_vars - 1) {
      e[static_cast<std::size_t>(var)] = remaining;
      out.emplace_back(std::span<const int>(e));
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      e[static_cast<std::size_t>(var)] = k;
      self(self, var + 1, remaining - k);
    }
  };
  rec(rec, 0, degree);
  return out;
}

/// All multi-indices of degree <= order in graded-lex order.
inline std::vector<MultiIndex> monomials_up_to(int num_vars, int order) {
  std::vector<MultiIndex> out;
  for (int d = 0; d <= order; ++d) {
    auto h = homogeneous_monomials(num_vars, d);
    out.insert(out.end(), h.begin(), h.end());
  }
  return out;
}

/// Truncated multivariate Taylor polynomial. Stored sparsely; exact zeros are never kept.
/// `reliable_order` is the highest degree whose coefficients are trusted as Taylor data of the
/// underlying smooth function; differentiation lowers it by one.
template <typename Scalar>
class Jet {
 public:
  using Terms = std::map<MultiIndex, Scalar>;

  Jet() = default;

  Jet(int num_vars, int order) : num_vars_(num_vars), order_(order), reliable_order_(order) {
    if (num_vars < 0 || num_vars > kMaxJetVars) throw StructuralError("jet arity outside supported range");
    if (order < 0 || order > kMaxJetDegree) throw StructuralError("jet order outside supported range");
  }

  static Jet constant(int num_vars, int order, Scalar c) {
    Jet j(num_vars, order);
    j.set_coeff(MultiIndex(num_vars), c);
    return j;
  }

  static Jet variable(int num_vars, int order, int var) {
    Jet j(num_vars, order);
    if (order >= 1) j.set_coeff(MultiIndex::unit(num_vars, var), Scalar(1));
    return j;
  }

  int num_vars() const { return num_vars_; }
  int order() const { return order_; }
  int reliable_order() const { return reliable_order_; }
  void set_reliable_order(int r) { reliable_order_ = std::min(r, order_); }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  Scalar coeff(const MultiIndex& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Scalar(0) : it->second;
  }

  Scalar constant_term() const { return coeff(MultiIndex(num_vars_)); }

  void set_coeff(const MultiIndex& m, Scalar c) {
    check_index(m);
    if (m.degree() > order_) return;
    if (c == Scalar(0)) {
      terms_.erase(m);
    } else {
      terms_[m] = c;
    }
  }

  void add_to_coeff(const MultiIndex& m, Scalar c) {
    check_index(m);
    if (m.degree() > order_ || c == Scalar(0)) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == Scalar(0)) terms_.erase(it);
    }
  }

  /// Lowest degree carrying a nonzero coefficient, or -1 for the zero jet.
  int lowest_degree() const { return terms_.empty() ? -1 : terms_.begin()->first.degree(); }

  int highest_degree() const { return terms_.empty() ? -1 : terms_.rbegin()->first.degree(); }

  Jet homogeneous_part(int degree) const {
    Jet out(num_vars_, order_);
    out.reliable_order_ = reliable_order_;
    for (const auto& [m, c] : terms_)
      if (m.degree() == degree) out.terms_.emplace_hint(out.terms_.end(), m, c);
    return out;
  }

  /// Same polynomial re-declared at a different order; terms above it are dropped.
  Jet with_order(int order) const {
    Jet out(num_vars_, order);
    out.reliable_order_ = std::min(reliable_order_, order);
    for (const auto& [m, c] : terms_)
      if (m.degree() <= order) out.terms_.emplace_hint(out.terms_.end(), m, c);
    return out;
  }

  Jet without_constant() const {
    Jet out = *this;
    out.terms_.erase(MultiIndex(num_vars_));
    return out;
  }

  Scalar max_abs_coeff() const {
    Scalar m(0);
    for (const auto& [k, c] : terms_) m = std::max(m, Scalar(std::abs(c)));
    return m;
  }

  /// Direct evaluation with a per-call power table.
  Scalar evaluate(std::span<const Scalar> point) const {
    if (static_cast<int>(point.size()) != num_vars_) throw StructuralError("evaluation point has wrong dimension");
    const int top = std::max(highest_degree(), 0);
    std::vector<Scalar> pw(static_cast<std::size_t>(num_vars_ * (top + 1)));
    for (int i = 0; i < num_vars_; ++i) {
      Scalar p(1);
      for (int e = 0; e <= top; ++e) {
        pw[static_cast<std::size_t>(i * (top + 1) + e)] = p;
        p *= point[static_cast<std::size_t>(i)];
      }
    }
    Scalar sum(0);
    for (const auto& [m, c] : terms_) {
      Scalar t = c;
      for (int i = 0; i < num_vars_; ++i)
        if (m[i]) t *= pw[static_cast<std::size_t>(i * (top + 1) + m[i])];
      sum += t;
    }
    return sum;
  }

  Scalar evaluate(const Vector<Scalar>& point) const {
    return evaluate(std::span<const Scalar>(point.data(), static_cast<std::size_t>(point.size())));
  }

  Jet& operator+=(const Jet& o) {
    check_conformant(o);
    for (const auto& [m, c] : o.terms_) add_to_coeff(m, c);
    reliable_order_ = std::min(reliable_order_, o.reliable_order_);
    return *this;
  }

  Jet& operator-=(const Jet& o) {
    check_conformant(o);
    for (const auto& [m, c] : o.terms_) add_to_coeff(m, -c);
    reliable_order_ = std::min(reliable_order_, o.reliable_order_);
    return *this;
  }

  Jet& operator*=(Scalar s) {
    if (s == Scalar(0)) {
      terms_.clear();
      return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
      it->second *= s;
      it = it->second == Scalar(0) ? terms_.erase(it) : std::next(it);
    }
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) { return a *= Scalar(-1); }
  friend Jet operator*(Scalar s, Jet a) { return a *= s; }
  friend Jet operator*(Jet a, Scalar s) { return a *= s; }
  friend Jet operator*(const Jet& a, const Jet& b) { return jet_mul(a, b); }

  /// Truncated product; both factors must share arity and order.
  friend Jet jet_mul(const Jet& a, const Jet& b) {
    a.check_conformant(b);
    Jet out(a.num_vars_, a.order_);
    out.reliable_order_ = std::min(a.reliable_order_, b.reliable_order_);
    for (const auto& [ma, ca] : a.terms_) {
      if (ma.degree() > a.order_) break;
      for (const auto& [mb, cb] : b.terms_) {
        if (ma.degree() + mb.degree() > a.order_) break;
        out.terms_[ma + mb] += ca * cb;
      }
    }
    out.drop_exact_zeros();
    return out;
  }

  void check_conformant(const Jet& o) const {
    if (o.num_vars_ != num_vars_) throw StructuralError("jet arity mismatch");
    if (o.order_ != order_) throw StructuralError("jet order mismatch");
  }

  friend bool operator==(const Jet& a, const Jet& b) {
    return a.num_vars_ == b.num_vars_ && a.order_ == b.order_ && a.terms_ == b.terms_;
  }

 private:
  void check_index(const MultiIndex& m) const {
    if (m.num_vars() != num_vars_) throw StructuralError("monomial arity does not match jet arity");
  }

  void drop_exact_zeros() {
    std::erase_if(terms_, [](const auto& kv) { return kv.second == Scalar(0); });
  }

  int num_vars_ = 0;
  int order_ = 0;
  int reliable_order_ = 0;
  Terms terms_;
};

template <typename Scalar>
using JetVector = std::vector<Jet<Scalar>>;

using Jetd = Jet<double>;
using JetVectord = JetVector<double>;

template <typename Scalar>
Vector<Scalar> evaluate(const JetVector<Scalar>& v, const Vector<Scalar>& point) {
  Vector<Scalar> out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i].evaluate(point);
  return out;
}

/// Identity jet vector x_1..x_m at the given order.
template <typename Scalar>
JetVector<Scalar> identity_jets(int num_vars, int order) {
  JetVector<Scalar> id;
  for (int i = 0; i < num_vars; ++i) id.push_back(Jet<Scalar>::variable(num_vars, order, i));
  return id;
}

template <typename Scalar>
void check_conformant(const JetVector<Scalar>& v, int num_vars, int order) {
  for (const auto& j : v) {
    if (j.num_vars() != num_vars) throw StructuralError("jet vector components have different arity");
    if (j.order() != order) throw StructuralError("jet vector components have different order");
  }
}

/// Evaluates `outer` on the ring elements `inner`: sum of c * prod inner_i^{e_i}.
/// Ring needs +=, ring*ring and Scalar*ring; `one` is its unit.
template <typename Ring, typename Scalar>
Ring compose_into(const Jet<Scalar>& outer, std::span<const Ring> inner, const Ring& one) {
  const int m = outer.num_vars();
  if (static_cast<int>(inner.size()) != m) throw StructuralError("composition arity mismatch");
  std::vector<std::vector<Ring>> pw(static_cast<std::size_t>(m));
  auto power = [&](int i, int e) -> const Ring& {
    auto& p = pw[static_cast<std::size_t>(i)];
    if (p.empty()) p.push_back(inner[static_cast<std::size_t>(i)]);
    while (static_cast<int>(p.size()) < e) p.push_back(p.back() * inner[static_cast<std::size_t>(i)]);
    return p[static_cast<std::size_t>(e - 1)];
  };
  Ring acc = Scalar(0) * one;
  for (const auto& [mi, c] : outer.terms()) {
    Ring term = c * one;
    for (int i = 0; i < m; ++i)
      if (mi[i]) term = term * power(i, mi[i]);
    acc += term;
  }
  return acc;
}

/// outer(inner_1, ..., inner_m). Inner jets must share arity and order and have zero constant
/// term; the result lives in the inner arity at the inner order.
template <typename Scalar>
Jet<Scalar> jet_compose(const Jet<Scalar>& outer, const JetVector<Scalar>& inner) {
  if (static_cast<int>(inner.size()) != outer.num_vars())
    throw StructuralError("composition arity mismatch: outer has " + std::to_string(outer.num_vars()) +
                          " variables, " + std::to_string(inner.size()) + " inner jets given");
  if (inner.empty()) return outer;
  const int nv = inner.front().num_vars();
  const int order = inner.front().order();
  check_conformant(inner, nv, order);
  int reliable = outer.reliable_order();
  for (const auto& j : inner) {
    if (j.constant_term() != Scalar(0)) throw StructuralError("composition requires inner jets with zero constant term");
    reliable = std::min(reliable, j.reliable_order());
  }
  Jet<Scalar> out = compose_into<Jet<Scalar>, Scalar>(outer, std::span<const Jet<Scalar>>(inner),
                                                      Jet<Scalar>::constant(nv, order, Scalar(1)));
  out.set_reliable_order(reliable);
  return out;
}

template <typename Scalar>
JetVector<Scalar> jet_compose(const JetVector<Scalar>& outer, const JetVector<Scalar>& inner) {
  JetVector<Scalar> out;
  out.reserve(outer.size());
  for (const auto& o : outer) out.push_back(jet_compose(o, inner));
  return out;
}

/// Partial derivative in variable `var`; order is kept, reliable_order drops by one.
template <typename Scalar>
Jet<Scalar> jet_partial(const Jet<Scalar>& a, int var) {
  if (var < 0 || var >= a.num_vars()) throw StructuralError("partial derivative variable out of range");
  Jet<Scalar> out(a.num_vars(), a.order());
  for (const auto& [m, c] : a.terms()) {
    const int e = m[var];
    if (e == 0) continue;
    MultiIndex d = m;
    d.set(var, e - 1);
    out.add_to_coeff(d, c * Scalar(e));
  }
  out.set_reliable_order(a.reliable_order() - 1);
  return out;
}

/// Exact re-expansion of the polynomial about a shifted origin: returns p(x + shift).
template <typename Scalar>
Jet<Scalar> jet_translate(const Jet<Scalar>& a, std::span<const Scalar> shift) {
  const int m = a.num_vars();
  if (static_cast<int>(shift.size()) != m) throw StructuralError("translation vector has wrong dimension");
  Jet<Scalar> out(m, a.order());
  out.set_reliable_order(a.reliable_order());
  std::vector<Jet<Scalar>> lin;
  for (int i = 0; i < m; ++i)
    lin.push_back(Jet<Scalar>::variable(m, a.order(), i) +
                  Jet<Scalar>::constant(m, a.order(), shift[static_cast<std::size_t>(i)]));
  // Binomial expansion term by term; degrees never exceed the input degree.
  for (const auto& [mi, c] : a.terms()) {
    Jet<Scalar> t = Jet<Scalar>::constant(m, a.order(), c);
    for (int i = 0; i < m; ++i)
      for (int e = 0; e < mi[i]; ++e) t = t * lin[static_cast<std::size_t>(i)];
    out += t;
  }
  out.set_reliable_order(a.reliable_order());
  return out;
}

template <typename Scalar>
Jet<Scalar> jet_translate(const Jet<Scalar>& a, const Vector<Scalar>& shift) {
  return jet_translate(a, std::span<const Scalar>(shift.data(), static_cast<std::size_t>(shift.size())));
}

/// Embeds a jet in a larger variable set: old variable i becomes new variable positions[i].
template <typename Scalar>
Jet<Scalar> jet_lift(const Jet<Scalar>& a, int new_num_vars, std::span<const int> positions) {
  if (static_cast<int>(positions.size()) != a.num_vars()) throw StructuralError("lift needs one position per variable");
  Jet<Scalar> out(new_num_vars, a.order());
  for (const auto& [m, c] : a.terms()) {
    MultiIndex n(new_num_vars);
    for (int i = 0; i < a.num_vars(); ++i) n.set(positions[static_cast<std::size_t>(i)], m[i]);
    out.add_to_coeff(n, c);
  }
  out.set_reliable_order(a.reliable_order());
  return out;
}

/// Embeds a jet in the leading variables of a larger variable set.
template <typename Scalar>
Jet<Scalar> jet_lift(const Jet<Scalar>& a, int new_num_vars) {
  std::vector<int> pos(static_cast<std::size_t>(a.num_vars()));
  for (int i = 0; i < a.num_vars(); ++i) pos[static_cast<std::size_t>(i)] = i;
  return jet_lift(a, new_num_vars, std::span<const int>(pos));
}

/// Sets variable `var` to zero and removes it from the variable list.
template <typename Scalar>
Jet<Scalar> jet_restrict_zero(const Jet<Scalar>& a, int var) {
  Jet<Scalar> out(a.num_vars() - 1, a.order());
  for (const auto& [m, c] : a.terms()) {
    if (m[var]) continue;
    MultiIndex n(a.num_vars() - 1);
    for (int i = 0, j = 0; i < a.num_vars(); ++i)
      if (i != var) n.set(j++, m[i]);
    out.add_to_coeff(n, c);
  }
  out.set_reliable_order(a.reliable_order());
  return out;
}

/// Terms that do not contain variable `var`, i.e. a with var set to zero, same arity.
template <typename Scalar>
Jet<Scalar> jet_set_zero(const Jet<Scalar>& a, int var) {
  Jet<Scalar> out(a.num_vars(), a.order());
  for (const auto& [m, c] : a.terms())
    if (!m[var]) out.add_to_coeff(m, c);
  out.set_reliable_order(a.reliable_order());
  return out;
}

/// Divides by variable `var`. Terms free of `var` are dropped; their largest magnitude is
/// reported through `dropped` so callers can check exact divisibility.
template <typename Scalar>
Jet<Scalar> jet_divide_by_var(const Jet<Scalar>& a, int var, Scalar* dropped = nullptr) {
  Jet<Scalar> out(a.num_vars(), a.order());
  Scalar lost(0);
  for (const auto& [m, c] : a.terms()) {
    if (!m[var]) {
      lost = std::max(lost, Scalar(std::abs(c)));
      continue;
    }
    MultiIndex n = m;
    n.set(var, m[var] - 1);
    out.add_to_coeff(n, c);
  }
  if (dropped) *dropped = lost;
  out.set_reliable_order(a.reliable_order() - 1);
  return out;
}

/// Linear part of a jet vector as a dense matrix (rows = components).
template <typename Scalar>
Matrix<Scalar> linear_part(const JetVector<Scalar>& v, int num_vars) {
  Matrix<Scalar> a = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(v.size()), num_vars);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int j = 0; j < num_vars; ++j) a(static_cast<Eigen::Index>(i), j) = v[i].coeff(MultiIndex::unit(num_vars, j));
  return a;
}

template <typename Scalar>
Vector<Scalar> constant_part(const JetVector<Scalar>& v) {
  Vector<Scalar> c(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) c[static_cast<Eigen::Index>(i)] = v[i].constant_term();
  return c;
}

/// Jet vector of the linear map x -> A x.
template <typename Scalar>
JetVector<Scalar> linear_jets(const Matrix<Scalar>& a, int order) {
  const int m = static_cast<int>(a.cols());
  JetVector<Scalar> out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Jet<Scalar> j(m, order);
    for (int k = 0; k < m; ++k) j.set_coeff(MultiIndex::unit(m, k), a(i, k));
    out.push_back(std::move(j));
  }
  return out;
}

/// A applied componentwise to a jet vector: (A v)_i = sum_j A_ij v_j.
template <typename Scalar>
JetVector<Scalar> apply_matrix(const Matrix<Scalar>& a, const JetVector<Scalar>& v) {
  if (a.cols() != static_cast<Eigen::Index>(v.size())) throw StructuralError("matrix/jet-vector size mismatch");
  JetVector<Scalar> out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Jet<Scalar> acc(v.front().num_vars(), v.front().order());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != Scalar(0)) acc += a(i, j) * v[static_cast<std::size_t>(j)];
    out.push_back(std::move(acc));
  }
  return out;
}

template <typename Scalar>
JetVector<Scalar> homogeneous_part(const JetVector<Scalar>& v, int degree) {
  JetVector<Scalar> out;
  for (const auto& j : v) out.push_back(j.homogeneous_part(degree));
  return out;
}

template <typename Scalar>
JetVector<Scalar> with_order(const JetVector<Scalar>& v, int order) {
  JetVector<Scalar> out;
  for (const auto& j : v) out.push_back(j.with_order(order));
  return out;
}

/// Largest coefficient difference over all components and degrees in [lo, hi].
template <typename Scalar>
Scalar max_coeff_diff(const JetVector<Scalar>& a, const JetVector<Scalar>& b, int lo = 0, int hi = kMaxJetDegree) {
  if (a.size() != b.size()) throw StructuralError("jet vectors differ in length");
  Scalar worst(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto scan = [&](const Jet<Scalar>& x, const Jet<Scalar>& y) {
      for (const auto& [m, c] : x.terms())
        if (m.degree() >= lo && m.degree() <= hi) worst = std::max(worst, Scalar(std::abs(c - y.coeff(m))));
    };
    scan(a[i], b[i]);
    scan(b[i], a[i]);
  }
  return worst;
}

/// Dense matrix of jets, row-major. Used for Jacobians and parameter-dependent frames.
template <typename Scalar>
class JetMatrix {
 public:
  JetMatrix() = default;
  JetMatrix(int rows, int cols, int num_vars, int order)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), Jet<Scalar>(num_vars, order)) {}

  static JetMatrix constant(const Matrix<Scalar>& a, int num_vars, int order) {
    JetMatrix m(static_cast<int>(a.rows()), static_cast<int>(a.cols()), num_vars, order);
    for (int i = 0; i < m.rows_; ++i)
      for (int j = 0; j < m.cols_; ++j) m(i, j) = Jet<Scalar>::constant(num_vars, order, a(i, j));
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Jet<Scalar>& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
  const Jet<Scalar>& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

  Matrix<Scalar> constant_part() const {
    Matrix<Scalar> a(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) a(i, j) = (*this)(i, j).constant_term();
    return a;
  }

  Matrix<Scalar> evaluate(const Vector<Scalar>& point) const {
    Matrix<Scalar> a(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) a(i, j) = (*this)(i, j).evaluate(point);
    return a;
  }

  friend JetMatrix operator*(const JetMatrix& a, const JetMatrix& b) {
    if (a.cols_ != b.rows_) throw StructuralError("jet matrix shape mismatch");
    const auto& ref = a.data_.front();
    JetMatrix c(a.rows_, b.cols_, ref.num_vars(), ref.order());
    for (int i = 0; i < a.rows_; ++i)
      for (int j = 0; j < b.cols_; ++j)
        for (int k = 0; k < a.cols_; ++k) c(i, j) += a(i, k) * b(k, j);
    return c;
  }

  friend JetMatrix operator+(JetMatrix a, const JetMatrix& b) {
    for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] += b.data_[i];
    return a;
  }

  friend JetMatrix operator-(JetMatrix a, const JetMatrix& b) {
    for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] -= b.data_[i];
    return a;
  }

  JetVector<Scalar> apply(const JetVector<Scalar>& v) const {
    if (static_cast<int>(v.size()) != cols_) throw StructuralError("jet matrix/vector size mismatch");
    JetVector<Scalar> out;
    for (int i = 0; i < rows_; ++i) {
      Jet<Scalar> acc(v.front().num_vars(), v.front().order());
      for (int j = 0; j < cols_; ++j) acc += (*this)(i, j) * v[static_cast<std::size_t>(j)];
      out.push_back(std::move(acc));
    }
    return out;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Jet<Scalar>> data_;
};

template <typename Scalar>
JetMatrix<Scalar> jacobian(const JetVector<Scalar>& f) {
  const int m = f.front().num_vars();
  JetMatrix<Scalar> d(static_cast<int>(f.size()), m, m, f.front().order());
  for (std::size_t i = 0; i < f.size(); ++i)
    for (int j = 0; j < m; ++j) d(static_cast<int>(i), j) = jet_partial(f[i], j);
  return d;
}

template <typename Scalar>
JetMatrix<Scalar> jet_compose(const JetMatrix<Scalar>& a, const JetVector<Scalar>& inner) {
  const auto& ref = inner.front();
  JetMatrix<Scalar> out(a.rows(), a.cols(), ref.num_vars(), ref.order());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = jet_compose(a(i, j), inner);
  return out;
}

/// Inverse of a square jet matrix with invertible constant part, via the finite Neumann series
/// sum_k (-A0^{-1} A1)^k A0^{-1}.
template <typename Scalar>
JetMatrix<Scalar> jet_inverse(const JetMatrix<Scalar>& a, Scalar cond_cap = Scalar(1e12)) {
  if (a.rows() != a.cols()) throw StructuralError("jet inverse needs a square matrix");
  const int nv = a(0, 0).num_vars();
  const int order = a(0, 0).order();
  const Matrix<Scalar> a0 = a.constant_part();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(a0);
  const auto& s = svd.singularValues();
  if (s(0) == Scalar(0) || s(s.size() - 1) < s(0) / cond_cap)
    throw PreconditionError("jet inverse: constant part is singular or ill-conditioned");
  const Matrix<Scalar> a0inv = a0.inverse();
  JetMatrix<Scalar> a1 = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) a1(i, j) = a(i, j).without_constant();
  const JetMatrix<Scalar> step = JetMatrix<Scalar>::constant(Matrix<Scalar>(-a0inv), nv, order) * a1;
  JetMatrix<Scalar> term = JetMatrix<Scalar>::constant(a0inv, nv, order);
  JetMatrix<Scalar> sum = term;
  for (int k = 1; k <= order; ++k) {
    term = step * term;
    sum = sum + term;
  }
  return sum;
}

}  // namespace fsm

#endif
