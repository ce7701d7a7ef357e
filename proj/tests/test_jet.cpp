#include <doctest.h>

#include <map>

#include "fastslow/jet.hpp"
#include "fastslow/time_polynomial.hpp"
#include "support.hpp"

using namespace fsm;
using fsm::testing::poly;
using fsm::testing::Rng;

namespace {

// Independent dense product: every exponent pair, no ordering assumptions.
std::map<std::vector<int>, double> dense_product(const Jetd& a, const Jetd& b, int order) {
  std::map<std::vector<int>, double> out;
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) {
      std::vector<int> e(static_cast<std::size_t>(a.num_vars()));
      int deg = 0;
      for (int i = 0; i < a.num_vars(); ++i) deg += (e[static_cast<std::size_t>(i)] = ma[i] + mb[i]);
      if (deg <= order) out[e] += ca * cb;
    }
  return out;
}

// Horner evaluation in the first variable with recursively evaluated coefficients.
double horner(const Jetd& a, const std::vector<double>& x, int var = 0) {
  if (var == a.num_vars()) return a.constant_term();
  std::map<int, Jetd> slices;
  for (const auto& [m, c] : a.terms()) {
    MultiIndex rest = m;
    rest.set(var, 0);
    auto [it, ins] = slices.try_emplace(m[var], Jetd(a.num_vars(), a.order()));
    it->second.add_to_coeff(rest, c);
  }
  if (slices.empty()) return 0.0;
  double acc = 0.0;
  for (int e = slices.rbegin()->first; e >= 0; --e) {
    acc *= x[static_cast<std::size_t>(var)];
    auto it = slices.find(e);
    if (it != slices.end()) acc += horner(it->second, x, var + 1);
  }
  return acc;
}

double max_diff(const Jetd& a, const Jetd& b) { return max_coeff_diff(JetVectord{a}, JetVectord{b}); }

}  // namespace

TEST_CASE("multi-index ordering is graded lexicographic") {
  const MultiIndex one{0, 0}, x{1, 0}, y{0, 1}, xx{2, 0}, xy{1, 1}, yy{0, 2};
  CHECK(one < x);
  CHECK(x < y);
  CHECK(y < xx);
  CHECK(xx < xy);
  CHECK(xy < yy);
  CHECK(xy.degree() == 2);
  CHECK((x + y) == xy);
  CHECK_THROWS_AS(MultiIndex({1, -1}), StructuralError);
}

TEST_CASE("homogeneous monomial counts are binomial") {
  CHECK(homogeneous_monomials(3, 4).size() == 15);
  CHECK(homogeneous_monomials(4, 3).size() == 20);
  CHECK(monomials_up_to(2, 3).size() == 10);
  const auto h = homogeneous_monomials(2, 2);
  CHECK(std::is_sorted(h.begin(), h.end()));
}

TEST_CASE("jet_mul examples") {
  SUBCASE("(1+x)(1-x) = 1 - x^2") {
    const Jetd a = poly(1, 2, {{{0}, 1}, {{1}, 1}});
    const Jetd b = poly(1, 2, {{{0}, 1}, {{1}, -1}});
    CHECK(jet_mul(a, b) == poly(1, 2, {{{0}, 1}, {{2}, -1}}));
  }
  SUBCASE("product with zero is zero") {
    const Jetd a = poly(2, 3, {{{1, 2}, 3.5}, {{0, 0}, 1}});
    CHECK(jet_mul(a, Jetd(2, 3)).is_zero());
  }
  SUBCASE("(x+y)(x-y) = x^2 - y^2") {
    const Jetd a = poly(2, 2, {{{1, 0}, 1}, {{0, 1}, 1}});
    const Jetd b = poly(2, 2, {{{1, 0}, 1}, {{0, 1}, -1}});
    const Jetd p = jet_mul(a, b);
    CHECK(p == poly(2, 2, {{{2, 0}, 1}, {{0, 2}, -1}}));
    CHECK(p.coeff(MultiIndex{1, 1}) == 0.0);
    CHECK(p.size() == 2);  // the cancelled xy term is not stored
  }
  SUBCASE("mismatched order or arity") {
    CHECK_THROWS_AS(jet_mul(Jetd(2, 3), Jetd(2, 4)), StructuralError);
    CHECK_THROWS_AS(jet_mul(Jetd(2, 3), Jetd(3, 3)), StructuralError);
  }
  SUBCASE("truncation drops degrees above the order") {
    const Jetd x = Jetd::variable(1, 3, 0);
    CHECK((x * x * x * x).is_zero());
  }
}

TEST_CASE("jet_mul agrees with a dense convolution") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = rng.integer(1, 4), r = rng.integer(1, 5);
    const Jetd a = rng.jet(m, r, 0, r), b = rng.jet(m, r, 0, r);
    const Jetd p = jet_mul(a, b);
    const auto ref = dense_product(a, b, r);
    for (const auto& [e, c] : ref) CHECK(p.coeff(MultiIndex(std::span<const int>(e))) == doctest::Approx(c).epsilon(1e-14));
    for (const auto& [mi, c] : p.terms()) CHECK(c != 0.0);
  }
}

TEST_CASE("jet_compose examples") {
  SUBCASE("u^2 composed with x + y") {
    const Jetd outer = poly(1, 2, {{{2}, 1}});
    const JetVectord inner{poly(2, 2, {{{1, 0}, 1}, {{0, 1}, 1}})};
    CHECK(jet_compose(outer, inner) == poly(2, 2, {{{2, 0}, 1}, {{1, 1}, 2}, {{0, 2}, 1}}));
  }
  SUBCASE("identity inner leaves the jet unchanged") {
    Rng rng(3);
    const Jetd a = rng.jet(3, 4, 0, 4);
    CHECK(jet_compose(a, identity_jets<double>(3, 4)) == a);
  }
  SUBCASE("(1+u+u^2) composed with x + x^2 at order 3") {
    const Jetd outer = poly(1, 3, {{{0}, 1}, {{1}, 1}, {{2}, 1}});
    const JetVectord inner{poly(1, 3, {{{1}, 1}, {{2}, 1}})};
    CHECK(jet_compose(outer, inner) == poly(1, 3, {{{0}, 1}, {{1}, 1}, {{2}, 2}, {{3}, 2}}));
  }
  SUBCASE("nonzero inner constant is rejected") {
    const JetVectord inner{poly(1, 3, {{{0}, 0.5}, {{1}, 1}})};
    CHECK_THROWS_AS(jet_compose(poly(1, 3, {{{2}, 1}}), inner), StructuralError);
  }
  SUBCASE("arity mismatch is rejected") {
    CHECK_THROWS_AS(jet_compose(poly(2, 3, {{{1, 1}, 1}}), identity_jets<double>(3, 3)), StructuralError);
  }
}

TEST_CASE("jet_partial examples") {
  CHECK(jet_partial(poly(2, 4, {{{2, 1}, 1}}), 0) == poly(2, 4, {{{1, 1}, 2}}));
  CHECK(jet_partial(Jetd::constant(2, 4, 7.0), 1).is_zero());
  CHECK(jet_partial(poly(2, 4, {{{3, 0}, 1}, {{1, 2}, 1}}), 1) == poly(2, 4, {{{1, 1}, 2}}));
  const Jetd d = jet_partial(poly(2, 4, {{{3, 0}, 1}}), 0);
  CHECK(d.reliable_order() == 3);
  CHECK(jet_partial(d, 0).reliable_order() == 2);
}

TEST_CASE("ring axioms hold to 1e-12") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = rng.integer(1, 4), r = rng.integer(2, 5);
    const Jetd a = rng.jet(m, r, 0, r), b = rng.jet(m, r, 0, r), c = rng.jet(m, r, 0, r);
    CHECK(max_diff(a * b, b * a) <= 1e-12);
    CHECK(max_diff((a * b) * c, a * (b * c)) <= 1e-12);
    CHECK(max_diff(a * (b + c), a * b + a * c) <= 1e-12);
    CHECK(max_diff(a + b, b + a) == 0.0);
    CHECK(max_diff(a * Jetd::constant(m, r, 1.0), a) == 0.0);
  }
}

TEST_CASE("composition is associative") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = rng.integer(1, 3), r = rng.integer(2, 4);
    const Jetd a = rng.jet(m, r, 0, r);
    JetVectord b, c;
    for (int i = 0; i < m; ++i) b.push_back(rng.jet(m, r, 1, r));
    for (int i = 0; i < m; ++i) c.push_back(rng.jet(m, r, 1, r));
    CHECK(max_diff(jet_compose(jet_compose(a, b), c), jet_compose(a, jet_compose(b, c))) <= 1e-12);
  }
}

TEST_CASE("Leibniz rule") {
  Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = rng.integer(1, 4), r = rng.integer(2, 5), v = rng.integer(0, m - 1);
    const Jetd a = rng.jet(m, r, 0, r), b = rng.jet(m, r, 0, r);
    const Jetd lhs = jet_partial(a * b, v);
    const Jetd rhs = jet_partial(a, v) * b + a * jet_partial(b, v);
    // Agreement is exact below the order; the top degree of the right side carries truncated terms.
    CHECK(max_coeff_diff(JetVectord{lhs}, JetVectord{rhs}, 0, r - 1) <= 1e-12);
  }
}

TEST_CASE("evaluation matches Horner") {
  Rng rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = rng.integer(1, 4), r = rng.integer(1, 6);
    const Jetd a = rng.jet(m, r, 0, r);
    std::vector<double> x(static_cast<std::size_t>(m));
    for (auto& xi : x) xi = rng.uniform(-0.9, 0.9);
    CHECK(std::abs(a.evaluate(std::span<const double>(x)) - horner(a, x)) <= 1e-13);
  }
}

TEST_CASE("translation re-expands the polynomial exactly") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = rng.integer(1, 3), r = rng.integer(2, 5);
    const Jetd a = rng.jet(m, r, 0, r);
    Eigen::VectorXd c = rng.vector(m, 0.5);
    const Jetd t = jet_translate(a, c);
    for (int s = 0; s < 5; ++s) {
      const Eigen::VectorXd x = rng.vector(m, 0.5);
      CHECK(t.evaluate(x) == doctest::Approx(a.evaluate(Eigen::VectorXd(x + c))).epsilon(1e-12));
    }
  }
}

TEST_CASE("lift, restriction and division by a variable") {
  const Jetd a = poly(2, 3, {{{1, 0}, 2}, {{1, 1}, 3}, {{0, 2}, -1}});
  const Jetd l = jet_lift(a, 3);
  CHECK(l.num_vars() == 3);
  CHECK(l.coeff(MultiIndex{1, 1, 0}) == 3.0);
  CHECK(jet_restrict_zero(a, 1) == poly(1, 3, {{{1}, 2}}));
  double dropped = 0.0;
  const Jetd q = jet_divide_by_var(a, 1, &dropped);
  CHECK(q == poly(2, 3, {{{1, 0}, 3}, {{0, 1}, -1}}));
  CHECK(dropped == 2.0);
}

TEST_CASE("jet matrix inverse") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.integer(1, 3), m = 2, r = 4;
    JetMatrix<double> a(n, n, m, r);
    const Eigen::MatrixXd a0 = rng.well_conditioned(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = Jetd::constant(m, r, a0(i, j)) + rng.jet(m, r, 1, r);
    const JetMatrix<double> prod = a * jet_inverse(a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        CHECK(max_diff(prod(i, j), Jetd::constant(m, r, i == j ? 1.0 : 0.0)) <= 1e-11);
  }
}

TEST_CASE("time polynomials integrate exactly") {
  // x(t) = x + t x^2 integrated: t x + t^2/2 x^2.
  const Jetd x = Jetd::variable(1, 3, 0);
  const TimePolynomial<double> p(std::vector<Jetd>{x, x * x});
  const auto q = p.integral();
  CHECK(q.time_degree() == 2);
  CHECK(q[1] == x);
  CHECK(q[2] == 0.5 * (x * x));
  CHECK(q.at(2.0) == 2.0 * x + 2.0 * (x * x));
}
