#include <doctest.h>

#include <algorithm>

#include "fastslow/catalog.hpp"
#include "fastslow/mapspec_io.hpp"
#include "fastslow/model.hpp"
#include "support.hpp"

using namespace fsm;
using fsm::testing::Rng;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// N = (1, 0), f = x, G = (0, 1).
FastSlowMapSpec linear_fast_spec() {
  return parse_mapspec(R"(dims 2 1
order 3
base 0 0
[N 1 1]
0 0 : 1
[N 2 1]
0 0 : 0
[f 1]
1 0 : 1
[G 1]
0 0 0 : 0
[G 2]
0 0 0 : 1
)");
}

}  // namespace

TEST_CASE("nontrivial multipliers of the parabola map") {
  const auto spec = catalog::fold();
  // f = x^2 - y, N = (1, 0): mu = 1 + 2x.
  CHECK(nontrivial_multipliers(spec, vec({0.1, 0.01})).values(0).real() == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(nontrivial_multipliers(spec, vec({0.0, 0.0})).values(0).real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(nontrivial_multipliers(catalog::superstable(), vec({0.0, 0.3})).values(0)) <= 1e-14);
  CHECK_THROWS_AS(nontrivial_multipliers(spec, vec({2.0, 0.0})), DomainError);
}

TEST_CASE("classify_point examples") {
  const auto spec = catalog::fold();
  SUBCASE("attracting branch") {
    const auto c = classify_point(spec, vec({-0.2, 0.04}));
    CHECK(c.tag == PointClass::NH_attracting);
    CHECK(c.multipliers.values(0).real() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK_FALSE(c.superstable);
    CHECK_FALSE(c.unipotent_index.has_value());
  }
  SUBCASE("repelling branch") {
    CHECK(classify_point(spec, vec({0.3, 0.09})).tag == PointClass::NH_repelling);
  }
  SUBCASE("fold point") {
    const auto c = classify_point(spec, vec({0.0, 0.0}));
    CHECK(c.tag == PointClass::FoldContact);
    REQUIRE(c.unipotent_index.has_value());
    CHECK(*c.unipotent_index == 1);
  }
  SUBCASE("superstable line") {
    const auto c = classify_point(catalog::superstable(), vec({0.0, 0.0}));
    CHECK(c.tag == PointClass::NH_attracting);
    CHECK(c.superstable);
  }
  SUBCASE("flip point") {
    // mu = 1 + 2x = -1 at x = -1.
    Tolerances tol;
    tol.trust_radius = 2.0;
    CHECK(classify_point(spec, vec({-1.0, 1.0}), tol).tag == PointClass::Flip);
  }
  SUBCASE("off the manifold") {
    CHECK_THROWS_AS(classify_point(spec, vec({0.1, 0.0})), PreconditionError);
  }
}

TEST_CASE("classification of higher-dimensional multiplier patterns") {
  // N = I, f = A z: Df N = A, multipliers are eigenvalues of I + A.
  auto make = [](const MatrixXd& A) {
    FastSlowMapSpec s;
    s.n = 2;
    s.k = 0;
    s.order = 3;
    s.base_point = VectorXd::Zero(2);
    s.N.assign(2, {});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.N[static_cast<std::size_t>(i)].push_back(Jetd::constant(2, 3, i == j ? 1.0 : 0.0));
    for (int i = 0; i < 2; ++i) {
      Jetd fi(2, 3);
      for (int j = 0; j < 2; ++j) fi.set_coeff(MultiIndex::unit(2, j), A(i, j));
      s.f.push_back(fi);
      s.G.push_back(Jetd(3, 3));
    }
    s.validate();
    return s;
  };
  const VectorXd o = VectorXd::Zero(2);
  const double th = 0.7;
  MatrixXd rot(2, 2);
  rot << std::cos(th) - 1.0, -std::sin(th), std::sin(th), std::cos(th) - 1.0;
  CHECK(classify_point(make(rot), o).tag == PointClass::NeimarkSacker);
  MatrixXd saddle(2, 2);
  saddle << -0.5, 0.0, 0.0, 1.0;
  CHECK(classify_point(make(saddle), o).tag == PointClass::NH_saddle);
  MatrixXd jordan(2, 2);
  jordan << 0.0, 1.0, 0.0, 0.0;
  const auto c = classify_point(make(jordan), o);
  CHECK(c.tag == PointClass::MixedNonNH);
  REQUIRE(c.unipotent_index.has_value());
  CHECK(*c.unipotent_index == 2);
  MatrixXd mixed(2, 2);
  mixed << 0.0, 0.0, 0.0, -2.0;  // multipliers 1 and -1
  CHECK(classify_point(make(mixed), o).tag == PointClass::MixedNonNH);
}

TEST_CASE("reduced_data examples") {
  SUBCASE("linear fast variable") {
    const auto rd = reduced_data(linear_fast_spec(), vec({0.0, 0.0}));
    REQUIRE(rd.valid);
    MatrixXd expected(2, 2);
    expected << 0, 0, 0, 1;
    CHECK((rd.projector - expected).norm() <= 1e-15);
  }
  SUBCASE("superstable line") {
    for (double y : {-0.5, 0.0, 0.7}) {
      const auto rd = reduced_data(catalog::superstable(), vec({0.0, y}));
      REQUIRE(rd.valid);
      MatrixXd expected(2, 2);
      expected << 0, 0, 0, 1;
      CHECK((rd.projector - expected).norm() <= 1e-15);
      CHECK((rd.reduced_field - vec({0.0, 1.0})).norm() <= 1e-15);
    }
  }
  SUBCASE("fold point is singular") {
    const auto rd = reduced_data(catalog::fold(), vec({0.0, 0.0}));
    CHECK_FALSE(rd.valid);
    CHECK(rd.projector.norm() == 0.0);
  }
}

TEST_CASE("reduced_map_step examples") {
  CHECK((reduced_map_step(catalog::superstable(), vec({0.0, 0.5}), 0.01) - vec({0.0, 0.51})).norm() <= 1e-15);
  const VectorXd z = vec({-0.3, 0.09});
  CHECK(reduced_map_step(catalog::fold(), z, 0.0) == z);
  const VectorXd next = reduced_map_step(catalog::fold(), z, 0.1);
  CHECK(next(1) == doctest::Approx(0.09 - 0.1).epsilon(1e-14));
  CHECK_THROWS_AS(reduced_map_step(catalog::fold(), vec({0.0, 0.0}), 0.1), PreconditionError);
}

TEST_CASE("critical_manifold_solve examples") {
  const auto fold = catalog::fold();
  const auto p = critical_manifold_solve(fold, vec({0.5, 0.2}));
  CHECK(std::abs(p.point(0) * p.point(0) - p.point(1)) <= 1e-12);
  const auto q = critical_manifold_solve(fold, vec({-0.2, 0.04}));
  CHECK(q.iterations == 0);
  CHECK(q.point == vec({-0.2, 0.04}));
  const auto r = critical_manifold_solve(linear_fast_spec(), vec({0.3, 1.0}));
  CHECK((r.point - vec({0.0, 1.0})).norm() <= 1e-15);
}

TEST_CASE("nilpotency_index examples") {
  MatrixXd j(2, 2);
  j << 0, 1, 0, 0;
  CHECK(nilpotency_index(j) == 2);
  CHECK_FALSE(nilpotency_index(MatrixXd::Identity(3, 3)).has_value());
  CHECK(nilpotency_index(MatrixXd::Zero(1, 1)) == 1);
  const MatrixXd dfn = classify_point(catalog::fold(), vec({0.0, 0.0})).multipliers.DfN;
  CHECK(nilpotency_index(dfn) == 1);
}

TEST_CASE("index of N Df exceeds index of Df N by one") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = fsm::testing::nilpotent_pair(rng);
    const MatrixXd ndf = c.N * c.Df;
    const auto l = nilpotency_index(c.Df * c.N, 1e-10);
    REQUIRE(l.has_value());
    CHECK(*l == c.index);
    CHECK(nilpotency_index(ndf, 1e-10) == *l + 1);
    MatrixXd pw = MatrixXd::Identity(ndf.rows(), ndf.cols());
    for (int i = 0; i < *l; ++i) pw = pw * ndf;
    CHECK(pw.norm() > 1e-4);
    CHECK((pw * ndf).norm() <= 1e-10);
  }
}

TEST_CASE("projector laws and the multiplier correspondence") {
  const auto spec = catalog::contact3d();
  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    VectorXd guess = rng.vector(3, 0.4);
    ManifoldPoint p;
    try {
      p = critical_manifold_solve(spec, guess);
    } catch (const NumericalError&) {
      continue;
    }
    if ((p.point - spec.base_point).norm() > 0.8) continue;
    const auto rd = reduced_data(spec, p.point);
    if (!rd.valid) continue;
    ++checked;
    const MatrixXd& P = rd.projector;
    CHECK((P * P - P).norm() <= 1e-9);
    CHECK((P * spec.N_at(p.point)).norm() <= 1e-9);
    const auto mu = nontrivial_multipliers(spec, p.point);
    Eigen::EigenSolver<MatrixXd> es(mu.DfN);
    std::vector<std::complex<double>> a, b;
    for (int i = 0; i < mu.values.size(); ++i) {
      a.push_back(mu.values(i));
      b.push_back(1.0 + es.eigenvalues()(i));
    }
    auto key = [](auto x, auto y) { return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag(); };
    std::sort(a.begin(), a.end(), key);
    std::sort(b.begin(), b.end(), key);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
  }
  CHECK(checked >= 10);
}

TEST_CASE("reduced map fixes exactly the zeros of the reduced field") {
  // On the superstable line the reduced field is (0, 1): never a fixed point.
  const auto s = catalog::superstable();
  for (double eps : {1e-3, 0.1})
    CHECK((reduced_map_step(s, vec({0.0, 0.2}), eps) - vec({0.0, 0.2})).norm() > 0.0);
  // x -> x - x/2 + ..., y -> y + eps*y: reduced field vanishes at y = 0 only.
  const auto spec = parse_mapspec(R"(dims 2 1
order 3
base 0 0
[N 1 1]
0 0 : 1
[N 2 1]
0 0 : 0
[f 1]
1 0 : -0.5
[G 1]
0 0 0 : 0
[G 2]
0 1 0 : 1
)");
  for (double y : {-0.3, 0.0, 0.4}) {
    const bool fixed_field = reduced_data(spec, vec({0.0, y})).reduced_field.norm() <= 1e-14;
    bool fixed_map = true;
    for (double eps : {1e-3, 1e-2, 0.1}) fixed_map = fixed_map && (reduced_map_step(spec, vec({0.0, y}), eps) - vec({0.0, y})).norm() <= 1e-14;
    CHECK(fixed_field == fixed_map);
    CHECK(fixed_field == (y == 0.0));
  }
}
