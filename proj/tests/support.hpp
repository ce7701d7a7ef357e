#ifndef FASTSLOW_TESTS_SUPPORT_HPP
#define FASTSLOW_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "fastslow/jet.hpp"
#include "fastslow/model.hpp"

namespace fsm::testing {

using Term = std::pair<std::vector<int>, double>;

inline Jetd poly(int num_vars, int order, const std::vector<Term>& terms) {
  Jetd j(num_vars, order);
  for (const auto& [e, c] : terms) j.add_to_coeff(MultiIndex(std::span<const int>(e)), c);
  return j;
}

/// Deterministic generator for hand-rolled property tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  /// Random jet with coefficients in [-scale, scale] on degrees [lo, hi]; each monomial kept
  /// with probability `density`.
  Jetd jet(int num_vars, int order, int lo, int hi, double scale = 1.0, double density = 0.7) {
    Jetd j(num_vars, order);
    for (int d = lo; d <= hi; ++d)
      for (const auto& m : homogeneous_monomials(num_vars, d))
        if (coin(density)) j.set_coeff(m, uniform(-scale, scale));
    return j;
  }

  Eigen::VectorXd vector(int n, double radius) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(-1.0, 1.0);
    return radius * uniform(0.1, 1.0) * v.normalized();
  }

  Eigen::MatrixXd matrix(int r, int c, double scale = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = uniform(-scale, scale);
    return m;
  }

  /// Random matrix with singular values in [0.5, 2], hence well conditioned.
  Eigen::MatrixXd well_conditioned(int n) {
    Eigen::MatrixXd q1 = Eigen::HouseholderQR<Eigen::MatrixXd>(matrix(n, n)).householderQ();
    Eigen::MatrixXd q2 = Eigen::HouseholderQR<Eigen::MatrixXd>(matrix(n, n)).householderQ();
    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) s(i) = uniform(0.5, 2.0);
    return q1 * s.asDiagonal() * q2;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Nilpotent matrix with the given Jordan block sizes, conjugated by a well-conditioned matrix.
inline Eigen::MatrixXd nilpotent_matrix(Rng& rng, const std::vector<int>& blocks, bool conjugate = true) {
  int n = 0;
  for (int b : blocks) n += b;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  int off = 0;
  for (int b : blocks) {
    for (int i = 0; i + 1 < b; ++i) j(off + i, off + i + 1) = rng.uniform(0.5, 1.5);
    off += b;
  }
  if (!conjugate) return j;
  const Eigen::MatrixXd s = rng.well_conditioned(n);
  return s * j * s.inverse();
}

/// Random field in m variables: nilpotent linear part with random Jordan structure, conjugated,
/// plus random terms of degrees 2..r.
inline JetVectord random_nilpotent_field(Rng& rng, int m, int r) {
  std::vector<int> blocks;
  for (int left = m; left > 0;) {
    const int b = rng.integer(1, left);
    blocks.push_back(b);
    left -= b;
  }
  JetVectord V = linear_jets(nilpotent_matrix(rng, blocks), r);
  for (auto& v : V) v += rng.jet(m, r, 2, r, 1.0, 0.6);
  return V;
}

/// Random (N, Df) with Df N nilpotent of index `index`, N of full column rank and Df of full
/// row rank. Jordan blocks of Df N never outnumber the k complementary directions, which keeps
/// Df of full row rank.
struct NilpotentPair {
  Eigen::MatrixXd N;
  Eigen::MatrixXd Df;
  int index = 0;
};

inline NilpotentPair nilpotent_pair(Rng& rng) {
  for (;;) {
    const int p = rng.integer(1, 3);
    std::vector<int> blocks;
    for (int left = p; left > 0;) {
      const int b = rng.integer(1, left);
      blocks.push_back(b);
      left -= b;
    }
    const int k = rng.integer(static_cast<int>(blocks.size()), 3);
    const int n = p + k;
    const Eigen::MatrixXd D = nilpotent_matrix(rng, blocks);
    const Eigen::MatrixXd N = rng.matrix(n, p);
    const Eigen::MatrixXd Npinv = (N.transpose() * N).inverse() * N.transpose();
    const Eigen::MatrixXd W = rng.matrix(p, n);
    const Eigen::MatrixXd Df = D * Npinv + W * (Eigen::MatrixXd::Identity(n, n) - N * Npinv);
    Eigen::JacobiSVD<Eigen::MatrixXd> sn(N), sd(Df);
    if (sn.singularValues()(p - 1) < 0.2 || sd.singularValues()(p - 1) < 0.2) continue;
    return {N, Df, *std::max_element(blocks.begin(), blocks.end())};
  }
}


/// Random map with a regular contact point at the origin: n = 3, k = 1, Df N(0) with
/// eigenvalues 0 and lambda2 in [-1.6, -0.4], D_y f(0) regular, quadratic and cubic terms random.
/// The contact verdict itself is left to the caller.
inline FastSlowMapSpec random_contact_spec(Rng& rng, int order = 4) {
  for (;;) {
    const int n = 3, p = 2;
    const Eigen::MatrixXd N0 = rng.matrix(n, p);
    const Eigen::MatrixXd s = rng.well_conditioned(p);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, p);
    D(1, 1) = rng.uniform(-1.6, -0.4);
    const Eigen::MatrixXd M = s * D * s.inverse();
    const Eigen::MatrixXd Npinv = (N0.transpose() * N0).inverse() * N0.transpose();
    const Eigen::MatrixXd Df0 = M * Npinv + rng.matrix(p, n) * (Eigen::MatrixXd::Identity(n, n) - N0 * Npinv);
    Eigen::JacobiSVD<Eigen::MatrixXd> sn(N0), sy(Eigen::MatrixXd(Df0.rightCols(p)));
    if (sn.singularValues()(p - 1) < 0.3 || sy.singularValues()(p - 1) < 0.3) continue;

    FastSlowMapSpec spec;
    spec.name = "random_contact";
    spec.n = n;
    spec.k = 1;
    spec.order = order;
    spec.base_point = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      JetVectord row;
      for (int j = 0; j < p; ++j) {
        Jetd e = rng.jet(n, order, 1, 2, 0.3, 0.5);
        e.set_coeff(MultiIndex(n), N0(i, j));
        row.push_back(std::move(e));
      }
      spec.N.push_back(std::move(row));
    }
    for (int i = 0; i < p; ++i) {
      Jetd e = rng.jet(n, order, 2, 3, 1.0, 0.6);
      for (int j = 0; j < n; ++j) e.set_coeff(MultiIndex::unit(n, j), Df0(i, j));
      spec.f.push_back(std::move(e));
    }
    for (int i = 0; i < n; ++i) {
      Jetd e = rng.jet(n + 1, order, 1, 2, 0.5, 0.5);
      e.set_coeff(MultiIndex(n + 1), rng.uniform(-1.0, 1.0));
      spec.G.push_back(std::move(e));
    }
    spec.validate();
    return spec;
  }
}

}  // namespace fsm::testing

#endif
