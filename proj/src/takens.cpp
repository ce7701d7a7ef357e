#include "fastslow/takens.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "fastslow/time_polynomial.hpp"

namespace fsm {

namespace {

using TimePoly = TimePolynomial<double>;
using TimePolyVector = TimePolynomialVector<double>;

/// Lambda^0 .. Lambda^{l-1} for a nilpotent Lambda of index l.
std::vector<MatrixXd> nilpotent_powers(const MatrixXd& lambda, const Tolerances& tol) {
  const auto idx = nilpotency_index(lambda, tol.nilp);
  if (!idx)
    throw UnsupportedCase(
        "linear part is not nilpotent (map linear part not unipotent); inspect it with jordan_chevalley_split");
  std::vector<MatrixXd> pw{MatrixXd::Identity(lambda.rows(), lambda.cols())};
  for (int k = 1; k < *idx; ++k) pw.push_back(pw.back() * lambda);
  return pw;
}

/// e^{Lambda t} x as a time polynomial of linear jets.
TimePolyVector linear_flow(const std::vector<MatrixXd>& pw, int order) {
  const int m = static_cast<int>(pw.front().rows());
  TimePolyVector out;
  for (int i = 0; i < m; ++i) {
    std::vector<Jetd> coeffs;
    double fact = 1.0;
    for (std::size_t k = 0; k < pw.size(); ++k) {
      if (k) fact *= static_cast<double>(k);
      Jetd c(m, order);
      for (int j = 0; j < m; ++j) c.set_coeff(MultiIndex::unit(m, j), pw[k](i, j) / fact);
      coeffs.push_back(std::move(c));
    }
    TimePoly p(std::move(coeffs));
    p.trim();
    out.push_back(std::move(p));
  }
  return out;
}

/// int_0^t e^{Lambda (t - s)} g(s) ds, exact: t^{k+j+1} Lambda^k g_j j! / (k+j+1)!.
TimePolyVector variation_integral(const std::vector<MatrixXd>& pw, const TimePolyVector& g, int num_vars, int order) {
  const int m = static_cast<int>(g.size());
  int jmax = 0;
  for (const auto& gi : g) jmax = std::max(jmax, gi.time_degree());
  const int top = jmax + static_cast<int>(pw.size());
  const Jetd zero(num_vars, order);
  std::vector<std::vector<Jetd>> acc(static_cast<std::size_t>(m), std::vector<Jetd>(static_cast<std::size_t>(top + 1), zero));
  for (int j = 0; j <= jmax; ++j) {
    JetVectord gj;
    bool any = false;
    for (const auto& gi : g) {
      gj.push_back(j <= gi.time_degree() ? gi[j] : zero);
      any = any || !gj.back().is_zero();
    }
    if (!any) continue;
    for (std::size_t k = 0; k < pw.size(); ++k) {
      double w = 1.0;
      for (int q = j + 1; q <= j + static_cast<int>(k) + 1; ++q) w /= static_cast<double>(q);
      const JetVectord term = apply_matrix(pw[k], gj);
      const auto slot = static_cast<std::size_t>(j + static_cast<int>(k) + 1);
      for (int i = 0; i < m; ++i) acc[static_cast<std::size_t>(i)][slot] += w * term[static_cast<std::size_t>(i)];
    }
  }
  TimePolyVector out;
  for (auto& a : acc) {
    TimePoly p(std::move(a));
    p.trim();
    out.push_back(std::move(p));
  }
  return out;
}

JetVectord at_time(const TimePolyVector& x, double t) {
  JetVectord out;
  for (const auto& xi : x) out.push_back(xi.at(t));
  return out;
}

JetVectord strip_constants(const JetVectord& v, double tol, const char* what) {
  JetVectord out;
  for (const auto& j : v) {
    if (std::abs(j.constant_term()) > tol) throw StructuralError(std::string(what) + " must vanish at the origin");
    out.push_back(j.without_constant());
  }
  return out;
}

void check_square(const JetVectord& v, const char* what) {
  if (v.empty()) throw StructuralError(std::string(what) + " is empty");
  const int m = v.front().num_vars();
  if (static_cast<int>(v.size()) != m) throw StructuralError(std::string(what) + " must have one component per variable");
  check_conformant(v, m, v.front().order());
}

double max_abs(const JetVectord& v) {
  double s = 0.0;
  for (const auto& j : v) s = std::max(s, j.max_abs_coeff());
  return s;
}

}  // namespace

LinearPartDecomposition jordan_chevalley_split(const MatrixXd& A, const Tolerances& tol) {
  if (A.rows() != A.cols() || A.rows() == 0) throw StructuralError("linear part must be a nonempty square matrix");
  if (A.rows() > 16) throw StructuralError("linear part exceeds the supported dimension");
  const int m = static_cast<int>(A.rows());
  LinearPartDecomposition out;
  out.A = A;
  const MatrixXd I = MatrixXd::Identity(m, m);
  if (auto idx = nilpotency_index(A - I, tol.nilp)) {
    out.B = I;
    out.M = A - I;
    out.is_unipotent = true;
    out.nilpotent_index_of_M = idx;
  } else {
    Eigen::EigenSolver<MatrixXd> es(A, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    const VectorXcd ev = es.eigenvalues();
    const double scale = std::max(1.0, A.norm());
    // Eigenvalues of a defective block split by O(eps^{1/size}); cluster generously.
    const double cluster_tol = 1e-5 * scale;
    std::vector<std::complex<double>> centers;
    std::vector<int> mult;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      bool placed = false;
      for (std::size_t c = 0; c < centers.size() && !placed; ++c) {
        if (std::abs(ev(i) - centers[c]) <= cluster_tol) {
          centers[c] = (centers[c] * static_cast<double>(mult[c]) + ev(i)) / static_cast<double>(mult[c] + 1);
          ++mult[c];
          placed = true;
        }
      }
      if (!placed) {
        centers.push_back(ev(i));
        mult.push_back(1);
      }
    }
    for (const auto& c : centers)
      if (std::abs(c) <= tol.zero * scale) throw PreconditionError("linear part is singular; the map is not a diffeomorphism");
    MatrixXcd basis(m, m);
    VectorXcd diag(m);
    const MatrixXcd Ac = A.cast<std::complex<double>>();
    const MatrixXcd Ic = MatrixXcd::Identity(m, m);
    int col = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      MatrixXcd p = Ic;
      for (int e = 0; e < mult[c]; ++e) p = p * (Ac - centers[c] * Ic);
      Eigen::JacobiSVD<MatrixXcd> svd(p, Eigen::ComputeFullV);
      // Generalized eigenspace: right singular vectors of the smallest singular values.
      basis.middleCols(col, mult[c]) = svd.matrixV().rightCols(mult[c]);
      diag.segment(col, mult[c]).setConstant(centers[c]);
      col += mult[c];
    }
    Eigen::JacobiSVD<MatrixXcd> bsvd(basis);
    const auto& s = bsvd.singularValues();
    if (!(s(m - 1) > 0.0) || s(0) / s(m - 1) > tol.cond_cap)
      throw UnsupportedCase("defective eigenproblem beyond the conditioning cap; refusing to split");
    const MatrixXcd Bc = basis * diag.asDiagonal() * basis.inverse();
    if (Bc.imag().norm() > 1e-9 * scale) throw NumericalError("semisimple factor is not real");
    out.B = Bc.real();
    out.M = out.B.partialPivLu().solve(A) - I;
    out.nilpotent_index_of_M = nilpotency_index(out.M, 1e-8);
    if (!out.nilpotent_index_of_M) throw UnsupportedCase("could not isolate a nilpotent factor; refusing to split");
  }
  out.factor_residual = (A - out.B * (I + out.M)).norm();
  out.commute_residual = (out.B * out.M - out.M * out.B).norm();
  return out;
}

JetVectord flow_time1_jet(const JetVectord& V_in, int order, const Tolerances& tol) {
  check_square(V_in, "vector field");
  const int m = V_in.front().num_vars();
  const JetVectord V = strip_constants(with_order(V_in, order), 1e-12, "vector field");
  const MatrixXd lambda = linear_part(V, m);
  const auto pw = nilpotent_powers(lambda, tol);

  JetVectord nonlinear;
  for (const auto& v : V) {
    Jetd nl(m, order);
    for (const auto& [mi, c] : v.terms())
      if (mi.degree() >= 2) nl.set_coeff(mi, c);
    nonlinear.push_back(std::move(nl));
  }

  const TimePolyVector x1 = linear_flow(pw, order);
  TimePolyVector x = x1;
  bool has_nonlinear = false;
  for (const auto& nl : nonlinear) has_nonlinear = has_nonlinear || !nl.is_zero();
  if (has_nonlinear) {
    // Picard: each sweep fixes one more degree.
    for (int l = 2; l <= order; ++l) {
      const TimePolyVector g = compose_time(nonlinear, x);
      const TimePolyVector integral = variation_integral(pw, g, m, order);
      x = x1;
      for (int i = 0; i < m; ++i) x[static_cast<std::size_t>(i)] += integral[static_cast<std::size_t>(i)];
    }
  }
  JetVectord phi = at_time(x, 1.0);
  int reliable = order;
  for (const auto& v : V_in) reliable = std::min(reliable, v.reliable_order());
  for (auto& p : phi) p.set_reliable_order(reliable);
  return phi;
}

EmbeddingResult takens_embed_unipotent(const JetVectord& H_in, int order, const Tolerances& tol) {
  check_square(H_in, "map jet");
  const int m = H_in.front().num_vars();
  if (order < 1) throw StructuralError("embedding order must be positive");
  if (H_in.front().order() < order) throw StructuralError("map jet order is below the requested embedding order");
  const JetVectord H = strip_constants(with_order(H_in, order), 1e-10, "map jet");
  const MatrixXd A = linear_part(H, m);
  const MatrixXd shift = A - MatrixXd::Identity(m, m);
  const auto shift_pw = nilpotent_powers(shift, tol);
  // Linear part of V is log A = sum (-1)^{k+1} (A - I)^k / k, a finite sum; it equals A - I
  // exactly when (A - I)^2 = 0.
  MatrixXd lambda = MatrixXd::Zero(m, m);
  for (std::size_t k = 1; k < shift_pw.size(); ++k)
    lambda += ((k % 2) ? 1.0 : -1.0) / static_cast<double>(k) * shift_pw[k];
  const auto pw = nilpotent_powers(lambda, tol);

  EmbeddingResult out;
  out.V = linear_jets(lambda, order);
  const TimePolyVector x1 = linear_flow(pw, order);

  for (int l = 2; l <= order; ++l) {
    const std::vector<MultiIndex> basis = homogeneous_monomials(m, l);
    const int nb = static_cast<int>(basis.size());
    const int dim = m * nb;
    auto index_of = [&](const MultiIndex& mi) {
      return static_cast<int>(std::lower_bound(basis.begin(), basis.end(), mi) - basis.begin());
    };

    // Right-hand side: degree-l part of H minus what lower-degree terms already produce.
    const JetVectord phi = flow_time1_jet(out.V, l, tol);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < m; ++i) {
      for (const auto& [mi, c] : H[static_cast<std::size_t>(i)].terms())
        if (mi.degree() == l) rhs(i * nb + index_of(mi)) += c;
      for (const auto& [mi, c] : phi[static_cast<std::size_t>(i)].terms())
        if (mi.degree() == l) rhs(i * nb + index_of(mi)) -= c;
    }

    // Operator F -> int_0^1 e^{Lambda(1-s)} F(e^{Lambda s} x) ds on the degree-l basis.
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(dim, dim);
    const TimePoly one(Jetd::constant(m, order, 1.0));
    std::vector<std::vector<TimePoly>> powers(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      powers[static_cast<std::size_t>(i)].push_back(one);
      for (int e = 1; e <= l; ++e)
        powers[static_cast<std::size_t>(i)].push_back(powers[static_cast<std::size_t>(i)].back() * x1[static_cast<std::size_t>(i)]);
    }
    for (int a = 0; a < nb; ++a) {
      TimePoly mono = one;
      for (int i = 0; i < m; ++i)
        if (basis[static_cast<std::size_t>(a)][i]) mono = mono * powers[static_cast<std::size_t>(i)][static_cast<std::size_t>(basis[static_cast<std::size_t>(a)][i])];
      for (int c = 0; c < m; ++c) {
        TimePolyVector g(static_cast<std::size_t>(m), TimePoly(Jetd(m, order)));
        g[static_cast<std::size_t>(c)] = mono;
        const JetVectord img = at_time(variation_integral(pw, g, m, order), 1.0);
        for (int i = 0; i < m; ++i)
          for (const auto& [mi, coef] : img[static_cast<std::size_t>(i)].terms())
            if (mi.degree() == l) op(i * nb + index_of(mi), c * nb + a) += coef;
      }
    }

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(op);
    const double rc = lu.rcond();
    out.degree_conditions.push_back(rc);
    if (!(rc > 1.0 / tol.cond_cap))
      throw NumericalError("degree-" + std::to_string(l) + " matching operator is singular (rcond " + std::to_string(rc) + ")");
    const Eigen::VectorXd sol = lu.solve(rhs);
    for (int c = 0; c < m; ++c)
      for (int a = 0; a < nb; ++a) out.V[static_cast<std::size_t>(c)].set_coeff(basis[static_cast<std::size_t>(a)], sol(c * nb + a));
  }

  const JetVectord phi = flow_time1_jet(out.V, order, tol);
  const double threshold = 1e-9 * std::max(1.0, max_abs(H));
  out.matched_order = 0;
  for (int d = 0; d <= order; ++d) {
    if (max_coeff_diff(phi, H, d, d) > threshold) break;
    out.matched_order = d;
  }
  out.residual = max_coeff_diff(phi, H, 0, out.matched_order);
  int reliable = order;
  for (const auto& h : H_in) reliable = std::min(reliable, h.reliable_order());
  for (auto& v : out.V) v.set_reliable_order(reliable);
  return out;
}

JetVectord extended_map_jet(const FastSlowMapSpec& spec) {
  const int n = spec.n, p = spec.fast_dim(), r = spec.order;
  const Jetd eps = Jetd::variable(n + 1, r, n);
  JetVectord H;
  for (int i = 0; i < n; ++i) {
    Jetd h = Jetd::variable(n + 1, r, i);
    for (int j = 0; j < p; ++j)
      h += jet_lift(spec.N[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], n + 1) *
           jet_lift(spec.f[static_cast<std::size_t>(j)], n + 1);
    h += eps * spec.G[static_cast<std::size_t>(i)];
    H.push_back(std::move(h));
  }
  H.push_back(eps);
  return H;
}

JetMatrix<double> projector_jet(const FastSlowMapSpec& spec, const Tolerances& tol) {
  const int n = spec.n;
  const JetMatrix<double> N = spec.N_matrix();
  const JetMatrix<double> Df = jacobian(spec.f);
  const JetMatrix<double> inv = jet_inverse(Df * N, tol.cond_cap);
  return JetMatrix<double>::constant(MatrixXd::Identity(n, n), n, spec.order) - N * (inv * Df);
}

ReducedEmbeddingReport verify_reduced_embedding(const FastSlowMapSpec& spec, const VectorXd& z0, int order,
                                                const Tolerances& tol) {
  const SingularityClass cls = classify_point(spec, z0, tol);
  if (cls.tag != PointClass::NH_attracting && cls.tag != PointClass::NH_repelling && cls.tag != PointClass::NH_saddle)
    throw PreconditionError("point is not normally hyperbolic (" + to_string(cls.tag) + ")");
  const ReducedData rd = reduced_data(spec, z0, tol);
  if (!rd.valid) throw PreconditionError("reduced data undefined at the point");
  if (order > spec.order) throw StructuralError("requested order exceeds the spec's jet order");

  const FastSlowMapSpec local = spec.rebased(z0);
  const int n = spec.n, r = spec.order, m = n + 1;
  const JetMatrix<double> pi = projector_jet(local, tol);
  JetMatrix<double> pi_ext(n, n, m, r);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pi_ext(i, j) = jet_lift(pi(i, j), m);
  const Jetd eps = Jetd::variable(m, r, n);

  JetVectord G0;
  for (const auto& g : local.G) G0.push_back(jet_set_zero(g, n));
  const JetVectord PG = pi_ext.apply(local.G);
  const JetVectord PG0 = pi_ext.apply(G0);

  ReducedEmbeddingReport rep;
  rep.z0 = z0;
  rep.order = order;
  rep.reduced_field = rd.reduced_field;
  JetVectord field;
  for (int i = 0; i < n; ++i) {
    rep.slow_map.push_back(Jetd::variable(m, r, i) + eps * PG[static_cast<std::size_t>(i)]);
    field.push_back(eps * PG0[static_cast<std::size_t>(i)]);
  }
  rep.slow_map.push_back(eps);
  field.push_back(Jetd(m, r));
  rep.slow_map = with_order(rep.slow_map, order);
  field = with_order(field, order);

  rep.reduced_flow = flow_time1_jet(field, order, tol);
  rep.embedding = takens_embed_unipotent(rep.slow_map, order, tol);
  rep.linear_discrepancy = max_coeff_diff(rep.slow_map, rep.reduced_flow, 0, 1);

  auto low_eps_gap = [&](const JetVectord& a, const JetVectord& b, int degree) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (const auto& mi : homogeneous_monomials(m, degree))
        if (mi[n] <= 1) worst = std::max(worst, std::abs(a[i].coeff(mi) - b[i].coeff(mi)));
    return worst;
  };
  for (int l = 2; l <= order; ++l) {
    // Both the time-1 reduced flow and the generic embedding must agree with the map there.
    rep.low_eps_discrepancy.push_back(std::max(low_eps_gap(rep.slow_map, rep.reduced_flow, l),
                                               low_eps_gap(rep.embedding.V, field, l)));
  }

  if (order >= 2) {
    MultiIndex e2(m);
    e2.set(n, 2);
    for (int i = 0; i < n; ++i) {
      const Jetd& b = rep.slow_map[static_cast<std::size_t>(i)];
      double closed = b.coeff(e2);
      for (int s = 0; s < n; ++s) {
        MultiIndex mix(m);
        mix.set(s, 1);
        mix.set(n, 1);
        closed -= b.coeff(mix) * rd.reduced_field(s) / 2.0;
      }
      const double generic = rep.embedding.V[static_cast<std::size_t>(i)].coeff(e2);
      rep.eps2_closed.push_back(closed);
      rep.eps2_generic.push_back(generic);
      rep.eps2_difference = std::max(rep.eps2_difference, std::abs(closed - generic));
      rep.eps2_map_gap = std::max(rep.eps2_map_gap, std::abs(b.coeff(e2) - rep.reduced_flow[static_cast<std::size_t>(i)].coeff(e2)));
    }
  }
  return rep;
}

}  // namespace fsm
