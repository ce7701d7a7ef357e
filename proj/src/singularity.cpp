#include "fastslow/singularity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace fsm {

namespace {

constexpr double kStructureTol = 1e-8;

Jetd var(int nv, int order, int i) { return Jetd::variable(nv, order, i); }

double max_abs(const JetVectord& v) {
  double m = 0.0;
  for (const auto& j : v) m = std::max(m, j.max_abs_coeff());
  return m;
}

MultiIndex exps(std::initializer_list<int> e) { return MultiIndex(e); }

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

bool is_constant(const Jetd& j, double value) {
  return (j - Jetd::constant(j.num_vars(), j.order(), value)).max_abs_coeff() <= 1e-14;
}

/// Terms free of the variables in [first, num_vars), as a jet in the leading `first` variables.
Jetd leading_restriction(const Jetd& a, int first) {
  Jetd out(first, a.order());
  for (const auto& [m, c] : a.terms()) {
    bool free = true;
    for (int i = first; i < a.num_vars(); ++i) free = free && m[i] == 0;
    if (!free) continue;
    MultiIndex t(first);
    for (int i = 0; i < first; ++i) t.set(i, m[i]);
    out.add_to_coeff(t, c);
  }
  out.set_reliable_order(a.reliable_order());
  return out;
}

/// Quadratic coefficient of x_i x_j (i may equal j) as it appears in the jet.
double quad_coeff(const Jetd& a, int i, int j) {
  MultiIndex m(a.num_vars());
  m.set(i, m[i] + 1);
  m.set(j, m[j] + 1);
  return a.coeff(m);
}

}  // namespace

std::string to_string(PlanarCase c) {
  switch (c) {
    case PlanarCase::Fold: return "Fold";
    case PlanarCase::Transcritical: return "Transcritical";
    case PlanarCase::Pitchfork: return "Pitchfork";
  }
  return "?";
}

PlanarPartials planar_partials(const Jetd& fast, const Jetd& slow) {
  if (fast.num_vars() != 3 || slow.num_vars() != 3)
    throw StructuralError("planar partials need jets in (x, y, eps)");
  PlanarPartials p;
  p.f = fast.coeff(exps({0, 0, 0}));
  p.f_x = fast.coeff(exps({1, 0, 0}));
  p.f_y = fast.coeff(exps({0, 1, 0}));
  p.f_xx = 2.0 * fast.coeff(exps({2, 0, 0}));
  p.f_xy = fast.coeff(exps({1, 1, 0}));
  p.f_yy = 2.0 * fast.coeff(exps({0, 2, 0}));
  p.f_xxx = 6.0 * fast.coeff(exps({3, 0, 0}));
  p.f_eps = fast.coeff(exps({0, 0, 1}));
  p.g0 = slow.coeff(exps({0, 0, 0}));
  return p;
}

PlanarClassification classify_planar_partials(const PlanarPartials& p, const Tolerances& tol) {
  PlanarClassification out;
  out.partials = p;
  auto zero = [&](double v) { return std::abs(v) <= tol.cond; };
  auto nonzero = [&](double v) { return std::abs(v) >= tol.generic; };
  const double det = p.f_xx * p.f_yy - p.f_xy * p.f_xy;

  struct Check {
    bool ok;
    const char* what;
  };
  auto evaluate_case = [&](PlanarCase c, std::initializer_list<Check> checks) {
    std::vector<std::string> failed;
    for (const auto& ch : checks)
      if (!ch.ok) failed.push_back(ch.what);
    if (!failed.empty()) out.failures.push_back(to_string(c) + ": " + join(failed));
    return failed.empty();
  };

  const bool on_s = zero(p.f);
  const bool fold = evaluate_case(PlanarCase::Fold, {{on_s, "f != 0"},
                                                     {zero(p.f_x), "f_x != 0"},
                                                     {nonzero(p.f_xx), "f_xx = 0"},
                                                     {nonzero(p.f_y), "f_y = 0"},
                                                     {nonzero(p.g0), "g = 0"}});
  const bool trans = evaluate_case(PlanarCase::Transcritical, {{on_s, "f != 0"},
                                                               {zero(p.f_x), "f_x != 0"},
                                                               {zero(p.f_y), "f_y != 0"},
                                                               {nonzero(p.f_xx), "f_xx = 0"},
                                                               {det <= -tol.generic, "Hessian determinant not negative"},
                                                               {nonzero(p.g0), "g = 0"}});
  const bool pitch = evaluate_case(PlanarCase::Pitchfork, {{on_s, "f != 0"},
                                                           {zero(p.f_x), "f_x != 0"},
                                                           {zero(p.f_y), "f_y != 0"},
                                                           {zero(p.f_xx), "f_xx != 0"},
                                                           {nonzero(p.f_xxx), "f_xxx = 0"},
                                                           {nonzero(p.f_xy), "f_xy = 0"},
                                                           {nonzero(p.g0), "g = 0"}});
  if (int(fold) + int(trans) + int(pitch) > 1) {
    std::ostringstream os;
    os << "degenerate planar point matches several cases: f_x = " << p.f_x << ", f_y = " << p.f_y
       << ", f_xx = " << p.f_xx;
    throw AssumptionViolation(os.str());
  }

  auto& c = out.coeffs;
  c.delta = p.f_eps;
  c.g0 = p.g0;
  if (pitch) {
    c.kind = PlanarCase::Pitchfork;
    c.alpha = p.f_xy;
    c.beta = 0.5 * p.f_yy;
    c.gamma = p.f_xxx / 6.0;
    out.oriented = p.f_xy > 0 && p.f_xxx < 0;
  } else {
    c.kind = fold ? PlanarCase::Fold : PlanarCase::Transcritical;
    c.alpha = 0.5 * p.f_xx;
    c.beta = 0.5 * p.f_xy;
    c.gamma = 0.5 * p.f_yy;
    out.oriented = fold ? (p.f_xx > 0 && p.f_y < 0 && p.g0 < 0) : (p.f_xx > 0 && p.g0 > 0);
  }
  if (fold || trans || pitch) out.kind = c.kind;
  return out;
}

PlanarClassification classify_planar_singularity(const FastSlowMapSpec& spec, const Tolerances& tol) {
  if (spec.n != 2 || spec.k != 1) throw UnsupportedCase("planar classification needs n = 2, k = 1");
  if (!is_constant(spec.N[0][0], 1.0) || !is_constant(spec.N[1][0], 0.0))
    throw UnsupportedCase("planar classification needs the standard form N = (1, 0)");
  const int r = spec.order;
  const Jetd fast = jet_lift(spec.f[0], 3) + var(3, r, 2) * spec.G[0];
  return classify_planar_partials(planar_partials(fast, spec.G[1]), tol);
}

double threshold_lambda(const NormalFormCoefficients& c) {
  if (c.g0 == 0.0) throw AssumptionViolation("threshold lambda needs g0 != 0");
  switch (c.kind) {
    case PlanarCase::Transcritical: {
      const double rad = c.beta * c.beta - c.gamma * c.alpha;
      if (rad <= 0.0) throw AssumptionViolation("transcritical radicand beta^2 - gamma alpha is not positive");
      return (c.delta * c.alpha + c.g0 * c.beta) / (std::abs(c.g0) * std::sqrt(rad));
    }
    case PlanarCase::Pitchfork:
      if (c.gamma >= 0.0) throw AssumptionViolation("pitchfork threshold needs gamma < 0");
      if (c.alpha == 0.0) throw AssumptionViolation("pitchfork threshold needs alpha != 0");
      return (c.delta * c.alpha + c.beta * c.g0) * std::sqrt(-c.gamma) / (c.alpha * std::abs(c.g0) * std::abs(c.alpha));
    case PlanarCase::Fold: break;
  }
  throw UnsupportedCase("no threshold lambda for a fold point");
}

HadamardQuotient hadamard_divide(const JetVectord& numerators, const JetVectord& divisors) {
  if (numerators.empty() || divisors.empty()) throw StructuralError("Hadamard division needs jets");
  const int m = numerators.front().num_vars();
  const int r = numerators.front().order();
  check_conformant(numerators, m, r);
  check_conformant(divisors, m, r);

  const auto rows = monomials_up_to(m, r);
  std::map<MultiIndex, Eigen::Index> row_of;
  for (std::size_t i = 0; i < rows.size(); ++i) row_of[rows[i]] = static_cast<Eigen::Index>(i);

  struct Column {
    std::size_t divisor;
    MultiIndex mono;
  };
  std::vector<Column> cols;
  std::vector<Jetd> products;
  for (std::size_t j = 0; j < divisors.size(); ++j) {
    const int low = divisors[j].lowest_degree();
    if (low < 0) continue;
    for (const auto& mono : monomials_up_to(m, r - low)) {
      Jetd e(m, r);
      e.set_coeff(mono, 1.0);
      cols.push_back({j, mono});
      products.push_back(e * divisors[j]);
    }
  }
  if (cols.empty()) throw PreconditionError("Hadamard division by zero jets");

  MatrixXd A = MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (const auto& [mono, v] : products[c].terms()) A(row_of.at(mono), static_cast<Eigen::Index>(c)) = v;
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);

  HadamardQuotient out;
  for (const auto& num : numerators) {
    VectorXd b = VectorXd::Zero(A.rows());
    for (const auto& [mono, v] : num.terms()) b(row_of.at(mono)) = v;
    const VectorXd q = cod.solve(b);
    out.residual = std::max(out.residual, (A * q - b).cwiseAbs().maxCoeff());
    JetVectord row(divisors.size(), Jetd(m, r));
    for (std::size_t c = 0; c < cols.size(); ++c) row[cols[c].divisor].add_to_coeff(cols[c].mono, q(static_cast<Eigen::Index>(c)));
    out.Q.push_back(std::move(row));
  }
  return out;
}

Embedding2D embed_2d(const FastSlowMapSpec& spec, const Tolerances& tol) {
  Embedding2D out;
  out.map_class = classify_planar_singularity(spec, tol);
  if (!out.map_class.kind)
    throw AssumptionViolation("not a fold, transcritical or pitchfork point: " + join(out.map_class.failures));

  out.embedding = takens_embed_unipotent(extended_map_jet(spec), spec.order, tol);
  const JetVectord& V = out.embedding.V;

  out.slow_residual = std::max(jet_set_zero(V[1], 2).max_abs_coeff(), V[2].max_abs_coeff());
  out.slow_g0_gap = std::abs(V[1].coeff(exps({0, 0, 1})) - out.map_class.coeffs.g0);

  const auto q = hadamard_divide(JetVectord{jet_restrict_zero(V[0], 2)}, JetVectord{spec.f[0]});
  out.K = q.Q[0][0];
  out.K0 = out.K.constant_term();
  out.factor_residual = q.residual;
  if (out.factor_residual > kStructureTol)
    throw StructuralError("embedded fast component does not factor through f: residual " +
                          std::to_string(out.factor_residual));

  out.field_class = classify_planar_partials(planar_partials(V[0], jet_divide_by_var(V[1], 2)), tol);
  if (out.field_class.kind != out.map_class.kind)
    throw StructuralError("embedded field has a different singularity type than the map");
  return out;
}

namespace {

/// Second partials of f_i at a local point: out[i](l, m).
std::vector<MatrixXd> hessians(const JetVectord& f, const VectorXd& zl) {
  const int n = f.front().num_vars();
  std::vector<MatrixXd> out;
  for (const auto& fi : f) {
    MatrixXd h(n, n);
    for (int l = 0; l < n; ++l) {
      const Jetd d = jet_partial(fi, l);
      for (int m = 0; m < n; ++m) h(l, m) = jet_partial(d, m).evaluate(zl);
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace

ContactReport check_regular_contact(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol) {
  const int n = spec.n, p = spec.fast_dim();
  if (p < 1) throw UnsupportedCase("contact analysis needs a fast direction");
  if (spec.f_at(z).norm() > tol.manifold) throw DomainError("contact analysis needs a point on the critical manifold");
  const VectorXd zl = z - spec.base_point;
  const MatrixXd Df = spec.Df_at(z);
  const MatrixXd Nz = spec.N_at(z);
  const MatrixXd DfN = Df * Nz;

  ContactReport rep;
  rep.rank_DfN = numerical_rank(DfN, tol.rank);
  rep.rank_Df = numerical_rank(Df, tol.rank);

  Eigen::JacobiSVD<MatrixXd> svd(DfN, Eigen::ComputeFullU | Eigen::ComputeFullV);
  auto& fr = rep.frame;
  fr.r = svd.matrixV().col(p - 1);
  fr.l = svd.matrixU().col(p - 1).transpose();
  rep.null_pairing = fr.l.dot(fr.r);
  if (std::abs(rep.null_pairing) > 1e-12) fr.l /= rep.null_pairing;

  // P: orthonormal basis of ker l; Q is then the unique left complement with Q r = 0, Q P = I.
  const Eigen::HouseholderQR<MatrixXd> qr(MatrixXd(fr.l.transpose()));
  const MatrixXd full = qr.householderQ() * MatrixXd::Identity(p, p);
  fr.P = full.rightCols(p - 1);
  fr.Q = fr.P.transpose() * (MatrixXd::Identity(p, p) - fr.r * fr.l);

  // Nondegeneracy: l . (D^2 f (N r, N r) + Df DN (N r, r)).
  const VectorXd Nr = Nz * fr.r;
  const auto hess = hessians(spec.f, zl);
  VectorXd quad(p);
  for (int i = 0; i < p; ++i) quad(i) = Nr.dot(hess[static_cast<std::size_t>(i)] * Nr);
  MatrixXd dN_r = MatrixXd::Zero(n, 1);  // sum_{j,m} dN_lj/dz_m (N r)_m r_j, indexed by l
  for (int l = 0; l < n; ++l)
    for (int j = 0; j < p; ++j)
      for (int m = 0; m < n; ++m)
        dN_r(l, 0) += jet_partial(spec.N[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)], m).evaluate(zl) *
                      Nr(m) * fr.r(j);
  const VectorXd bilinear = quad + Df * dN_r.col(0);
  rep.nondegeneracy = fr.l.dot(bilinear);
  rep.slow_regularity = Nz * fr.r * (fr.l * Df * spec.G_at(z, 0.0));

  rep.verdict = rep.rank_DfN == p - 1 && rep.rank_Df == p && std::abs(rep.nondegeneracy) >= tol.generic &&
                rep.slow_regularity.norm() >= tol.generic;
  return rep;
}

NormalFormTransform cm_normal_form_transform(const FastSlowMapSpec& spec, const Tolerances& tol) {
  const int n = spec.n, k = spec.k, p = spec.fast_dim(), r = spec.order;
  if (k < 1) throw UnsupportedCase("center-manifold reduction needs at least one slow variable");
  const ContactReport rep = check_regular_contact(spec, spec.base_point, tol);
  if (!rep.verdict) throw AssumptionViolation("base point is not a regular contact point");
  if (std::abs(rep.null_pairing) <= 1e-12)
    throw AssumptionViolation("null vectors of Df N are orthogonal; the zero eigenvalue is not simple");

  NormalFormTransform t;
  t.spec = spec;
  t.frame = rep.frame;

  const MatrixXd Df0 = spec.Df_at(spec.base_point);
  const MatrixXd Dyf = Df0.rightCols(p);
  const Eigen::JacobiSVD<MatrixXd> dsvd(Dyf);
  const auto& sv = dsvd.singularValues();
  if (sv(p - 1) <= tol.rank * std::max(1.0, sv(0)))
    throw PreconditionError("D_y f is singular for y = the last " + std::to_string(p) +
                            " variables; permute the variables so that f is solvable for the trailing ones");

  // y = K(x, v) solves f(x, K) = v; Newton on jets with the jet inverse of D_y f.
  const MatrixXd Dyf_inv = Dyf.inverse();
  MatrixXd lin(p, n);
  lin << -Dyf_inv * Df0.leftCols(k), Dyf_inv;
  t.K = linear_jets(lin, r);
  JetMatrix<double> Dy(p, p, n, r);
  const JetMatrix<double> Dfj = jacobian(spec.f);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) Dy(i, j) = Dfj(i, k + j);

  auto substitute = [&](JetVectord& inner) {
    inner.clear();
    for (int i = 0; i < k; ++i) inner.push_back(var(n, r, i));
    for (const auto& kj : t.K) inner.push_back(kj);
  };
  JetVectord inner;
  for (int it = 0; it < r + 2; ++it) {
    substitute(inner);
    JetVectord R = jet_compose(spec.f, inner);
    for (int j = 0; j < p; ++j) {
      R[static_cast<std::size_t>(j)] -= var(n, r, k + j);
      R[static_cast<std::size_t>(j)].set_coeff(MultiIndex(n), 0.0);
    }
    t.K_residual = max_abs(R);
    if (t.K_residual <= 1e-15) break;
    const JetVectord step = jet_inverse(jet_compose(Dy, inner), tol.cond_cap).apply(R);
    for (int j = 0; j < p; ++j) {
      t.K[static_cast<std::size_t>(j)] -= step[static_cast<std::size_t>(j)];
      t.K[static_cast<std::size_t>(j)].set_coeff(MultiIndex(n), 0.0);
      t.K[static_cast<std::size_t>(j)].set_reliable_order(r);
    }
  }

  // Rectified map in (x, v, eps): z = (x, K(x, v)), z' = z + N(z) v + eps G(z, eps), v' = f(z').
  const int m = n + 1;
  JetVectord zin;
  for (int i = 0; i < k; ++i) zin.push_back(var(m, r, i));
  for (const auto& kj : t.K) zin.push_back(jet_lift(kj, m));
  JetVectord zein = zin;
  zein.push_back(var(m, r, n));
  const JetMatrix<double> Nz = jet_compose(spec.N_matrix(), zin);
  const JetVectord Gz = jet_compose(spec.G, zein);
  JetVectord zbar;
  for (int i = 0; i < n; ++i) {
    Jetd c = zin[static_cast<std::size_t>(i)] + var(m, r, n) * Gz[static_cast<std::size_t>(i)];
    for (int j = 0; j < p; ++j) c += Nz(i, j) * var(m, r, k + j);
    zbar.push_back(std::move(c));
  }
  const JetVectord vbar = jet_compose(spec.f, zbar);
  t.rectified.assign(zbar.begin(), zbar.begin() + k);
  t.rectified.insert(t.rectified.end(), vbar.begin(), vbar.end());

  // (u, w) = (l; Q) v, v = r u + P w.
  const auto& fr = t.frame;
  JetVectord split;
  for (int i = 0; i < k; ++i) split.push_back(var(m, r, i));
  for (int j = 0; j < p; ++j) {
    Jetd c = fr.r(j) * var(m, r, k);
    for (int a = 0; a < p - 1; ++a) c += fr.P(j, a) * var(m, r, k + 1 + a);
    split.push_back(std::move(c));
  }
  split.push_back(var(m, r, n));
  const JetVectord H2 = jet_compose(t.rectified, split);
  t.Hhat.assign(H2.begin(), H2.begin() + k);
  const JetVectord v2(H2.begin() + k, H2.end());
  MatrixXd LQ(p, p);
  LQ << fr.l, fr.Q;
  const JetVectord uw = apply_matrix(LQ, v2);
  t.Hhat.insert(t.Hhat.end(), uw.begin(), uw.end());

  t.jacobian = linear_part(t.Hhat, m);
  t.jacobian.leftCols(n) -= MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    Jetd on_flat = leading_restriction(t.Hhat[static_cast<std::size_t>(i)], k);
    if (i < k) on_flat -= var(k, r, i);
    t.flat_residual = std::max(t.flat_residual, on_flat.max_abs_coeff());
  }
  return t;
}

CenterManifoldData center_manifold_restricted_map(const NormalFormTransform& t, int order, const Tolerances& tol) {
  const FastSlowMapSpec& spec = t.spec;
  const int n = spec.n, k = spec.k, p = spec.fast_dim(), q = p - 1;
  const int r = std::min(order, spec.order);
  const int c = k + 2;  // (x, u, eps)
  const auto& fr = t.frame;

  CenterManifoldData cm;
  cm.k = k;
  cm.order = r;
  cm.W.assign(static_cast<std::size_t>(q), Jetd(c, r));

  JetVectord Hh = with_order(t.Hhat, r);
  auto graph_inner = [&](const JetVectord& W) {
    JetVectord in;
    for (int i = 0; i <= k; ++i) in.push_back(var(c, r, i));
    for (const auto& w : W) in.push_back(w);
    in.push_back(var(c, r, k + 1));
    return in;
  };
  // Center part (x, u, eps) of the map on the graph, and the invariance defect.
  auto center_map = [&](const JetVectord& W) {
    JetVectord in = graph_inner(W);
    JetVectord out;
    for (int i = 0; i <= k; ++i) out.push_back(jet_compose(Hh[static_cast<std::size_t>(i)], in));
    out.push_back(var(c, r, k + 1));
    return out;
  };
  auto defect = [&](const JetVectord& W) {
    JetVectord in = graph_inner(W);
    JetVectord R;
    const JetVectord cmap = center_map(W);
    for (int a = 0; a < q; ++a) {
      Jetd d = jet_compose(Hh[static_cast<std::size_t>(k + 1 + a)], in);
      d -= jet_compose(W[static_cast<std::size_t>(a)], cmap);
      R.push_back(std::move(d));
    }
    return R;
  };

  if (q > 0) {
    const MatrixXd Bw = linear_part(Hh, n + 1).block(k + 1, k + 1, q, q);
    for (int d = 1; d <= r; ++d) {
      const JetVectord R = defect(cm.W);
      const MatrixXd Ac = linear_part(center_map(cm.W), c);
      const JetVectord Ac_jets = linear_jets(Ac, r);
      const auto monos = homogeneous_monomials(c, d);
      const auto M = static_cast<Eigen::Index>(monos.size());
      std::map<MultiIndex, Eigen::Index> pos;
      for (Eigen::Index i = 0; i < M; ++i) pos[monos[static_cast<std::size_t>(i)]] = i;

      // Operator E -> Bw E - E(Ac xi) on degree-d homogeneous E, unknowns ordered (component, monomial).
      MatrixXd T = MatrixXd::Zero(q * M, q * M);
      for (Eigen::Index j = 0; j < M; ++j) {
        Jetd mono(c, r);
        mono.set_coeff(monos[static_cast<std::size_t>(j)], 1.0);
        const Jetd pulled = jet_compose(mono, Ac_jets).homogeneous_part(d);
        for (int a = 0; a < q; ++a) {
          for (int b = 0; b < q; ++b) T(b * M + j, a * M + j) += Bw(b, a);
          for (const auto& [mi, v] : pulled.terms()) T(a * M + pos.at(mi), a * M + j) -= v;
        }
      }
      VectorXd rhs(q * M);
      for (int a = 0; a < q; ++a)
        for (Eigen::Index j = 0; j < M; ++j) rhs(a * M + j) = -R[static_cast<std::size_t>(a)].coeff(monos[static_cast<std::size_t>(j)]);
      const Eigen::FullPivLU<MatrixXd> lu(T);
      if (lu.rank() < T.rows() || lu.rcond() < 1.0 / tol.cond_cap) {
        const Eigen::VectorXcd ev = (Bw - MatrixXd::Identity(q, q)).eigenvalues();
        std::ostringstream os;
        os << "center-manifold graph equation is singular at degree " << d << "; eigenvalues of Q Df N P:";
        for (Eigen::Index i = 0; i < ev.size(); ++i) os << ' ' << ev(i);
        throw AssumptionViolation(os.str());
      }
      const VectorXd sol = lu.solve(rhs);
      for (int a = 0; a < q; ++a)
        for (Eigen::Index j = 0; j < M; ++j)
          cm.W[static_cast<std::size_t>(a)].add_to_coeff(monos[static_cast<std::size_t>(j)], sol(a * M + j));
    }
    cm.invariance_residual = max_abs(defect(cm.W));
    for (const auto& w : cm.W) cm.graph_base_residual = std::max(cm.graph_base_residual, leading_restriction(w, k).max_abs_coeff());
  }

  JetVectord cmap = center_map(cm.W);
  cm.restricted_map.assign(cmap.begin(), cmap.begin() + k + 1);
  cm.restricted_f = var(k + 1, r, k);
  for (int i = 0; i <= k; ++i) {
    const Jetd& h = cm.restricted_map[static_cast<std::size_t>(i)];
    const Jetd layer = jet_restrict_zero(h, k + 1) - var(k + 1, r, i);
    double dropped = 0.0;
    cm.restricted_N.push_back(jet_divide_by_var(layer, k, &dropped));
    cm.layer_fixed_residual = std::max(cm.layer_fixed_residual, dropped);
    cm.restricted_G.push_back(jet_divide_by_var(Jetd(h - jet_set_zero(h, k + 1)), k + 1));
  }
  cm.multiplier = 1.0 + cm.restricted_N[static_cast<std::size_t>(k)].constant_term();

  // Closed forms on u = 0: N~^x = N^x(z) (r + P W0), N~^u = l Df N(z) (r + P W0), z = (x, K(x, 0)).
  JetVectord xin;
  for (int i = 0; i < k; ++i) xin.push_back(var(k, r, i));
  JetVectord kin = xin;
  for (int j = 0; j < p; ++j) kin.push_back(Jetd(k, r));
  JetVectord zx = xin;
  for (const auto& kj : t.K) zx.push_back(jet_compose(with_order(JetVectord{kj}, r)[0], kin));
  JetVectord cin = xin;
  cin.push_back(Jetd(k, r));
  cin.push_back(Jetd(k, r));
  JetVectord vec;
  for (int j = 0; j < p; ++j) {
    Jetd e = Jetd::constant(k, r, fr.r(j));
    for (int a = 0; a < q; ++a) e += fr.P(j, a) * jet_compose(jet_partial(cm.W[static_cast<std::size_t>(a)], k), cin);
    vec.push_back(std::move(e));
  }
  JetMatrix<double> Nspec = spec.N_matrix();
  const JetMatrix<double> Nzx = jet_compose(Nspec, zx);
  const JetMatrix<double> DfNzx = jet_compose(jacobian(spec.f) * Nspec, zx);
  const JetVectord Nvec = Nzx.apply(vec);
  const JetVectord DfNvec = DfNzx.apply(vec);
  JetVectord formula(Nvec.begin(), Nvec.begin() + k);
  Jetd nu(k, r);
  for (int j = 0; j < p; ++j) nu += fr.l(j) * DfNvec[static_cast<std::size_t>(j)];
  formula.push_back(nu);
  JetVectord ours;
  for (const auto& nj : cm.restricted_N) ours.push_back(jet_restrict_zero(nj, k));
  cm.N_formula_residual = max_coeff_diff(ours, formula, 0, r - 2);

  // G~(0) = (G^x(0) + N^x P W_eps, l Df G(0)); W_eps is the eps-shift of the graph.
  const VectorXd G0 = constant_part(spec.G);
  VectorXd W_eps = VectorXd::Zero(q);
  for (int a = 0; a < q; ++a) W_eps(a) = cm.W[static_cast<std::size_t>(a)].coeff(MultiIndex::unit(c, k + 1));
  const MatrixXd N0 = spec.N_at(spec.base_point);
  VectorXd expected(k + 1);
  expected << G0.head(k) + N0.topRows(k) * fr.P * W_eps, fr.l.dot(spec.Df_at(spec.base_point) * G0);
  for (int i = 0; i <= k; ++i)
    cm.G_formula_residual = std::max(cm.G_formula_residual,
                                     std::abs(cm.restricted_G[static_cast<std::size_t>(i)].constant_term() - expected(i)));
  return cm;
}

ContactEmbedding embed_on_center_manifold(const CenterManifoldData& cm, int order, const Tolerances& tol) {
  const int k = cm.k, c = k + 2;
  const int r = std::min(order, cm.order);
  JetVectord H = with_order(cm.restricted_map, r);
  H.push_back(var(c, r, k + 1));

  ContactEmbedding out;
  out.embedding = takens_embed_unipotent(H, r, tol);
  const JetVectord& V = out.embedding.V;
  out.factor_residual = V[static_cast<std::size_t>(k + 1)].max_abs_coeff();
  for (int i = 0; i <= k; ++i) {
    const Jetd& vi = V[static_cast<std::size_t>(i)];
    double dropped = 0.0;
    out.field_N.push_back(jet_divide_by_var(jet_restrict_zero(vi, k + 1), k, &dropped));
    out.factor_residual = std::max(out.factor_residual, dropped);
    out.field_G.push_back(jet_divide_by_var(Jetd(vi - jet_set_zero(vi, k + 1)), k + 1));
    out.linear_N_gap = std::max(out.linear_N_gap, std::abs(out.field_N.back().constant_term() -
                                                           cm.restricted_N[static_cast<std::size_t>(i)].constant_term()));
  }
  // The field's linear part is log of the map's: field_G(0) = G~(0) - N~(0) G~^u(0) / 2.
  const double Gu0 = cm.restricted_G[static_cast<std::size_t>(k)].constant_term();
  for (int i = 0; i <= k; ++i) {
    const double expected = cm.restricted_G[static_cast<std::size_t>(i)].constant_term() -
                            0.5 * cm.restricted_N[static_cast<std::size_t>(i)].constant_term() * Gu0;
    out.linear_G_gap = std::max(out.linear_G_gap, std::abs(out.field_G[static_cast<std::size_t>(i)].constant_term() - expected));
  }

  const Jetd& NuV = out.field_N[static_cast<std::size_t>(k)];
  const Jetd& NuMap = cm.restricted_N[static_cast<std::size_t>(k)];
  for (int m = 0; m < k; ++m) {
    const MultiIndex e = MultiIndex::unit(k + 1, m);
    out.partials_gap = std::max(out.partials_gap, std::abs(NuV.coeff(e) - NuMap.coeff(e)));
  }

  // Quadratic part of the u-components at eps = 0: B for the field, b for the map.
  const Jetd B = jet_restrict_zero(V[static_cast<std::size_t>(k)], k + 1);
  const Jetd b = jet_restrict_zero(cm.restricted_map[static_cast<std::size_t>(k)], k + 1);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) out.xx_gap = std::max(out.xx_gap, std::abs(quad_coeff(B, i, j)));
  for (int s = 0; s < k; ++s) {
    out.xu_gap = std::max(out.xu_gap, std::abs(quad_coeff(B, s, k) - quad_coeff(b, s, k)));
    out.uu_correction += 0.5 * quad_coeff(b, s, k) * cm.restricted_N[static_cast<std::size_t>(s)].constant_term();
  }
  out.uu_gap = std::abs(quad_coeff(B, k, k) - (quad_coeff(b, k, k) - out.uu_correction));

  const std::pair<const char*, double> checks[] = {
      {"linear part of the embedded N", out.linear_N_gap}, {"linear part of the embedded G", out.linear_G_gap},
      {"factorization through u", out.factor_residual},   {"x-partials of the embedded N^u", out.partials_gap},
      {"vanishing x x coefficients", out.xx_gap},          {"x u coefficients", out.xu_gap},
      {"u^2 coefficient", out.uu_gap}};
  for (const auto& [name, gap] : checks)
    if (gap > kStructureTol)
      throw StructuralError(std::string("center-manifold embedding identity failed: ") + name + " (gap " +
                            std::to_string(gap) + ")");
  return out;
}

}  // namespace fsm
