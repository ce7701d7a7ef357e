#include "fastslow/model.hpp"

#include <cmath>
#include <sstream>

namespace fsm {

bool Tolerances::set(const std::string& name, double value) {
  if (name == "unit") unit = value;
  else if (name == "zero") zero = value;
  else if (name == "nilp") nilp = value;
  else if (name == "manifold") manifold = value;
  else if (name == "trust_radius") trust_radius = value;
  else if (name == "cond") cond = value;
  else if (name == "generic") generic = value;
  else if (name == "rank") rank = value;
  else if (name == "cond_cap") cond_cap = value;
  else if (name == "lambda_band") lambda_band = value;
  else return false;
  return true;
}

std::string Tolerances::describe() const {
  std::ostringstream os;
  os.precision(3);
  os << "unit=" << unit << " zero=" << zero << " nilp=" << nilp << " manifold=" << manifold
     << " trust_radius=" << trust_radius << " cond=" << cond << " generic=" << generic << " rank=" << rank
     << " cond_cap=" << cond_cap << " lambda_band=" << lambda_band;
  return os.str();
}

namespace {

VectorXd local(const FastSlowMapSpec& spec, const VectorXd& z) {
  if (z.size() != spec.n) throw StructuralError("point has dimension " + std::to_string(z.size()) + ", expected " +
                                                std::to_string(spec.n));
  return z - spec.base_point;
}

void check_jet(const Jetd& j, int nv, int order, const std::string& what) {
  if (j.num_vars() != nv) throw StructuralError(what + " has " + std::to_string(j.num_vars()) + " variables, expected " +
                                                std::to_string(nv));
  if (j.order() != order) throw StructuralError(what + " has order " + std::to_string(j.order()) + ", expected " +
                                                std::to_string(order));
}

void check_trust(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol) {
  const double d = (z - spec.base_point).norm();
  if (!(d <= tol.trust_radius))
    throw DomainError("point lies " + std::to_string(d) + " from the base point, outside the trust radius " +
                      std::to_string(tol.trust_radius));
}

}  // namespace

void FastSlowMapSpec::validate() const {
  if (n < 1 || k < 0 || k >= n) throw StructuralError("dimensions must satisfy 0 <= k < n");
  if (n + 1 > kMaxJetVars) throw StructuralError("dimension too large for the jet representation");
  if (order < 3) throw StructuralError("jet order must be at least 3");
  if (base_point.size() != n) throw StructuralError("base point has wrong dimension");
  const int p = n - k;
  if (static_cast<int>(N.size()) != n) throw StructuralError("N must have n rows");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(N[static_cast<std::size_t>(i)].size()) != p) throw StructuralError("N must have n - k columns");
    for (int j = 0; j < p; ++j)
      check_jet(N[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], n, order,
                "N[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
  }
  if (static_cast<int>(f.size()) != p) throw StructuralError("f must have n - k components");
  for (int i = 0; i < p; ++i) check_jet(f[static_cast<std::size_t>(i)], n, order, "f[" + std::to_string(i + 1) + "]");
  if (static_cast<int>(G.size()) != n) throw StructuralError("G must have n components");
  for (int i = 0; i < n; ++i) check_jet(G[static_cast<std::size_t>(i)], n + 1, order, "G[" + std::to_string(i + 1) + "]");

  const MatrixXd n0 = N_matrix().constant_part();
  if (numerical_rank(n0, 1e-10) < p)
    throw AssumptionViolation("factorization assumption violated: N(base_point) must have full column rank " +
                              std::to_string(p));
}

JetMatrix<double> FastSlowMapSpec::N_matrix() const {
  const int p = n - k;
  JetMatrix<double> m(n, p, n, order);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) m(i, j) = N[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

MatrixXd FastSlowMapSpec::N_at(const VectorXd& z) const {
  const VectorXd x = local(*this, z);
  MatrixXd m(n, n - k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n - k; ++j) m(i, j) = N[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].evaluate(x);
  return m;
}

VectorXd FastSlowMapSpec::f_at(const VectorXd& z) const { return evaluate(f, local(*this, z)); }

MatrixXd FastSlowMapSpec::Df_at(const VectorXd& z) const {
  const VectorXd x = local(*this, z);
  MatrixXd d(n - k, n);
  for (int i = 0; i < n - k; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = jet_partial(f[static_cast<std::size_t>(i)], j).evaluate(x);
  return d;
}

VectorXd FastSlowMapSpec::G_at(const VectorXd& z, double eps) const {
  VectorXd x(n + 1);
  x << local(*this, z), eps;
  return evaluate(G, x);
}

VectorXd FastSlowMapSpec::step(const VectorXd& z, double eps) const {
  VectorXd out = z + N_at(z) * f_at(z);
  if (eps != 0.0) out += eps * G_at(z, eps);
  return out;
}

FastSlowMapSpec FastSlowMapSpec::rebased(const VectorXd& new_base) const {
  FastSlowMapSpec out = *this;
  const VectorXd shift = local(*this, new_base);
  VectorXd shift_eps(n + 1);
  shift_eps << shift, 0.0;
  for (auto& row : out.N)
    for (auto& j : row) j = jet_translate(j, shift);
  for (auto& j : out.f) j = jet_translate(j, shift);
  for (auto& j : out.G) j = jet_translate(j, shift_eps);
  out.base_point = new_base;
  return out;
}

std::string to_string(PointClass c) {
  switch (c) {
    case PointClass::NH_attracting: return "NH_attracting";
    case PointClass::NH_repelling: return "NH_repelling";
    case PointClass::NH_saddle: return "NH_saddle";
    case PointClass::FoldContact: return "FoldContact";
    case PointClass::Flip: return "Flip";
    case PointClass::NeimarkSacker: return "NeimarkSacker";
    case PointClass::MixedNonNH: return "MixedNonNH";
  }
  return "?";
}

int numerical_rank(const MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double cut = tol * std::max(1.0, s.size() ? s(0) : 0.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

std::optional<int> nilpotency_index(const MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw StructuralError("nilpotency index needs a square matrix");
  const double scale = std::max(1.0, m.norm());
  MatrixXd p = m;
  double bound = scale;
  for (int l = 1; l <= m.rows(); ++l) {
    if (p.norm() <= tol * bound) return l;
    p = p * m;
    bound *= scale;
  }
  return std::nullopt;
}

MultiplierSet nontrivial_multipliers(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol) {
  check_trust(spec, z, tol);
  MultiplierSet out;
  out.DfN = spec.Df_at(z) * spec.N_at(z);
  const int p = spec.fast_dim();
  const MatrixXd a = MatrixXd::Identity(p, p) + out.DfN;
  Eigen::EigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver failed on I + Df N");
  out.values = es.eigenvalues();
  out.eigen_basis = es.eigenvectors();
  const double scale = std::max(1.0, a.norm());
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const MatrixXcd shifted = a.cast<std::complex<double>>() - out.values(i) * MatrixXcd::Identity(p, p);
    Eigen::JacobiSVD<MatrixXcd> svd(shifted);
    out.char_poly_residual = std::max(out.char_poly_residual, svd.singularValues()(p - 1) / scale);
  }
  if (out.char_poly_residual > 1e-9) throw NumericalError("multipliers fail the characteristic-polynomial check");
  return out;
}

SingularityClass classify_point(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol) {
  const double res = spec.f_at(z).norm();
  if (!(res <= tol.manifold))
    throw PreconditionError("point is not on the critical manifold: |f(z)| = " + std::to_string(res));
  SingularityClass out;
  out.multipliers = nontrivial_multipliers(spec, z, tol);
  const VectorXcd& mu = out.multipliers.values;

  int on_circle = 0, inside = 0, outside = 0;
  std::vector<std::complex<double>> critical;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double r = std::abs(mu(i));
    if (r <= tol.zero) out.superstable = true;
    if (std::abs(r - 1.0) <= tol.unit) {
      ++on_circle;
      critical.push_back(mu(i));
    } else if (r < 1.0) {
      ++inside;
    } else {
      ++outside;
    }
  }
  // All multipliers equal 1 exactly when Df N is nilpotent; the matrix test is robust where
  // eigenvalues of a Jordan block split numerically.
  out.unipotent_index = nilpotency_index(out.multipliers.DfN, tol.nilp);

  auto real_near = [&](std::complex<double> m, double target) {
    return std::abs(m.imag()) <= tol.unit && std::abs(m.real() - target) <= tol.unit;
  };
  if (on_circle == 0) {
    out.tag = outside == 0 ? PointClass::NH_attracting : inside == 0 ? PointClass::NH_repelling : PointClass::NH_saddle;
  } else if (on_circle == 1 && real_near(critical[0], 1.0)) {
    out.tag = PointClass::FoldContact;
  } else if (on_circle == 1 && real_near(critical[0], -1.0)) {
    out.tag = PointClass::Flip;
  } else if (on_circle == 2 && std::abs(critical[0].imag()) > tol.unit &&
             std::abs(critical[0] - std::conj(critical[1])) <= tol.unit) {
    out.tag = PointClass::NeimarkSacker;
  } else {
    out.tag = PointClass::MixedNonNH;
  }
  return out;
}

ReducedData reduced_data(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol) {
  check_trust(spec, z, tol);
  const double res = spec.f_at(z).norm();
  if (!(res <= tol.manifold))
    throw PreconditionError("reduced data needs a point on the critical manifold: |f(z)| = " + std::to_string(res));
  const int n = spec.n;
  const MatrixXd N = spec.N_at(z);
  const MatrixXd Df = spec.Df_at(z);
  const MatrixXd DfN = Df * N;
  ReducedData out;
  out.projector = MatrixXd::Zero(n, n);
  out.reduced_field = VectorXd::Zero(n);
  Eigen::JacobiSVD<MatrixXd> svd(DfN);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  out.condition = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  if (!(out.condition <= tol.cond_cap)) return out;
  out.valid = true;
  out.projector = MatrixXd::Identity(n, n) - N * DfN.partialPivLu().solve(Df);
  out.reduced_field = out.projector * spec.G_at(z, 0.0);
  return out;
}

VectorXd reduced_map_step(const FastSlowMapSpec& spec, const VectorXd& z, double eps, const Tolerances& tol) {
  if (!(eps >= 0.0)) throw PreconditionError("eps must be nonnegative");
  const ReducedData rd = reduced_data(spec, z, tol);
  if (!rd.valid) {
    const auto cls = classify_point(spec, z, tol);
    throw PreconditionError("reduced map undefined: D f N is singular at a " + to_string(cls.tag) + " point");
  }
  if (eps == 0.0) return z;
  return z + eps * rd.reduced_field;
}

ManifoldPoint critical_manifold_solve(const FastSlowMapSpec& spec, const VectorXd& guess, const Tolerances& tol,
                                      int max_iterations) {
  ManifoldPoint out;
  out.point = guess;
  for (out.iterations = 0;; ++out.iterations) {
    const VectorXd r = spec.f_at(out.point);
    out.residual = r.norm();
    if (out.residual <= tol.manifold) return out;
    if (out.iterations == max_iterations) break;
    const MatrixXd Df = spec.Df_at(out.point);
    // Minimum-norm Newton update Df^+ r.
    out.point -= Df.completeOrthogonalDecomposition().solve(r);
    if (!out.point.allFinite()) break;
  }
  throw NumericalError("critical manifold Newton iteration did not converge; last |f| = " +
                       std::to_string(out.residual));
}

}  // namespace fsm
