#ifndef FASTSLOW_MODEL_HPP
#define FASTSLOW_MODEL_HPP

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "fastslow/jet.hpp"

namespace fsm {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;

/// Numerical thresholds shared by every module. Names match the CLI `--tol NAME=VALUE` keys.
struct Tolerances {
  double unit = 1e-9;          ///< |mu| - 1 test for "on the unit circle"
  double zero = 1e-9;          ///< |mu| test for superstability
  double nilp = 1e-9;          ///< relative norm test for nilpotency
  double manifold = 1e-11;     ///< |f(z)| accepted as "on the critical manifold"
  double trust_radius = 1.0;   ///< jets are evaluated only within this distance of the base point
  double cond = 1e-8;          ///< "equals zero" threshold for singularity conditions
  double generic = 1e-4;       ///< floor for "nonzero" genericity coefficients
  double rank = 1e-8;          ///< relative singular-value cutoff for numerical rank
  double cond_cap = 1e12;      ///< largest accepted condition number of D f N
  double lambda_band = 0.25;   ///< exclusion band around a critical threshold value

  /// Sets a field by its CLI name; returns false for an unknown name.
  bool set(const std::string& name, double value);
  std::string describe() const;
};

/// The map H(z, eps) = z + N(z) f(z) + eps G(z, eps). All jets are polynomials in the local
/// coordinate z - base_point: N and f in n variables, G in n + 1 variables with eps last.
struct FastSlowMapSpec {
  std::string name;
  std::string description;
  std::string declared_case;
  int n = 0;
  int k = 0;
  int order = 0;
  VectorXd base_point;
  std::vector<JetVectord> N;  ///< n rows of n - k jets
  JetVectord f;               ///< n - k components
  JetVectord G;               ///< n components in (z, eps)

  int fast_dim() const { return n - k; }

  /// Structural checks plus the full-column-rank requirement on N(base_point).
  void validate() const;

  JetMatrix<double> N_matrix() const;
  MatrixXd N_at(const VectorXd& z) const;
  VectorXd f_at(const VectorXd& z) const;
  MatrixXd Df_at(const VectorXd& z) const;
  VectorXd G_at(const VectorXd& z, double eps) const;
  /// One application of the map.
  VectorXd step(const VectorXd& z, double eps) const;

  /// Same map with every jet re-expanded about `new_base`.
  FastSlowMapSpec rebased(const VectorXd& new_base) const;
};

struct MultiplierSet {
  VectorXcd values;      ///< nontrivial multipliers, eigenvalues of I + Df N
  MatrixXcd eigen_basis; ///< matching eigenvectors (columns)
  MatrixXd DfN;
  double char_poly_residual = 0.0;  ///< worst relative smallest singular value of (I + DfN - mu I)
};

enum class PointClass { NH_attracting, NH_repelling, NH_saddle, FoldContact, Flip, NeimarkSacker, MixedNonNH };

std::string to_string(PointClass c);

struct SingularityClass {
  PointClass tag = PointClass::MixedNonNH;
  std::optional<int> unipotent_index;  ///< nilpotency index of Df N when every multiplier is 1
  bool superstable = false;
  MultiplierSet multipliers;
};

struct ReducedData {
  bool valid = false;
  MatrixXd projector;      ///< I - N (Df N)^{-1} Df
  VectorXd reduced_field;  ///< projector * G(z, 0)
  double condition = 0.0;  ///< condition number of Df N
};

MultiplierSet nontrivial_multipliers(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol = {});

SingularityClass classify_point(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol = {});

ReducedData reduced_data(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol = {});

/// z + eps * reduced_field(z).
VectorXd reduced_map_step(const FastSlowMapSpec& spec, const VectorXd& z, double eps, const Tolerances& tol = {});

struct ManifoldPoint {
  VectorXd point;
  int iterations = 0;
  double residual = 0.0;
};

/// Newton iteration with minimum-norm updates onto f = 0.
ManifoldPoint critical_manifold_solve(const FastSlowMapSpec& spec, const VectorXd& guess, const Tolerances& tol = {},
                                      int max_iterations = 50);

/// Smallest l with ||M^l|| <= tol * max(1, ||M||)^l, or nullopt if none up to dim(M).
std::optional<int> nilpotency_index(const MatrixXd& m, double tol = 1e-9);

/// Numerical rank with singular values above tol * max(1, sigma_max).
int numerical_rank(const MatrixXd& m, double tol);

}  // namespace fsm

#endif
