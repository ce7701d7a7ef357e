#ifndef FASTSLOW_SINGULARITY_HPP
#define FASTSLOW_SINGULARITY_HPP

#include <optional>
#include <string>
#include <vector>

#include "fastslow/model.hpp"
#include "fastslow/takens.hpp"

namespace fsm {

enum class PlanarCase { Fold, Transcritical, Pitchfork };

std::string to_string(PlanarCase c);

/// Partial derivatives at the origin of a planar standard-form map x -> x + f(x, y, eps),
/// y -> y + eps g(x, y, eps).
struct PlanarPartials {
  double f = 0, f_x = 0, f_y = 0, f_xx = 0, f_xy = 0, f_yy = 0, f_xxx = 0, f_eps = 0, g0 = 0;
};

/// Transcritical (and fold): alpha = f_xx/2, beta = f_xy/2, gamma = f_yy/2.
/// Pitchfork: alpha = f_xy, beta = f_yy/2, gamma = f_xxx/6. Always delta = f_eps, g0 = g(0).
struct NormalFormCoefficients {
  PlanarCase kind = PlanarCase::Fold;
  double alpha = 0, beta = 0, gamma = 0, delta = 0, g0 = 0;
};

struct PlanarClassification {
  std::optional<PlanarCase> kind;
  NormalFormCoefficients coeffs;
  PlanarPartials partials;
  bool oriented = false;              ///< sign conventions of the case hold
  std::vector<std::string> failures;  ///< failed conditions, one per candidate case
};

/// Partials from jets in (x, y, eps): `fast` is f, `slow` is g.
PlanarPartials planar_partials(const Jetd& fast, const Jetd& slow);

PlanarClassification classify_planar_partials(const PlanarPartials& p, const Tolerances& tol = {});

/// Requires n = 2, k = 1 and N = (1, 0); evaluates at the base point.
PlanarClassification classify_planar_singularity(const FastSlowMapSpec& spec, const Tolerances& tol = {});

double threshold_lambda(const NormalFormCoefficients& c);

/// Least-squares Hadamard division: finds Q (rows: numerator components, columns: divisors)
/// with j^r(sum_j Q_ij d_j) = n_i, each Q_ij of degree <= r - lowest_degree(d_j).
struct HadamardQuotient {
  std::vector<JetVectord> Q;
  double residual = 0.0;
};

HadamardQuotient hadamard_divide(const JetVectord& numerators, const JetVectord& divisors);

struct Embedding2D {
  EmbeddingResult embedding;
  Jetd K;                        ///< V_fast(x, y, 0) = K j^r f(x, y)
  double K0 = 0.0;
  double factor_residual = 0.0;
  double slow_residual = 0.0;    ///< largest eps-free coefficient of the slow component
  double slow_g0_gap = 0.0;      ///< |eps coefficient of the slow component - g0|
  PlanarClassification map_class;
  PlanarClassification field_class;
};

Embedding2D embed_2d(const FastSlowMapSpec& spec, const Tolerances& tol = {});

/// Null vectors and complements of Df N at a contact point: l Df N = 0, Df N r = 0, l r = 1,
/// (r P)(l; Q) = I.
struct ContactFrame {
  Eigen::RowVectorXd l;
  VectorXd r;
  MatrixXd Q;
  MatrixXd P;
};

struct ContactReport {
  int rank_DfN = 0;
  int rank_Df = 0;
  double nondegeneracy = 0.0;
  VectorXd slow_regularity;
  double null_pairing = 0.0;  ///< l r before normalization (unit null vectors)
  bool verdict = false;
  ContactFrame frame;
};

ContactReport check_regular_contact(const FastSlowMapSpec& spec, const VectorXd& z, const Tolerances& tol = {});

/// Map in the coordinates (x, u, w, eps), x the first k original variables, obtained by the
/// rectification v = f(x, y), y = K(x, v), then v = r u + P w.
struct NormalFormTransform {
  FastSlowMapSpec spec;       ///< original map
  ContactFrame frame;
  JetVectord K;               ///< n - k jets in (x, v)
  JetVectord rectified;       ///< n jets in (x, v, eps)
  JetVectord Hhat;            ///< n jets in (x, u, w, eps)
  MatrixXd jacobian;          ///< linear part of Hhat minus [I 0], n x (n + 1)
  double K_residual = 0.0;    ///< largest coefficient of f(x, K(x, v)) - v
  double flat_residual = 0.0; ///< largest coefficient of Hhat(x, 0, 0, 0) - (x, 0, 0)
};

NormalFormTransform cm_normal_form_transform(const FastSlowMapSpec& spec, const Tolerances& tol = {});

/// Center-manifold graph w = W(x, u, eps) and the restricted map
/// (x, u) -> (x, u) + N~(x, u) f~(x, u) + eps G~(x, u, eps) with f~ = u.
struct CenterManifoldData {
  int k = 0;
  int order = 0;
  JetVectord W;                 ///< n - k - 1 jets in (x, u, eps)
  JetVectord restricted_map;    ///< k + 1 jets in (x, u, eps)
  JetVectord restricted_N;      ///< k + 1 jets in (x, u)
  Jetd restricted_f;            ///< u
  JetVectord restricted_G;      ///< k + 1 jets in (x, u, eps)
  double invariance_residual = 0.0;
  double graph_base_residual = 0.0;  ///< largest coefficient of W(x, 0, 0)
  double layer_fixed_residual = 0.0; ///< largest coefficient of the layer map's motion on u = 0
  double multiplier = 0.0;           ///< 1 + N~^u(0, 0)
  double N_formula_residual = 0.0;   ///< N~(x, 0) against N^x (r + P W0), l Df N (r + P W0)
  double G_formula_residual = 0.0;   ///< G~(0) against (G^x(0) + N^x P W_eps, l Df G(0))
};

CenterManifoldData center_manifold_restricted_map(const NormalFormTransform& t, int order, const Tolerances& tol = {});

struct ContactEmbedding {
  EmbeddingResult embedding;
  JetVectord field_N;            ///< V(x, u, 0) / u
  JetVectord field_G;            ///< (V - V(x, u, 0)) / eps
  double linear_N_gap = 0.0;     ///< |field_N(0) - N~(0)|
  double linear_G_gap = 0.0;     ///< |field_G(0) - (G~(0) - N~(0) G~^u(0) / 2)|
  double factor_residual = 0.0;  ///< largest coefficient of V(x, 0, 0)
  double partials_gap = 0.0;     ///< max_m |d field_N^u / dx_m (0) - d N~^u / dx_m (0)|
  double xx_gap = 0.0;           ///< largest x_i x_j coefficient of V_u at eps = 0
  double xu_gap = 0.0;           ///< max |B_{x_s u} - b_{x_s u}|
  double uu_gap = 0.0;           ///< |B_uu - (b_uu - 1/2 sum_s b_{x_s u} N~^x_s(0))|
  double uu_correction = 0.0;    ///< 1/2 sum_s b_{x_s u} N~^x_s(0)
};

/// Embeds the restricted map and checks the embedded field against closed forms; throws
/// StructuralError naming the first identity that fails by more than 1e-8.
ContactEmbedding embed_on_center_manifold(const CenterManifoldData& cm, int order, const Tolerances& tol = {});

}  // namespace fsm

#endif
