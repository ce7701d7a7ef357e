#ifndef FASTSLOW_TAKENS_HPP
#define FASTSLOW_TAKENS_HPP

#include <optional>
#include <vector>

#include "fastslow/model.hpp"

namespace fsm {

/// A = B (I + M) with B semisimple, M nilpotent and B M = M B.
struct LinearPartDecomposition {
  MatrixXd A;
  MatrixXd B;
  MatrixXd M;
  std::optional<int> nilpotent_index_of_M;
  bool is_unipotent = false;
  double factor_residual = 0.0;   ///< ||A - B (I + M)||
  double commute_residual = 0.0;  ///< ||B M - M B||
};

LinearPartDecomposition jordan_chevalley_split(const MatrixXd& A, const Tolerances& tol = {});

/// Jet of the time-1 map of the field V; the linear part of V must be nilpotent.
JetVectord flow_time1_jet(const JetVectord& V, int order, const Tolerances& tol = {});

struct EmbeddingResult {
  JetVectord V;
  int matched_order = 0;
  double residual = 0.0;                   ///< max |coeff| of j^matched(Phi^1_V) - j^matched(H)
  std::vector<double> degree_conditions;   ///< reciprocal condition estimate per solved degree 2..order
};

/// Unique vector field V with j^order Phi^1_V = j^order H for a map jet with unipotent linear part.
EmbeddingResult takens_embed_unipotent(const JetVectord& H, int order, const Tolerances& tol = {});

/// The extended map (z, eps) -> (z + N f + eps G, eps) as n + 1 jets in n + 1 variables, expanded
/// about the spec's base point.
JetVectord extended_map_jet(const FastSlowMapSpec& spec);

/// Jets of the projector I - N (Df N)^{-1} Df about the base point.
JetMatrix<double> projector_jet(const FastSlowMapSpec& spec, const Tolerances& tol = {});

struct ReducedEmbeddingReport {
  VectorXd z0;
  int order = 0;
  VectorXd reduced_field;                  ///< a = Pi G(z0, 0)
  JetVectord slow_map;                     ///< (z + eps Pi(z) G(z, eps), eps) about z0
  JetVectord reduced_flow;                 ///< time-1 map of (eps Pi(z) G(z, 0), 0)
  EmbeddingResult embedding;               ///< generic embedding of the slow map
  double linear_discrepancy = 0.0;         ///< j^1 slow map vs j^1 reduced flow
  std::vector<double> low_eps_discrepancy; ///< entry l-2: degree-l terms with eps exponent 0 or 1
  std::vector<double> eps2_closed;         ///< closed-form eps^2 coefficient per slow component
  std::vector<double> eps2_generic;        ///< eps^2 coefficient of the generic embedding
  double eps2_difference = 0.0;            ///< max |closed - generic|
  double eps2_map_gap = 0.0;               ///< max |eps^2 coefficient of the slow map - of the field|
};

ReducedEmbeddingReport verify_reduced_embedding(const FastSlowMapSpec& spec, const VectorXd& z0, int order,
                                                const Tolerances& tol = {});

}  // namespace fsm

#endif
