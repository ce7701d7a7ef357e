#ifndef FASTSLOW_DYNAMICS_HPP
#define FASTSLOW_DYNAMICS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fastslow/model.hpp"

namespace fsm {

/// Axis-aligned box; infinite bounds are allowed.
struct Box {
  VectorXd lo;
  VectorXd hi;

  static Box around(const VectorXd& center, double radius);
  static Box unbounded(int n);
  bool contains(const VectorXd& z) const;
  /// First violated face as "z<i>+" or "z<i>-" (1-based), empty when inside.
  std::string exit_face(const VectorXd& z) const;
};

struct Orbit {
  std::vector<VectorXd> points;  ///< includes the start and, on exit, the first point outside
  double eps = 0.0;
  bool exited = false;
  std::string exit_edge;
};

Orbit iterate_map_orbit(const FastSlowMapSpec& spec, const VectorXd& z0, double eps, const Box& box, long max_steps);

using Field = std::function<VectorXd(const VectorXd&)>;

/// Time-1 state of z' = V(z) by an adaptive Dormand-Prince 5(4) pair, atol = rtol = 1e-12.
VectorXd integrate_time1(const Field& V, const VectorXd& z0, double atol = 1e-12, double rtol = 1e-12);
VectorXd integrate_time1(const JetVectord& V, const VectorXd& z0, double atol = 1e-12, double rtol = 1e-12);

struct TrackOptions {
  int transient = 10;
  std::optional<Box> box;           ///< default: trust box around the base point
  long max_steps = 0;               ///< 0: chosen from eps
  std::optional<double> y_guess;    ///< starting value for the seed's y; default base y
};

/// Post-transient orbit seeded on the attracting critical manifold over x = x_start (2-D maps).
Orbit track_slow_manifold(const FastSlowMapSpec& spec, double eps, double x_start, const TrackOptions& opts = {},
                          const Tolerances& tol = {});

struct ScalingFit {
  std::vector<double> eps_values;
  std::vector<double> observables;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line through (log eps, log |observable|).
ScalingFit fit_power_law(const std::vector<double>& eps, const std::vector<double>& observables);

struct ExitRow {
  double eps = 0.0;
  bool ok = false;
  double y_out = 0.0;
  long steps = 0;
  std::string note;
};

struct FoldExitResult {
  std::vector<ExitRow> rows;
  ScalingFit fit;  ///< over the rows with ok = true
};

FoldExitResult fold_exit_experiment(const FastSlowMapSpec& spec, double rho, const std::vector<double>& eps_grid,
                                    double x_start = -0.5, const Tolerances& tol = {});

enum class BranchLabel { ExchangeOfStability, FastEscape, BranchPlus, BranchMinus, BothToCenter };

std::string to_string(BranchLabel b);

struct BranchOptions {
  std::optional<Box> box;       ///< default x in [-1, 1], y in [-0.5, 0.5] around the base point
  double seed_fraction = 0.8;   ///< seeds at this fraction of the half-height, upstream of the slow flow
  double match_factor = 5.0;    ///< d_match = match_factor * sqrt(eps)
  long max_steps = 0;
};

struct SeedOutcome {
  VectorXd seed;
  VectorXd exit_point;
  std::string exit_edge;
  long steps = 0;
  BranchLabel label = BranchLabel::FastEscape;
  double fiber_distance = 0.0;  ///< |y_exit - y_singular|
};

struct BranchResult {
  BranchLabel label = BranchLabel::FastEscape;
  double lambda = 0.0;
  std::vector<SeedOutcome> seeds;
};

/// Tracks the incoming attracting slow manifold through a transcritical or pitchfork point
/// and labels where it leaves the box.
BranchResult branch_selection_experiment(const FastSlowMapSpec& spec, double eps, const BranchOptions& opts = {},
                                         const Tolerances& tol = {});

/// Fast-escape exit distance |y_exit| over an eps grid; rows failing to escape are excluded.
FoldExitResult escape_distance_experiment(const FastSlowMapSpec& spec, const std::vector<double>& eps_grid,
                                          const BranchOptions& opts = {}, const Tolerances& tol = {});

/// sup over `samples` points with |z| = radius of |H(z) - flow^1_V(z)|; points are drawn from a
/// fixed-seed generator, so the value is reproducible.
double sup_map_flow_gap(const JetVectord& H, const JetVectord& V, double radius, int samples, unsigned seed = 7);

std::vector<double> parse_eps_grid(const std::string& text);

}  // namespace fsm

#endif
