#include "fastslow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <sstream>

#include "fastslow/singularity.hpp"

namespace fsm {

namespace {
std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}
}  // namespace

Box Box::around(const VectorXd& center, double radius) {
  return {center.array() - radius, center.array() + radius};
}

Box Box::unbounded(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {VectorXd::Constant(n, -inf), VectorXd::Constant(n, inf)};
}

bool Box::contains(const VectorXd& z) const { return exit_face(z).empty(); }

std::string Box::exit_face(const VectorXd& z) const {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) > hi(i)) return "z" + std::to_string(i + 1) + "+";
    if (z(i) < lo(i)) return "z" + std::to_string(i + 1) + "-";
  }
  return {};
}

Orbit iterate_map_orbit(const FastSlowMapSpec& spec, const VectorXd& z0, double eps, const Box& box, long max_steps) {
  if (eps < 0.0) throw PreconditionError("orbit iteration needs eps >= 0");
  if (z0.size() != spec.n) throw StructuralError("orbit start has the wrong dimension");
  if (!box.contains(z0)) throw PreconditionError("orbit start lies outside the box");
  Orbit orbit;
  orbit.eps = eps;
  orbit.points.push_back(z0);
  VectorXd z = z0;
  for (long s = 0; s < max_steps; ++s) {
    z = spec.step(z, eps);
    if (!z.allFinite()) throw NumericalError("orbit became non-finite after " + std::to_string(s + 1) + " steps");
    orbit.points.push_back(z);
    const std::string face = box.exit_face(z);
    if (!face.empty()) {
      orbit.exited = true;
      orbit.exit_edge = face;
      break;
    }
  }
  return orbit;
}

VectorXd integrate_time1(const Field& V, const VectorXd& z0, double atol, double rtol) {
  // Dormand-Prince 5(4) tableau.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695, e4 = b4 - 393.0 / 640,
                          e5 = b5 + 92097.0 / 339200, e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;  // autonomous fields: stage times are not needed

  VectorXd y = z0;
  double t = 0.0, h = 1e-2;
  VectorXd k1 = V(y);
  long steps = 0;
  while (t < 1.0) {
    if (++steps > 10'000'000) throw NumericalError("integrator exceeded its step budget");
    h = std::min(h, 1.0 - t);
    if (h < 1e-14) throw NumericalError("integrator step size underflow (stiff or singular field)");
    const VectorXd k2 = V(y + h * a21 * k1);
    const VectorXd k3 = V(y + h * (a31 * k1 + a32 * k2));
    const VectorXd k4 = V(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const VectorXd k5 = V(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const VectorXd k6 = V(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const VectorXd y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const VectorXd k7 = V(y_new);
    const VectorXd err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const VectorXd scale = (atol + rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
    const double en = std::sqrt((err.cwiseQuotient(scale)).squaredNorm() / static_cast<double>(y.size()));
    if (!std::isfinite(en)) throw NumericalError("integrator produced a non-finite state");
    if (en <= 1.0) {
      t = (h == 1.0 - t) ? 1.0 : t + h;
      y = y_new;
      k1 = k7;  // first-same-as-last
    }
    const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h *= factor;
  }
  return y;
}

VectorXd integrate_time1(const JetVectord& V, const VectorXd& z0, double atol, double rtol) {
  return integrate_time1([&V](const VectorXd& z) { return evaluate(V, z); }, z0, atol, rtol);
}

namespace {

long default_steps(double eps, double extent) {
  if (eps <= 0.0) return 1000;
  return static_cast<long>(std::min(1e8, std::ceil(4.0 * extent / eps) + 10000.0));
}

/// Point on S over x = x_start: Newton in y, falling back to the minimum-norm manifold solve.
VectorXd seed_on_manifold(const FastSlowMapSpec& spec, double x_start, double y0, const Tolerances& tol) {
  VectorXd z(2);
  z << x_start, y0;
  for (int it = 0; it < 50 && std::abs(spec.f_at(z)(0)) > tol.manifold; ++it) {
    const double fy = spec.Df_at(z)(0, 1);
    if (std::abs(fy) < 1e-12) break;
    z(1) -= spec.f_at(z)(0) / fy;
  }
  if (std::abs(spec.f_at(z)(0)) > tol.manifold) z = critical_manifold_solve(spec, z, tol).point;
  return z;
}

/// Multiplier 1 + Df N at z for a 2-D map with one fast direction.
double fast_multiplier(const FastSlowMapSpec& spec, const VectorXd& z) {
  return 1.0 + (spec.Df_at(z) * spec.N_at(z))(0, 0);
}

/// Attracting zeros of x -> f(x, y) in [lo, hi]: sign changes on a grid refined by bisection.
std::vector<double> attracting_roots(const FastSlowMapSpec& spec, double y, double lo, double hi, const Tolerances& tol) {
  const int grid = 4000;
  auto f = [&](double x) {
    VectorXd z(2);
    z << x, y;
    return spec.f_at(z)(0);
  };
  std::vector<double> roots;
  double xa = lo, fa = f(lo);
  for (int i = 1; i <= grid; ++i) {
    const double xb = lo + (hi - lo) * i / grid, fb = f(xb);
    double root = std::numeric_limits<double>::quiet_NaN();
    if (fa == 0.0) {
      root = xa;
    } else if (fa * fb < 0.0) {
      double a = xa, b = xb, fl = fa;
      for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
        const double m = 0.5 * (a + b), fm = f(m);
        if (fm == 0.0) a = b = m;
        else if ((fm < 0.0) == (fl < 0.0)) a = m, fl = fm;
        else b = m;
      }
      root = 0.5 * (a + b);
    }
    if (!std::isnan(root)) {
      VectorXd z(2);
      z << root, y;
      if (std::abs(fast_multiplier(spec, z)) < 1.0 - tol.unit) roots.push_back(root);
    }
    xa = xb;
    fa = fb;
  }
  return roots;
}

/// Crossing of the segment a -> b with the face it leaves through.
VectorXd face_crossing(const VectorXd& a, const VectorXd& b, const Box& box, const std::string& face) {
  const int i = std::stoi(face.substr(1, face.size() - 2)) - 1;
  const double bound = face.back() == '+' ? box.hi(i) : box.lo(i);
  const double t = (bound - a(i)) / (b(i) - a(i));
  return a + t * (b - a);
}

ScalingFit fit_rows(const std::vector<ExitRow>& rows) {
  std::vector<double> e, o;
  for (const auto& r : rows)
    if (r.ok) {
      e.push_back(r.eps);
      o.push_back(r.y_out);
    }
  if (e.size() < 2) throw NumericalError("fewer than two usable points for the scaling fit");
  return fit_power_law(e, o);
}

}  // namespace

Orbit track_slow_manifold(const FastSlowMapSpec& spec, double eps, double x_start, const TrackOptions& opts,
                          const Tolerances& tol) {
  if (spec.n != 2 || spec.k != 1) throw UnsupportedCase("slow-manifold tracking is implemented for planar maps");
  if (eps < 0.0) throw PreconditionError("slow-manifold tracking needs eps >= 0");
  const VectorXd z = seed_on_manifold(spec, x_start, opts.y_guess.value_or(spec.base_point(1)), tol);
  const SingularityClass cls = classify_point(spec, z, tol);
  if (cls.tag != PointClass::NH_attracting)
    throw PreconditionError("slow-manifold seed over x = " + num(x_start) + " is " + to_string(cls.tag) +
                            ", not normally hyperbolic attracting");
  const VectorXd seed = z + eps * reduced_data(spec, z, tol).reduced_field;
  const Box box = opts.box.value_or(Box::around(spec.base_point, tol.trust_radius));
  const double extent = (box.hi - box.lo).cwiseMin(1e3).maxCoeff();
  Orbit orbit = iterate_map_orbit(spec, seed, eps, box, opts.max_steps > 0 ? opts.max_steps : default_steps(eps, extent));
  const auto drop = std::min<std::ptrdiff_t>(opts.transient, static_cast<std::ptrdiff_t>(orbit.points.size()) - 2);
  if (drop > 0) orbit.points.erase(orbit.points.begin(), orbit.points.begin() + drop);
  return orbit;
}

ScalingFit fit_power_law(const std::vector<double>& eps, const std::vector<double>& observables) {
  if (eps.size() != observables.size() || eps.size() < 2) throw PreconditionError("power-law fit needs matching samples");
  const auto m = static_cast<Eigen::Index>(eps.size());
  VectorXd lx(m), ly(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (eps[static_cast<std::size_t>(i)] <= 0.0 || observables[static_cast<std::size_t>(i)] == 0.0)
      throw DomainError("power-law fit needs positive eps and nonzero observables");
    lx(i) = std::log(eps[static_cast<std::size_t>(i)]);
    ly(i) = std::log(std::abs(observables[static_cast<std::size_t>(i)]));
  }
  const double mx = lx.mean(), my = ly.mean();
  const VectorXd dx = lx.array() - mx, dy = ly.array() - my;
  ScalingFit fit;
  fit.eps_values = eps;
  fit.observables = observables;
  fit.slope = dx.dot(dy) / dx.squaredNorm();
  fit.intercept = my - fit.slope * mx;
  const double ss_res = (dy - fit.slope * dx).squaredNorm();
  const double ss_tot = dy.squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

FoldExitResult fold_exit_experiment(const FastSlowMapSpec& spec, double rho, const std::vector<double>& eps_grid,
                                    double x_start, const Tolerances& tol) {
  const auto cls = classify_planar_singularity(spec, tol);
  if (cls.kind != PlanarCase::Fold || !cls.oriented)
    throw PreconditionError("fold exit needs a fold point with f_xx > 0, f_y < 0, g < 0");
  if (rho <= 0.0) throw PreconditionError("fold exit needs rho > 0");

  Box box = Box::around(spec.base_point, tol.trust_radius);
  box.hi(0) = spec.base_point(0) + rho;

  auto run = [&](double eps) {
    ExitRow row;
    row.eps = eps;
    try {
      TrackOptions opts;
      opts.box = box;
      const Orbit orbit = track_slow_manifold(spec, eps, x_start, opts, tol);
      row.steps = static_cast<long>(orbit.points.size());
      if (!orbit.exited) {
        row.note = "no exit within the step cap";
      } else if (orbit.exit_edge != "z1+") {
        row.note = "left through " + orbit.exit_edge;
      } else {
        const auto& a = orbit.points[orbit.points.size() - 2];
        const auto& b = orbit.points.back();
        row.y_out = face_crossing(a, b, box, "z1+")(1) - spec.base_point(1);
        row.ok = true;
      }
    } catch (const Error& e) {
      row.note = e.what();
    }
    return row;
  };

  std::vector<std::future<ExitRow>> jobs;
  for (double eps : eps_grid) jobs.push_back(std::async(std::launch::async, run, eps));
  FoldExitResult out;
  for (auto& j : jobs) out.rows.push_back(j.get());
  out.fit = fit_rows(out.rows);
  return out;
}

std::string to_string(BranchLabel b) {
  switch (b) {
    case BranchLabel::ExchangeOfStability: return "ExchangeOfStability";
    case BranchLabel::FastEscape: return "FastEscape";
    case BranchLabel::BranchPlus: return "BranchPlus";
    case BranchLabel::BranchMinus: return "BranchMinus";
    case BranchLabel::BothToCenter: return "BothToCenter";
  }
  return "?";
}

namespace {

struct BranchSetup {
  PlanarClassification cls;
  double lambda = 0.0;
  Box box;
};

BranchSetup branch_setup(const FastSlowMapSpec& spec, const BranchOptions& opts, const Tolerances& tol) {
  BranchSetup s;
  s.cls = classify_planar_singularity(spec, tol);
  if (!s.cls.kind || *s.cls.kind == PlanarCase::Fold)
    throw PreconditionError("branch selection needs a transcritical or pitchfork point");
  if (!s.cls.oriented) throw PreconditionError("branch selection needs the standard orientation of the case");
  const auto& c = s.cls.coeffs;
  s.lambda = threshold_lambda(c);
  const bool pitch = c.kind == PlanarCase::Pitchfork;
  // Pitchfork with g0 < 0 sends both outer branches to the center for any lambda.
  if (!(pitch && c.g0 < 0.0)) {
    const double crit = pitch ? 0.0 : 1.0;
    if (std::abs(s.lambda - crit) < tol.lambda_band)
      throw PreconditionError("lambda = " + num(s.lambda) + " lies inside the excluded band around " +
                              num(crit));
  }
  if (opts.box) {
    s.box = *opts.box;
  } else {
    s.box.lo = spec.base_point - Eigen::Vector2d(1.0, 0.5);
    s.box.hi = spec.base_point + Eigen::Vector2d(1.0, 0.5);
  }
  return s;
}

SeedOutcome run_seed(const FastSlowMapSpec& spec, const BranchSetup& s, double x_seed, double y_seed, double eps,
                     const BranchOptions& opts, const Tolerances& tol) {
  TrackOptions t;
  t.box = s.box;
  t.y_guess = y_seed;
  t.transient = 0;
  t.max_steps = opts.max_steps > 0 ? opts.max_steps : default_steps(eps * std::abs(s.cls.coeffs.g0), s.box.hi(1) - s.box.lo(1));
  const Orbit orbit = track_slow_manifold(spec, eps, x_seed, t, tol);
  if (!orbit.exited) throw NumericalError("orbit did not leave the box within the step cap");

  SeedOutcome out;
  out.seed = orbit.points.front();
  out.steps = static_cast<long>(orbit.points.size());
  out.exit_edge = orbit.exit_edge;
  out.exit_point = face_crossing(orbit.points[orbit.points.size() - 2], orbit.points.back(), s.box, orbit.exit_edge);
  const double x0 = spec.base_point(0), y0 = spec.base_point(1);
  out.fiber_distance = std::abs(out.exit_point(1) - y0);

  const double d_match = opts.match_factor * std::sqrt(eps);
  std::vector<std::pair<BranchLabel, double>> matches;
  if (out.fiber_distance <= d_match) matches.emplace_back(BranchLabel::FastEscape, out.fiber_distance);
  const bool pitch = s.cls.coeffs.kind == PlanarCase::Pitchfork;
  const double width = s.box.hi(0) - s.box.lo(0);
  for (double root : attracting_roots(spec, out.exit_point(1), s.box.lo(0), s.box.hi(0), tol)) {
    const double d = std::abs(out.exit_point(0) - root);
    if (d > d_match) continue;
    BranchLabel label = BranchLabel::ExchangeOfStability;
    if (pitch) {
      const double rel = root - x0;
      label = std::abs(rel) <= 1e-6 * width ? BranchLabel::BothToCenter
                                              : (rel > 0 ? BranchLabel::BranchPlus : BranchLabel::BranchMinus);
    }
    matches.emplace_back(label, d);
  }
  std::ostringstream where;
  where << "exit (" << num(out.exit_point(0)) << ", " << num(out.exit_point(1)) << ") through "
        << out.exit_edge << ", d_match = " << num(d_match);
  if (matches.empty()) throw NumericalError("exit matches no branch or fiber: " + where.str());
  if (matches.size() > 1) throw NumericalError("ambiguous exit, within d_match of several branches: " + where.str());
  out.label = matches.front().first;
  return out;
}

}  // namespace

BranchResult branch_selection_experiment(const FastSlowMapSpec& spec, double eps, const BranchOptions& opts,
                                         const Tolerances& tol) {
  if (eps <= 0.0) throw PreconditionError("branch selection needs eps > 0");
  const BranchSetup s = branch_setup(spec, opts, tol);
  BranchResult res;
  res.lambda = s.lambda;

  const double cy = 0.5 * (s.box.lo(1) + s.box.hi(1)), half = 0.5 * (s.box.hi(1) - s.box.lo(1));
  const double y_seed = cy - (s.cls.coeffs.g0 > 0 ? 1.0 : -1.0) * opts.seed_fraction * half;
  const auto roots = attracting_roots(spec, y_seed, s.box.lo(0), s.box.hi(0), tol);
  if (roots.empty()) throw PreconditionError("no attracting branch enters the box upstream of the singular point");
  for (double x : roots) res.seeds.push_back(run_seed(spec, s, x, y_seed, eps, opts, tol));

  res.label = res.seeds.front().label;
  for (const auto& sd : res.seeds)
    if (sd.label != BranchLabel::BothToCenter) {
      res.label = sd.label;
      break;
    }
  return res;
}

FoldExitResult escape_distance_experiment(const FastSlowMapSpec& spec, const std::vector<double>& eps_grid,
                                          const BranchOptions& opts, const Tolerances& tol) {
  const BranchSetup s = branch_setup(spec, opts, tol);
  const double cy = 0.5 * (s.box.lo(1) + s.box.hi(1)), half = 0.5 * (s.box.hi(1) - s.box.lo(1));
  const double y_seed = cy - (s.cls.coeffs.g0 > 0 ? 1.0 : -1.0) * opts.seed_fraction * half;
  const auto roots = attracting_roots(spec, y_seed, s.box.lo(0), s.box.hi(0), tol);
  if (roots.size() != 1) throw PreconditionError("escape distance needs exactly one incoming attracting branch");

  auto run = [&](double eps) {
    ExitRow row;
    row.eps = eps;
    try {
      BranchOptions o = opts;
      o.match_factor = std::numeric_limits<double>::infinity();  // labels are not needed here
      TrackOptions t;
      t.box = s.box;
      t.y_guess = y_seed;
      t.transient = 0;
      t.max_steps = o.max_steps > 0 ? o.max_steps : default_steps(eps * std::abs(s.cls.coeffs.g0), 2.0 * half);
      const Orbit orbit = track_slow_manifold(spec, eps, roots.front(), t, tol);
      row.steps = static_cast<long>(orbit.points.size());
      if (!orbit.exited || orbit.exit_edge.front() != 'z' || orbit.exit_edge[1] != '1') {
        row.note = orbit.exited ? "left through " + orbit.exit_edge : "no exit within the step cap";
      } else {
        const VectorXd p = face_crossing(orbit.points[orbit.points.size() - 2], orbit.points.back(), s.box, orbit.exit_edge);
        row.y_out = std::abs(p(1) - spec.base_point(1));
        row.ok = true;
      }
    } catch (const Error& e) {
      row.note = e.what();
    }
    return row;
  };
  std::vector<std::future<ExitRow>> jobs;
  for (double eps : eps_grid) jobs.push_back(std::async(std::launch::async, run, eps));
  FoldExitResult out;
  for (auto& j : jobs) out.rows.push_back(j.get());
  out.fit = fit_rows(out.rows);
  return out;
}

double sup_map_flow_gap(const JetVectord& H, const JetVectord& V, double radius, int samples, unsigned seed) {
  const int m = static_cast<int>(V.size());
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> gauss;
  double sup = 0.0;
  for (int s = 0; s < samples; ++s) {
    VectorXd z(m);
    for (int i = 0; i < m; ++i) z(i) = gauss(eng);
    z *= radius / z.norm();
    sup = std::max(sup, (evaluate(H, z) - integrate_time1(V, z)).norm());
  }
  return sup;
}

std::vector<double> parse_eps_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ParseError("bad number '" + s + "' in eps grid '" + text + "'");
    return v;
  };
  std::vector<double> out;
  if (parts.size() == 4) {
    const double a = number(parts[0]), b = number(parts[1]);
    const int n = static_cast<int>(number(parts[3]));
    if (n < 1) throw ParseError("eps grid needs at least one point");
    if (parts[2] == "log") {
      if (a <= 0.0 || b <= 0.0) throw ParseError("log eps grid needs positive end points");
      // End points are kept exact; interior points are exp of evenly spaced logs.
      for (int i = 0; i < n; ++i)
        out.push_back(i == 0 ? a : i == n - 1 ? b : std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (n - 1)));
    } else if (parts[2] == "lin") {
      for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    } else {
      throw ParseError("eps grid spacing must be 'log' or 'lin'");
    }
  } else if (parts.size() == 1) {
    std::stringstream list(text);
    for (std::string item; std::getline(list, item, ',');) out.push_back(number(item));
  } else {
    throw ParseError("eps grid must be A:B:log:N, A:B:lin:N or a comma list");
  }
  return out;
}

}  // namespace fsm
