// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers.
// Exit status counts failures that are not listed as known deviations in the README.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "fastslow/catalog.hpp"
#include "fastslow/dynamics.hpp"
#include "fastslow/singularity.hpp"
#include "fastslow/takens.hpp"
#include "support.hpp"

using namespace fsm;
using fsm::testing::Rng;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (n - 1)));
  return out;
}

// Shared corpus for criteria 1 and 2.
std::vector<JetVectord> field_corpus() {
  Rng rng(1001);
  std::vector<JetVectord> out;
  for (int i = 0; i < 50; ++i) out.push_back(fsm::testing::random_nilpotent_field(rng, rng.integer(2, 3), 4));
  return out;
}

Outcome round_trip() {
  double worst = 0.0;
  for (const auto& V : field_corpus()) worst = std::max(worst, max_coeff_diff(takens_embed_unipotent(flow_time1_jet(V, 4), 4).V, V));
  return {worst <= 1e-9, "max coefficient error " + num(worst) + " over 50 fields"};
}

Outcome flow_vs_integrator() {
  // The O(|z|^{r+1}) term has no stated constant, so it is checked as a rate: the relative error
  // at z / 4 must be within 1e-6 of the error at z scaled by 4^-r, up to a factor 2.
  Rng rng(1002);
  const int r = 4;
  double worst_err = 0.0, worst_c = 0.0;
  int bad = 0, points = 0;
  for (const auto& V : field_corpus()) {
    const JetVectord phi = flow_time1_jet(V, r);
    const int m = static_cast<int>(V.size());
    auto rel = [&](const VectorXd& z) {
      const VectorXd ref = integrate_time1(V, z);
      return (evaluate(phi, z) - ref).norm() / ref.norm();
    };
    for (int s = 0; s < 20; ++s, ++points) {
      const VectorXd z = rng.vector(m, 0.1);
      const double e1 = rel(z), e4 = rel(z / 4.0);
      worst_err = std::max(worst_err, e1);
      worst_c = std::max(worst_c, e1 / std::pow(z.norm(), r));
      bad += e4 > 1e-6 + 2.0 * e1 / std::pow(4.0, r);
    }
  }
  return {bad == 0, "max relative error " + num(worst_err) + " (max err/|z|^r " + num(worst_c) + "), " +
                        std::to_string(points - bad) + "/" + std::to_string(points) + " points decay at order r + 1"};
}

Outcome order_structure() {
  double low = 0.0, eps2 = 0.0;
  for (double y : {0.0, 0.2, -0.3}) {
    const auto rep = verify_reduced_embedding(catalog::quadratic_g(), Eigen::Vector2d(0.0, y), 4);
    for (double d : rep.low_eps_discrepancy) low = std::max(low, d);
    low = std::max(low, rep.linear_discrepancy);
    eps2 = std::max(eps2, rep.eps2_difference);
  }
  return {low <= 1e-10 && eps2 <= 1e-10, "eps^0,1 gap " + num(low) + ", eps^2 closed-form gap " + num(eps2)};
}

Outcome index_shift() {
  Rng rng(1004);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = fsm::testing::nilpotent_pair(rng);
    const auto l = nilpotency_index(c.Df * c.N, 1e-10);
    const auto lnd = nilpotency_index(c.N * c.Df, 1e-10);
    ok += l && lnd && *lnd == *l + 1;
  }
  return {ok == 100, std::to_string(ok) + "/100 constructions with index(N Df) = index(Df N) + 1"};
}

Outcome fold_exit() {
  const auto r = fold_exit_experiment(catalog::fold(), 0.1, logspace(1e-4, 1e-2, 13));
  const bool pass = std::abs(r.fit.slope - 2.0 / 3.0) <= 0.05 && r.fit.r_squared >= 0.999;
  return {pass, "slope " + num(r.fit.slope) + " (target 0.667 +- 0.05), r^2 " + num(r.fit.r_squared)};
}

Outcome transcritical() {
  const auto low = branch_selection_experiment(catalog::transcritical(0.5), 1e-3);
  const auto high = branch_selection_experiment(catalog::transcritical(2.0), 1e-3);
  const auto esc = escape_distance_experiment(catalog::transcritical(2.0), logspace(1e-4, 1e-2, 13));
  const bool pass = low.label == BranchLabel::ExchangeOfStability && high.label == BranchLabel::FastEscape &&
                    std::abs(esc.fit.slope - 0.5) <= 0.1;
  return {pass, "lambda 0.5 -> " + to_string(low.label) + ", lambda 2 -> " + to_string(high.label) + ", escape slope " +
                    num(esc.fit.slope)};
}

Outcome pitchfork() {
  const auto minus = branch_selection_experiment(catalog::pitchfork(-0.5, 1.0), 1e-3);
  const auto plus = branch_selection_experiment(catalog::pitchfork(0.5, 1.0), 1e-3);
  const auto center = branch_selection_experiment(catalog::pitchfork(0.5, -1.0), 1e-3);
  bool both = center.seeds.size() == 2;
  for (const auto& s : center.seeds) both = both && s.label == BranchLabel::BothToCenter;
  const bool pass = minus.label == BranchLabel::BranchMinus && plus.label == BranchLabel::BranchPlus && both;
  return {pass, "-0.5 -> " + to_string(minus.label) + ", +0.5 -> " + to_string(plus.label) + ", g0 = -1 -> " +
                    std::to_string(center.seeds.size()) + " seeds " + (both ? "all BothToCenter" : "not all BothToCenter")};
}

Outcome case_preservation() {
  bool pass = true;
  double k0 = 0.0, fac = 0.0;
  const std::vector<std::pair<FastSlowMapSpec, PlanarCase>> cases{{catalog::fold(), PlanarCase::Fold},
                                                                  {catalog::transcritical(0.5), PlanarCase::Transcritical},
                                                                  {catalog::pitchfork(0.5, 1.0), PlanarCase::Pitchfork}};
  for (const auto& [spec, kind] : cases) {
    const auto e = embed_2d(spec);
    pass = pass && e.field_class.kind == kind && e.map_class.kind == kind;
    k0 = std::max(k0, std::abs(e.K0 - 1.0));
    fac = std::max(fac, e.factor_residual);
  }
  pass = pass && k0 <= 1e-8 && fac <= 1e-8;
  return {pass, "cases preserved: " + std::string(pass ? "yes" : "check") + ", |K0 - 1| " + num(k0) + ", factor residual " + num(fac)};
}

Outcome contact_pipeline() {
  const auto t = cm_normal_form_transform(catalog::contact3d());
  const auto cm = center_manifold_restricted_map(t, 4);
  const auto e = embed_on_center_manifold(cm, 4);
  const double identities = std::max({e.partials_gap, e.linear_N_gap, e.linear_G_gap, e.xu_gap, e.uu_gap, e.xx_gap});
  const double mu = std::abs(cm.multiplier - 1.0);
  const bool pass = cm.invariance_residual <= 1e-10 && mu <= 1e-10 && identities <= 1e-8;
  return {pass, "invariance " + num(cm.invariance_residual) + ", |mu - 1| " + num(mu) + ", closed-form gaps " + num(identities)};
}

Outcome error_scaling() {
  // H = j^4 of the extended map plus a random degree-5 tail; V is embedded at order 4.
  Rng rng(1010);
  const int r = 4;
  double worst = 1e300;
  std::string ratios;
  for (const auto& spec : {catalog::fold(), catalog::transcritical(0.5), catalog::pitchfork(0.5, 1.0)}) {
    JetVectord H = extended_map_jet(spec);
    for (auto& h : H) h = h.with_order(r + 1);
    for (std::size_t i = 0; i + 1 < H.size(); ++i) H[i] += rng.jet(spec.n + 1, r + 1, r + 1, r + 1, 1.0, 0.8);
    const auto emb = takens_embed_unipotent(H, r);
    std::vector<double> gaps;
    for (double s : {0.2, 0.1, 0.05}) gaps.push_back(sup_map_flow_gap(H, emb.V, s, 200));
    for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
      worst = std::min(worst, gaps[i] / gaps[i + 1]);
      ratios += (ratios.empty() ? "" : ", ") + num(gaps[i] / gaps[i + 1]);
    }
  }
  const double need = std::pow(2.0, r - 1) * 0.8;
  return {worst >= need, "successive ratios " + ratios + " (need >= " + num(need) + ")"};
}

}  // namespace

int main() {
  // Criteria whose failure is documented (README, known deviations); they still print FAIL.
  const std::set<int> known_deviations{5};
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"embedding round trip", round_trip},
      {"time-1 jet vs adaptive integrator", flow_vs_integrator},
      {"slow map vs reduced flow order structure", order_structure},
      {"nilpotency index shift", index_shift},
      {"fold exit law", fold_exit},
      {"transcritical dichotomy", transcritical},
      {"pitchfork branch selection", pitchfork},
      {"planar case preservation", case_preservation},
      {"contact point center-manifold pipeline", contact_pipeline},
      {"embedding error scaling", error_scaling},
  };
  const std::map<int, double> time_limit{{1, 30.0}, {2, 60.0}, {5, 120.0}, {6, 120.0}, {7, 120.0}};
  int unexpected = 0, passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (const auto lim = time_limit.find(id); lim != time_limit.end() && secs > lim->second) {
      o.pass = false;
      o.detail += ", over the " + num(lim->second) + " s budget";
    }
    const bool known = known_deviations.count(id) > 0;
    std::printf("%s criterion %d: %s: %s [%.2f s]%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), secs, !o.pass && known ? " (known deviation)" : "");
    passed += o.pass;
    unexpected += !o.pass && !known;
  }
  std::printf("acceptance: %d/%zu criteria pass, %d unexpected failure(s)\n", passed, criteria.size(), unexpected);
  return unexpected == 0 ? 0 : 1;
}
