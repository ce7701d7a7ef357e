#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fastslow/catalog.hpp"
#include "fastslow/dynamics.hpp"
#include "fastslow/mapspec_io.hpp"
#include "fastslow/singularity.hpp"
#include "fastslow/takens.hpp"

#ifndef FASTSLOW_VERSION
#define FASTSLOW_VERSION "unknown"
#endif

using namespace fsm;

namespace {

struct Options {
  std::string spec_path;
  std::string point_csv;
  int order = 0;
  std::string eps;
  double rho = 0.1;
  std::string out;
  std::vector<std::string> tols;
};

/// `--spec catalog:NAME` reads a built-in example; anything else is a file path.
FastSlowMapSpec load_spec(const std::string& path) {
  if (path.empty()) throw PreconditionError("--spec is required");
  if (path.rfind("catalog:", 0) == 0) return parse_mapspec(catalog::text_by_name(path.substr(8)));
  return load_mapspec(path);
}

Tolerances parse_tols(const std::vector<std::string>& items) {
  Tolerances tol;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw PreconditionError("--tol expects NAME=VALUE, got '" + item + "'");
    const std::string name = item.substr(0, eq), value = item.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0') throw PreconditionError("--tol " + name + ": malformed value '" + value + "'");
    if (!tol.set(name, v)) throw PreconditionError("--tol: unknown tolerance '" + name + "'");
  }
  return tol;
}

VectorXd parse_point(const std::string& csv, const FastSlowMapSpec& spec) {
  if (csv.empty()) return spec.base_point;
  std::vector<double> v;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    char* end = nullptr;
    v.push_back(std::strtod(item.c_str(), &end));
    if (item.empty() || *end != '\0') throw PreconditionError("--point: malformed coordinate '" + item + "'");
  }
  if (static_cast<int>(v.size()) != spec.n)
    throw PreconditionError("--point has " + std::to_string(v.size()) + " coordinates, spec has n = " + std::to_string(spec.n));
  return Eigen::Map<VectorXd>(v.data(), spec.n);
}

std::string csv_vector(const VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v(i));
  return s;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

void add_provenance(ReportTable& t, const FastSlowMapSpec& spec, const Tolerances& tol, const std::string& command) {
  t.add_provenance("fastslow " FASTSLOW_VERSION " " + command);
  t.add_provenance("spec " + (spec.name.empty() ? std::string("(unnamed)") : spec.name));
  t.add_provenance("tolerances " + tol.describe());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write '" + path + "'");
  out << text;
}

int cmd_classify(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const auto cls = classify_point(spec, parse_point(o.point_csv, spec), tol);
  std::cout << to_string(cls.tag);
  if (cls.unipotent_index) std::cout << " unipotent_index=" << *cls.unipotent_index;
  if (cls.superstable) std::cout << " superstable";
  std::cout << "\n";
  return 0;
}

int cmd_reduce(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const VectorXd z = parse_point(o.point_csv, spec);
  const auto r = reduced_data(spec, z, tol);
  if (!r.valid) throw AssumptionViolation("Df N is singular or ill-conditioned at the point (condition " + fmt(r.condition) + ")");
  std::cout << "reduced_field=" << csv_vector(r.reduced_field) << " condition=" << fmt(r.condition) << "\n";
  if (!o.out.empty()) {
    ReportTable t({"row", "projector", "reduced_field"});
    add_provenance(t, spec, tol, "reduce");
    for (Eigen::Index i = 0; i < r.projector.rows(); ++i)
      t.add_row({static_cast<long long>(i + 1), csv_vector(r.projector.row(i).transpose()), r.reduced_field(i)});
    t.write(o.out);
  }
  return 0;
}

int cmd_embed(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const int order = o.order > 0 ? o.order : spec.order;
  const auto res = takens_embed_unipotent(extended_map_jet(spec), order, tol);
  std::cout << "matched_order=" << res.matched_order << " residual=" << fmt(res.residual) << "\n";
  if (!o.out.empty()) {
    FieldFile f;
    f.name = (spec.name.empty() ? std::string("map") : spec.name) + "_field";
    f.order = order;
    f.base_point = VectorXd::Zero(spec.n + 1);
    f.base_point.head(spec.n) = spec.base_point;
    f.V = res.V;
    write_text(o.out, emit_field(f));
  }
  return 0;
}

int cmd_verify_reduced(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const int order = o.order > 0 ? o.order : spec.order;
  const auto rep = verify_reduced_embedding(spec, parse_point(o.point_csv, spec), order, tol);
  double low = 0.0;
  for (double d : rep.low_eps_discrepancy) low = std::max(low, d);
  std::cout << "linear_discrepancy=" << fmt(rep.linear_discrepancy) << " low_eps_discrepancy=" << fmt(low)
            << " eps2_difference=" << fmt(rep.eps2_difference) << " eps2_map_gap=" << fmt(rep.eps2_map_gap) << "\n";
  if (!o.out.empty()) {
    ReportTable t({"degree", "low_eps_discrepancy"});
    add_provenance(t, spec, tol, "verify-reduced");
    for (std::size_t i = 0; i < rep.low_eps_discrepancy.size(); ++i)
      t.add_row({static_cast<long long>(i + 2), rep.low_eps_discrepancy[i]});
    t.write(o.out);
  }
  return 0;
}

int cmd_fold_exit(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const auto grid = parse_eps_grid(o.eps.empty() ? "1e-4:1e-2:log:13" : o.eps);
  const auto r = fold_exit_experiment(spec, o.rho, grid, -0.5, tol);
  ReportTable t({"eps", "ok", "y_out", "steps", "note"});
  add_provenance(t, spec, tol, "fold-exit rho=" + format_double(o.rho));
  long long used = 0;
  for (const auto& row : r.rows) {
    t.add_row({row.eps, static_cast<long long>(row.ok), row.y_out, static_cast<long long>(row.steps), row.note});
    used += row.ok;
  }
  if (o.out.empty()) std::cout << t.to_csv();
  else t.write(o.out);
  std::cout << "slope=" << fmt(r.fit.slope) << " intercept=" << fmt(r.fit.intercept) << " r_squared=" << fmt(r.fit.r_squared)
            << " used=" << used << "/" << r.rows.size() << "\n";
  return 0;
}

int cmd_branch_select(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const auto grid = parse_eps_grid(o.eps.empty() ? "1e-3" : o.eps);
  ReportTable t({"eps", "lambda", "seed_x", "seed_y", "exit_x", "exit_y", "exit_edge", "fiber_distance", "label"});
  add_provenance(t, spec, tol, "branch-select");
  bool all_escape = true;
  for (double eps : grid) {
    const auto r = branch_selection_experiment(spec, eps, {}, tol);
    std::cout << "eps=" << fmt(eps) << " lambda=" << fmt(r.lambda) << " label=" << to_string(r.label);
    for (const auto& s : r.seeds) {
      std::cout << " seed(" << fmt(s.seed(0)) << ")=" << to_string(s.label);
      t.add_row({eps, r.lambda, s.seed(0), s.seed(1), s.exit_point(0), s.exit_point(1), s.exit_edge, s.fiber_distance,
                 to_string(s.label)});
    }
    std::cout << "\n";
    all_escape = all_escape && r.label == BranchLabel::FastEscape;
  }
  if (grid.size() >= 2 && all_escape) {
    const auto e = escape_distance_experiment(spec, grid, {}, tol);
    std::cout << "escape_slope=" << fmt(e.fit.slope) << " r_squared=" << fmt(e.fit.r_squared) << "\n";
  }
  if (!o.out.empty()) t.write(o.out);
  return 0;
}

int cmd_contact(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const auto r = check_regular_contact(spec, parse_point(o.point_csv, spec), tol);
  std::cout << "rank_DfN=" << r.rank_DfN << " rank_Df=" << r.rank_Df << " nondegeneracy=" << fmt(r.nondegeneracy)
            << " slow_regularity=" << csv_vector(r.slow_regularity) << " null_pairing=" << fmt(r.null_pairing)
            << " regular_contact=" << (r.verdict ? "yes" : "no") << "\n";
  return 0;
}

int cmd_center_manifold(const Options& o) {
  const auto spec = load_spec(o.spec_path);
  const auto tol = parse_tols(o.tols);
  const int order = o.order > 0 ? o.order : spec.order;
  const auto t = cm_normal_form_transform(spec, tol);
  const auto cm = center_manifold_restricted_map(t, order, tol);
  const auto e = embed_on_center_manifold(cm, order, tol);
  std::cout << "invariance_residual=" << fmt(cm.invariance_residual) << " multiplier=" << format_double(cm.multiplier)
            << " N_formula_residual=" << fmt(cm.N_formula_residual) << " G_formula_residual=" << fmt(cm.G_formula_residual)
            << "\n";
  std::cout << "embedding_residual=" << fmt(e.embedding.residual) << " linear_N_gap=" << fmt(e.linear_N_gap)
            << " linear_G_gap=" << fmt(e.linear_G_gap) << " partials_gap=" << fmt(e.partials_gap)
            << " xu_gap=" << fmt(e.xu_gap) << " uu_gap=" << fmt(e.uu_gap) << "\n";
  if (!o.out.empty()) {
    FieldFile f;
    f.name = (spec.name.empty() ? std::string("map") : spec.name) + "_center_field";
    f.order = order;
    f.base_point = VectorXd::Zero(static_cast<Eigen::Index>(e.embedding.V.size()));
    f.V = e.embedding.V;
    write_text(o.out, emit_field(f));
  }
  return 0;
}

/// Fast end-to-end checks on the built-in catalog; one line per check.
int cmd_selftest(const Options& o) {
  const auto tol = parse_tols(o.tols);
  int failures = 0;
  auto check = [&](const std::string& name, auto&& body) {
    std::string detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    std::cout << (ok ? "PASS " : "FAIL ") << name << (detail.empty() ? "" : " (" + detail + ")") << "\n";
    failures += !ok;
  };
  check("catalog round trip", [&](std::string&) {
    for (const auto& n : catalog::names()) {
      const auto s = parse_mapspec(catalog::text_by_name(n));
      if (emit_mapspec(parse_mapspec(emit_mapspec(s))) != emit_mapspec(s)) return false;
    }
    return true;
  });
  check("fold classification", [&](std::string& d) {
    const auto c = classify_point(catalog::fold(), Eigen::Vector2d::Zero(), tol);
    d = to_string(c.tag);
    return c.tag == PointClass::FoldContact;
  });
  check("fold embedding", [&](std::string& d) {
    const auto r = takens_embed_unipotent(extended_map_jet(catalog::fold()), 4, tol);
    d = "residual " + fmt(r.residual);
    return r.residual <= 1e-9;
  });
  check("transcritical labels", [&](std::string&) {
    return branch_selection_experiment(catalog::transcritical(0.5), 1e-3, {}, tol).label == BranchLabel::ExchangeOfStability &&
           branch_selection_experiment(catalog::transcritical(2.0), 1e-3, {}, tol).label == BranchLabel::FastEscape;
  });
  check("contact center manifold", [&](std::string& d) {
    const auto cm = center_manifold_restricted_map(cm_normal_form_transform(catalog::contact3d(), tol), 4, tol);
    d = "invariance " + fmt(cm.invariance_residual);
    return cm.invariance_residual <= 1e-10 && std::abs(cm.multiplier - 1.0) <= 1e-10;
  });
  return failures == 0 ? 0 : 1;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const AssumptionViolation*>(&e)) return "AssumptionViolation";
  if (dynamic_cast<const UnsupportedCase*>(&e)) return "UnsupportedCase";
  if (dynamic_cast<const PreconditionError*>(&e)) return "PreconditionError";
  if (dynamic_cast<const StructuralError*>(&e)) return "StructuralError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  return "InternalError";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analysis of discrete fast-slow maps z -> z + N(z) f(z) + eps G(z, eps)"};
  app.set_version_flag("--version", std::string("fastslow ") + FASTSLOW_VERSION);
  app.require_subcommand(1);
  Options o;
  int (*selected)(const Options&) = nullptr;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
    bool point, order, eps, rho, out, spec;
  };
  const std::vector<Command> commands{
      {"classify", "classify a point of the critical manifold by its multipliers", cmd_classify, true, false, false, false, false, true},
      {"reduce", "projector and reduced vector field at a point", cmd_reduce, true, false, false, false, true, true},
      {"embed", "vector field whose time-1 map matches the extended map jet (writes a field file)", cmd_embed, false, true, false, false, true, true},
      {"verify-reduced", "compare the slow map with the reduced flow order by order", cmd_verify_reduced, true, true, false, false, true, true},
      {"fold-exit", "exit height at x = rho past a planar fold over an eps grid", cmd_fold_exit, false, false, true, true, true, true},
      {"branch-select", "label where orbits leave a transcritical or pitchfork point", cmd_branch_select, false, false, true, false, true, true},
      {"contact", "regular contact point conditions", cmd_contact, true, false, false, false, false, true},
      {"center-manifold", "center-manifold reduction and embedding at a contact point", cmd_center_manifold, false, true, false, false, true, true},
      {"selftest", "quick end-to-end checks on the built-in examples", cmd_selftest, false, false, false, false, false, false},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    if (c.spec) sub->add_option("--spec", o.spec_path, "map-spec file, or catalog:NAME")->required();
    if (c.point) sub->add_option("--point", o.point_csv, "comma-separated point (default: base point)");
    if (c.order) sub->add_option("--order", o.order, "jet order (default: the spec's order)")->check(CLI::Range(1, 32));
    if (c.eps) sub->add_option("--eps", o.eps, "eps grid: A:B:log:N, A:B:lin:N or a comma list");
    if (c.rho) sub->add_option("--rho", o.rho, "exit section x = rho")->capture_default_str();
    if (c.out) sub->add_option("--out", o.out, "output file");
    sub->add_option("--tol", o.tols, "tolerance override NAME=VALUE (repeatable)");
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return selected(o);
  } catch (const PreconditionError& e) {
    std::cerr << "error: kind=" << error_kind(e) << " message=\"" << e.what() << "\"\n";
    return 2;
  } catch (const StructuralError& e) {
    std::cerr << "error: kind=" << error_kind(e) << " message=\"" << e.what() << "\"\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=" << error_kind(e) << " message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
