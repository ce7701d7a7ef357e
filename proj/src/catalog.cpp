#include "fastslow/catalog.hpp"

#include "fastslow/mapspec_io.hpp"

namespace fsm::catalog {

std::string fold_text() {
  return R"(name fold
description x -> x + x^2 - y, y -> y - eps
case Fold
dims 2 1
order 4
base 0 0
[N 1 1]
0 0 : 1
[N 2 1]
0 0 : 0
[f 1]
2 0 : 1
0 1 : -1
[G 1]
0 0 0 : 0
[G 2]
0 0 0 : -1
)";
}

std::string superstable_text() {
  return R"(name superstable
description (x, y) -> (x^2, y + eps) in factored form
dims 2 1
order 4
base 0 0
[N 1 1]
0 0 : 1
[N 2 1]
0 0 : 0
[f 1]
1 0 : -1
2 0 : 1
[G 1]
0 0 0 : 0
[G 2]
0 0 0 : 1
)";
}

std::string transcritical_text(double lambda) {
  return R"(name transcritical
description x -> x + x^2 - y^2 + eps*lambda, y -> y + eps
case Transcritical
dims 2 1
order 4
base 0 0
[N 1 1]
0 0 : 1
[N 2 1]
0 0 : 0
[f 1]
2 0 : 1
0 2 : -1
[G 1]
0 0 0 : )" + format_double(lambda) + R"(
[G 2]
0 0 0 : 1
)";
}

std::string pitchfork_text(double lambda, double g0) {
  return R"(name pitchfork
description x -> x + x y - x^3 + eps*lambda, y -> y + eps*g0
case Pitchfork
dims 2 1
order 4
base 0 0
[N 1 1]
0 0 : 1
[N 2 1]
0 0 : 0
[f 1]
1 1 : 1
3 0 : -1
[G 1]
0 0 0 : )" + format_double(lambda) + R"(
[G 2]
0 0 0 : )" + format_double(g0) + R"(
)";
}

std::string contact3d_text() {
  return R"(name contact3d
description regular contact point with one slow and two fast directions
dims 3 1
order 4
base 0 0 0
[N 1 1]
0 0 0 : 1
0 0 1 : 0.1
[N 1 2]
0 0 0 : 0.3
[N 2 1]
1 0 0 : 0.1
[N 2 2]
0 0 0 : 0
[N 3 1]
0 0 0 : 0
[N 3 2]
0 0 0 : 1
1 0 0 : 0.2
[f 1]
2 0 0 : 1
0 1 0 : -1
1 0 1 : 0.2
3 0 0 : 0.1
[f 2]
1 0 0 : 0.5
0 0 1 : -1.5
0 2 0 : 0.3
1 0 1 : 0.2
2 0 0 : -0.1
[G 1]
0 0 0 0 : 0.2
0 1 0 0 : 0.1
[G 2]
0 0 0 0 : -1
1 0 0 0 : 0.3
0 0 0 1 : 0.2
[G 3]
0 0 0 0 : 0.1
1 0 1 0 : 0.5
0 1 0 1 : 0.1
)";
}

std::string quadratic_g_text() {
  return R"(name quadratic_g
description attracting slow manifold x = 0 with state- and eps-dependent G
dims 2 1
order 4
base 0 0
[N 1 1]
0 0 : 1
0 1 : 0.2
[N 2 1]
1 0 : 0.3
[f 1]
1 0 : -0.5
2 0 : 1
1 1 : 0.2
[G 1]
1 1 0 : 1
0 2 1 : 1
0 0 1 : 0.3
[G 2]
0 0 0 : 1
0 1 0 : 1
2 0 0 : 1
0 0 1 : 0.7
0 1 1 : 1
0 2 0 : 0.4
)";
}

FastSlowMapSpec fold() { return parse_mapspec(fold_text()); }
FastSlowMapSpec superstable() { return parse_mapspec(superstable_text()); }
FastSlowMapSpec transcritical(double lambda) { return parse_mapspec(transcritical_text(lambda)); }
FastSlowMapSpec pitchfork(double lambda, double g0) { return parse_mapspec(pitchfork_text(lambda, g0)); }
FastSlowMapSpec contact3d() { return parse_mapspec(contact3d_text()); }
FastSlowMapSpec quadratic_g() { return parse_mapspec(quadratic_g_text()); }

std::vector<std::string> names() {
  return {"fold", "superstable", "transcritical", "pitchfork", "contact3d", "quadratic_g"};
}

std::string text_by_name(const std::string& name) {
  if (name == "fold") return fold_text();
  if (name == "superstable") return superstable_text();
  if (name == "transcritical") return transcritical_text();
  if (name == "pitchfork") return pitchfork_text();
  if (name == "contact3d") return contact3d_text();
  if (name == "quadratic_g") return quadratic_g_text();
  throw PreconditionError("unknown catalog entry '" + name + "'");
}

}  // namespace fsm::catalog
