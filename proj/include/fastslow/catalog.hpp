#ifndef FASTSLOW_CATALOG_HPP
#define FASTSLOW_CATALOG_HPP

#include <string>
#include <vector>

#include "fastslow/model.hpp"

/// Built-in example maps, as map-spec text and parsed specs. The files under data/ hold the
/// same text for the default parameters.
namespace fsm::catalog {

/// x -> x + x^2 - y, y -> y - eps: planar fold at the origin.
std::string fold_text();
/// (x, y) -> (x^2, y + eps) written as N = (1, 0), f = x^2 - x, G = (0, 1): superstable along x = 0.
std::string superstable_text();
/// x -> x + x^2 - y^2 + eps*lambda, y -> y + eps: planar transcritical point.
std::string transcritical_text(double lambda = 0.5);
/// x -> x + x y - x^3 + eps*lambda, y -> y + eps*g0: planar pitchfork point.
std::string pitchfork_text(double lambda = 0.5, double g0 = 1.0);
/// Three-dimensional map with a regular contact point at the origin, one slow variable.
std::string contact3d_text();
/// Planar map, attracting along x = 0, whose G is quadratic in (z, eps) and whose N varies.
std::string quadratic_g_text();

FastSlowMapSpec fold();
FastSlowMapSpec superstable();
FastSlowMapSpec transcritical(double lambda = 0.5);
FastSlowMapSpec pitchfork(double lambda = 0.5, double g0 = 1.0);
FastSlowMapSpec contact3d();
FastSlowMapSpec quadratic_g();

/// Names accepted by `by_name`: fold, superstable, transcritical, pitchfork, contact3d, quadratic_g.
std::vector<std::string> names();
std::string text_by_name(const std::string& name);

}  // namespace fsm::catalog

#endif
