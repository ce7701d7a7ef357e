#ifndef FASTSLOW_MAPSPEC_IO_HPP
#define FASTSLOW_MAPSPEC_IO_HPP

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fastslow/model.hpp"

namespace fsm {

/// Parses the line-oriented map-spec format:
///
///   name <text>            optional
///   description <text>     optional
///   case <label>           optional declared singularity case
///   dims <n> <k>
///   order <r>
///   base <x1> ... <xn>
///   [N i j]  [f i]  [G i]  sections, 1-based
///   e1 ... em : coef       monomial lines (m = n for N and f, n + 1 for G with eps last)
///
/// `#` starts a comment. Every section must be present and nonempty; write `0 ... 0 : 0` for a
/// zero component. The result is validated, including the full-column-rank check on N.
FastSlowMapSpec parse_mapspec(std::string_view text);
FastSlowMapSpec load_mapspec(const std::string& path);

/// Inverse of parse_mapspec; coefficients are written with 17 significant digits.
std::string emit_mapspec(const FastSlowMapSpec& spec);

/// A polynomial vector field V(z) as written by `embed`: same line format, one `[V i]` section
/// per component, `field <m>` in place of `dims`. For extended fields the last variable is eps.
struct FieldFile {
  std::string name;
  int order = 0;
  VectorXd base_point;
  JetVectord V;
};

FieldFile parse_field(std::string_view text);
FieldFile load_field(const std::string& path);
std::string emit_field(const FieldFile& field);

/// Full-precision decimal text of a double that reads back to the same value.
std::string format_double(double x);

/// Column-typed CSV table with a `#` provenance header.
class ReportTable {
 public:
  using Cell = std::variant<long long, double, std::string>;

  explicit ReportTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_provenance(std::string line) { provenance_.push_back(std::move(line)); }
  void add_row(std::vector<Cell> row);
  std::size_t rows() const { return rows_.size(); }
  std::string to_csv() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> provenance_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace fsm

#endif
