#include "fastslow/mapspec_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace fsm {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg);
}

int to_int(std::string_view s, int line, const char* what) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(line, std::string("malformed ") + what + " '" + std::string(s) + "'");
  return v;
}

double to_double(std::string_view s, int line, const char* what) {
  // strtod accepts the exponent and hex forms emitted by other tools; require full consumption.
  const std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size()) fail(line, std::string("malformed ") + what + " '" + str + "'");
  return v;
}

struct SectionKey {
  char kind = 0;  // 'N', 'f' or 'G'
  int i = 0;
  int j = 0;
  auto operator<=>(const SectionKey&) const = default;
};

std::string describe(const SectionKey& k) {
  std::string s = std::string(1, k.kind) + " " + std::to_string(k.i);
  if (k.kind == 'N') s += " " + std::to_string(k.j);
  return s;
}

}  // namespace

FastSlowMapSpec parse_mapspec(std::string_view text) {
  FastSlowMapSpec spec;
  std::optional<std::pair<int, int>> dims;
  std::optional<int> order;
  std::optional<std::vector<double>> base;
  std::map<SectionKey, Jetd> sections;
  std::map<SectionKey, std::set<MultiIndex>> seen;
  std::optional<SectionKey> current;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      const auto parts = split_ws(line.substr(1, line.size() - 2));
      if (!dims || !order) fail(line_no, "dims and order must precede the first section");
      const int n = dims->first, p = n - dims->second;
      SectionKey key;
      if (parts.size() == 3 && parts[0] == "N") {
        key = {'N', to_int(parts[1], line_no, "row index"), to_int(parts[2], line_no, "column index")};
        if (key.i < 1 || key.i > n || key.j < 1 || key.j > p) fail(line_no, "N index out of range");
      } else if (parts.size() == 2 && (parts[0] == "f" || parts[0] == "G")) {
        key = {parts[0][0], to_int(parts[1], line_no, "component index"), 0};
        const int top = key.kind == 'f' ? p : n;
        if (key.i < 1 || key.i > top) fail(line_no, describe(key) + " index out of range");
      } else {
        fail(line_no, "unknown section '" + std::string(line) + "'");
      }
      if (sections.count(key)) fail(line_no, "duplicate section " + describe(key));
      const int nv = key.kind == 'G' ? n + 1 : n;
      sections.emplace(key, Jetd(nv, *order));
      seen[key];
      current = key;
      continue;
    }

    if (const auto colon = line.find(':'); colon != std::string_view::npos && current) {
      auto& jet = sections.at(*current);
      const auto exps = split_ws(line.substr(0, colon));
      const auto coef = trim(line.substr(colon + 1));
      if (static_cast<int>(exps.size()) != jet.num_vars())
        fail(line_no, "expected " + std::to_string(jet.num_vars()) + " exponents in section " + describe(*current));
      MultiIndex mi(jet.num_vars());
      for (int v = 0; v < jet.num_vars(); ++v) {
        const int e = to_int(exps[static_cast<std::size_t>(v)], line_no, "exponent");
        if (e < 0) fail(line_no, "negative exponent");
        if (e > *order) fail(line_no, "monomial degree exceeds the declared order");
        mi.set(v, e);
      }
      if (mi.degree() > *order) fail(line_no, "monomial degree exceeds the declared order");
      if (!seen[*current].insert(mi).second) fail(line_no, "duplicate term " + mi.to_string() + " in section " + describe(*current));
      jet.set_coeff(mi, to_double(coef, line_no, "coefficient"));
      continue;
    }

    const auto parts = split_ws(line);
    const std::string_view key = parts.front();
    const std::string_view rest = trim(line.substr(key.size()));
    if (current) fail(line_no, "malformed line '" + std::string(line) + "' inside section " + describe(*current));
    if (key == "name") {
      spec.name = std::string(rest);
    } else if (key == "description") {
      spec.description = std::string(rest);
    } else if (key == "case") {
      spec.declared_case = std::string(rest);
    } else if (key == "dims") {
      if (parts.size() != 3) fail(line_no, "dims expects two integers");
      dims = {to_int(parts[1], line_no, "n"), to_int(parts[2], line_no, "k")};
      if (dims->first < 1 || dims->second < 0 || dims->second >= dims->first) fail(line_no, "dims must satisfy 0 <= k < n");
      if (dims->first + 1 > kMaxJetVars) fail(line_no, "dimension too large");
    } else if (key == "order") {
      if (parts.size() != 2) fail(line_no, "order expects one integer");
      order = to_int(parts[1], line_no, "order");
      if (*order < 1 || *order > 32) fail(line_no, "order out of range");
    } else if (key == "base") {
      base.emplace();
      for (std::size_t i = 1; i < parts.size(); ++i) base->push_back(to_double(parts[i], line_no, "base coordinate"));
    } else {
      fail(line_no, "malformed line '" + std::string(line) + "'");
    }
  }

  if (!dims) throw ParseError("missing dims line");
  if (!order) throw ParseError("missing order line");
  if (!base) throw ParseError("missing base line");
  const int n = dims->first, k = dims->second, p = n - k;
  if (static_cast<int>(base->size()) != n) throw ParseError("base expects " + std::to_string(n) + " coordinates");

  auto take = [&](const SectionKey& key) {
    auto it = sections.find(key);
    if (it == sections.end() || seen[key].empty()) throw ParseError("missing section " + describe(key));
    return it->second;
  };
  spec.n = n;
  spec.k = k;
  spec.order = *order;
  spec.base_point = Eigen::Map<const VectorXd>(base->data(), n);
  spec.N.assign(static_cast<std::size_t>(n), {});
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= p; ++j) spec.N[static_cast<std::size_t>(i - 1)].push_back(take({'N', i, j}));
  for (int i = 1; i <= p; ++i) spec.f.push_back(take({'f', i, 0}));
  for (int i = 1; i <= n; ++i) spec.G.push_back(take({'G', i, 0}));
  spec.validate();
  return spec;
}

FastSlowMapSpec load_mapspec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open map spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mapspec(ss.str());
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string emit_mapspec(const FastSlowMapSpec& spec) {
  std::ostringstream os;
  if (!spec.name.empty()) os << "name " << spec.name << "\n";
  if (!spec.description.empty()) os << "description " << spec.description << "\n";
  if (!spec.declared_case.empty()) os << "case " << spec.declared_case << "\n";
  os << "dims " << spec.n << " " << spec.k << "\n";
  os << "order " << spec.order << "\n";
  os << "base";
  for (Eigen::Index i = 0; i < spec.base_point.size(); ++i) os << " " << format_double(spec.base_point(i));
  os << "\n";
  auto section = [&](const std::string& header, const Jetd& j) {
    os << "[" << header << "]\n";
    auto line = [&](const MultiIndex& mi, double c) {
      for (int v = 0; v < mi.num_vars(); ++v) os << (v ? " " : "") << mi[v];
      os << " : " << format_double(c) << "\n";
    };
    if (j.is_zero()) line(MultiIndex(j.num_vars()), 0.0);
    for (const auto& [mi, c] : j.terms()) line(mi, c);
  };
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.fast_dim(); ++j)
      section("N " + std::to_string(i + 1) + " " + std::to_string(j + 1), spec.N[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  for (int i = 0; i < spec.fast_dim(); ++i) section("f " + std::to_string(i + 1), spec.f[static_cast<std::size_t>(i)]);
  for (int i = 0; i < spec.n; ++i) section("G " + std::to_string(i + 1), spec.G[static_cast<std::size_t>(i)]);
  return os.str();
}

FieldFile parse_field(std::string_view text) {
  FieldFile out;
  std::optional<int> m, order;
  std::optional<std::vector<double>> base;
  std::map<int, Jetd> comps;
  std::map<int, std::set<MultiIndex>> seen;
  std::optional<int> current;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto parts = split_ws(line);

    if (line.front() == '[') {
      const auto h = split_ws(line.substr(1, line.size() - 2));
      if (line.back() != ']' || h.size() != 2 || h[0] != "V") fail(line_no, "expected a [V i] section header");
      if (!m || !order) fail(line_no, "field and order must precede the first section");
      const int i = to_int(h[1], line_no, "component index");
      if (i < 1 || i > *m) fail(line_no, "V index out of range");
      if (comps.count(i)) fail(line_no, "duplicate section V " + std::to_string(i));
      comps.emplace(i, Jetd(*m, *order));
      seen[i];
      current = i;
    } else if (const auto colon = line.find(':'); colon != std::string_view::npos && current) {
      const auto exps = split_ws(line.substr(0, colon));
      if (static_cast<int>(exps.size()) != *m) fail(line_no, "expected " + std::to_string(*m) + " exponents");
      MultiIndex mi(*m);
      for (int v = 0; v < *m; ++v) {
        const int e = to_int(exps[static_cast<std::size_t>(v)], line_no, "exponent");
        if (e < 0 || e > *order) fail(line_no, "exponent out of range");
        mi.set(v, e);
      }
      if (mi.degree() > *order) fail(line_no, "monomial degree exceeds the declared order");
      if (!seen[*current].insert(mi).second) fail(line_no, "duplicate term " + mi.to_string());
      comps.at(*current).set_coeff(mi, to_double(trim(line.substr(colon + 1)), line_no, "coefficient"));
    } else if (current) {
      fail(line_no, "malformed line '" + std::string(line) + "' inside section V " + std::to_string(*current));
    } else if (parts[0] == "name") {
      out.name = std::string(trim(line.substr(4)));
    } else if (parts[0] == "field" && parts.size() == 2) {
      m = to_int(parts[1], line_no, "field dimension");
      if (*m < 1 || *m > kMaxJetVars) fail(line_no, "field dimension out of range");
    } else if (parts[0] == "order" && parts.size() == 2) {
      order = to_int(parts[1], line_no, "order");
      if (*order < 1 || *order > 32) fail(line_no, "order out of range");
    } else if (parts[0] == "base") {
      base.emplace();
      for (std::size_t i = 1; i < parts.size(); ++i) base->push_back(to_double(parts[i], line_no, "base coordinate"));
    } else {
      fail(line_no, "malformed line '" + std::string(line) + "'");
    }
  }
  if (!m) throw ParseError("missing field line");
  if (!order) throw ParseError("missing order line");
  if (!base) throw ParseError("missing base line");
  if (static_cast<int>(base->size()) != *m) throw ParseError("base expects " + std::to_string(*m) + " coordinates");
  out.order = *order;
  out.base_point = Eigen::Map<const VectorXd>(base->data(), *m);
  for (int i = 1; i <= *m; ++i) {
    if (!comps.count(i) || seen[i].empty()) throw ParseError("missing section V " + std::to_string(i));
    out.V.push_back(comps.at(i));
  }
  return out;
}

FieldFile load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open field file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_field(ss.str());
}

std::string emit_field(const FieldFile& field) {
  const int m = static_cast<int>(field.V.size());
  if (field.base_point.size() != m) throw StructuralError("field base point has the wrong dimension");
  std::ostringstream os;
  if (!field.name.empty()) os << "name " << field.name << "\n";
  os << "field " << m << "\n" << "order " << field.order << "\n" << "base";
  for (Eigen::Index i = 0; i < m; ++i) os << " " << format_double(field.base_point(i));
  os << "\n";
  for (int i = 0; i < m; ++i) {
    const Jetd& j = field.V[static_cast<std::size_t>(i)];
    if (j.num_vars() != m) throw StructuralError("field component has the wrong number of variables");
    os << "[V " << i + 1 << "]\n";
    auto line = [&](const MultiIndex& mi, double c) {
      for (int v = 0; v < m; ++v) os << (v ? " " : "") << mi[v];
      os << " : " << format_double(c) << "\n";
    };
    if (j.is_zero()) line(MultiIndex(m), 0.0);
    for (const auto& [mi, c] : j.terms()) line(mi, c);
  }
  return os.str();
}

void ReportTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) throw StructuralError("report row has the wrong number of cells");
  rows_.push_back(std::move(row));
}

std::string ReportTable::to_csv() const {
  std::ostringstream os;
  for (const auto& p : provenance_) os << "# " << p << "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
  os << "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) os << format_double(v);
            else os << v;
          },
          row[i]);
    }
    os << "\n";
  }
  return os.str();
}

void ReportTable::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write '" + path + "'");
  out << to_csv();
}

}  // namespace fsm
