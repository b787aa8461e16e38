#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "dwellcert/lpv_model.hpp"

namespace dwellcert {

namespace {

struct Line {
  int number;
  int column;  // 1-based column of text[0] in the source line
  std::string text;
};

std::string trim(const std::string& s, int* lead = nullptr) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    if (lead) *lead = 0;
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  if (lead) *lead = static_cast<int>(b);
  return s.substr(b, e - b + 1);
}

// Cuts `line` at `sep`, returning trimmed pieces with their columns.
std::vector<Line> split(const Line& line, char sep) {
  std::vector<Line> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = line.text.find(sep, start);
    const std::string piece = line.text.substr(start, at == std::string::npos ? std::string::npos : at - start);
    int lead = 0;
    out.push_back({line.number, line.column + static_cast<int>(start) + 0, trim(piece, &lead)});
    out.back().column += lead;
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return out;
}

std::vector<Line> split_ws(const Line& line) {
  std::vector<Line> out;
  std::size_t i = 0;
  const std::string& t = line.text;
  while (i < t.size()) {
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    if (i == t.size()) break;
    const std::size_t s = i;
    while (i < t.size() && !std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    out.push_back({line.number, line.column + static_cast<int>(s), t.substr(s, i - s)});
  }
  return out;
}

Polynomial poly_at(const Line& l, const Constants& constants) {
  try {
    return parse_polynomial(l.text, constants, l.number);
  } catch (const ParseError& e) {
    // Re-anchor the column from the expression to the source line.
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    throw ParseError(msg, l.number, l.column + e.column() - 1);
  }
}

double constant_at(const Line& l, const Constants& constants) {
  const Polynomial p = poly_at(l, constants);
  if (p.degree() > 0) throw ParseError("expected a constant, got '" + l.text + "'", l.number, l.column);
  return p.coefficient(Monomial());
}

// Splits "key = value" or "key: value".
bool key_value(const Line& l, char sep, std::string* key, Line* value) {
  const auto at = l.text.find(sep);
  if (at == std::string::npos) return false;
  *key = trim(l.text.substr(0, at));
  int lead = 0;
  const std::string rest = l.text.substr(at + 1);
  value->text = trim(rest, &lead);
  value->number = l.number;
  value->column = l.column + static_cast<int>(at) + 1 + lead;
  return true;
}

void check_vars(const Polynomial& p, const std::set<VarId>& allowed, const std::string& where) {
  for (VarId v : p.variables())
    if (!allowed.count(v))
      throw ParseError("unknown variable '" + v.name() + "' in " + where, 0, 0);
}

std::string num(double v) { return to_string(Polynomial(v)); }

}  // namespace

std::vector<VarId> ParameterSet::vars() const {
  std::vector<VarId> out;
  for (int i = 1; i <= count; ++i) out.push_back(VarId::named("rho" + std::to_string(i)));
  return out;
}

bool ParameterSet::contains(const Eigen::VectorXd& theta, double tol) const {
  const Assignment a = parameter_assignment(theta);
  for (const Polynomial& g : inequalities)
    if (g.evaluate(a) < -tol) return false;
  for (const Polynomial& h : equalities)
    if (std::abs(h.evaluate(a)) > tol) return false;
  return true;
}

std::vector<std::vector<Polynomial>> DerivativeModel::vertex_maps(int count) const {
  std::vector<std::vector<Polynomial>> out;
  auto push_unique = [&](std::vector<Polynomial> m) {
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(std::move(m));
  };
  if (kind == Kind::kMaps) {
    for (const auto& m : maps) push_unique(m);
    return out;
  }
  const int nb = static_cast<int>(box.size());
  if (nb != count) throw ModelError("derivative box has wrong dimension");
  for (long mask = 0; mask < (1L << nb); ++mask) {
    std::vector<Polynomial> m;
    for (int i = 0; i < nb; ++i) m.emplace_back((mask >> i) & 1 ? box[i].hi : box[i].lo);
    push_unique(std::move(m));
  }
  return out;
}

Assignment parameter_assignment(const Eigen::VectorXd& theta) {
  Assignment a;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    a[VarId::named("rho" + std::to_string(i + 1))] = theta[i];
  return a;
}

LpvSystem parse_system(std::string_view text, const Constants& overrides) {
  LpvSystem sys;
  Constants constants;
  std::set<std::string> used_overrides;
  std::string section;
  bool have_n = false, have_count = false;
  std::vector<std::vector<Polynomial>> rows;
  bool have_box_derivs = false, have_map_derivs = false;
  int last_line = 0;

  std::istringstream in{std::string(text)};
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    last_line = number;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    int lead = 0;
    const std::string t = trim(raw, &lead);
    if (t.empty()) continue;
    const Line line{number, lead + 1, t};

    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("malformed section header", number, line.column);
      section = t.substr(1, t.size() - 2);
      static const std::set<std::string> known{"system",     "constants",   "matrix",
                                               "parameters", "inequalities", "equalities",
                                               "derivatives"};
      if (!known.count(section)) throw ParseError("unknown section [" + section + "]", number, line.column);
      if (section != "system" && section != "constants" && !have_n)
        throw ParseError("[system] with n must come first", number, line.column);
      continue;
    }
    if (section.empty()) throw ParseError("content outside of a section", number, line.column);

    std::string key;
    Line value;
    if (section == "system") {
      if (!key_value(line, '=', &key, &value)) throw ParseError("expected 'key = value'", number, line.column);
      if (key == "n") {
        const double v = constant_at(value, constants);
        if (v < 1 || v != static_cast<int>(v))
          throw ParseError("n must be a positive integer", number, value.column);
        sys.n = static_cast<int>(v);
        have_n = true;
      } else if (key == "label") {
        sys.label = value.text;
      } else {
        throw ParseError("unknown key '" + key + "' in [system]", number, line.column);
      }
    } else if (section == "constants") {
      if (!key_value(line, '=', &key, &value)) throw ParseError("expected 'name = value'", number, line.column);
      static const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
      if (!std::regex_match(key, ident)) throw ParseError("bad constant name '" + key + "'", number, line.column);
      if (key == "tau" || std::regex_match(key, std::regex("(rho|eta)[0-9]+")))
        throw ParseError("constant '" + key + "' shadows a variable", number, line.column);
      double v = constant_at(value, constants);
      if (auto it = overrides.find(key); it != overrides.end()) {
        v = it->second;
        used_overrides.insert(key);
      }
      constants[key] = v;
    } else if (section == "matrix") {
      std::vector<Polynomial> row;
      for (const Line& cell : split(line, ',')) row.push_back(poly_at(cell, constants));
      if (static_cast<int>(row.size()) != sys.n)
        throw ParseError("matrix row has " + std::to_string(row.size()) + " entries, expected " +
                             std::to_string(sys.n),
                         number, line.column);
      rows.push_back(std::move(row));
    } else if (section == "parameters") {
      if (key_value(line, '=', &key, &value) && key == "N") {
        const double v = constant_at(value, constants);
        if (v < 0 || v != static_cast<int>(v))
          throw ParseError("N must be a non-negative integer", number, value.column);
        sys.params.count = static_cast<int>(v);
        have_count = true;
      } else if (key_value(line, ':', &key, &value)) {
        const int expected = static_cast<int>(sys.params.box.size()) + 1;
        if (key != "rho" + std::to_string(expected))
          throw ParseError("expected interval for rho" + std::to_string(expected), number, line.column);
        const auto parts = split_ws(value);
        if (parts.size() != 2) throw ParseError("expected 'lo hi'", number, value.column);
        const Interval iv{constant_at(parts[0], constants), constant_at(parts[1], constants)};
        if (!(iv.lo <= iv.hi)) throw ParseError("empty interval", number, value.column);
        sys.params.box.push_back(iv);
      } else {
        throw ParseError("expected 'N = k' or 'rhoI: lo hi'", number, line.column);
      }
    } else if (section == "inequalities") {
      sys.params.inequalities.push_back(poly_at(line, constants));
    } else if (section == "equalities") {
      sys.params.equalities.push_back(poly_at(line, constants));
    } else if (section == "derivatives") {
      if (!key_value(line, ':', &key, &value)) throw ParseError("expected 'box:' or 'map:'", number, line.column);
      if (key == "box") {
        const auto parts = split_ws(value);
        if (parts.size() != 2) throw ParseError("expected 'box: lo hi'", number, value.column);
        const Interval iv{constant_at(parts[0], constants), constant_at(parts[1], constants)};
        if (!(iv.lo <= iv.hi)) throw ParseError("empty interval", number, value.column);
        sys.derivs.box.push_back(iv);
        have_box_derivs = true;
      } else if (key == "map") {
        std::vector<Polynomial> m;
        for (const Line& cell : split(value, ',')) m.push_back(poly_at(cell, constants));
        sys.derivs.maps.push_back(std::move(m));
        have_map_derivs = true;
      } else {
        throw ParseError("expected 'box:' or 'map:'", number, line.column);
      }
      if (have_box_derivs && have_map_derivs)
        throw ParseError("cannot mix 'box:' and 'map:' derivative lines", number, line.column);
    }
  }

  for (const auto& [name, v] : overrides)
    if (!used_overrides.count(name))
      throw ModelError("system file declares no constant '" + name + "' to override");
  if (!have_n) throw ParseError("missing [system] n", last_line, 0);
  if (static_cast<int>(rows.size()) != sys.n)
    throw ParseError("[matrix] has " + std::to_string(rows.size()) + " rows, expected " +
                         std::to_string(sys.n),
                     last_line, 0);
  if (!have_count) sys.params.count = static_cast<int>(sys.params.box.size());
  if (static_cast<int>(sys.params.box.size()) != sys.params.count)
    throw ParseError("[parameters] lists " + std::to_string(sys.params.box.size()) +
                         " intervals for N = " + std::to_string(sys.params.count),
                     last_line, 0);
  sys.a = PolyMatrix(sys.n, sys.n);
  for (int i = 0; i < sys.n; ++i)
    for (int j = 0; j < sys.n; ++j) sys.a(i, j) = rows[i][j];

  const int count = sys.params.count;
  sys.derivs.kind = have_map_derivs ? DerivativeModel::Kind::kMaps : DerivativeModel::Kind::kBox;
  if (sys.derivs.kind == DerivativeModel::Kind::kBox) {
    if (!have_box_derivs && count > 0) throw ParseError("missing [derivatives]", last_line, 0);
    if (static_cast<int>(sys.derivs.box.size()) != count)
      throw ParseError("[derivatives] has " + std::to_string(sys.derivs.box.size()) +
                           " box lines for N = " + std::to_string(count),
                       last_line, 0);
  } else {
    for (const auto& m : sys.derivs.maps)
      if (static_cast<int>(m.size()) != count)
        throw ParseError("vertex map has " + std::to_string(m.size()) + " components for N = " +
                             std::to_string(count),
                         last_line, 0);
  }

  const auto pv = sys.params.vars();
  const std::set<VarId> allowed(pv.begin(), pv.end());
  for (int i = 0; i < sys.n; ++i)
    for (int j = 0; j < sys.n; ++j) check_vars(sys.a(i, j), allowed, "[matrix]");
  for (const auto& g : sys.params.inequalities) check_vars(g, allowed, "[inequalities]");
  for (const auto& h : sys.params.equalities) check_vars(h, allowed, "[equalities]");
  for (const auto& m : sys.derivs.maps)
    for (const auto& c : m) check_vars(c, allowed, "[derivatives]");

  // Sampled checks: the set is nonempty and the box hull encloses it.
  std::mt19937_64 rng(0);
  (void)sample_parameter(sys.params, rng);
  if (sys.params.equalities.empty() && count > 0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
      Eigen::VectorXd th(count);
      bool outside = false;
      for (int i = 0; i < count; ++i) {
        const Interval& b = sys.params.box[i];
        const double w = std::max(b.hi - b.lo, 1e-3);
        th[i] = b.lo - 0.5 * w + 2.0 * w * u(rng);
        outside |= th[i] < b.lo - 1e-9 || th[i] > b.hi + 1e-9;
      }
      if (outside && !sys.params.inequalities.empty() && sys.params.contains(th, 0.0))
        throw ModelError("the parameter set extends beyond its box hull");
    }
  }
  return sys;
}

LpvSystem load_system(const std::string& path, const Constants& overrides) {
  std::ifstream f(path);
  if (!f) throw ModelError("cannot open system file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_system(ss.str(), overrides);
}

std::string print_system(const LpvSystem& sys) {
  std::ostringstream os;
  os << "[system]\nn = " << sys.n << "\nlabel = " << sys.label << "\n\n[matrix]\n";
  for (int i = 0; i < sys.n; ++i) {
    for (int j = 0; j < sys.n; ++j) os << (j ? ", " : "") << to_string(sys.a(i, j));
    os << "\n";
  }
  os << "\n[parameters]\nN = " << sys.params.count << "\n";
  for (int i = 0; i < sys.params.count; ++i)
    os << "rho" << i + 1 << ": " << num(sys.params.box[i].lo) << " " << num(sys.params.box[i].hi) << "\n";
  os << "\n[inequalities]\n";
  for (const auto& g : sys.params.inequalities) os << to_string(g) << "\n";
  os << "\n[equalities]\n";
  for (const auto& h : sys.params.equalities) os << to_string(h) << "\n";
  os << "\n[derivatives]\n";
  if (sys.derivs.kind == DerivativeModel::Kind::kBox) {
    for (const auto& b : sys.derivs.box) os << "box: " << num(b.lo) << " " << num(b.hi) << "\n";
  } else {
    for (const auto& m : sys.derivs.maps) {
      os << "map: ";
      for (std::size_t k = 0; k < m.size(); ++k) os << (k ? ", " : "") << to_string(m[k]);
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace dwellcert
