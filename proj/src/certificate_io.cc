#include "dwellcert/certificate_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dwellcert {

namespace {

// JSON has no infinities; they appear in empty verification reports.
Json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double number_or(const Json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

}  // namespace

Json poly_matrix_to_json(const PolyMatrix& m) {
  const std::vector<VarId> vars = m.variables();
  Json names = Json::array();
  for (VarId v : vars) names.push_back(v.name());
  Json entries = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (m(i, j).is_zero()) continue;
      Json terms = Json::array();
      for (const auto& [mono, c] : m(i, j).terms()) {
        Json exps = Json::array();
        for (VarId v : vars) exps.push_back(mono.exponent(v));
        terms.push_back({{"exponents", exps}, {"coefficient", c}});
      }
      entries.push_back({{"row", i}, {"col", j}, {"terms", terms}});
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"variables", names}, {"entries", entries}};
}

PolyMatrix poly_matrix_from_json(const Json& j) {
  PolyMatrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  std::vector<VarId> vars;
  for (const auto& name : j.at("variables")) vars.push_back(VarId::named(name.get<std::string>()));
  for (const auto& e : j.at("entries")) {
    const int r = e.at("row").get<int>();
    const int c = e.at("col").get<int>();
    if (r < 0 || r >= m.rows() || c < 0 || c >= m.cols())
      throw std::runtime_error("matrix entry out of range");
    for (const auto& t : e.at("terms")) {
      const auto& exps = t.at("exponents");
      if (exps.size() != vars.size()) throw std::runtime_error("exponent vector has the wrong length");
      std::vector<Monomial::Factor> factors;
      for (std::size_t k = 0; k < vars.size(); ++k) {
        const int ex = exps[k].get<int>();
        if (ex < 0) throw std::runtime_error("negative exponent");
        factors.emplace_back(vars[k], ex);
      }
      m(r, c).add_term(Monomial(std::move(factors)), t.at("coefficient").get<double>());
    }
  }
  return m;
}

Json to_json(const VerificationReport& r) {
  return {{"passed", r.passed},
          {"failure", r.failure},
          {"flow_samples", r.flow_samples},
          {"flow_max_eigenvalue", number(r.flow_max_eigenvalue)},
          {"frozen_samples", r.frozen_samples},
          {"frozen_max_eigenvalue", number(r.frozen_max_eigenvalue)},
          {"jump_samples", r.jump_samples},
          {"jump_max_eigenvalue", number(r.jump_max_eigenvalue)},
          {"positivity_samples", r.positivity_samples},
          {"positivity_min_eigenvalue", number(r.positivity_min_eigenvalue)}};
}

Json to_json(const SolverStats& s) {
  return {{"status", sdp::to_string(s.status)},
          {"iterations", s.iterations},
          {"max_equality_violation", number(s.max_equality_violation)},
          {"min_psd_eigenvalue", number(s.min_psd_eigenvalue)},
          {"rows", s.rows},
          {"scalars", s.scalars},
          {"psd_blocks", s.psd_blocks},
          {"max_block", s.max_block},
          {"message", s.message}};
}

Json to_json(const Certificate& c) {
  Json j = {{"mode", to_string(c.mode)}};
  if (uses_dwell(c.mode)) j["dwell"] = c.dwell;
  j["degree"] = c.degree;
  j["epsilon"] = c.epsilon;
  j["s"] = poly_matrix_to_json(c.s);
  j["verification"] = to_json(c.verification);
  j["solver"] = to_json(c.stats);
  return j;
}

Json to_json(const Probe& p) {
  return {{"dwell", p.dwell},
          {"outcome", to_string(p.outcome)},
          {"iterations", p.stats.iterations},
          {"message", p.stats.message}};
}

Json to_json(const DwellTimeResult& r) {
  Json log = Json::array();
  for (const Probe& p : r.log) log.push_back(to_json(p));
  Json j = {{"status", to_string(r.status)},
            {"certified", r.certificate ? Json(r.certified) : Json(nullptr)},
            {"lower", r.lower},
            {"upper", r.upper},
            {"probes", log}};
  if (r.certificate) j["certificate"] = to_json(*r.certificate);
  return j;
}

Certificate certificate_from_json(const Json& j) {
  try {
    Certificate c;
    if (!parse_mode(j.at("mode").get<std::string>(), &c.mode))
      throw std::runtime_error("unknown mode '" + j.at("mode").get<std::string>() + "'");
    c.dwell = uses_dwell(c.mode) ? j.at("dwell").get<double>() : 0.0;
    c.degree = j.at("degree").get<int>();
    c.epsilon = j.at("epsilon").get<double>();
    c.s = poly_matrix_from_json(j.at("s"));
    if (c.s.rows() != c.s.cols()) throw std::runtime_error("certificate matrix is not square");
    if (j.contains("verification")) {
      const Json& v = j.at("verification");
      VerificationReport& r = c.verification;
      r.passed = v.value("passed", false);
      r.failure = v.value("failure", "");
      r.flow_samples = v.value("flow_samples", 0);
      r.flow_max_eigenvalue = number_or(v, "flow_max_eigenvalue", 0.0);
      r.frozen_samples = v.value("frozen_samples", 0);
      r.frozen_max_eigenvalue = number_or(v, "frozen_max_eigenvalue", 0.0);
      r.jump_samples = v.value("jump_samples", 0);
      r.jump_max_eigenvalue = number_or(v, "jump_max_eigenvalue", 0.0);
      r.positivity_samples = v.value("positivity_samples", 0);
      r.positivity_min_eigenvalue = number_or(v, "positivity_min_eigenvalue", 0.0);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed certificate: ") + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

}  // namespace dwellcert
