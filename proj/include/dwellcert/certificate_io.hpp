#pragma once

// JSON documents for certificates and dwell-time search results
// (docs/formats.md). Timings are left out so that reruns are byte-identical.

#include <string>

#include "json.hpp"

#include "dwellcert/stability.hpp"

namespace dwellcert {

using Json = nlohmann::ordered_json;

/// {"rows", "cols", "variables": [...], "entries": [{"row", "col",
/// "terms": [{"exponents": [...], "coefficient"}]}]}; zero entries omitted.
Json poly_matrix_to_json(const PolyMatrix& m);
PolyMatrix poly_matrix_from_json(const Json& j);

Json to_json(const VerificationReport& r);
Json to_json(const SolverStats& s);
Json to_json(const Certificate& c);
Json to_json(const Probe& p);
Json to_json(const DwellTimeResult& r);

/// Inverse of to_json(Certificate). Throws std::runtime_error on schema
/// violations (nlohmann exceptions are translated).
Certificate certificate_from_json(const Json& j);

void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

}  // namespace dwellcert
