#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dwellcert/certificate_io.hpp"
#include "dwellcert/cli.hpp"

using namespace dwellcert;

namespace {

const std::string kData = DWELLCERT_DATA_DIR;
const std::string kGolden = DWELLCERT_GOLDEN_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"dwellcert"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : store) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in, "missing " << path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "path: type" lines; arrays contribute the schema of their first element.
void schema(const Json& j, const std::string& path, std::string& acc) {
  if (j.is_object()) {
    acc += path + ": object\n";
    for (auto it = j.begin(); it != j.end(); ++it) schema(it.value(), path + "." + it.key(), acc);
  } else if (j.is_array()) {
    acc += path + ": array\n";
    if (!j.empty()) schema(j.front(), path + "[]", acc);
  } else {
    acc += path + ": " + (j.is_number() ? "number" : j.type_name()) + "\n";
  }
}

std::string schema(const Json& j) {
  std::string acc;
  schema(j, "$", acc);
  return acc;
}

std::string drop_lines_containing(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.find(needle) == std::string::npos) out += line + "\n";
  return out;
}

// Drops the last CSV column (wall time).
std::string drop_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n') + 1); }

}  // namespace

TEST_CASE("exit codes of certify") {
  const std::string ex1 = kData + "/example1.lpv";
  CHECK(run({"certify", "--mode", "quadratic", ex1, "--rho-max", "3.8"}).code == kExitOk);
  CHECK(run({"certify", "--mode", "quadratic", ex1, "--rho-max", "3.9"}).code == kExitInfeasible);
  CHECK(run({"certify", "--mode", "quadratic", kData + "/missing.lpv"}).code == kExitUsage);
  CHECK(run({"certify", "--mode", "periodic", ex1}).code == kExitUsage);
  CHECK(run({"certify", "--mode", "minimum", ex1}).code == kExitUsage);  // no --dwell
  CHECK(run({"certify", "--mode", "quadratic", ex1, "--const", "omega=1"}).code == kExitUsage);
  CHECK(run({"certify", ex1}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("certify document schema is pinned") {
  const Run r = run({"certify", "--mode", "minimum", kData + "/example1.lpv", "--dwell", "1"});
  REQUIRE(r.code == kExitOk);
  const Json doc = Json::parse(r.out);
  CHECK(schema(doc) == slurp(kGolden + "/certify_schema.txt"));
  CHECK(doc["certificate"]["verification"]["passed"] == true);
}

TEST_CASE("search document schema is pinned") {
  const Run r = run({"search", "--mode", "constant", kData + "/example1.lpv", "--nu", "0.5"});
  REQUIRE(r.code != kExitUsage);
  CHECK(schema(Json::parse(r.out)) == slurp(kGolden + "/search_schema.txt"));
  CHECK(run({"search", "--mode", "robust", kData + "/example1.lpv"}).code == kExitUsage);
}

TEST_CASE("reruns are byte-identical apart from the wall time") {
  const auto a = run({"certify", "--mode", "constant", kData + "/example1.lpv", "--dwell", "0.8"});
  const auto b = run({"certify", "--mode", "constant", kData + "/example1.lpv", "--dwell", "0.8"});
  CHECK(drop_lines_containing(a.out, "\"wall_seconds\"") == drop_lines_containing(b.out, "\"wall_seconds\""));
  // Exactly one line is dropped.
  const std::string kept = drop_lines_containing(a.out, "\"wall_seconds\"");
  CHECK(std::count(kept.begin(), kept.end(), '\n') + 1 == std::count(a.out.begin(), a.out.end(), '\n'));
}

TEST_CASE("sweep keeps input order under concurrency") {
  const std::string ex1 = kData + "/example1.lpv";
  const Run serial = run({"sweep", "--mode", "minimum", "--axis", "nu", "--values", "0,0.25,0.5,1", ex1});
  const Run parallel =
      run({"sweep", "--mode", "minimum", "--axis", "nu", "--values", "0,0.25,0.5,1", "--jobs", "3", ex1});
  REQUIRE(serial.code == kExitOk);
  CHECK(parallel.code == kExitOk);
  CHECK(first_line(serial.out) == slurp(kGolden + "/sweep_header.csv"));
  CHECK(drop_last_column(serial.out) == drop_last_column(parallel.out));
  std::istringstream rows(serial.out);
  std::string line;
  std::getline(rows, line);
  std::vector<std::string> values;
  while (std::getline(rows, line)) values.push_back(line.substr(3, line.find(',', 3) - 3));
  CHECK(values == std::vector<std::string>{"0", "0.25", "0.5", "1"});

  CHECK(run({"sweep", "--mode", "minimum", "--axis", "nu", "--values", "0.5,0.1", ex1}).code == kExitUsage);
  CHECK(run({"sweep", "--mode", "minimum", "--axis", "omega", "--values", "1", ex1}).code == kExitUsage);
}

TEST_CASE("single-value sweep agrees with search") {
  const std::string ex1 = kData + "/example1.lpv";
  const Run sweep = run({"sweep", "--mode", "constant", "--axis", "nu", "--values", "0.25", ex1});
  const Run search = run({"search", "--mode", "constant", "--nu", "0.25", ex1});
  const Json doc = Json::parse(search.out);
  std::istringstream rows(sweep.out);
  std::string line;
  std::getline(rows, line);
  std::getline(rows, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() == 15);
  CHECK(cells[4] == doc["result"]["status"].get<std::string>());
  CHECK(std::stod(cells[5]) == doctest::Approx(doc["result"]["certified"].get<double>()).epsilon(1e-9));
}

TEST_CASE("simulate audits a self-produced certificate") {
  const std::string ex1 = kData + "/example1.lpv";
  const std::string cert = "cli_test_cert.json";
  const std::string trace = "cli_test_trace.csv";
  REQUIRE(run({"certify", "--mode", "minimum", ex1, "--dwell", "1", "--out", cert}).code == kExitOk);
  const Run ok = run({"simulate", ex1, "--cert", cert, "--seed", "1", "--out", trace});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("audit passed") != std::string::npos);
  std::string keys;
  std::istringstream in(ok.out);
  for (std::string line; std::getline(in, line);) keys += line.substr(0, line.find(' ')) + "\n";
  CHECK(keys == slurp(kGolden + "/simulate_keys.txt"));
  CHECK(first_line(slurp(trace)) == "t,x1,x2,rho1,tau,V\n");

  // Corrupt the certificate: S -> -S.
  Json doc = read_json_file(cert);
  for (auto& e : doc["certificate"]["s"]["entries"])
    for (auto& t : e["terms"]) t["coefficient"] = -t["coefficient"].get<double>();
  write_json_file(cert, doc);
  const Run bad = run({"simulate", ex1, "--cert", cert, "--horizon", "3"});
  CHECK(bad.code == kExitInfeasible);
  CHECK(bad.out.find("violation nonpositive") != std::string::npos);

  CHECK(run({"simulate", kData + "/example2.lpv", "--cert", cert}).code == kExitUsage);
  CHECK(run({"simulate", ex1, "--cert", cert, "--family", "constant"}).code == kExitUsage);
  CHECK(run({"simulate", ex1, "--cert", "no-such-file.json"}).code == kExitUsage);
  std::remove(cert.c_str());
  std::remove(trace.c_str());
}

TEST_CASE("constant family trace jumps at multiples of the dwell-time") {
  const std::string ex1 = kData + "/example1.lpv";
  const std::string cert = "cli_test_cc.json";
  const std::string trace = "cli_test_cc.csv";
  REQUIRE(run({"certify", "--mode", "constant", ex1, "--dwell", "1", "--out", cert}).code == kExitOk);
  CHECK(run({"simulate", ex1, "--cert", cert, "--family", "constant", "--horizon", "5", "--out", trace}).code ==
        kExitOk);
  std::istringstream in(slurp(trace));
  std::string line;
  std::getline(in, line);
  std::vector<double> resets;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (std::stod(cells[4]) == 0.0) resets.push_back(std::stod(cells[0]));
  }
  CHECK(resets == std::vector<double>{0, 1, 2, 3, 4});
  std::remove(cert.c_str());
  std::remove(trace.c_str());
}

TEST_CASE("dump-sdp writes a readable problem") {
  const Run r = run({"dump-sdp", "--mode", "constant", kData + "/example1.lpv", "--dwell", "1"});
  REQUIRE(r.code == kExitOk);
  std::istringstream in(r.out);
  const sdp::Problem p = sdp::read_sparse(in);
  CHECK(!p.blocks.empty());
  CHECK(!p.constraints.empty());
  CHECK(first_line(r.out) == "dwellcert-sdp 1\n");
}
