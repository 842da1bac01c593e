#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

// Driven end-to-end through the installed binary: every case shells out,
// captures stdout, and checks the exit status contract (0 ok, 2 bad
// input, 3 indeterminate solver).

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + NORMLAB_CLI_PATH + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) res.out.append(buf, got);
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  REQUIRE(out.good());
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kPathMetric = "{\"n\": 3, \"d\": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}";
const char* kBadMetric = "{\"n\": 3, \"d\": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help output matches the golden transcript") {
  const CliResult res = run_cli("--help");
  CHECK(res.code == 0);
  CHECK(res.out == read_file(std::string(NORMLAB_GOLDEN_DIR) + "/help.txt"));
}

TEST_CASE("norm prints the scalar and honours --out") {
  const CliResult res = run_cli("norm --p 2 --vec '[3,4]'");
  CHECK(res.code == 0);
  CHECK(res.out == "5\n");

  const std::string out_path = "cli_norm_out.txt";
  const CliResult res2 = run_cli("norm --p 1 --vec '[1,-2,3]' --out " + out_path);
  CHECK(res2.code == 0);
  CHECK(res2.out.empty());
  CHECK(read_file(out_path) == "6\n");
  std::remove(out_path.c_str());

  CHECK(run_cli("norm --p 0 --vec '[1]'").code == 2);        // invalid p
  CHECK(run_cli("norm --p 2").code == 2);                    // no input
  CHECK(run_cli("norm --vec '[1]' --file x.json").code == 2);  // both inputs
  CHECK(run_cli("norm --vec '[1, \"a\"]'").code == 2);       // malformed JSON
}

TEST_CASE("trace norm of the identity") {
  const CliResult res =
      run_cli("trace --mat '{\"rows\": 2, \"cols\": 2, \"entries\": [1, 0, 0, 1]}'");
  CHECK(res.code == 0);
  CHECK(res.out == "2\n");
}

TEST_CASE("emd dist, norm, and reduce agree on dipole fixtures") {
  write_file("cli_emd_a.json", "{\"n\": 4, \"cells\": [{\"x\": 0, \"y\": 0, \"w\": 1.0}]}");
  write_file("cli_emd_b.json", "{\"n\": 4, \"cells\": [{\"x\": 2, \"y\": 3, \"w\": 1.0}]}");
  const CliResult dist = run_cli("emd dist --a cli_emd_a.json --b cli_emd_b.json");
  CHECK(dist.code == 0);
  CHECK(dist.out == "5\n");

  write_file("cli_emd_x.json",
             "{\"n\": 4, \"cells\": [{\"x\": 0, \"y\": 0, \"w\": 0.25}, {\"x\": 0, \"y\": 2, "
             "\"w\": -0.25}]}");
  const CliResult nrm = run_cli("emd norm --x cli_emd_x.json");
  CHECK(nrm.code == 0);
  CHECK(nrm.out == "0.5\n");

  const CliResult red = run_cli("emd reduce --x cli_emd_x.json --y cli_emd_x.json --r 1");
  CHECK(red.code == 0);
  const auto doc = nlohmann::json::parse(red.out);
  CHECK(doc["answer"] == "close");

  // A plan file lands atomically next to the distance.
  const CliResult plan =
      run_cli("emd dist --a cli_emd_a.json --b cli_emd_b.json --plan cli_emd_plan.json");
  CHECK(plan.code == 0);
  const auto pj = nlohmann::json::parse(read_file("cli_emd_plan.json"));
  CHECK(pj["cost"] == 5.0);
  std::remove("cli_emd_plan.json");
  std::remove("cli_emd_a.json");
  std::remove("cli_emd_b.json");
  std::remove("cli_emd_x.json");
}

TEST_CASE("poincare analyze reports infeasibility with a witness") {
  write_file("cli_path_metric.json", kPathMetric);
  const CliResult res = run_cli(
      "poincare analyze --metric cli_path_metric.json --s1 1 --s2 2 --tau1 1 --tau2 3 --tau3 10 "
      "--adversarial 200");
  CHECK(res.code == 0);
  const auto doc = nlohmann::json::parse(res.out);
  CHECK(doc["status"] == "infeasible");
  CHECK(doc.contains("witness"));
  CHECK(doc["witness"]["delta"] == 0.04);
  CHECK(doc["adversarial_gap"].get<double>() >= -1e-6);

  // Witness mode: the slack is requested instead of tau3.
  const CliResult wit = run_cli(
      "poincare analyze --metric cli_path_metric.json --s1 1 --s2 2 --tau1 1 --tau2 3 "
      "--delta 0.01");
  CHECK(wit.code == 0);
  const auto wdoc = nlohmann::json::parse(wit.out);
  CHECK(wdoc["status"] == "witness-found");
  CHECK(wdoc["witness"]["delta"] == 0.01);

  // Exactly one of --tau3/--delta must be given.
  CHECK(run_cli("poincare analyze --metric cli_path_metric.json --s1 1 --s2 2 --tau1 1 --tau2 3")
            .code == 2);
  std::remove("cli_path_metric.json");
}

TEST_CASE("poincare analyze signals an exhausted budget with exit 3") {
  write_file("cli_path_metric3.json", kPathMetric);
  const CliResult res = run_cli(
      "poincare analyze --metric cli_path_metric3.json --s1 1 --s2 2 --tau1 1 --tau2 3 --tau3 10 "
      "--max-iter 2");
  CHECK(res.code == 3);
  const auto doc = nlohmann::json::parse(res.out);
  CHECK(doc["status"] == "indeterminate");
  std::remove("cli_path_metric3.json");
}

TEST_CASE("malformed metrics exit with code 2") {
  write_file("cli_bad_metric.json", kBadMetric);
  const CliResult res = run_cli(
      "poincare analyze --metric cli_bad_metric.json --s1 1 --s2 2 --tau1 1 --tau2 3 --tau3 10");
  CHECK(res.code == 2);
  CHECK(res.out.empty());
  std::remove("cli_bad_metric.json");
}

TEST_CASE("dtep eval emits a full report document") {
  const CliResult res =
      run_cli("dtep eval --p 1 --m 21 --dim 8 --trials 100 --seed 7 --jobs 2");
  CHECK(res.code == 0);
  const auto doc = nlohmann::json::parse(res.out);
  CHECK(doc["trials"] == 100);
  CHECK(doc["close"].contains("rate"));
  CHECK(doc["far"].contains("wilson_half_width"));
  CHECK(doc["p"] == 1.0);
  CHECK(doc["m"] == 21);

  CHECK(run_cli("dtep eval --trials 50").code == 2);  // below the floor
}

TEST_CASE("boost eval runs the product booster end to end") {
  const CliResult res = run_cli(
      "boost eval --k 2 --t 1 --approx 2 --reps 5 --frac 0.3 --dim 2 --trials 100 --base exact "
      "--min-rate 0.9");
  CHECK(res.code == 0);
  const auto doc = nlohmann::json::parse(res.out);
  CHECK(doc["k"] == 2);
  CHECK(doc["close"]["rate"].get<double>() >= 0.9);
  CHECK(doc["far"]["rate"].get<double>() >= 0.9);
}

TEST_CASE("report subcommands print csv tables") {
  const CliResult tg = run_cli("report trace-gap --sizes 2,4 --trials 5 --format csv");
  CHECK(tg.code == 0);
  CHECK(tg.out.rfind("n,trials,max_ratio,identity_ratio\n", 0) == 0);

  const CliResult di = run_cli("report distortion --n 4 --count 5 --deterministic");
  CHECK(di.code == 0);
  CHECK(di.out.rfind("instance_id,emd,embedded,ratio\n", 0) == 0);

  CHECK(run_cli("report trace-gap --sizes 65 --trials 5").code == 2);
}

}  // TEST_SUITE
