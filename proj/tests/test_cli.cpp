#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

using nlohmann::json;

// End-to-end checks of the installed command-line binary. The binary path
// comes from CARDYLAB_BIN, defaulting to ./cardylab (the build directory).

static std::string bin() {
  const char* b = std::getenv("CARDYLAB_BIN");
  return b ? b : "./cardylab";
}

static int run(const std::string& args) {
  std::string cmd = bin() + " " + args + " > /dev/null 2>&1";
  int st = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(st));
  return WEXITSTATUS(st);
}

static bool exists(const std::string& p) {
  std::ifstream f(p);
  return f.good();
}

static std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

static json slurp_json(const std::string& p) { return json::parse(slurp(p)); }

static void rm(std::initializer_list<std::string> ps) {
  for (const auto& p : ps) std::remove(p.c_str());
}

TEST_CASE("usage errors") {
  CHECK(run("--help") == 0);
  CHECK(run("no-such-command") == 2);
  CHECK(run("") == 2);  // a subcommand is required
  CHECK(run("sample-map") == 2);  // --boundary is required
}

TEST_CASE("sample-map: determinism, envelope, validation failure") {
  rm({"cli_sm1.jsonl", "cli_sm1.jsonl.envelope.json", "cli_sm2.jsonl",
      "cli_sm2.jsonl.envelope.json", "cli_sm_bad.jsonl"});
  CHECK(run("sample-map --boundary 4 --count 3 --seed 11 --out cli_sm1.jsonl") ==
        0);
  CHECK(run("sample-map --boundary 4 --count 3 --seed 11 --out cli_sm2.jsonl") ==
        0);
  CHECK(slurp("cli_sm1.jsonl") == slurp("cli_sm2.jsonl"));

  // three JSONL lines, each a serialized map
  std::istringstream lines(slurp("cli_sm1.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    CHECK(j.contains("twin"));
    CHECK(j.contains("nxt"));
    CHECK(j.at("ell") == 4);
    ++n;
  }
  CHECK(n == 3);

  auto env = slurp_json("cli_sm1.jsonl.envelope.json");
  CHECK(env.at("metadata").at("command") == "sample-map");
  CHECK(env.at("metadata").at("master_seed") == 11);
  CHECK(env.at("metadata").contains("version"));
  CHECK(env.at("metadata").at("wall_time_s").get<double>() >= 0);
  CHECK(env.at("payload").at("count") == 3);
  CHECK(env.at("payload").at("n_inner").size() == 3);

  // invalid boundary: exit 2 and nothing written
  CHECK(run("sample-map --boundary 2 --out cli_sm_bad.jsonl") == 2);
  CHECK(!exists("cli_sm_bad.jsonl"));
  CHECK(!exists("cli_sm_bad.jsonl.envelope.json"));

  rm({"cli_sm2.jsonl", "cli_sm2.jsonl.envelope.json"});
}

TEST_CASE("embed: determinism across thread counts, missing input") {
  // reuse the sample-map output as the input map
  REQUIRE(exists("cli_sm1.jsonl"));
  rm({"cli_em1.json", "cli_em1.json.envelope.json", "cli_em2.json",
      "cli_em2.json.envelope.json", "cli_em_bad.json"});
  CHECK(run("embed --map cli_sm1.jsonl --samples 2000 --seed 5 "
            "--out cli_em1.json") == 0);
  CHECK(run("embed --map cli_sm1.jsonl --samples 2000 --seed 5 --threads 3 "
            "--out cli_em2.json") == 0);
  CHECK(slurp("cli_em1.json") == slurp("cli_em2.json"));

  auto art = slurp_json("cli_em1.json");
  CHECK(art.at("samples") == 2000);
  CHECK(art.at("seed") == 5);
  for (const auto& v : art.at("vertices")) {
    double s = v.at("x").get<double>() + v.at("y").get<double>() +
               v.at("z").get<double>();
    CHECK(s == doctest::Approx(1.0));
  }
  auto env = slurp_json("cli_em1.json.envelope.json");
  CHECK(env.at("metadata").at("command") == "embed");
  CHECK(env.at("payload").at("vertices").size() == art.at("vertices").size());

  CHECK(run("embed --map cli_no_such_file.jsonl --out cli_em_bad.json") == 2);
  CHECK(!exists("cli_em_bad.json"));

  rm({"cli_sm1.jsonl", "cli_sm1.jsonl.envelope.json", "cli_em1.json",
      "cli_em1.json.envelope.json", "cli_em2.json",
      "cli_em2.json.envelope.json"});
}

TEST_CASE("verify-cardy: report and tolerance exit code") {
  rm({"cli_vc.json", "cli_vc3.json"});
  CHECK(run("verify-cardy --delta 1/6 --samples 500 --seed 3 "
            "--out cli_vc.json") == 0);
  auto rep = slurp_json("cli_vc.json");
  auto pay = rep.at("payload");
  CHECK(pay.at("delta") == "1/6");
  CHECK(pay.at("sup_discrepancy").get<double>() > 0);
  CHECK(pay.at("sup_discrepancy").get<double>() < 0.5);
  CHECK(pay.at("mc_error_budget").get<double>() > 0);
  CHECK(pay.at("sum_to_one_defect").get<double>() >= 0);
  CHECK(pay.at("compared").get<int>() > 0);

  // an unreachable tolerance exits 3 but still writes the report
  CHECK(run("verify-cardy --delta 1/6 --samples 500 --seed 3 "
            "--tolerance 1e-9 --out cli_vc3.json") == 3);
  CHECK(exists("cli_vc3.json"));
  CHECK(slurp_json("cli_vc3.json").at("payload").at("sup_discrepancy") ==
        pay.at("sup_discrepancy"));
  rm({"cli_vc.json", "cli_vc3.json"});
}

TEST_CASE("four-arm csv") {
  rm({"cli_fa.csv", "cli_fa.csv.envelope.json"});
  CHECK(run("four-arm --delta-list 1/2,1/4 --r 1 --samples 2000 --seed 9 "
            "--out cli_fa.csv") == 0);
  auto csv = slurp("cli_fa.csv");
  CHECK(csv.rfind("delta,r,p,se,samples\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  auto env = slurp_json("cli_fa.csv.envelope.json");
  CHECK(env.at("payload").at("estimates").size() == 2);
  CHECK(env.at("payload").contains("log_log_slope"));
  for (const auto& e : env.at("payload").at("estimates")) {
    CHECK(e.at("p").get<double>() > 0);
    CHECK(e.at("p").get<double>() < 1);
  }
  rm({"cli_fa.csv", "cli_fa.csv.envelope.json"});
}

TEST_CASE("dynamics trajectory") {
  rm({"cli_dy.jsonl", "cli_dy.jsonl.envelope.json"});
  CHECK(run("dynamics --mode full --horizon 2 --domain disk --delta 3/5 "
            "--seed 21 --out cli_dy.jsonl") == 0);
  auto env = slurp_json("cli_dy.jsonl.envelope.json");
  std::istringstream lines(slurp("cli_dy.jsonl"));
  std::string line;
  int n = 0;
  double prev = 0;
  while (std::getline(lines, line)) {
    auto e = json::parse(line);
    CHECK(e.at("t").get<double>() > prev);
    prev = e.at("t").get<double>();
    CHECK(e.at("applied") == true);  // full mode applies every ring
    ++n;
  }
  CHECK(env.at("payload").at("events") == n);
  CHECK(env.at("payload").at("applied") == n);
  CHECK(env.at("payload").at("initial").size() ==
        env.at("payload").at("final").size());

  CHECK(run("dynamics --mode bogus --horizon 1") == 2);
  rm({"cli_dy.jsonl", "cli_dy.jsonl.envelope.json"});
}

TEST_CASE("ctmc invariants surface in the report") {
  rm({"cli_cm.json"});
  CHECK(run("ctmc --domain disk --delta 3/5 --seed 2 --out cli_cm.json") == 0);
  auto pay = slurp_json("cli_cm.json").at("payload");
  int k = (int)pay.at("inner").size();
  CHECK(pay.at("states") == (1 << k));
  CHECK(pay.at("symmetry_residual").get<double>() <= 1e-12);
  CHECK(pay.at("stationarity_residual").get<double>() <= 1e-12);
  CHECK(pay.at("Q").size() == pay.at("states"));
  rm({"cli_cm.json"});
}

TEST_CASE("gff binary output layout") {
  rm({"cli_gff.bin", "cli_gff.bin.envelope.json", "cli_gff.bin.header.json"});
  CHECK(run("gff --domain disk --delta 1/4 --samples 2 --seed 4 "
            "--out cli_gff.bin") == 0);
  auto header = slurp_json("cli_gff.bin.header.json");
  int V = header.at("vertices").get<int>();
  CHECK(V > 0);
  CHECK(header.at("samples") == 2);
  CHECK(header.at("c_T").get<double>() == doctest::Approx(10.8828).epsilon(1e-3));
  CHECK(slurp("cli_gff.bin").size() == (std::size_t)(2 * V * 8));
  rm({"cli_gff.bin", "cli_gff.bin.envelope.json", "cli_gff.bin.header.json"});
}

TEST_CASE("gmc and pivotals reports") {
  rm({"cli_gmc.json", "cli_pv.json"});
  CHECK(run("gmc --domain disk --delta 1/8 --exponent 1.0 --seed 6 "
            "--out cli_gmc.json") == 0);
  auto m = slurp_json("cli_gmc.json").at("payload").at("measure");
  CHECK(m.at("exponent") == 1.0);
  CHECK(m.at("total").get<double>() > 0);
  CHECK(run("gmc --domain disk --delta 1/8 --exponent 2.5 --seed 6 "
            "--out cli_gmc_bad.json") == 2);
  CHECK(!exists("cli_gmc_bad.json"));

  CHECK(run("pivotals --mode lattice --domain disk --delta 1/8 "
            "--alpha4-samples 2000 --seed 8 --out cli_pv.json") == 0);
  auto pv = slurp_json("cli_pv.json").at("payload");
  CHECK(pv.at("measure").contains("atoms"));
  CHECK(pv.at("domain").contains("delta"));
  rm({"cli_gmc.json", "cli_pv.json"});
}

TEST_CASE("occupation estimate of a single point") {
  std::ofstream pts("cli_pts.json");
  pts << "[[0.0, 0.0]]\n";
  pts.close();
  rm({"cli_oc.json"});
  CHECK(run("occupation --points cli_pts.json --dim 2 --radius 0.2 "
            "--out cli_oc.json") == 0);
  auto pay = slurp_json("cli_oc.json").at("payload");
  CHECK(pay.at("total").get<double>() ==
        doctest::Approx(3.14159265 * 0.04).epsilon(0.03));
  CHECK(run("occupation --points cli_pts.json --dim 3 --radius 0.2 "
            "--out cli_oc_bad.json") == 2);
  CHECK(!exists("cli_oc_bad.json"));
  rm({"cli_pts.json", "cli_oc.json"});
}
