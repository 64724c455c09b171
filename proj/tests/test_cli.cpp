#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rumorgraph/tree.hpp"
#include "test_util.hpp"

using nlohmann::json;

// End-to-end checks of the installed command-line surface, driven through
// the real binary (path injected by CMake).

namespace {

#ifndef RUMORGRAPH_CLI_PATH
#define RUMORGRAPH_CLI_PATH "rumorgraph"
#endif

int run_cli(const std::string& args, const std::filesystem::path& log) {
  std::string cmd = std::string(RUMORGRAPH_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_sample_dataset(const std::filesystem::path& dir, int n_trees) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < n_trees; ++i) {
    int label = i % 2;
    std::vector<rumorgraph::PostRecord> records;
    records.push_back({"root", std::nullopt,
                       label ? "r1 r2 claim r3 r4 breaking" : "n1 n2 report n3 n4 confirmed"});
    for (int c = 0; c < 3 + i % 3; ++c) {
      records.push_back({"c" + std::to_string(c), std::string("root"),
                         label ? "r5 r6 r7 echo" : "n5 n6 n7 echo"});
    }
    char name[32];
    std::snprintf(name, sizeof name, "tree-%03d", i);
    auto tree = rumorgraph::build_tree(records, name, label);
    std::ofstream out(dir / (std::string(name) + ".json"));
    out << rumorgraph::tree_to_json(tree);
  }
}

}  // namespace

TEST_CASE("cli: ingest skips malformed files and drops reply-less trees") {
  testutil::TempDir dir("cli_ingest");
  auto data = dir.path() / "data";
  write_sample_dataset(data, 12);
  {
    std::ofstream bad(data / "broken.json");
    bad << "{oops";
    std::ofstream lonely(data / "lonely.json");
    lonely << R"({"event_id":"lonely","label":0,"posts":[{"id":"r","parent":null,"text":"x"}]})";
  }
  auto out = dir.path() / "out";
  int rc = run_cli("ingest --data " + data.string() + " --out " + out.string(),
                   dir.path() / "log.txt");
  CHECK(rc == 0);
  json summary = json::parse(slurp(out / "ingest_summary.json"));
  CHECK(summary["total"] == 12);
  CHECK(summary["rumor"] == 6);
  CHECK(summary["non_rumor"] == 6);
  CHECK(summary["skipped_malformed"] == 1);
  CHECK(summary["removed_no_reply"] == 1);
  CHECK(std::filesystem::exists(out / "dataset.jsonl"));
}

TEST_CASE("cli: score -> augment -> train -> eval round trip with warm-cache rerun") {
  testutil::TempDir dir("cli_pipeline");
  auto data = dir.path() / "data";
  write_sample_dataset(data, 14);
  auto out = dir.path() / "out";
  auto log = dir.path() / "log.txt";

  REQUIRE(run_cli("ingest --data " + data.string() + " --out " + out.string(), log) == 0);
  std::string dataset = (out / "dataset.jsonl").string();

  std::string score_args = "score --data " + dataset + " --out " + out.string() +
                           " --oracle mock --profile oracle-perfect --seed 3";
  REQUIRE(run_cli(score_args, log) == 0);
  std::string first = slurp(log);
  CHECK(first.find("cache hits") != std::string::npos);

  // warm cache: zero scoring calls on the rerun
  REQUIRE(run_cli(score_args, log) == 0);
  std::string second = slurp(log);
  CHECK(second.find("0 scoring calls") != std::string::npos);
  CHECK(second.find("0 knowledge-base calls") != std::string::npos);

  std::string common = " --data " + dataset + " --out " + out.string() +
                       " --oracle mock --profile oracle-perfect --seed 3 --dim 16 --hidden 4" +
                       " --heads 2 --heads2 2 --epochs 3 --patience 2";
  REQUIRE(run_cli("augment" + common + " --theta-mode youden", log) == 0);
  CHECK(std::filesystem::exists(out / "augment.jsonl"));
  CHECK(std::filesystem::exists(out / "threshold.json"));

  REQUIRE(run_cli("train" + common + " --augment " + (out / "augment.jsonl").string(), log) == 0);
  CHECK(std::filesystem::exists(out / "checkpoint.json"));
  CHECK(std::filesystem::exists(out / "history.csv"));

  REQUIRE(run_cli("eval" + common + " --augment " + (out / "augment.jsonl").string() +
                      " --checkpoint " + (out / "checkpoint.json").string(),
                  log) == 0);
  json metrics = json::parse(slurp(out / "metrics.json"));
  CHECK(metrics.contains("acc"));
  CHECK(metrics.contains("confusion"));
}

TEST_CASE("cli: missing artifacts produce a one-line machine-parsable error") {
  testutil::TempDir dir("cli_errors");
  auto data = dir.path() / "data";
  write_sample_dataset(data, 10);
  auto out = dir.path() / "out";
  auto log = dir.path() / "log.txt";
  REQUIRE(run_cli("ingest --data " + data.string() + " --out " + out.string(), log) == 0);

  int rc = run_cli("train --data " + (out / "dataset.jsonl").string() + " --out " + out.string(),
                   log);
  CHECK(rc == 1);
  std::string message = slurp(log);
  CHECK(message.rfind("error: MissingArtifact:", 0) == 0);
  CHECK(std::count(message.begin(), message.end(), '\n') == 1);

  // unknown flag: nonzero with a single-line error as well
  rc = run_cli("train --no-such-flag", log);
  CHECK(rc == 2);
  CHECK(slurp(log).rfind("error: ConfigConflict:", 0) == 0);
}

TEST_CASE("cli: byte-identical metrics for identical seeds (mock determinism)") {
  testutil::TempDir dir("cli_determinism");
  auto log = dir.path() / "log.txt";
  std::string base = "simulate --profile aggressive --trees 24 --seed 11 --dim 12 --hidden 4"
                     " --heads 2 --heads2 2 --epochs 4 --patience 3";
  auto out1 = dir.path() / "a";
  auto out2 = dir.path() / "b";
  REQUIRE(run_cli(base + " --out " + out1.string(), log) == 0);
  REQUIRE(run_cli(base + " --out " + out2.string(), log) == 0);
  CHECK(slurp(out1 / "metrics.json") == slurp(out2 / "metrics.json"));
  CHECK(slurp(out1 / "metrics.json").size() > 0);
  CHECK(slurp(out1 / "simulate_report.json") == slurp(out2 / "simulate_report.json"));
}

TEST_CASE("cli: sweep-gamma emits five rows on the default grid") {
  testutil::TempDir dir("cli_sweep");
  auto log = dir.path() / "log.txt";
  auto out = dir.path() / "out";
  REQUIRE(run_cli("sweep-gamma --trees 12 --seed 5 --profile oracle-perfect --dim 12 --hidden 4"
                  " --heads 2 --heads2 2 --epochs 2 --patience 2 --out " +
                      out.string(),
                  log) == 0);
  json sweep = json::parse(slurp(out / "sweep.json"));
  REQUIRE(sweep["rows"].size() == 5);
  std::vector<long> grid;
  for (const auto& row : sweep["rows"]) grid.push_back(row["gamma_percent"].get<long>());
  CHECK(grid == std::vector<long>{10, 15, 20, 25, 30});
}
