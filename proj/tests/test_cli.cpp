#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = DSSTITCH_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dsstitch_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  std::ostringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen: determinism and failure modes") {
  TempDir dir;
  CHECK(run("gen --scenario two-crossing --seed 3 -o " + (dir / "a.json")) == 0);
  CHECK(run("gen --scenario two-crossing --seed 3 -o " + (dir / "b.json")) == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(run("gen --scenario bogus --seed 1 -o " + (dir / "c.json")) == 2);
}

TEST_CASE("full pipeline: learn, graph, solve, simulate, verify, plot") {
  TempDir dir;
  const std::string ds = dir / "ds.json";
  const std::string models = dir / "models";
  REQUIRE(run("gen --scenario two-crossing --seed 1 -o " + ds) == 0);
  REQUIRE(run("learn --dataset " + ds + " --out-dir " + models +
              " --seed 1 --k-max 4") == 0);
  CHECK(fs::exists(models + "/A.model.json"));
  CHECK(fs::exists(models + "/B.model.json"));

  // Idempotent relearn.
  const std::string before = slurp(models + "/A.model.json");
  REQUIRE(run("learn --dataset " + ds + " --out-dir " + models +
              " --seed 1 --k-max 4") == 0);
  CHECK(slurp(models + "/A.model.json") == before);

  CHECK(run("graph --dataset " + ds + " --models " + models + " -o " +
            (dir / "graph.json")) == 0);

  // stitch-sp requires a start.
  CHECK(run("solve --dataset " + ds + " --models " + models +
            " --method stitch-sp --reuse ds --goal 3,8 -o " +
            (dir / "p.json")) == 2);
  REQUIRE(run("solve --dataset " + ds + " --models " + models +
              " --method stitch-sp --reuse ds --start -8,5 --goal 3,8 -o " +
              (dir / "p.json")) == 0);
  // stitch-spt is start-agnostic.
  CHECK(run("solve --dataset " + ds + " --models " + models +
            " --method stitch-spt --reuse ds --goal 3,8 -o " +
            (dir / "spt.json")) == 0);

  CHECK(run("simulate --artifact " + (dir / "p.json") + " --dataset " + ds +
            " --start -8,5 -o " + (dir / "traj.csv")) == 0);
  CHECK(run("verify --artifact " + (dir / "p.json")) == 0);
  CHECK(run("plot --dataset " + ds + " --graph " + (dir / "graph.json") +
            " --rollout " + (dir / "traj.csv") + " -o " + (dir / "out.svg")) ==
        0);
  CHECK(slurp(dir / "out.svg").find("<svg") != std::string::npos);
}

TEST_CASE("solve: corrupted dataset and hash mismatch") {
  TempDir dir;
  const std::string ds = dir / "ds.json";
  const std::string models = dir / "models";
  REQUIRE(run("gen --scenario two-crossing --seed 1 -o " + ds) == 0);
  REQUIRE(run("learn --dataset " + ds + " --out-dir " + models +
              " --seed 1 --k-max 4") == 0);

  // Learn against a different dataset: hash mismatch must be refused.
  const std::string ds2 = dir / "ds2.json";
  REQUIRE(run("gen --scenario two-crossing --seed 2 -o " + ds2) == 0);
  CHECK(run("solve --dataset " + ds2 + " --models " + models +
            " --method stitch-sp --reuse ds --start -8,5 --goal 3,8 -o " +
            (dir / "p.json")) == 2);

  std::ofstream bad(dir / "bad.json");
  bad << "{broken";
  bad.close();
  CHECK(run("learn --dataset " + (dir / "bad.json") + " --out-dir " + models) ==
        2);
}

TEST_CASE("chain solve logs zero fits on a warm table") {
  TempDir dir;
  const std::string ds = dir / "ds.json";
  const std::string models = dir / "models";
  const std::string table = dir / "table.json";
  REQUIRE(run("gen --scenario two-crossing --seed 1 -o " + ds) == 0);
  REQUIRE(run("learn --dataset " + ds + " --out-dir " + models +
              " --seed 1 --k-max 4") == 0);

  const std::string solve_cmd =
      "solve --dataset " + ds + " --models " + models +
      " --method chain --reuse ds --start -8,5 --goal 3,8 --precompute " +
      table + " -o " + (dir / "chain.json");
  const std::string log1 = dir / "log1.txt";
  const std::string log2 = dir / "log2.txt";
  REQUIRE(std::system((kCli + " " + solve_cmd + " >" + log1 + " 2>&1").c_str()) ==
          0);
  REQUIRE(std::system((kCli + " " + solve_cmd + " >" + log2 + " 2>&1").c_str()) ==
          0);
  CHECK(slurp(log2).find("segment_fits=0") != std::string::npos);

  CHECK(run("verify --artifact " + (dir / "chain.json")) == 0);
}

TEST_CASE("bench: tiny run emits the CSV trio and is reproducible") {
  TempDir dir;
  const std::string ds = dir / "ds.json";
  REQUIRE(run("gen --scenario s-curves --seed 1 -o " + ds) == 0);
  const std::string bench_cmd = "bench --dataset " + ds +
                                " --methods stitch-sp-ds --seeds 1 --jobs 2 "
                                "--k-max 4 --out-dir ";
  REQUIRE(run(bench_cmd + (dir / "b1")) == 0);
  REQUIRE(run(bench_cmd + (dir / "b2")) == 0);
  CHECK(fs::exists(dir / "b1/results.csv"));
  CHECK(fs::exists(dir / "b1/aggregate.csv"));
  CHECK(fs::exists(dir / "b1/timings.csv"));
  CHECK(slurp(dir / "b1/results.csv") == slurp(dir / "b2/results.csv"));
  CHECK(slurp(dir / "b1/aggregate.csv") == slurp(dir / "b2/aggregate.csv"));

  // Empty method list is a usage error.
  CHECK(run("bench --dataset " + ds + " --methods '' --seeds 1 --out-dir " +
            (dir / "b3")) == 2);
}

TEST_CASE("plot rejects 3D datasets") {
  TempDir dir;
  std::ofstream f(dir / "ds3.json");
  f << R"({"version":1,"dimension":3,"demonstrations":[
    {"id":"d","bidirectional":false,"attractor":[2,0,0],
     "trajectories":[{"dt":1.0,
       "positions":[[0,0,0],[1,0,0],[2,0,0]],
       "velocities":[[1,0,0],[1,0,0],[1,0,0]]}]}]})";
  f.close();
  CHECK(run("plot --dataset " + (dir / "ds3.json") + " -o " +
            (dir / "out.svg")) == 2);
}

}  // TEST_SUITE
