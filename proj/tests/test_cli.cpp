#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "fjsp/instance.hpp"
#include "fjsp/sched.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Sandbox {
 public:
  explicit Sandbox(const std::string& name) : dir_(fs::temp_directory_path() / ("fjsp_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  Run run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + FJSP_CLI_PATH + "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(path("stdout.txt"));
    r.err = slurp(path("stderr.txt"));
    return r;
  }

 private:
  fs::path dir_;
};

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

int lines(const std::string& text) { return static_cast<int>(std::count(text.begin(), text.end(), '\n')); }

const char* kTinyTrain = "train -q --jobs 3 --machines 2 --trajectories 6 --iters 3 --batch 8 --eval-episodes 3 --dim 8";

}  // namespace

TEST_CASE("gen is deterministic") {
  Sandbox sb("gen");
  REQUIRE(sb.run("gen --jobs 5 --machines 3 --seed 7 -o i.json").code == 0);
  const auto first = sb.run("gen --jobs 5 --machines 3 --seed 7 -o j.json");
  REQUIRE(first.code == 0);
  CHECK(slurp(sb.path("i.json")) == slurp(sb.path("j.json")));
  CHECK(contains(first.err, "seed=7"));
  CHECK(contains(first.err, "config_hash="));
  const auto inst = fjsp::load_instance(sb.path("i.json"));
  CHECK(inst.n_jobs() == 5);
  CHECK(inst.n_machines() == 3);

  REQUIRE(sb.run("gen --count 3 --seed 1 -o set").code == 0);
  CHECK(fs::exists(sb.path("set/inst_0002.json")));
}

TEST_CASE("solve I1 with bnb") {
  Sandbox sb("solve");
  fjsp::save_instance(fjsp::testing::make_i1(), sb.path("i1.json"));
  const auto r = sb.run("solve --solver bnb i1.json --solution s.json --schedule s.csv");
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "makespan=5"));
  CHECK(contains(r.out, "proof=true"));
  const auto i1 = fjsp::testing::make_i1();
  CHECK(fjsp::makespan(fjsp::load_solution(sb.path("s.json"), i1), i1) == 5);
  CHECK(slurp(sb.path("s.csv")).rfind("op,machine,start,finish\n", 0) == 0);

  const auto sa = sb.run("solve --solver sa --sa-steps 200 i1.json --trace t.csv");
  REQUIRE(sa.code == 0);
  CHECK(contains(sa.out, "proof=false"));
  CHECK(lines(slurp(sb.path("t.csv"))) == 201);  // header + one row per step
}

TEST_CASE("eval writes one row per size") {
  Sandbox sb("eval");
  const auto r = sb.run("eval --solver fifo --sizes 5x3 --samples 16");
  REQUIRE(r.code == 0);
  const auto csv = slurp(sb.path("eval.csv"));
  CHECK(lines(csv) == 2);
  CHECK(contains(csv, "\n5x3,fifo,"));
  CHECK(contains(csv, ",1,"));
  CHECK(contains(r.out, "5x3"));

  REQUIRE(sb.run("gen --jobs 3 --machines 2 --count 4 -o set").code == 0);
  const auto files = sb.run("eval --solver fifo --solver bnb --csv f.csv set/inst_0000.json set/inst_0001.json");
  REQUIRE(files.code == 0);
  CHECK(lines(slurp(sb.path("f.csv"))) == 3);
  CHECK(fs::exists(sb.path("set/inst_0000.json.best.json")));
}

TEST_CASE("bench writes the size ladder") {
  Sandbox sb("bench");
  const auto r = sb.run("bench --sizes 3x2,4x2 --samples 3 --sa-steps 200 --csv b.csv");
  REQUIRE(r.code == 0);
  const auto csv = slurp(sb.path("b.csv"));
  CHECK(lines(csv) == 7);
  CHECK(contains(csv, "\n4x2,bnb,0,1,"));
}

TEST_CASE("errors and exit codes") {
  Sandbox sb("errors");
  auto r = sb.run("solve --bogus i.json");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: usage: ", 0) == 0);
  CHECK(sb.run("").code == 2);
  CHECK(sb.run("frobnicate").code == 2);

  r = sb.run("solve missing.json");
  CHECK(r.code == 1);
  CHECK(contains(r.err, "error: parameter: cannot read missing.json"));
  CHECK(lines(r.err.substr(r.err.find("error:"))) == 1);

  fjsp::save_instance(fjsp::testing::make_i1(), sb.path("i1.json"));
  r = sb.run("solve --solver dql:nothing.json i1.json");
  CHECK(r.code == 1);
  CHECK(contains(r.err, "error: parameter:"));
  r = sb.run("solve --solver magic i1.json");
  CHECK(r.code == 1);
  r = sb.run("train --gamma 2 --epochs 1");
  CHECK(r.code == 1);
  CHECK(contains(r.err, "error: parameter: train: gamma"));

  std::ofstream(sb.path("bad.json")) << "{\"n_machines\": ";
  r = sb.run("solve bad.json");
  CHECK(r.code == 1);
  CHECK(contains(r.err, "error: parse:"));
  CHECK(sb.run("--help").code == 0);
}

TEST_CASE("train is deterministic, resumable and honours config files") {
  Sandbox sb("train");
  const std::string base = kTinyTrain;
  auto a = sb.run(base + " --epochs 3 --metrics a.csv --checkpoint a.json");
  REQUIRE(a.code == 0);
  CHECK(contains(a.err, "parameters=600"));  // d = 8: 64 + 24 + 512
  CHECK(contains(a.err, "seed=0"));
  REQUIRE(sb.run(base + " --epochs 3 --metrics b.csv --checkpoint b.json").code == 0);
  CHECK(slurp(sb.path("a.csv")) == slurp(sb.path("b.csv")));
  CHECK(slurp(sb.path("a.json")) == slurp(sb.path("b.json")));
  CHECK(lines(slurp(sb.path("a.csv"))) == 4);

  REQUIRE(sb.run(base + " --epochs 2 --metrics r.csv --checkpoint r.json").code == 0);
  REQUIRE(sb.run("train -q --resume r.json --epochs 3 --metrics r.csv --checkpoint r3.json").code == 0);
  CHECK(slurp(sb.path("a.csv")) == slurp(sb.path("r.csv")));
  CHECK(slurp(sb.path("a.json")) == slurp(sb.path("r3.json")));

  std::ofstream(sb.path("t.cfg")) << "# tiny run\njobs = 3\nmachines = 2\ntrajectories = 6\niters = 3\n"
                                     "batch = 8\neval-episodes = 3\ndim = 8\nepochs = 1\nquiet = true\n";
  REQUIRE(sb.run("train --config t.cfg --epochs 3 --metrics c.csv --checkpoint c.json").code == 0);
  CHECK(slurp(sb.path("a.csv")) == slurp(sb.path("c.csv")));
  const auto hash_flags = a.err.substr(a.err.find("config_hash="), 28);
  const auto c = sb.run("train --config t.cfg --epochs 3 --metrics c.csv --checkpoint c.json");
  CHECK(contains(c.err, hash_flags));

  const auto solve = sb.run("solve --solver dql:a.json --trace traj.csv set.json");
  CHECK(solve.code == 1);  // missing instance
  REQUIRE(sb.run("gen --jobs 3 --machines 2 -o set.json").code == 0);
  const auto ok = sb.run("solve --solver dql:a.json --trace traj.csv set.json");
  REQUIRE(ok.code == 0);
  CHECK(contains(ok.err, "parameters=600"));
  CHECK(slurp(sb.path("traj.csv")).rfind("t,action_op,action_machine,reward,n_completed\n", 0) == 0);
}
