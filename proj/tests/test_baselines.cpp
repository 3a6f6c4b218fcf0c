#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fjsp/baselines.hpp"
#include "fjsp/error.hpp"
#include "support.hpp"

using namespace fjsp;
using fjsp::testing::make_i1;

TEST_CASE("fifo on I1") {
  const auto i1 = make_i1();
  const auto s = fifo_solve(i1);
  CHECK(is_feasible(s, i1));
  // t=0: o0 and o2 ready, o0 takes M0, o2 takes M1; o1 follows on M1.
  CHECK(s == testing::solution_from(3, 2, {{0}, {2, 1}}));
  CHECK(makespan(s, i1) == 5);
  CHECK(fifo_solve(i1) == s);
}

TEST_CASE("fifo is optimal on a single-machine chain") {
  const FjspInstance chain(1, {{0, 1, 2}}, {3, 1, 4}, {{0, 0, 1.0}, {1, 0, 1.0}, {2, 0, 1.0}});
  CHECK(makespan(fifo_solve(chain), chain) == 8);
}

TEST_CASE("fifo prefers the earliest release, then the lowest id") {
  // o1 is released at 0, o2 only when o0 finishes; both wait for M0.
  const FjspInstance inst(1, {{0, 2}, {1}}, {2, 2, 2}, {{0, 0, 1.0}, {1, 0, 1.0}, {2, 0, 1.0}});
  CHECK(fifo_solve(inst).order[0] == std::vector<int>{0, 1, 2});
}

TEST_CASE("fifo is never optimal by accident everywhere") {
  std::mt19937_64 rng(2);
  int worse = 0;
  for (int t = 0; t < 20; ++t) {
    const auto inst = testing::random_small_instance(rng(), 8);
    const auto s = fifo_solve(inst);
    REQUIRE(is_feasible(s, inst));
    const int opt = bnb_solve(inst).makespan;
    CHECK(makespan(s, inst) >= opt);
    worse += makespan(s, inst) > opt;
  }
  CHECK(worse > 0);
}

TEST_CASE("sa basics") {
  const auto inst = generate(GeneratorSpec{}, 4);
  const auto fifo = fifo_solve(inst);
  SaConfig cfg;
  cfg.steps = 0;
  const auto none = sa_solve(inst, cfg);
  CHECK(none.solution == fifo);
  CHECK(none.makespan == makespan(fifo, inst));

  cfg.steps = 3000;
  cfg.seed = 5;
  const auto r = sa_solve(inst, cfg);
  CHECK(is_feasible(r.solution, inst));
  CHECK(r.makespan == makespan(r.solution, inst));
  CHECK(r.makespan <= makespan(fifo, inst));
  REQUIRE(!r.trace.empty());
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].best <= r.trace[i - 1].best);
    CHECK(r.trace[i].best <= r.trace[i].current);
    CHECK(r.trace[i].temperature <= r.trace[i - 1].temperature);
  }
  CHECK(r.trace.back().best == r.makespan);
  const auto again = sa_solve(inst, cfg);
  CHECK(again.solution == r.solution);
  CHECK(again.trace.size() == r.trace.size());

  std::ostringstream out;
  write_sa_trace_csv(out, {{0, 9, 9, 10.0}});
  CHECK(out.str() == "step,current,best,temperature\n0,9,9,10\n");
}

TEST_CASE("sa rejects an invalid config") {
  const auto i1 = make_i1();
  SaConfig cfg;
  cfg.cooling_rate = 1.0;
  CHECK_THROWS_AS(sa_solve(i1, cfg), ParameterError);
  cfg = {};
  cfg.p_reassign = 1.5;
  CHECK_THROWS_AS(sa_solve(i1, cfg), ParameterError);
  cfg = {};
  cfg.steps = -1;
  CHECK_THROWS_AS(sa_solve(i1, cfg), ParameterError);
}

TEST_CASE("sa median gap on 3x3 instances") {
  GeneratorSpec g;
  g.n_jobs = 3;
  g.n_machines = 3;
  std::vector<double> gaps;
  for (int i = 0; i < 20; ++i) {
    const auto inst = generate(g, 1000 + i);
    SaConfig cfg;
    cfg.seed = i;
    const auto opt = bnb_solve(inst);
    REQUIRE(opt.proof);
    const auto sa = sa_solve(inst, cfg);
    CHECK(sa.makespan >= opt.makespan);
    gaps.push_back(static_cast<double>(sa.makespan) / opt.makespan - 1.0);
  }
  std::nth_element(gaps.begin(), gaps.begin() + 10, gaps.end());
  CHECK(gaps[10] <= 0.05);
}

TEST_CASE("bnb on small instances") {
  const auto i1 = make_i1();
  const auto r = bnb_solve(i1);
  CHECK(r.makespan == 5);
  CHECK(r.proof);
  CHECK(makespan(r.solution, i1) == 5);

  const FjspInstance one(3, {{0}}, {4}, {{0, 0, 1.5}, {0, 1, 0.5}, {0, 2, 1.0}});
  CHECK(bnb_solve(one).makespan == 2);
  CHECK(bnb_solve(one).proof);
}

TEST_CASE("bnb matches brute force and never loses to fifo") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 60; ++t) {
    const auto inst = testing::random_small_instance(rng(), 6);
    const auto r = bnb_solve(inst);
    REQUIRE(r.proof);
    CHECK(r.makespan == testing::brute_force_optimum(inst));
    CHECK(r.makespan == makespan(r.solution, inst));
    CHECK(r.makespan <= makespan(fifo_solve(inst), inst));
    CHECK(r.makespan >= makespan_lower_bound(inst));
  }
}

TEST_CASE("bnb limits yield the incumbent without proof") {
  GeneratorSpec g;
  g.n_jobs = 8;
  g.n_machines = 4;
  const auto inst = generate(g, 12);
  BnbConfig cfg;
  cfg.node_limit = 10;
  const auto r = bnb_solve(inst, cfg);
  CHECK_FALSE(r.proof);
  CHECK(is_feasible(r.solution, inst));
  CHECK(r.makespan == makespan(r.solution, inst));
  CHECK(r.makespan <= makespan(fifo_solve(inst), inst));

  cfg.node_limit = 0;
  CHECK_THROWS_AS(bnb_solve(inst, cfg), ParameterError);
}
