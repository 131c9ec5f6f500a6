#include <cmath>

#include "doctest.h"
#include "qcap/ub.hpp"
#include "qcap/util.hpp"
#include "test_util.hpp"

using namespace qcap;

namespace {

QGraph trapdoor_3node_graph() {
  QGraph g;
  g.Q = 3;
  g.Y = 2;
  g.T = {1, 0, 2, 0, 2, 1};
  return g;
}

// Random full-support policy-induced joint law (feasible interior point).
JointDistribution random_joint(const CoupledGraph& cg, Rng& rng) {
  Policy pol = uniform_policy(cg.ch.S, cg.g.Q, cg.ch.X);
  for (int s = 0; s < cg.ch.S; ++s)
    for (int q = 0; q < cg.g.Q; ++q) {
      auto row = rng.next_simplex(cg.ch.X);
      for (int x = 0; x < cg.ch.X; ++x)
        pol.at(s, q, x) = 0.85 * row[x] + 0.15 / cg.ch.X;
    }
  StationaryResult st = transition_and_stationary(cg, pol);
  return joint_from_policy(cg, pol, st.pi);
}

}  // namespace

TEST_SUITE("ub") {

TEST_CASE("constraint system has the documented shape") {
  Channel ch = make_builtin("bfc1", 0.25);
  QGraph g = markov_qgraph(1, 2);
  ConstraintSystem cs = build_constraints(ch, g);
  CHECK(cs.A.rows() == 2 * 2 + 16 + 1);
  CHECK(cs.A.cols() == 16);
  CHECK(cs.kind[0] == ConstraintSystem::Row::Stationarity);
  CHECK(cs.kind[4] == ConstraintSystem::Row::ChannelLaw);
  CHECK(cs.kind[20] == ConstraintSystem::Row::Pmf);
  CHECK(cs.b.head(20).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cs.b(20) == 1.0);
  // Channel row for a pinned entry reduces to d = 0 on that entry.
  Channel tr = make_builtin("trapdoor", 0.3);
  ConstraintSystem cst = build_constraints(tr, markov_qgraph(0, 2));
  // Entry (s=0,x=0,y=1) has W = 0; its channel-law row must be the unit row.
  int var = ((0 * 1 + 0) * 2 + 0) * 2 + 1;
  int row = 2 * 1 + var;
  CHECK(cst.A(row, var) == doctest::Approx(1.0));
  CHECK(cst.A.row(row).cwiseAbs().sum() == doctest::Approx(1.0));
}

TEST_CASE("policy-induced joints satisfy every constraint") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Channel ch = make_builtin(trial % 2 ? "bfc2" : "bfc1",
                              0.1 + 0.8 * rng.next_double());
    QGraph g = markov_qgraph(1 + (int)(trial % 2), 2);
    CoupledGraph cg = couple(ch, g);
    JointDistribution jd = random_joint(cg, rng);
    ConstraintSystem cs = build_constraints(ch, g);
    Eigen::Map<Eigen::VectorXd> d(jd.d.data(), (int)jd.d.size());
    CHECK((cs.A * d - cs.b).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("objective gradient matches central finite differences") {
  Rng rng(31);
  int checked = 0;
  while (checked < 100) {
    Channel ch = make_builtin(checked % 2 ? "trapdoor" : "bfc1",
                              0.15 + 0.7 * rng.next_double());
    QGraph g = checked % 2 ? trapdoor_3node_graph() : markov_qgraph(1, 2);
    CoupledGraph cg = couple(ch, g);
    JointDistribution jd = random_joint(cg, rng);
    ObjectiveEval ev = objective_and_gradient(ch, g, jd);

    const double h = 1e-6;
    for (int probe = 0; probe < 4; ++probe) {
      int i = (int)rng.next_below(jd.d.size());
      if (jd.d[i] <= 2 * h) continue;  // stay inside the support
      JointDistribution hi = jd, lo = jd;
      hi.d[i] += h;
      lo.d[i] -= h;
      double fd = (objective_and_gradient(ch, g, hi).f0 -
                   objective_and_gradient(ch, g, lo).f0) /
                  (2 * h);
      CHECK(std::abs(fd - ev.grad(i)) <=
            1e-5 * std::max(1.0, std::abs(ev.grad(i))));
      ++checked;
    }
  }
}

TEST_CASE("objective is midpoint convex") {
  Rng rng(41);
  Channel ch = make_builtin("bfc2", 0.3);
  QGraph g = markov_qgraph(1, 2);
  CoupledGraph cg = couple(ch, g);
  for (int trial = 0; trial < 1000; ++trial) {
    JointDistribution a = random_joint(cg, rng);
    JointDistribution b = random_joint(cg, rng);
    JointDistribution mid = a;
    for (size_t i = 0; i < mid.d.size(); ++i)
      mid.d[i] = 0.5 * (a.d[i] + b.d[i]);
    double fa = objective_and_gradient(ch, g, a).f0;
    double fb = objective_and_gradient(ch, g, b).f0;
    double fm = objective_and_gradient(ch, g, mid).f0;
    CHECK(fm <= 0.5 * (fa + fb) + 1e-12);
  }
}

TEST_CASE("upper bound for bfc1 equals 1 - H2(p)") {
  for (double p : {0.25, 0.4}) {
    BoundResult r = solve_ub(make_builtin("bfc1", p), markov_qgraph(0, 2));
    CHECK(r.kind == "ub");
    CHECK(r.value == doctest::Approx(1.0 - h2(p)).epsilon(1e-5));
    CHECK(r.feasibility_residual <= 1e-8);
    CHECK(r.optimality_gap <= 1e-6);
    CHECK(conditional_mutual_information(r.argmax) ==
          doctest::Approx(r.value).epsilon(1e-9));
  }
}

TEST_CASE("trapdoor bound at p = 1/2 is log2 of the golden ratio") {
  BoundResult r = solve_ub(make_builtin("trapdoor", 0.5),
                           trapdoor_3node_graph());
  // Oracle: maximize (H2(a) + a*(1 - H2(p)))/(1 + a) by scalar search.
  double astar = testutil::golden_max(
      [](double a) { return h2(a) / (1.0 + a); }, 0.01, 0.99);
  double oracle = h2(astar) / (1.0 + astar);
  CHECK(oracle == doctest::Approx(0.6942419136306174).epsilon(1e-10));
  CHECK(r.value == doctest::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("pure noise yields zero capacity") {
  Channel noise;
  noise.S = 2;
  noise.X = 2;
  noise.Y = 2;
  noise.W.assign(8, 0.5);
  noise.F.assign(8, 0);
  for (int s = 0; s < 2; ++s)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) noise.f(s, x, y) = s ^ x ^ y;
  noise.validate();
  BoundResult r = solve_ub(noise, markov_qgraph(1, 2));
  CHECK(std::abs(r.value) <= 1e-5);
}

TEST_CASE("random restarts land on the same value") {
  double ref = 0.0;
  for (int seed = 0; seed < 5; ++seed) {
    UbOptions opts;
    opts.random_start = seed > 0;
    opts.seed = 1000 + seed;
    BoundResult r =
        solve_ub(make_builtin("bfc2", 0.8), markov_qgraph(1, 2), opts);
    if (seed == 0)
      ref = r.value;
    else
      CHECK(std::abs(r.value - ref) <= 1e-6);
  }
}

TEST_CASE("periodic coupled graph is rejected before solving") {
  Channel flip;
  flip.S = 2;
  flip.X = 1;
  flip.Y = 1;
  flip.W = {1.0, 1.0};
  flip.F = {1, 0};
  flip.validate();
  CHECK_THROWS_WITH_AS(solve_ub(flip, markov_qgraph(0, 1)),
                       doctest::Contains("periodic"), QcapError);
}

TEST_CASE("extract_policy inverts joint_from_policy") {
  Rng rng(61);
  CoupledGraph cg = couple(make_builtin("bfc2", 0.7), markov_qgraph(1, 2));
  Policy pol = uniform_policy(2, 2, 2);
  for (int s = 0; s < 2; ++s)
    for (int q = 0; q < 2; ++q) {
      double t = 0.2 + 0.6 * rng.next_double();
      pol.at(s, q, 0) = t;
      pol.at(s, q, 1) = 1 - t;
    }
  StationaryResult st = transition_and_stationary(cg, pol);
  ExtractedPolicy ex = extract_policy(joint_from_policy(cg, pol, st.pi));
  for (int s = 0; s < 2; ++s)
    for (int q = 0; q < 2; ++q) {
      CHECK(!ex.defaulted[s * 2 + q]);
      for (int x = 0; x < 2; ++x)
        CHECK(ex.pol.at(s, q, x) ==
              doctest::Approx(pol.at(s, q, x)).epsilon(1e-12));
      CHECK(ex.pi(s * 2 + q) ==
            doctest::Approx(st.pi(cg.node(s, q))).epsilon(1e-12));
    }

  // Zero-mass rows fall back to uniform and are flagged.
  JointDistribution empty_row;
  empty_row.S = 2;
  empty_row.Q = 1;
  empty_row.X = 2;
  empty_row.Y = 2;
  empty_row.d = {0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0};
  ExtractedPolicy ex2 = extract_policy(empty_row);
  CHECK(ex2.defaulted[1]);
  CHECK(ex2.pol.at(1, 0, 0) == doctest::Approx(0.5));
}

TEST_CASE("longer output memory never improves the bound") {
  for (const char* fam : {"trapdoor", "ising"}) {
    double prev = 1e9;
    for (int k = 0; k <= 2; ++k) {
      BoundResult r = solve_ub(make_builtin(fam, 0.3), markov_qgraph(k, 2));
      CHECK(r.value <= prev + 1e-6);
      prev = r.value;
    }
  }
}

}  // TEST_SUITE
