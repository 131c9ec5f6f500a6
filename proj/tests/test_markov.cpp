#include <cmath>

#include "doctest.h"
#include "qcap/markov.hpp"
#include "qcap/util.hpp"

using namespace qcap;

namespace {

// Trapdoor filter graph on 3 nodes used across the suites.
QGraph trapdoor_3node_graph() {
  QGraph g;
  g.Q = 3;
  g.Y = 2;
  g.T = {1, 0, 2, 0, 2, 1};
  return g;
}

// Zero-error trapdoor policy on that graph.
Policy trapdoor_3node_policy(double p) {
  double pb = 1.0 - p;
  Policy pol;
  pol.S = 2;
  pol.Q = 3;
  pol.X = 2;
  pol.v.assign(12, 0.0);
  double p00[3] = {1.0, 1.0 / (2.0 * pb), p / pb};      // P(x=0 | s=0, q)
  double p11[3] = {p / pb, 1.0 / (2.0 * pb), 1.0};      // P(x=1 | s=1, q)
  for (int q = 0; q < 3; ++q) {
    pol.at(0, q, 0) = p00[q];
    pol.at(0, q, 1) = 1.0 - p00[q];
    pol.at(1, q, 1) = p11[q];
    pol.at(1, q, 0) = 1.0 - p11[q];
  }
  return pol;
}

}  // namespace

TEST_SUITE("markov") {

TEST_CASE("transition matrix rows are stochastic") {
  Rng rng(42);
  CoupledGraph cg = couple(make_builtin("bfc2", 0.3), markov_qgraph(1, 2));
  Policy pol = uniform_policy(2, 2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    for (int s = 0; s < 2; ++s)
      for (int q = 0; q < 2; ++q) {
        auto row = rng.next_simplex(2);
        pol.at(s, q, 0) = row[0];
        pol.at(s, q, 1) = row[1];
      }
    Eigen::MatrixXd P = transition_matrix(cg, pol);
    for (int i = 0; i < cg.N; ++i)
      CHECK(P.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("two-state birth-death chain has the textbook stationary law") {
  // s=0 flips with prob a, s=1 flips with prob b => pi = (b, a)/(a+b).
  double a = 0.3, b = 0.55;
  Channel ch;
  ch.S = 2;
  ch.X = 1;
  ch.Y = 2;
  ch.W = {1 - a, a, b, 1 - b};
  ch.F = {0, 1, 0, 1};
  ch.validate();
  CoupledGraph cg = couple(ch, markov_qgraph(0, 2));
  StationaryResult st = transition_and_stationary(cg, uniform_policy(2, 1, 1));
  CHECK(st.aperiodic);
  CHECK(st.residual <= 1e-12);
  CHECK(st.pi(0) == doctest::Approx(b / (a + b)).epsilon(1e-12));
  CHECK(st.pi(1) == doctest::Approx(a / (a + b)).epsilon(1e-12));
}

TEST_CASE("trapdoor reference policy reproduces its published marginals") {
  double p = 0.25, pb = 0.75;
  CoupledGraph cg = couple(make_builtin("trapdoor", p), trapdoor_3node_graph());
  Policy pol = trapdoor_3node_policy(p);
  pol.validate();
  StationaryResult st = transition_and_stationary(cg, pol);
  CHECK(st.aperiodic);
  CHECK(st.residual <= 1e-12);

  // Graph-node marginal (pbar/(2(2-3p)), (1-2p)/(2-3p), pbar/(2(2-3p))).
  double piq[3] = {0.0, 0.0, 0.0};
  for (int s = 0; s < 2; ++s)
    for (int q = 0; q < 3; ++q) piq[q] += st.pi(s * 3 + q);
  CHECK(piq[0] == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(piq[1] == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(piq[2] == doctest::Approx(0.3).epsilon(1e-10));

  // Conditional state law ((1-2p)/(2pbar), 1/2, 1/(2pbar)) for s = 0.
  Eigen::MatrixXd psq = pi_s_given_q(st, 2, 3);
  CHECK(psq(0, 0) == doctest::Approx((1 - 2 * p) / (2 * pb)).epsilon(1e-10));
  CHECK(psq(0, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(psq(0, 2) == doctest::Approx(1.0 / (2 * pb)).epsilon(1e-10));
}

TEST_CASE("multiple closed classes raise a named error") {
  Channel frozen;
  frozen.S = 2;
  frozen.X = 1;
  frozen.Y = 1;
  frozen.W = {1.0, 1.0};
  frozen.F = {0, 1};
  frozen.validate();
  CoupledGraph cg = couple(frozen, markov_qgraph(0, 1));
  CHECK_THROWS_WITH_AS(transition_and_stationary(cg, uniform_policy(2, 1, 1)),
                       doctest::Contains("closed classes"), QcapError);
}

TEST_CASE("periodic unichain is flagged but solved") {
  Channel flip;
  flip.S = 2;
  flip.X = 1;
  flip.Y = 1;
  flip.W = {1.0, 1.0};
  flip.F = {1, 0};
  flip.validate();
  CoupledGraph cg = couple(flip, markov_qgraph(0, 1));
  StationaryResult st = transition_and_stationary(cg, uniform_policy(2, 1, 1));
  CHECK(!st.aperiodic);
  CHECK(st.pi(0) == doctest::Approx(0.5));
  CHECK(st.residual <= 1e-12);
}

TEST_CASE("joint law from a policy is a stationary pmf") {
  CoupledGraph cg = couple(make_builtin("bfc1", 0.3), markov_qgraph(1, 2));
  Rng rng(5);
  Policy pol = uniform_policy(2, 2, 2);
  for (int s = 0; s < 2; ++s)
    for (int q = 0; q < 2; ++q) {
      double t = 0.05 + 0.9 * rng.next_double();
      pol.at(s, q, 0) = t;
      pol.at(s, q, 1) = 1 - t;
    }
  StationaryResult st = transition_and_stationary(cg, pol);
  JointDistribution jd = joint_from_policy(cg, pol, st.pi);
  CHECK(jd.mass() == doctest::Approx(1.0).epsilon(1e-12));
  for (int s = 0; s < 2; ++s)
    for (int q = 0; q < 2; ++q) {
      double m = 0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) m += jd.at(s, q, x, y);
      CHECK(m == doctest::Approx(st.pi(cg.node(s, q))).epsilon(1e-12));
    }
}

TEST_CASE("conditional mutual information on crafted laws") {
  SUBCASE("output independent of input and state given the node") {
    Rng rng(8);
    JointDistribution jd;
    jd.S = 2;
    jd.Q = 2;
    jd.X = 2;
    jd.Y = 2;
    jd.d.assign(16, 0.0);
    // Product structure per node q: d = u(s,q,x) * v(q,y).
    std::vector<double> u(8), v(4);
    for (auto& e : u) e = rng.next_double();
    for (auto& e : v) e = rng.next_double();
    for (int s = 0; s < 2; ++s)
      for (int q = 0; q < 2; ++q)
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y)
            jd.at(s, q, x, y) = u[(s * 2 + q) * 2 + x] * v[q * 2 + y];
    CHECK(conditional_mutual_information(jd) ==
          doctest::Approx(0.0).epsilon(1e-13));
  }

  SUBCASE("noiseless binary channel with uniform input") {
    JointDistribution jd;
    jd.S = 1;
    jd.Q = 1;
    jd.X = 2;
    jd.Y = 2;
    jd.d = {0.5, 0.0, 0.0, 0.5};  // y = x
    CHECK(conditional_mutual_information(jd) == doctest::Approx(1.0));
  }

  SUBCASE("never negative on random laws") {
    Rng rng(11);
    JointDistribution jd;
    jd.S = 2;
    jd.Q = 3;
    jd.X = 2;
    jd.Y = 2;
    for (int trial = 0; trial < 200; ++trial) {
      jd.d.assign(24, 0.0);
      for (auto& e : jd.d) e = rng.next_double();
      CHECK(conditional_mutual_information(jd) >= -1e-13);
    }
  }

  SUBCASE("matches a direct two-entropy evaluation") {
    CoupledGraph cg = couple(make_builtin("bfc2", 0.35), markov_qgraph(1, 2));
    Policy pol = uniform_policy(2, 2, 2);
    Rng rng(13);
    for (int s = 0; s < 2; ++s)
      for (int q = 0; q < 2; ++q) {
        double t = 0.1 + 0.8 * rng.next_double();
        pol.at(s, q, 0) = t;
        pol.at(s, q, 1) = 1 - t;
      }
    StationaryResult st = transition_and_stationary(cg, pol);
    JointDistribution jd = joint_from_policy(cg, pol, st.pi);

    // H(Y|Q) - H(Y|X,S,Q) computed from scratch.
    double hyq = 0, hyxsq = 0;
    for (int q = 0; q < 2; ++q) {
      double bq = 0;
      std::vector<double> ay(2, 0.0);
      for (int s = 0; s < 2; ++s)
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y) {
            ay[y] += jd.at(s, q, x, y);
            bq += jd.at(s, q, x, y);
          }
      for (int y = 0; y < 2; ++y)
        if (ay[y] > 0) hyq -= ay[y] * std::log2(ay[y] / bq);
    }
    for (int s = 0; s < 2; ++s)
      for (int q = 0; q < 2; ++q)
        for (int x = 0; x < 2; ++x) {
          double ux = 0;
          for (int y = 0; y < 2; ++y) ux += jd.at(s, q, x, y);
          for (int y = 0; y < 2; ++y) {
            double v = jd.at(s, q, x, y);
            if (v > 0) hyxsq -= v * std::log2(v / ux);
          }
        }
    CHECK(conditional_mutual_information(jd) ==
          doctest::Approx(hyq - hyxsq).epsilon(1e-10));
  }
}

TEST_CASE("one-node-graph rate of the reference policy hits 1 - H2(p)") {
  // Policy: s=0 sends x=1; s=1 sends x=1 with probability 1/(2(1-p)).
  double p = 0.25;
  CoupledGraph cg = couple(make_builtin("bfc1", p), markov_qgraph(0, 2));
  Policy pol;
  pol.S = 2;
  pol.Q = 1;
  pol.X = 2;
  pol.v = {0.0, 1.0, 1.0 - 0.5 / (1 - p), 0.5 / (1 - p)};
  StationaryResult st = transition_and_stationary(cg, pol);
  CHECK(pi_s_given_q(st, 2, 1)(0, 0) == doctest::Approx(p).epsilon(1e-12));
  JointDistribution jd = joint_from_policy(cg, pol, st.pi);
  CHECK(conditional_mutual_information(jd) ==
        doctest::Approx(1.0 - h2(p)).epsilon(1e-12));
}

}  // TEST_SUITE
