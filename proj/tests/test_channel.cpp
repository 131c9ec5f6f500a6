#include <fstream>

#include "doctest.h"
#include "qcap/channel.hpp"
#include "qcap/util.hpp"
#include "test_util.hpp"

using namespace qcap;

TEST_SUITE("channel") {

TEST_CASE("builtin kernels match their definitions") {
  Channel tr = make_builtin("trapdoor", 0.3);
  CHECK(tr.w(0, 1, 0) == doctest::Approx(0.3).epsilon(1e-15));  // y = s
  CHECK(tr.w(0, 1, 1) == doctest::Approx(0.7).epsilon(1e-15));  // y = x
  CHECK(tr.w(1, 1, 1) == doctest::Approx(1.0));                 // x == s
  CHECK(tr.w(1, 1, 0) == doctest::Approx(0.0));

  Channel b1 = make_builtin("bfc1", 0.25);
  for (int s = 0; s < 2; ++s)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        double expect = (y == (s & x)) ? 0.75 : 0.25;
        CHECK(b1.w(s, x, y) == doctest::Approx(expect).epsilon(1e-15));
        CHECK(b1.f(s, x, y) == (s ^ x ^ y));
      }

  Channel b2 = make_builtin("bfc2", 0.25);
  // Same kernel as bfc1, next state s xor n with n = y xor (s*x).
  CHECK(b2.f(1, 1, 0) == 0);  // n = 0 xor 1 = 1, s+ = 1 xor 1
  CHECK(b2.f(1, 1, 1) == 1);
  CHECK(b2.f(0, 0, 1) == 1);
  CHECK(b2.w(1, 1, 0) == doctest::Approx(0.25));

  Channel is = make_builtin("ising", 0.4);
  CHECK(is.f(0, 1, 0) == 1);
  CHECK(is.f(0, 1, 1) == 1);  // next state is the input regardless of y
  CHECK(is.w(0, 0, 0) == doctest::Approx(1.0));
  CHECK(is.w(1, 0, 1) == doctest::Approx(0.4));  // y = s with prob p
}

TEST_CASE("kernel rows are pmfs for random parameters") {
  Rng rng(123);
  for (const char* fam : {"bfc1", "bfc2", "ising", "trapdoor"}) {
    for (int i = 0; i < 100; ++i) {
      double p = rng.next_double();
      Channel ch = make_builtin(fam, p);
      for (int s = 0; s < ch.S; ++s)
        for (int x = 0; x < ch.X; ++x) {
          double row = 0;
          for (int y = 0; y < ch.Y; ++y) {
            CHECK(ch.w(s, x, y) >= 0.0);
            row += ch.w(s, x, y);
          }
          CHECK(std::abs(row - 1.0) <= 1e-12);
        }
    }
  }
}

TEST_CASE("builtin construction is deterministic") {
  Channel a = make_builtin("bfc2", 0.37);
  Channel b = make_builtin("bfc2", 0.37);
  CHECK(a.W == b.W);
  CHECK(a.F == b.F);
}

TEST_CASE("strong connectivity agrees with an independent closure") {
  auto oracle = [](const Channel& ch) {
    std::vector<std::pair<int, int>> edges;
    for (int s = 0; s < ch.S; ++s)
      for (int x = 0; x < ch.X; ++x)
        for (int y = 0; y < ch.Y; ++y)
          if (ch.w(s, x, y) > 0) edges.push_back({s, ch.f(s, x, y)});
    return testutil::fw_strongly_connected(ch.S, edges);
  };

  Channel tr = make_builtin("trapdoor", 0.3);
  CHECK(tr.strongly_connected());
  CHECK(oracle(tr));

  Channel b1 = make_builtin("bfc1", 0.25);
  CHECK(b1.strongly_connected());
  CHECK(oracle(b1));

  // All transitions head to state 0: not strongly connected.
  Channel sink;
  sink.S = 2;
  sink.X = 1;
  sink.Y = 2;
  sink.W = {0.5, 0.5, 0.5, 0.5};
  sink.F = {0, 0, 0, 0};
  sink.validate();
  CHECK(!sink.strongly_connected());
  CHECK(!oracle(sink));
}

TEST_CASE("channel file round trip") {
  testutil::Scratch scratch;
  Channel ch = make_builtin("trapdoor", 0.3);
  ch.name = "trapdoor-p03";
  std::string path = scratch.path("channel_rt");
  save_channel(ch, path);
  Channel back = load_channel(path);
  CHECK(back.name == "trapdoor-p03");
  CHECK(back.S == ch.S);
  CHECK(back.W == ch.W);  // doubles survive JSON round trip exactly
  CHECK(back.F == ch.F);
}

TEST_CASE("bad channel files are rejected") {
  testutil::Scratch scratch;

  auto write = [&](const std::string& stem, const std::string& body) {
    std::string path = scratch.path(stem);
    std::ofstream(path) << body;
    return path;
  };

  SUBCASE("kernel row does not sum to one") {
    std::string p = write("rowsum", R"({
      "alphabets": {"S":1, "X":1, "Y":2},
      "kernel": [[[0.5, 0.4]]],
      "next_state": [[[0, 0]]]})");
    CHECK_THROWS_WITH_AS(load_channel(p),
                         doctest::Contains("sums to"), QcapError);
  }

  SUBCASE("multi-valued next state means not unifilar") {
    std::string p = write("unifilar", R"({
      "alphabets": {"S":2, "X":1, "Y":2},
      "kernel": [[[0.5, 0.5]], [[0.5, 0.5]]],
      "next_state": [[[ [0,1], 0]], [[1, 1]]]})");
    CHECK_THROWS_WITH_AS(load_channel(p),
                         doctest::Contains("not unifilar"), QcapError);
  }

  SUBCASE("negative probability") {
    std::string p = write("negprob", R"({
      "alphabets": {"S":1, "X":1, "Y":2},
      "kernel": [[[1.1, -0.1]]],
      "next_state": [[[0, 0]]]})");
    CHECK_THROWS_AS(load_channel(p), QcapError);
  }

  SUBCASE("missing next state on the support") {
    std::string p = write("missing_next", R"({
      "alphabets": {"S":2, "X":1, "Y":2},
      "kernel": [[[0.5, 0.5]], [[0.5, 0.5]]],
      "next_state": [[[0, -1]], [[1, 1]]]})");
    CHECK_THROWS_WITH_AS(load_channel(p),
                         doctest::Contains("next_state"), QcapError);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_channel("/nonexistent/qcap_channel.json"), QcapError);
  }
}

TEST_CASE("parse_channel_arg handles builtins and rejects junk") {
  Channel ch = parse_channel_arg("ising:0.7");
  CHECK(ch.w(1, 0, 1) == doctest::Approx(0.7));
  CHECK_THROWS_AS(parse_channel_arg("bfc1:not-a-number"), QcapError);
  CHECK_THROWS_AS(parse_channel_arg("bfc1:1.5"), QcapError);
}

TEST_CASE("validate rejects out-of-range p for builtins") {
  CHECK_THROWS_AS(make_builtin("bfc1", -0.1), QcapError);
  CHECK_THROWS_AS(make_builtin("nosuch", 0.3), QcapError);
}

}  // TEST_SUITE
