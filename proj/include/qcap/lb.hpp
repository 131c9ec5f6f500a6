// Lower bounds: graph-based encoders (policy on a Q-graph) whose posterior
// state law is reproduced by the BCJR recursion, and a solver that searches
// for the best such encoder on a given graph.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qcap/markov.hpp"

namespace qcap {

struct GraphEncoder {
  Channel ch;
  QGraph g;
  Policy pol;
  std::string family;  // builtin encoder id when applicable, else empty
  double p = std::numeric_limits<double>::quiet_NaN();  // family parameter
  double rate = 0.0;   // recorded certified rate
};

// Max-abs BCJR fixed-point violation. For every (q,y) with positive
// probability and every state s+ except the last, compares the one-step
// posterior update against pi(s+ | g(q,y)). The second form reuses a
// precomputed stationary analysis.
double bcjr_residual(const Channel& ch, const QGraph& g, const Policy& pol);
double bcjr_residual(const Channel& ch, const QGraph& g, const Policy& pol,
                     const StationaryResult& st);

// Full certification of an encoder: valid policy, unichain + aperiodic
// coupled chain, BCJR residual within tol, rate evaluated from the joint law.
struct CertResult {
  bool ok = false;
  double rate = 0.0;
  double residual = 0.0;   // max-abs BCJR violation
  StationaryResult st;
  std::string detail;      // reason when not ok
};

CertResult certify_encoder(const Channel& ch, const QGraph& g,
                           const Policy& pol, double tol = 1e-7);

struct LbOptions {
  int starts = 32;            // multi-start count (includes seeded starts)
  std::uint64_t seed = 1;
  double bcjr_tol = 1e-7;     // certification tolerance
  bool polish = true;         // tangent ascent along solution manifolds
  int verbosity = 0;
};

struct LbResult {
  double value = 0.0;              // best certified rate
  GraphEncoder best;
  std::vector<double> all_values;  // certified candidate rates, descending
  double residual = 0.0;           // BCJR residual of the best encoder
  int certified_count = 0;
};

// Finds BCJR-consistent policies on the graph by damped least-squares
// root-finding from many starts, optionally climbing along the solution
// manifold, and certifies every candidate. Throws when the coupled graph is
// invalid or no candidate certifies.
LbResult solve_lb(const Channel& ch, const QGraph& g, LbOptions opts = {});

// Encoder file round-trip (JSON: channel, qgraph, policy, family/p, rate).
GraphEncoder load_encoder(const std::string& path);
void save_encoder(const GraphEncoder& enc, const std::string& path);

}  // namespace qcap
