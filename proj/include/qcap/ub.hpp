// Upper bound on feedback capacity for a fixed Q-graph: maximize
// I(X,S;Y|Q) over stationary joint laws d(s,q,x,y) of the coupled chain.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qcap/markov.hpp"

namespace qcap {

// Equality system A d = b over the flattened d(s,q,x,y) variables:
//   rows [0, S*Q)            stationarity of the coupled chain
//   rows [S*Q, S*Q + S*Q*X*Y) channel law d = W(y|x,s) * sum_y' d
//   last row                  total mass 1
// Entries with W(y|x,s) = 0 are pinned to zero by their channel-law row.
struct ConstraintSystem {
  enum class Row { Stationarity, ChannelLaw, Pmf };
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<Row> kind;                   // per row
  std::vector<std::array<int, 4>> tag;     // per row: (s,q,x,y), -1 unused
};

ConstraintSystem build_constraints(const Channel& ch, const QGraph& g);

// f0(d) = -I(X,S;Y|Q) in bits together with its gradient
//   grad(s,q,x,y) = log2(P(y,q)/P(q)) - log2 W(y|x,s).
// Pinned entries (W = 0) and entries whose (q,y) output mass vanishes get
// gradient 0; they carry no information for interior methods.
struct ObjectiveEval {
  double f0 = 0.0;
  Eigen::VectorXd grad;
};

ObjectiveEval objective_and_gradient(const Channel& ch, const QGraph& g,
                                     const JointDistribution& d);

struct UbOptions {
  double obj_tol = 1e-6;    // certified optimality gap target
  int max_newton = 2000;    // total Newton iteration budget
  std::uint64_t seed = 0;   // 0 = deterministic uniform-policy start
  bool random_start = false;
  int verbosity = 0;
};

struct BoundResult {
  double value = 0.0;             // bound in bits per channel use
  std::string kind;               // "ub" or "lb"
  double feasibility_residual = 0.0;  // max |A d - b| at the reported law
  double optimality_gap = 0.0;    // certified duality gap (ub only)
  int iterations = 0;
  JointDistribution argmax;
};

// Log-barrier interior-point solve of the bound program. Requires the
// coupled graph to have a single aperiodic closed class (throws otherwise).
BoundResult solve_ub(const Channel& ch, const QGraph& g, UbOptions opts = {});

// Input policy and stationary law recovered from a joint law. Rows (s,q)
// whose marginal mass falls below mass_tol get a uniform row and a flag.
struct ExtractedPolicy {
  Policy pol;
  Eigen::VectorXd pi;
  std::vector<char> defaulted;  // per (s,q) row
};

ExtractedPolicy extract_policy(const JointDistribution& jd,
                               double mass_tol = 1e-9);

}  // namespace qcap
