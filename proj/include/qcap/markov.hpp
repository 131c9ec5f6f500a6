// Markov analysis of the coupled (S,Q) chain under an input policy:
// transition law, stationary distribution, conditional mutual information.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qcap/qgraph.hpp"

namespace qcap {

// Input policy P(x|s,q), row-stochastic in x.
struct Policy {
  int S = 0, Q = 0, X = 0;
  std::vector<double> v;  // [s][q][x]

  double at(int s, int q, int x) const { return v[(s * Q + q) * X + x]; }
  double& at(int s, int q, int x) { return v[(s * Q + q) * X + x]; }
  void validate(double row_tol = 1e-9) const;
};

Policy uniform_policy(int S, int Q, int X);

// Stationary analysis of the coupled chain induced by a policy.
struct StationaryResult {
  Eigen::VectorXd pi;        // stationary law over coupled nodes (s*Q+q)
  std::vector<int> closed;   // nodes of the unique closed class
  bool aperiodic = false;    // period-1 closed class
  double residual = 0.0;     // max-abs of pi^T P - pi^T
};

// Row-stochastic transition matrix P[(s,q) -> (s',q')] under the policy.
Eigen::MatrixXd transition_matrix(const CoupledGraph& cg, const Policy& pol);

// Classifies the policy-support chain and solves for the stationary law on
// its unique closed class (zeros elsewhere). Throws QcapError when several
// closed classes exist (names them); a periodic chain is only flagged.
StationaryResult transition_and_stationary(const CoupledGraph& cg,
                                           const Policy& pol);

// Conditional state law pi(s|q) as an S x Q matrix; columns with zero
// q-marginal are left at zero.
Eigen::MatrixXd pi_s_given_q(const StationaryResult& st, int S, int Q);

// Joint occupation law over (state, graph node, input, output).
struct JointDistribution {
  int S = 0, Q = 0, X = 0, Y = 0;
  std::vector<double> d;  // [s][q][x][y]

  double at(int s, int q, int x, int y) const {
    return d[((s * Q + q) * X + x) * Y + y];
  }
  double& at(int s, int q, int x, int y) {
    return d[((s * Q + q) * X + x) * Y + y];
  }
  double mass() const;
};

// d(s,q,x,y) = pi(s,q) * P(x|s,q) * W(y|x,s).
JointDistribution joint_from_policy(const CoupledGraph& cg, const Policy& pol,
                                    const Eigen::VectorXd& pi);

// I(X,S;Y|Q) in bits of a joint law (normalized internally; zero entries
// follow the 0*log(0) = 0 convention).
double conditional_mutual_information(const JointDistribution& jd);

// Pretty "(s,q)" list used in diagnostics.
std::string format_nodes(const std::vector<int>& nodes, int Q);

}  // namespace qcap
