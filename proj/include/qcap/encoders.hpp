// Catalog of reference graph-based encoders with closed-form rates,
// threshold (p*) computations, and the KKT optimality verifier.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qcap/lb.hpp"
#include "qcap/ub.hpp"

namespace qcap {

struct EncoderInfo {
  std::string id;       // e.g. "trapdoor_3node"
  std::string family;   // channel family it attaches to
  std::string formula;  // closed-form rate id, e.g. "R_T1"
  int nodes = 0;        // q-graph size
  int param_count = 0;  // free parameters beyond p
  double p_min = 0.0, p_max = 1.0;  // stated validity range in p
};

const std::vector<EncoderInfo>& builtin_encoders();

// Instantiate a builtin encoder at parameter p. params supplies the free
// parameters; when empty, defaults valid at that p are chosen
// deterministically. Throws for unknown ids, out-of-range p, or parameter
// choices that violate the encoder's validity constraints.
GraphEncoder builtin_encoder(const std::string& id, double p,
                             const std::vector<double>& params = {});

// Closed-form achievable rates / bounds:
//   R1_I (p)        one-node encoder, first feedback channel
//   R2_I (p; a)     two-node encoder, first feedback channel
//   R1_II(p)        three-node encoder, second feedback channel
//   R2_II(p; a[,b]) six-node encoder A, second feedback channel (b unused)
//   R3_II(p[; a])   six-node encoder B, second feedback channel (a unused)
//   R_ISING(p; a,b,c) six-node encoder, ising channel
//   R_T1 (p)        three-node zero-error trapdoor encoder
//   R_T2 (p; a,b)   four-node trapdoor encoder
//   C_T_UB(p; a)    trapdoor upper-bound expression (scalar family)
double closed_form_rate(const std::string& formula, double p,
                        const std::vector<double>& params = {});

// Deterministic maximization of a closed form over its free parameters at
// fixed p (grid scan + local polish).
struct OptimizedRate {
  double rate = 0.0;
  std::vector<double> params;
};
OptimizedRate optimize_params(const std::string& formula, double p);

// Threshold parameter where the graph bound becomes tight:
// families "bfc2" and "trapdoor".
struct PstarResult {
  double p_star = 0.0;
  double residual = 0.0;  // value of the defining equation at the root
};
PstarResult find_pstar(const std::string& family);

// First-order optimality check of a candidate maximizer d of the bound
// program. Multipliers satisfy grad f0 = mu + A^T lambda with mu supported
// on the active set {d = 0} (free variables get mu = 0). When lambda is not
// unique, the solution set is searched for a choice making mu nonnegative,
// so the verdict reflects whether any valid multiplier assignment exists.
struct KktReport {
  bool verdict = false;
  double stationarity_residual = 0.0;  // inf-norm of the lsq defect
  double min_mu = 0.0;                 // most negative active multiplier
  double complementarity = 0.0;        // max |mu_i * d_i|
  double feasibility = 0.0;            // max(|A d - b|, negativity of d)
  Eigen::VectorXd mu;                  // per-variable (active set only; else 0)
  Eigen::VectorXd lambda;              // per constraint row (feasible pick)
  int rank = 0;                        // rank of the stationarity system
  bool multipliers_unique = false;     // false when mu has a null direction
};

KktReport kkt_verify(const Channel& ch, const QGraph& g,
                     const JointDistribution& d, double tol = 1e-6);

}  // namespace qcap
