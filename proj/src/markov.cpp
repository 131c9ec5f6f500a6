#include "qcap/markov.hpp"

#include <cmath>

#include "qcap/digraph.hpp"

namespace qcap {

void Policy::validate(double row_tol) const {
  if ((int)v.size() != S * Q * X)
    throw QcapError("policy: table has wrong size");
  for (int s = 0; s < S; ++s)
    for (int q = 0; q < Q; ++q) {
      double row = 0.0;
      for (int x = 0; x < X; ++x) {
        double p = at(s, q, x);
        if (!(p >= -row_tol && p <= 1.0 + row_tol))
          throw QcapError("policy: entry outside [0,1] at (s=" +
                          std::to_string(s) + ",q=" + std::to_string(q) + ")");
        row += p;
      }
      if (std::abs(row - 1.0) > row_tol)
        throw QcapError("policy: row (s=" + std::to_string(s) +
                        ",q=" + std::to_string(q) + ") sums to " +
                        std::to_string(row));
    }
}

Policy uniform_policy(int S, int Q, int X) {
  Policy pol;
  pol.S = S;
  pol.Q = Q;
  pol.X = X;
  pol.v.assign(S * Q * X, 1.0 / X);
  return pol;
}

Eigen::MatrixXd transition_matrix(const CoupledGraph& cg, const Policy& pol) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(cg.N, cg.N);
  for (int n = 0; n < cg.N; ++n) {
    int s = cg.s_of(n), q = cg.q_of(n);
    for (const auto& e : cg.edges[n]) P(n, e.to) += pol.at(s, q, e.x) * e.w;
  }
  return P;
}

std::string format_nodes(const std::vector<int>& nodes, int Q) {
  std::string out = "{";
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += ", ";
    out += "(s=" + std::to_string(nodes[i] / Q) +
           ",q=" + std::to_string(nodes[i] % Q) + ")";
  }
  return out + "}";
}

StationaryResult transition_and_stationary(const CoupledGraph& cg,
                                           const Policy& pol) {
  if (pol.S != cg.ch.S || pol.Q != cg.g.Q || pol.X != cg.ch.X)
    throw QcapError("stationary: policy dimensions do not match the graph");
  pol.validate();

  // Chain structure under the support of policy * kernel.
  Adjacency adj(cg.N);
  for (int n = 0; n < cg.N; ++n) {
    int s = cg.s_of(n), q = cg.q_of(n);
    for (const auto& e : cg.edges[n])
      if (pol.at(s, q, e.x) > 0.0) adj[n].push_back(e.to);
    std::sort(adj[n].begin(), adj[n].end());
    adj[n].erase(std::unique(adj[n].begin(), adj[n].end()), adj[n].end());
  }
  ClassDecomposition dec = decompose_classes(adj);
  std::vector<int> closed_ids;
  for (size_t c = 0; c < dec.classes.size(); ++c)
    if (dec.closed[c]) closed_ids.push_back((int)c);
  if (closed_ids.size() != 1) {
    std::string msg = "stationary: no unique stationary law; closed classes:";
    for (int c : closed_ids) msg += " " + format_nodes(dec.classes[c], cg.g.Q);
    throw QcapError(msg);
  }

  StationaryResult st;
  st.closed = dec.classes[closed_ids[0]];
  std::sort(st.closed.begin(), st.closed.end());
  st.aperiodic = (period_of_class(adj, st.closed) == 1);

  Eigen::MatrixXd P = transition_matrix(cg, pol);
  int m = (int)st.closed.size();
  // Solve pi^T (P_C - I) = 0 with sum(pi) = 1 on the closed class.
  Eigen::MatrixXd M(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      M(i, j) = P(st.closed[j], st.closed[i]) - (i == j ? 1.0 : 0.0);
  for (int j = 0; j < m; ++j) M(m - 1, j) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  b(m - 1) = 1.0;
  Eigen::VectorXd pic = M.partialPivLu().solve(b);

  st.pi = Eigen::VectorXd::Zero(cg.N);
  for (int i = 0; i < m; ++i) st.pi(st.closed[i]) = pic(i);
  Eigen::VectorXd err = P.transpose() * st.pi - st.pi;
  st.residual = err.cwiseAbs().maxCoeff();
  return st;
}

Eigen::MatrixXd pi_s_given_q(const StationaryResult& st, int S, int Q) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(S, Q);
  for (int q = 0; q < Q; ++q) {
    double tot = 0.0;
    for (int s = 0; s < S; ++s) tot += st.pi(s * Q + q);
    if (tot <= 0.0) continue;
    for (int s = 0; s < S; ++s) out(s, q) = st.pi(s * Q + q) / tot;
  }
  return out;
}

double JointDistribution::mass() const {
  double tot = 0.0;
  for (double v : d) tot += v;
  return tot;
}

JointDistribution joint_from_policy(const CoupledGraph& cg, const Policy& pol,
                                    const Eigen::VectorXd& pi) {
  JointDistribution jd;
  jd.S = cg.ch.S;
  jd.Q = cg.g.Q;
  jd.X = cg.ch.X;
  jd.Y = cg.ch.Y;
  jd.d.assign(jd.S * jd.Q * jd.X * jd.Y, 0.0);
  for (int s = 0; s < jd.S; ++s)
    for (int q = 0; q < jd.Q; ++q)
      for (int x = 0; x < jd.X; ++x)
        for (int y = 0; y < jd.Y; ++y)
          jd.at(s, q, x, y) =
              pi(cg.node(s, q)) * pol.at(s, q, x) * cg.ch.w(s, x, y);
  return jd;
}

double conditional_mutual_information(const JointDistribution& jd) {
  double tot = jd.mass();
  if (tot <= 0.0) throw QcapError("conditional MI: empty distribution");

  // Marginals: B(q), A(q,y), U(s,q,x).
  std::vector<double> B(jd.Q, 0.0), A(jd.Q * jd.Y, 0.0),
      U(jd.S * jd.Q * jd.X, 0.0);
  for (int s = 0; s < jd.S; ++s)
    for (int q = 0; q < jd.Q; ++q)
      for (int x = 0; x < jd.X; ++x)
        for (int y = 0; y < jd.Y; ++y) {
          double v = jd.at(s, q, x, y);
          B[q] += v;
          A[q * jd.Y + y] += v;
          U[(s * jd.Q + q) * jd.X + x] += v;
        }

  // I(X,S;Y|Q) = sum d * log2( d * B_q / (U_sqx * A_qy) ).
  double acc = 0.0;
  for (int s = 0; s < jd.S; ++s)
    for (int q = 0; q < jd.Q; ++q)
      for (int x = 0; x < jd.X; ++x)
        for (int y = 0; y < jd.Y; ++y) {
          double v = jd.at(s, q, x, y);
          if (v <= 0.0) continue;
          acc += v * std::log2(v * B[q] /
                               (U[(s * jd.Q + q) * jd.X + x] * A[q * jd.Y + y]));
        }
  return acc / tot;
}

}  // namespace qcap
