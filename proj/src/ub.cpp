#include "qcap/ub.hpp"

#include <cmath>
#include <limits>

#include "qcap/util.hpp"

namespace qcap {

ConstraintSystem build_constraints(const Channel& ch, const QGraph& g) {
  ch.validate();
  g.validate();
  if (g.Y != ch.Y)
    throw QcapError("build_constraints: qgraph output alphabet != channel's");
  const int S = ch.S, Q = g.Q, X = ch.X, Y = ch.Y;
  const int nv = S * Q * X * Y;
  const int nr = S * Q + nv + 1;
  ConstraintSystem cs;
  cs.A = Eigen::MatrixXd::Zero(nr, nv);
  cs.b = Eigen::VectorXd::Zero(nr);
  cs.kind.resize(nr);
  cs.tag.resize(nr);
  auto vid = [&](int s, int q, int x, int y) {
    return ((s * Q + q) * X + x) * Y + y;
  };

  // Stationarity: outflow of (sb,qb) minus inflow from all (s,q,x,y).
  for (int sb = 0; sb < S; ++sb)
    for (int qb = 0; qb < Q; ++qb) {
      int r = sb * Q + qb;
      cs.kind[r] = ConstraintSystem::Row::Stationarity;
      cs.tag[r] = {sb, qb, -1, -1};
      for (int x = 0; x < X; ++x)
        for (int y = 0; y < Y; ++y) cs.A(r, vid(sb, qb, x, y)) += 1.0;
      for (int s = 0; s < S; ++s)
        for (int q = 0; q < Q; ++q)
          for (int x = 0; x < X; ++x)
            for (int y = 0; y < Y; ++y)
              if (ch.w(s, x, y) > 0.0 && ch.f(s, x, y) == sb &&
                  g.step(q, y) == qb)
                cs.A(r, vid(s, q, x, y)) -= 1.0;
    }

  // Channel law: d(s,q,x,y) = W(y|x,s) * sum_y' d(s,q,x,y').
  for (int s = 0; s < S; ++s)
    for (int q = 0; q < Q; ++q)
      for (int x = 0; x < X; ++x)
        for (int y = 0; y < Y; ++y) {
          int r = S * Q + vid(s, q, x, y);
          cs.kind[r] = ConstraintSystem::Row::ChannelLaw;
          cs.tag[r] = {s, q, x, y};
          cs.A(r, vid(s, q, x, y)) += 1.0;
          for (int y2 = 0; y2 < Y; ++y2)
            cs.A(r, vid(s, q, x, y2)) -= ch.w(s, x, y);
        }

  cs.kind[nr - 1] = ConstraintSystem::Row::Pmf;
  cs.tag[nr - 1] = {-1, -1, -1, -1};
  cs.A.row(nr - 1).setOnes();
  cs.b(nr - 1) = 1.0;
  return cs;
}

ObjectiveEval objective_and_gradient(const Channel& ch, const QGraph& g,
                                     const JointDistribution& jd) {
  if (jd.S != ch.S || jd.Q != g.Q || jd.X != ch.X || jd.Y != ch.Y)
    throw QcapError("objective: joint law dimensions do not match");
  const int S = ch.S, Q = g.Q, X = ch.X, Y = ch.Y;
  std::vector<double> A(Q * Y, 0.0), B(Q, 0.0);
  for (int s = 0; s < S; ++s)
    for (int q = 0; q < Q; ++q)
      for (int x = 0; x < X; ++x)
        for (int y = 0; y < Y; ++y) {
          double v = jd.at(s, q, x, y);
          A[q * Y + y] += v;
          B[q] += v;
        }

  ObjectiveEval ev;
  ev.grad = Eigen::VectorXd::Zero(S * Q * X * Y);
  for (int q = 0; q < Q; ++q)
    for (int y = 0; y < Y; ++y) {
      double a = A[q * Y + y];
      if (a > 0.0) ev.f0 += a * std::log2(a / B[q]);
    }
  int v = 0;
  for (int s = 0; s < S; ++s)
    for (int q = 0; q < Q; ++q)
      for (int x = 0; x < X; ++x)
        for (int y = 0; y < Y; ++y, ++v) {
          double w = ch.w(s, x, y);
          if (w <= 0.0) continue;  // pinned entry
          ev.f0 -= jd.d[v] * std::log2(w);
          double a = A[q * Y + y];
          if (a > 0.0) ev.grad(v) = std::log2(a / B[q]) - std::log2(w);
        }
  return ev;
}

namespace {

// Interior-point state for the reduced (u-space) program: variables
// u(n,x) = P(s,q,x) over nodes n of the unique closed class.
struct UbProgram {
  const CoupledGraph& cg;
  std::vector<int> R;        // closed-class nodes (sorted)
  std::vector<int> ridx;     // node -> position in R, -1 outside
  int m_u = 0;               // variable count |R| * X
  // Per variable v = i*X + x:
  std::vector<int> var_s, var_x, var_q;
  std::vector<double> h_lin;               // sum_y W log2 W
  std::vector<std::vector<int>> group;     // q -> variable ids
  std::vector<int> pos_in_group;           // variable -> offset in its group
  Eigen::MatrixXd Aeq;                     // equality rows over u
  Eigen::VectorXd beq;

  explicit UbProgram(const CoupledGraph& cg_, const std::vector<int>& closed)
      : cg(cg_), R(closed) {
    const Channel& ch = cg.ch;
    const int X = ch.X;
    int m_R = (int)R.size();
    m_u = m_R * X;
    ridx.assign(cg.N, -1);
    for (int i = 0; i < m_R; ++i) ridx[R[i]] = i;
    var_s.resize(m_u);
    var_x.resize(m_u);
    var_q.resize(m_u);
    h_lin.assign(m_u, 0.0);
    group.assign(cg.g.Q, {});
    pos_in_group.assign(m_u, -1);
    for (int i = 0; i < m_R; ++i) {
      int s = cg.s_of(R[i]), q = cg.q_of(R[i]);
      for (int x = 0; x < X; ++x) {
        int v = i * X + x;
        var_s[v] = s;
        var_x[v] = x;
        var_q[v] = q;
        for (int y = 0; y < ch.Y; ++y) h_lin[v] += xlog2x(ch.w(s, x, y));
        pos_in_group[v] = (int)group[q].size();
        group[q].push_back(v);
      }
    }
    // Equality rows: stationarity for all but the last closed node (their sum
    // is implied), then total mass.
    Aeq = Eigen::MatrixXd::Zero(m_R, m_u);
    beq = Eigen::VectorXd::Zero(m_R);
    for (int j = 0; j + 1 < m_R; ++j)
      for (int x = 0; x < X; ++x) Aeq(j, j * X + x) += 1.0;
    for (int i = 0; i < m_R; ++i) {
      int s = cg.s_of(R[i]), q = cg.q_of(R[i]);
      (void)s;
      (void)q;
      for (const auto& e : cg.edges[R[i]]) {
        int j = ridx[e.to];
        if (j >= 0 && j + 1 < m_R) Aeq(j, i * X + e.x) -= e.w;
      }
    }
    Aeq.row(m_R - 1).setOnes();
    beq(m_R - 1) = 1.0;
  }

  // Output masses A(q,y), B(q) for the current u.
  void masses(const Eigen::VectorXd& u, Eigen::MatrixXd& A,
              Eigen::VectorXd& B) const {
    const Channel& ch = cg.ch;
    A.setZero();
    B.setZero();
    for (int v = 0; v < m_u; ++v) {
      int q = var_q[v];
      B(q) += u(v);
      for (int y = 0; y < ch.Y; ++y) A(q, y) += u(v) * ch.w(var_s[v], var_x[v], y);
    }
  }

  double rate(const Eigen::VectorXd& u) const {
    Eigen::MatrixXd A(cg.g.Q, cg.ch.Y);
    Eigen::VectorXd B(cg.g.Q);
    masses(u, A, B);
    double val = 0.0;
    for (int q = 0; q < cg.g.Q; ++q)
      for (int y = 0; y < cg.ch.Y; ++y)
        if (A(q, y) > 0.0) val -= A(q, y) * std::log2(A(q, y) / B(q));
    for (int v = 0; v < m_u; ++v) val += u(v) * h_lin[v];
    return val;
  }

  Eigen::VectorXd rate_grad(const Eigen::MatrixXd& A,
                            const Eigen::VectorXd& B) const {
    Eigen::VectorXd grad(m_u);
    const Channel& ch = cg.ch;
    for (int v = 0; v < m_u; ++v) {
      double acc = h_lin[v];
      int s = var_s[v], x = var_x[v], q = var_q[v];
      for (int y = 0; y < ch.Y; ++y) {
        double w = ch.w(s, x, y);
        if (w > 0.0 && A(q, y) > 0.0) acc -= w * std::log2(A(q, y) / B(q));
      }
      grad(v) = acc;
    }
    return grad;
  }
};

}  // namespace

BoundResult solve_ub(const Channel& ch, const QGraph& g, UbOptions opts) {
  CoupledGraph cg = couple(ch, g);
  CoupledCheck chk = validate_coupled(cg);
  if (!chk.single_closed_class)
    throw QcapError(
        "solve_ub: coupled graph has " + std::to_string(chk.closed_class_count) +
        " closed classes; a unique aperiodic class is required");
  if (!chk.aperiodic)
    throw QcapError("solve_ub: coupled chain is periodic under full support");

  UbProgram prog(cg, chk.closed_class);
  const int m_u = prog.m_u, Q = g.Q, Y = ch.Y;

  // Feasible interior start: stationary law of a full-support policy.
  Policy pol0 = uniform_policy(ch.S, Q, ch.X);
  if (opts.random_start) {
    Rng rng(opts.seed, 17);
    for (int s = 0; s < ch.S; ++s)
      for (int q = 0; q < Q; ++q) {
        auto row = rng.next_simplex(ch.X);
        // Blend with uniform so every input keeps positive mass.
        for (int x = 0; x < ch.X; ++x)
          pol0.at(s, q, x) = 0.9 * row[x] + 0.1 / ch.X;
      }
  }
  StationaryResult st0 = transition_and_stationary(cg, pol0);
  Eigen::VectorXd u(m_u);
  for (int v = 0; v < m_u; ++v)
    u(v) = st0.pi(prog.R[v / ch.X]) * pol0.at(prog.var_s[v],
                                              prog.var_q[v], prog.var_x[v]);
  u = u.cwiseMax(1e-300);

  Eigen::MatrixXd A(Q, Y);
  Eigen::VectorXd B(Q);
  double tau = 0.1;
  const double tau_end = 0.25 * opts.obj_tol / m_u;
  int iters = 0;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt(Q);

  auto barrier_value = [&](const Eigen::VectorXd& uu) {
    double phi = prog.rate(uu);
    for (int v = 0; v < m_u; ++v) phi += tau * std::log(uu(v));
    return phi;
  };

  while (true) {
    // Center for the current tau.
    for (int inner = 0;; ++inner) {
      if (iters >= opts.max_newton)
        throw QcapError("solve_ub: Newton iteration budget exhausted");
      prog.masses(u, A, B);
      Eigen::VectorXd gphi = prog.rate_grad(A, B);
      for (int v = 0; v < m_u; ++v) gphi(v) += tau / u(v);

      // Per-q Hessian blocks of -(rate + barrier), factored by Cholesky.
      for (int q = 0; q < Q; ++q) {
        int nq = (int)prog.group[q].size();
        if (nq == 0) continue;
        Eigen::MatrixXd Hq = Eigen::MatrixXd::Constant(
            nq, nq, -kLog2E / std::max(B(q), 1e-300));
        for (int y = 0; y < Y; ++y) {
          if (A(q, y) <= 0.0) continue;
          Eigen::VectorXd wv(nq);
          for (int k = 0; k < nq; ++k) {
            int v = prog.group[q][k];
            wv(k) = ch.w(prog.var_s[v], prog.var_x[v], y);
          }
          Hq.noalias() += (kLog2E / A(q, y)) * (wv * wv.transpose());
        }
        for (int k = 0; k < nq; ++k) {
          int v = prog.group[q][k];
          Hq(k, k) += tau / (u(v) * u(v));
        }
        llt[q].compute(Hq);
        if (llt[q].info() != Eigen::Success) {
          Hq.diagonal().array() += 1e-12 * Hq.diagonal().maxCoeff() + 1e-300;
          llt[q].compute(Hq);
          if (llt[q].info() != Eigen::Success)
            throw QcapError("solve_ub: Hessian factorization failed");
        }
      }

      auto block_solve = [&](const Eigen::MatrixXd& rhs) {
        Eigen::MatrixXd out(m_u, rhs.cols());
        for (int q = 0; q < Q; ++q) {
          int nq = (int)prog.group[q].size();
          if (nq == 0) continue;
          Eigen::MatrixXd sub(nq, rhs.cols());
          for (int k = 0; k < nq; ++k) sub.row(k) = rhs.row(prog.group[q][k]);
          Eigen::MatrixXd sol = llt[q].solve(sub);
          for (int k = 0; k < nq; ++k) out.row(prog.group[q][k]) = sol.row(k);
        }
        return out;
      };

      // KKT solve by Schur complement on the equality multipliers.
      Eigen::MatrixXd Hig = block_solve(gphi);
      Eigen::MatrixXd HiAt = block_solve(prog.Aeq.transpose());
      Eigen::MatrixXd Schur = prog.Aeq * HiAt;
      Eigen::VectorXd rhs = prog.Aeq * Hig;
      Eigen::VectorXd nu;
      Eigen::LLT<Eigen::MatrixXd> sllt(Schur);
      if (sllt.info() == Eigen::Success) {
        nu = sllt.solve(rhs);
      } else {
        nu = Schur.completeOrthogonalDecomposition().solve(rhs);
      }
      Eigen::VectorXd step = Hig - HiAt * nu;
      double dec2 = gphi.dot(step);
      ++iters;
      if (!(dec2 > 0) || dec2 <= std::max(1e-13, 0.005 * tau)) break;

      // Longest feasible step, then Armijo backtracking.
      double tmax = 1.0;
      for (int v = 0; v < m_u; ++v)
        if (step(v) < 0.0) tmax = std::min(tmax, -u(v) / step(v) * 0.995);
      double t = tmax;
      double phi0 = barrier_value(u);
      for (int ls = 0; ls < 60; ++ls) {
        Eigen::VectorXd cand = u + t * step;
        if (cand.minCoeff() > 0.0) {
          double phi1 = barrier_value(cand);
          if (std::isfinite(phi1) && phi1 >= phi0 + 0.25 * t * dec2) {
            u = cand;
            break;
          }
        }
        t *= 0.5;
        if (ls == 59) u = (u + t * step).cwiseMax(1e-300);
      }
      if (inner > 200)
        throw QcapError("solve_ub: centering failed to converge");
    }
    if (tau <= tau_end * (1.0 + 1e-12)) break;
    tau = std::max(tau * 0.15, tau_end);
  }

  // Report in d-space with an honest feasibility check.
  BoundResult res;
  res.kind = "ub";
  res.iterations = iters;
  res.optimality_gap = m_u * tau;
  res.value = prog.rate(u);
  res.argmax.S = ch.S;
  res.argmax.Q = Q;
  res.argmax.X = ch.X;
  res.argmax.Y = Y;
  res.argmax.d.assign(ch.S * Q * ch.X * Y, 0.0);
  for (int v = 0; v < m_u; ++v)
    for (int y = 0; y < Y; ++y)
      res.argmax.at(prog.var_s[v], prog.var_q[v], prog.var_x[v], y) =
          u(v) * ch.w(prog.var_s[v], prog.var_x[v], y);

  ConstraintSystem cs = build_constraints(ch, g);
  Eigen::VectorXd dvec =
      Eigen::Map<const Eigen::VectorXd>(res.argmax.d.data(),
                                        (int)res.argmax.d.size());
  res.feasibility_residual = (cs.A * dvec - cs.b).cwiseAbs().maxCoeff();
  return res;
}

ExtractedPolicy extract_policy(const JointDistribution& jd, double mass_tol) {
  ExtractedPolicy ex;
  ex.pol.S = jd.S;
  ex.pol.Q = jd.Q;
  ex.pol.X = jd.X;
  ex.pol.v.assign(jd.S * jd.Q * jd.X, 0.0);
  ex.pi = Eigen::VectorXd::Zero(jd.S * jd.Q);
  ex.defaulted.assign(jd.S * jd.Q, 0);
  for (int s = 0; s < jd.S; ++s)
    for (int q = 0; q < jd.Q; ++q) {
      double tot = 0.0;
      std::vector<double> ux(jd.X, 0.0);
      for (int x = 0; x < jd.X; ++x)
        for (int y = 0; y < jd.Y; ++y) {
          ux[x] += jd.at(s, q, x, y);
          tot += jd.at(s, q, x, y);
        }
      ex.pi(s * jd.Q + q) = tot;
      if (tot > mass_tol) {
        for (int x = 0; x < jd.X; ++x) ex.pol.at(s, q, x) = ux[x] / tot;
      } else {
        // No stationary mass: leave a uniform row and flag it.
        for (int x = 0; x < jd.X; ++x) ex.pol.at(s, q, x) = 1.0 / jd.X;
        ex.defaulted[s * jd.Q + q] = 1;
      }
    }
  return ex;
}

}  // namespace qcap
