#include "qcap/lb.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "qcap/json_io.hpp"
#include "qcap/ub.hpp"

namespace qcap {

using json = nlohmann::json;

double bcjr_residual(const Channel& ch, const QGraph& g, const Policy& pol,
                     const StationaryResult& st) {
  const int S = ch.S, Q = g.Q, X = ch.X, Y = ch.Y;
  Eigen::MatrixXd psq = pi_s_given_q(st, S, Q);
  std::vector<double> piQ(Q, 0.0);
  for (int s = 0; s < S; ++s)
    for (int q = 0; q < Q; ++q) piQ[q] += st.pi(s * Q + q);

  double worst = 0.0;
  std::vector<double> num(S);
  for (int q = 0; q < Q; ++q) {
    if (piQ[q] <= 0.0) continue;
    for (int y = 0; y < Y; ++y) {
      std::fill(num.begin(), num.end(), 0.0);
      double den = 0.0;
      for (int s = 0; s < S; ++s) {
        if (psq(s, q) <= 0.0) continue;
        for (int x = 0; x < X; ++x) {
          double c = psq(s, q) * pol.at(s, q, x) * ch.w(s, x, y);
          if (c > 0.0) {
            num[ch.f(s, x, y)] += c;
            den += c;
          }
        }
      }
      if (den <= 0.0) continue;  // output y impossible at node q
      int qn = g.step(q, y);
      for (int sp = 0; sp + 1 < S; ++sp)
        worst = std::max(worst, std::abs(num[sp] / den - psq(sp, qn)));
    }
  }
  return worst;
}

double bcjr_residual(const Channel& ch, const QGraph& g, const Policy& pol) {
  CoupledGraph cg = couple(ch, g);
  StationaryResult st = transition_and_stationary(cg, pol);
  return bcjr_residual(ch, g, pol, st);
}

CertResult certify_encoder(const Channel& ch, const QGraph& g,
                           const Policy& pol, double tol) {
  CertResult cr;
  try {
    ch.validate();
    g.validate();
    if (pol.S != ch.S || pol.Q != g.Q || pol.X != ch.X)
      throw QcapError("encoder policy dimensions do not match channel/graph");
    pol.validate(1e-9);
    CoupledGraph cg = couple(ch, g);
    cr.st = transition_and_stationary(cg, pol);
    cr.residual = bcjr_residual(ch, g, pol, cr.st);
    JointDistribution jd = joint_from_policy(cg, pol, cr.st.pi);
    cr.rate = conditional_mutual_information(jd);
    if (!cr.st.aperiodic) {
      cr.detail = "coupled chain under the policy is periodic";
      return cr;
    }
    if (cr.residual > tol) {
      cr.detail = "BCJR residual " + std::to_string(cr.residual) +
                  " exceeds tolerance";
      return cr;
    }
    cr.ok = true;
  } catch (const QcapError& e) {
    cr.detail = e.what();
  }
  return cr;
}

namespace {

// Stick-breaking coordinates: each policy row (s,q) is parametrized by X-1
// values in [0,1]; boundaries of the box reach deterministic rows exactly.
Policy stick_policy(int S, int Q, int X, const Eigen::VectorXd& th) {
  Policy pol;
  pol.S = S;
  pol.Q = Q;
  pol.X = X;
  pol.v.assign(S * Q * X, 0.0);
  int k = X - 1;
  for (int r = 0; r < S * Q; ++r) {
    double rem = 1.0;
    for (int j = 0; j < k; ++j) {
      double p = th(r * k + j) * rem;
      pol.v[r * X + j] = p;
      rem -= p;
    }
    pol.v[r * X + (X - 1)] = std::max(rem, 0.0);
  }
  return pol;
}

Eigen::VectorXd stick_inverse(const Policy& pol) {
  int k = pol.X - 1;
  Eigen::VectorXd th = Eigen::VectorXd::Zero(pol.S * pol.Q * k);
  for (int r = 0; r < pol.S * pol.Q; ++r) {
    double rem = 1.0;
    for (int j = 0; j < k; ++j) {
      double v = rem > 1e-15 ? pol.v[r * pol.X + j] / rem : 0.0;
      th(r * k + j) = std::clamp(v, 0.0, 1.0);
      rem -= pol.v[r * pol.X + j];
    }
  }
  return th;
}

Eigen::VectorXd clamp01(Eigen::VectorXd v) {
  for (int i = 0; i < v.size(); ++i) v(i) = std::clamp(v(i), 0.0, 1.0);
  return v;
}

// Root-finding problem: residual vector of the BCJR constraints as a
// function of the stick coordinates. Infeasible chain structure (several
// closed classes) is pushed away with a constant penalty.
struct LbProblem {
  const CoupledGraph& cg;
  int S, Q, X, Y, dim, m;

  explicit LbProblem(const CoupledGraph& cg_)
      : cg(cg_),
        S(cg_.ch.S),
        Q(cg_.g.Q),
        X(cg_.ch.X),
        Y(cg_.ch.Y),
        dim(S * Q * (X - 1)),
        m((S - 1) * Q * Y) {}

  Eigen::VectorXd residual_vec(const Eigen::VectorXd& th) const {
    Policy pol = stick_policy(S, Q, X, th);
    StationaryResult st;
    try {
      st = transition_and_stationary(cg, pol);
    } catch (const QcapError&) {
      return Eigen::VectorXd::Constant(std::max(m, 1), 10.0);
    }
    Eigen::MatrixXd psq = pi_s_given_q(st, S, Q);
    std::vector<double> piQ(Q, 0.0);
    for (int s = 0; s < S; ++s)
      for (int q = 0; q < Q; ++q) piQ[q] += st.pi(s * Q + q);

    Eigen::VectorXd r = Eigen::VectorXd::Zero(std::max(m, 1));
    std::vector<double> num(S);
    for (int q = 0; q < Q; ++q) {
      if (piQ[q] <= 0.0) continue;
      for (int y = 0; y < Y; ++y) {
        std::fill(num.begin(), num.end(), 0.0);
        double den = 0.0;
        for (int s = 0; s < S; ++s) {
          if (psq(s, q) <= 0.0) continue;
          for (int x = 0; x < X; ++x) {
            double c = psq(s, q) * pol.at(s, q, x) * cg.ch.w(s, x, y);
            if (c > 0.0) {
              num[cg.ch.f(s, x, y)] += c;
              den += c;
            }
          }
        }
        if (den <= 0.0) continue;
        int qn = cg.g.step(q, y);
        for (int sp = 0; sp + 1 < S; ++sp)
          r(((sp)*Q + q) * Y + y) = num[sp] / den - psq(sp, qn);
      }
    }
    return r;
  }

  // Certified-rate objective used by the manifold ascent; -1 on failure.
  double rate(const Eigen::VectorXd& th) const {
    Policy pol = stick_policy(S, Q, X, th);
    try {
      StationaryResult st = transition_and_stationary(cg, pol);
      return conditional_mutual_information(joint_from_policy(cg, pol, st.pi));
    } catch (const QcapError&) {
      return -1.0;
    }
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& th) const {
    const double h = 1e-6;
    Eigen::MatrixXd J(std::max(m, 1), dim);
    for (int j = 0; j < dim; ++j) {
      Eigen::VectorXd lo = th, hi = th;
      hi(j) = std::min(1.0, th(j) + h);
      lo(j) = std::max(0.0, th(j) - h);
      double dh = hi(j) - lo(j);
      if (dh <= 0.0) {
        J.col(j).setZero();
        continue;
      }
      J.col(j) = (residual_vec(hi) - residual_vec(lo)) / dh;
    }
    return J;
  }
};

struct RootCandidate {
  Eigen::VectorXd th;
  double rnorm = 1e9;  // max-abs residual
  double rate = -1.0;
};

RootCandidate lm_root(const LbProblem& P, Eigen::VectorXd th, int max_iter) {
  RootCandidate out;
  Eigen::VectorXd r = P.residual_vec(th);
  double f = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < max_iter; ++it) {
    if (r.lpNorm<Eigen::Infinity>() < 1e-12) break;
    Eigen::MatrixXd J = P.jacobian(th);
    Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::VectorXd Jtr = J.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 10; ++tries) {
      Eigen::MatrixXd Mred = JtJ;
      Mred.diagonal().array() += lambda;
      Eigen::VectorXd delta = Mred.ldlt().solve(-Jtr);
      Eigen::VectorXd trial = clamp01(th + delta);
      Eigen::VectorXd rt = P.residual_vec(trial);
      double ft = rt.squaredNorm();
      if (ft < f) {
        th = trial;
        r = rt;
        f = ft;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e12) break;
    }
    if (!accepted) break;
  }
  out.th = th;
  out.rnorm = r.lpNorm<Eigen::Infinity>();
  out.rate = P.rate(th);
  return out;
}

// Rate ascent along the null space of the residual Jacobian: BCJR roots can
// form continuous families, and only the best point of a family matters.
void tangent_ascent(const LbProblem& P, RootCandidate& cand, double root_tol) {
  if (P.dim == 0) return;
  double eta = 0.05;
  const double h = 1e-6;
  for (int iter = 0; iter < 60 && eta > 1e-7; ++iter) {
    Eigen::MatrixXd J = P.jacobian(cand.th);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double smax = sv.size() ? sv(0) : 0.0;
    std::vector<int> null_cols;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) <= std::max(1e-8, 1e-6 * smax)) null_cols.push_back(i);
    int extra = P.dim - sv.size();  // columns beyond the rank bound
    if (null_cols.empty() && extra <= 0) break;
    Eigen::MatrixXd Nb(P.dim, (int)null_cols.size() + std::max(extra, 0));
    int c = 0;
    for (int i : null_cols) Nb.col(c++) = svd.matrixV().col(i);
    for (int i = sv.size(); i < P.dim && extra > 0; ++i)
      Nb.col(c++) = svd.matrixV().col(i);

    // Finite-difference rate gradient projected on the tangent space.
    Eigen::VectorXd grad(P.dim);
    for (int j = 0; j < P.dim; ++j) {
      Eigen::VectorXd hi = cand.th, lo = cand.th;
      hi(j) = std::min(1.0, cand.th(j) + h);
      lo(j) = std::max(0.0, cand.th(j) - h);
      double dh = hi(j) - lo(j);
      grad(j) = dh > 0.0 ? (P.rate(hi) - P.rate(lo)) / dh : 0.0;
    }
    Eigen::VectorXd dir = Nb * (Nb.transpose() * grad);
    double n = dir.norm();
    if (n < 1e-9) break;
    dir /= n;

    RootCandidate trial = lm_root(P, clamp01(cand.th + eta * dir), 40);
    if (trial.rnorm <= root_tol && trial.rate > cand.rate + 1e-12) {
      cand = trial;
      eta = std::min(eta * 1.4, 0.25);
    } else {
      eta *= 0.45;
    }
  }
}

}  // namespace

LbResult solve_lb(const Channel& ch, const QGraph& g, LbOptions opts) {
  CoupledGraph cg = couple(ch, g);
  CoupledCheck chk = validate_coupled(cg);
  if (!chk.single_closed_class)
    throw QcapError("solve_lb: coupled graph has " +
                    std::to_string(chk.closed_class_count) +
                    " closed classes; a unique aperiodic class is required");
  if (!chk.aperiodic)
    throw QcapError("solve_lb: coupled chain is periodic under full support");

  LbProblem P(cg);
  const double root_tol = std::min(1e-9, opts.bcjr_tol / 10.0);

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(stick_inverse(uniform_policy(ch.S, g.Q, ch.X)));
  try {
    // The optimizer of the upper-bound program is usually close to the best
    // graph-based encoder; use it as a privileged start.
    UbOptions uo;
    uo.obj_tol = 1e-7;
    BoundResult ub = solve_ub(ch, g, uo);
    starts.push_back(stick_inverse(extract_policy(ub.argmax).pol));
  } catch (const QcapError&) {
    // fall back to random starts only
  }
  Rng rng(opts.seed, 29);
  while ((int)starts.size() < std::max(opts.starts, 2)) {
    Eigen::VectorXd th(P.dim);
    for (int j = 0; j < P.dim; ++j) th(j) = 0.02 + 0.96 * rng.next_double();
    starts.push_back(th);
  }

  std::vector<RootCandidate> roots;
  double best_rnorm_seen = 1e9;
  for (const auto& th0 : starts) {
    RootCandidate cand = lm_root(P, th0, 120);
    best_rnorm_seen = std::min(best_rnorm_seen, cand.rnorm);
    if (cand.rnorm <= root_tol) roots.push_back(cand);
  }

  if (opts.polish) {
    std::sort(roots.begin(), roots.end(),
              [](const auto& a, const auto& b) { return a.rate > b.rate; });
    int to_polish = std::min<int>((int)roots.size(), 6);
    for (int i = 0; i < to_polish; ++i) tangent_ascent(P, roots[i], root_tol);
  }

  LbResult res;
  RootCandidate best;
  std::vector<double> values;
  for (const auto& cand : roots) {
    Policy pol = stick_policy(ch.S, g.Q, ch.X, cand.th);
    CertResult cr = certify_encoder(ch, g, pol, opts.bcjr_tol);
    if (!cr.ok) continue;
    ++res.certified_count;
    values.push_back(cr.rate);
    if (res.certified_count == 1 || cr.rate > res.value) {
      res.value = cr.rate;
      best = cand;
      res.residual = cr.residual;
    }
  }
  if (res.certified_count == 0)
    throw QcapError(
        "solve_lb: no BCJR-consistent encoder certified (" +
        std::to_string(starts.size()) + " starts, " +
        std::to_string(roots.size()) + " roots, best residual " +
        std::to_string(best_rnorm_seen) + ")");

  std::sort(values.begin(), values.end(), std::greater<double>());
  values.erase(std::unique(values.begin(), values.end(),
                           [](double a, double b) { return a - b < 1e-9; }),
               values.end());
  res.all_values = values;
  res.best.ch = ch;
  res.best.g = g;
  res.best.pol = stick_policy(ch.S, g.Q, ch.X, best.th);
  res.best.rate = res.value;
  return res;
}

GraphEncoder load_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw QcapError("cannot open encoder file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw QcapError("encoder file " + path + ": bad JSON: " + e.what());
  }
  GraphEncoder enc;
  try {
    enc.ch = channel_from_json(j.at("channel"), "encoder file " + path);
    enc.g = qgraph_from_json(j.at("qgraph"), "encoder file " + path);
    enc.family = j.value("family", std::string());
    enc.p = j.value("p", std::numeric_limits<double>::quiet_NaN());
    enc.rate = j.value("rate", 0.0);
    const auto& pj = j.at("policy");
    enc.pol.S = enc.ch.S;
    enc.pol.Q = enc.g.Q;
    enc.pol.X = enc.ch.X;
    enc.pol.v.assign(enc.pol.S * enc.pol.Q * enc.pol.X, 0.0);
    if ((int)pj.size() != enc.pol.S)
      throw QcapError("encoder file: policy must have S rows");
    for (int s = 0; s < enc.pol.S; ++s) {
      if ((int)pj[s].size() != enc.pol.Q)
        throw QcapError("encoder file: policy must have Q entries per state");
      for (int q = 0; q < enc.pol.Q; ++q) {
        if ((int)pj[s][q].size() != enc.pol.X)
          throw QcapError("encoder file: policy rows must have X entries");
        for (int x = 0; x < enc.pol.X; ++x)
          enc.pol.at(s, q, x) = pj[s][q][x].get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw QcapError("encoder file " + path + ": " + e.what());
  }
  enc.pol.validate(1e-9);
  return enc;
}

void save_encoder(const GraphEncoder& enc, const std::string& path) {
  json j;
  j["channel"] = channel_to_json(enc.ch);
  j["qgraph"] = qgraph_to_json(enc.g);
  if (!enc.family.empty()) j["family"] = enc.family;
  if (std::isfinite(enc.p)) j["p"] = enc.p;
  j["rate"] = enc.rate;
  json ps = json::array();
  for (int s = 0; s < enc.pol.S; ++s) {
    json qs = json::array();
    for (int q = 0; q < enc.pol.Q; ++q) {
      json xs = json::array();
      for (int x = 0; x < enc.pol.X; ++x) xs.push_back(enc.pol.at(s, q, x));
      qs.push_back(xs);
    }
    ps.push_back(qs);
  }
  j["policy"] = ps;
  std::ofstream out(path);
  if (!out) throw QcapError("cannot write encoder file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace qcap
