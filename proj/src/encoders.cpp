// Reference encoder catalog: hand-specified Q-graphs and input policies
// whose posterior state laws are exact BCJR fixed points, the matching
// closed-form rate expressions, deterministic parameter optimization,
// threshold (p*) roots, and the KKT certificate for the bound program.
#include "qcap/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "qcap/util.hpp"

namespace qcap {

namespace {

constexpr double kRangeTol = 1e-12;   // slack for p / parameter range checks
constexpr double kProbTol = 1e-9;     // slack before a policy entry is invalid

double sq(double v) { return v * v; }

[[noreturn]] void fail(const std::string& msg) { throw QcapError(msg); }

double checked_prob(double v, const std::string& what) {
  if (!std::isfinite(v) || v < -kProbTol || v > 1.0 + kProbTol) {
    std::ostringstream os;
    os << what << " = " << v << " falls outside [0, 1]";
    fail(os.str());
  }
  return std::min(1.0, std::max(0.0, v));
}

void check_p_range(const std::string& id, double p, double lo, double hi) {
  if (!(p >= lo - kRangeTol && p <= hi + kRangeTol)) {
    std::ostringstream os;
    os << id << ": p = " << p << " outside validity range [" << lo << ", "
       << hi << "]";
    fail(os.str());
  }
}

void check_param_count(const std::string& id, const std::vector<double>& par,
                       std::size_t lo, std::size_t hi) {
  if (par.size() < lo || par.size() > hi) {
    std::ostringstream os;
    os << id << ": expected ";
    if (lo == hi)
      os << lo;
    else
      os << lo << ".." << hi;
    os << " parameters, got " << par.size();
    fail(os.str());
  }
}

// Binary-output graph from per-node (on y=0, on y=1) successor pairs.
QGraph binary_graph(const std::vector<std::array<int, 2>>& rows) {
  QGraph g;
  g.Q = (int)rows.size();
  g.Y = 2;
  g.T.resize(2 * rows.size());
  for (int q = 0; q < g.Q; ++q) {
    g.at(q, 0) = rows[q][0];
    g.at(q, 1) = rows[q][1];
  }
  return g;
}

// Binary-input policy from P(X=0 | s, q) entries, validated and clamped.
Policy policy_from_x0(const std::vector<std::vector<double>>& x0_given_sq) {
  Policy pol;
  pol.S = (int)x0_given_sq.size();
  pol.Q = (int)x0_given_sq[0].size();
  pol.X = 2;
  pol.v.assign((std::size_t)pol.S * pol.Q * 2, 0.0);
  for (int s = 0; s < pol.S; ++s)
    for (int q = 0; q < pol.Q; ++q) {
      std::ostringstream os;
      os << "policy entry P(x=0 | s=" << s << ", q=" << q << ")";
      double v = checked_prob(x0_given_sq[s][q], os.str());
      pol.at(s, q, 0) = v;
      pol.at(s, q, 1) = 1.0 - v;
    }
  return pol;
}

struct Built {
  QGraph g;
  Policy pol;
};

// ---------------------------------------------------------------------------
// Closed-form ingredients.

// Gamma_q(a, p): output law per node of the first six-node encoder for the
// second feedback channel.
std::array<double, 6> gamma_q(double a, double p) {
  double pb = 1.0 - p, ab = 1.0 - a;
  std::array<double, 6> g{};
  g[0] = pb;
  g[1] = 0.5;
  g[2] = pb * (2.0 * p * a + ab);
  g[3] = 2.0 * p * pb / (2.0 * p * a + ab);
  g[4] = (2.0 * p * pb * (1.0 - 2.0 * a) + a) /
         (2.0 * (p + a - 3.0 * p * a + 2.0 * p * p * a));
  g[5] = 2.0 * p * pb * (2.0 * p * p - 2.0 * p + 1.0) /
         (2.0 * p * pb * (1.0 - 2.0 * a) + a);
  return g;
}

// Lambda_q(p): output law per node of the second six-node encoder.
std::array<double, 6> lambda_q(double p) {
  double pb = 1.0 - p;
  std::array<double, 6> l{};
  l[0] = pb;
  l[1] = 0.5;
  l[2] = (1.0 - 2.0 * p * p) / (2.0 * pb);
  l[3] = (1.0 + 2.0 * p * pb * (2.0 * p * p - 6.0 * p + 1.0)) /
         (2.0 * pb * (1.0 - 2.0 * p * p));
  double num5 = -8.0 * std::pow(p, 6) + 48.0 * std::pow(p, 5) -
                116.0 * std::pow(p, 4) + 124.0 * std::pow(p, 3) -
                58.0 * p * p + 8.0 * p + 1.0;
  double den5 = 8.0 * std::pow(p, 5) - 40.0 * std::pow(p, 4) +
                60.0 * std::pow(p, 3) - 32.0 * p * p + 2.0 * p + 2.0;
  l[4] = num5 / den5;
  l[5] = 16.0 * p * std::pow(pb, 7) / num5;
  return l;
}

// Normalized node weights for the R2_II expression.
std::array<double, 6> pi_q_r2(const std::array<double, 6>& g) {
  double g1b = 1.0 - g[0], g3b = 1.0 - g[2];
  std::array<double, 6> w = {g[2] * g[3] + g3b * g[4] * g[5],
                             g1b * (g[2] + g3b * g[4]),
                             g1b,
                             g1b * g[2],
                             g1b * g3b,
                             g1b * g3b * g[4]};
  double n = 0.0;
  for (double v : w) n += v;
  for (double& v : w) v /= n;
  return w;
}

// Normalized node weights for the R3_II expression.
std::array<double, 6> pi_q_r3(const std::array<double, 6>& l) {
  double l1b = 1.0 - l[0];
  std::array<double, 6> w = {l[2] * l[3] * l[4] * l[5],
                             l1b * l[2] * l[3] * l[4],
                             l1b,
                             l1b * l[2],
                             l1b * l[2] * l[3],
                             l1b * l[2] * l[3] * l[4]};
  double n = 0.0;
  for (double v : w) n += v;
  for (double& v : w) v /= n;
  return w;
}

double ising_k(double p, double a, double b, double c) {
  double pb = 1.0 - p;
  return 1.0 - pb * ((1.0 + 2.0 * p * p) * (1.0 - a * b) +
                     a * (1.0 - c) * pb + c * p + 3.0 * a * b * p);
}

// Region of (a, b, c) on which the six-node ising encoder is valid.
bool ising_region_ok(double p, double a, double b, double c) {
  double pb = 1.0 - p, ab_ = 1.0 - a, bb = 1.0 - b, cb = 1.0 - c;
  const double s = 1e-12;
  if (!(c >= -s && c <= 0.5 + s && a >= 0.5 - s && a <= b + s && b <= 1.0 + s))
    return false;
  if (p * (1.0 - a * b) - ab_ * b < -s) return false;
  if (a * pb * (bb - c) - p * cb + a * b * p + p * p * (1.0 - a * b) < -s)
    return false;
  if (a * b * pb * (p * p + pb * bb + cb) + cb * (p * bb - a * pb) -
          p * p * pb <
      -s)
    return false;
  return true;
}

struct T4Entries {
  double p001, p111, p002, p112;
};

T4Entries trapdoor_4node_entries(double p, double a, double b) {
  double pb = 1.0 - p, ab_ = 1.0 - a;
  double e1 = a * ab_ * pb - ab_ * b + a * a * p - a * b * p;
  double e2 = a * pb * pb + 2.0 * a * b * pb * pb + 5.0 * a * a * p * pb -
              b * pb - a * a * pb - a * b * p * pb + b * p * p - a * a;
  T4Entries e;
  e.p001 = b / a;
  e.p111 = e1 / (a * ab_ * pb);
  e.p002 = e1 * e2 /
           (p * pb * a * ab_ * (b * p - a * b * pb - 2.0 * a * a * p + a * a));
  e.p112 = (b - a) * (e2 - a * ab_ * p * pb) / (p * ab_ * e1);
  return e;
}

// Exact rate of the 4-node trapdoor encoder family at (a, b): I(X,S;Y|Q) =
// H(Y|Q) - P(X != S) H2(p), assembled from the closed-form conditional state
// law pi(s|q) and the node occupation law of the output-driven node chain.
// Returns false when (p, a, b) do not induce a valid irreducible encoder.
bool t2_rate_if_valid(double p, double a, double b, double* rate_out) {
  if (!(p > 0.5 && p < 1.0)) return false;
  if (!(a > 0.0 && a < 1.0 && b >= 0.0 && b <= 1.0 && b < a)) return false;
  T4Entries e = trapdoor_4node_entries(p, a, b);
  for (double v : {e.p001, e.p111, e.p002, e.p112})
    if (!std::isfinite(v) || v < -kProbTol || v > 1.0 + kProbTol) return false;
  double pb = 1.0 - p;
  double g = (p * b - a * b - 2.0 * p * a * a + a * a + p * a * b) /
             ((a - b) * pb);
  if (!std::isfinite(g) || g < -kProbTol || g > 1.0 + kProbTol) return false;
  double pi0[4] = {a, g, 1.0 - g, 1.0 - a};           // pi(s=0|q)
  double x0s0[4] = {e.p001, e.p002, e.p112, e.p111};  // P(x=0|s=0,q)
  double x1s1[4] = {e.p111, e.p112, e.p002, e.p001};  // P(x=1|s=1,q)
  double phi[4], mism[4];
  for (int q = 0; q < 4; ++q) {
    double c0 = std::clamp(x0s0[q], 0.0, 1.0);
    double c1 = std::clamp(x1s1[q], 0.0, 1.0);
    // y=0 needs s=0 (prob p) or x=0 (prob 1-p).
    phi[q] = pi0[q] * (p + pb * c0) + (1.0 - pi0[q]) * pb * (1.0 - c1);
    mism[q] = pi0[q] * (1.0 - c0) + (1.0 - pi0[q]) * (1.0 - c1);
    if (!(phi[q] > 1e-12 && phi[q] < 1.0 - 1e-12)) return false;
  }
  // Node chain: 1 and 3 both move to 1 on y=0 and to 2 on y=1; 2 and 4 both
  // move to 3 on y=0 and to 4 on y=1. Stationarity forces pi(2) = pi(3).
  double w[4] = {phi[2] / (1.0 - phi[0]), 1.0, 1.0, (1.0 - phi[1]) / phi[3]};
  double norm = w[0] + w[1] + w[2] + w[3];
  double r = 0.0;
  for (int q = 0; q < 4; ++q)
    r += (w[q] / norm) * (h2(phi[q]) - mism[q] * h2(p));
  if (!std::isfinite(r)) return false;
  *rate_out = r;
  return true;
}

// ---------------------------------------------------------------------------
// Closed-form rate expressions (no solver).

double rate_r1_i(double p) { return 1.0 - h2(p); }

double rate_r2_i(double p, double a) {
  double pb = 1.0 - p;
  double w = a * pb + (1.0 - a) * p;
  double inner = (w > 0.0) ? a * pb / w : 0.0;
  return (h2(w) + w * h2(inner)) / (1.0 + w) - h2(p);
}

double rate_r1_ii(double p) {
  double pb = 1.0 - p;
  return (1.0 + h2(2.0 * p * pb) - 2.0 * h2(p)) / (2.0 * (2.0 - p));
}

double rate_r2_ii(double p, double a) {
  auto g = gamma_q(a, p);
  auto w = pi_q_r2(g);
  double r = -h2(p);
  for (int q = 0; q < 6; ++q) r += w[q] * h2(g[q]);
  return r;
}

double rate_r3_ii(double p) {
  auto l = lambda_q(p);
  auto w = pi_q_r3(l);
  double r = -h2(p);
  for (int q = 0; q < 6; ++q) r += w[q] * h2(l[q]);
  return r;
}

double rate_ising(double p, double a, double b, double c) {
  if (!ising_region_ok(p, a, b, c))
    fail("R_ISING: (a, b, c) outside the stated parameter region");
  double pb = 1.0 - p, cb = 1.0 - c;
  double k = ising_k(p, a, b, c);
  if (std::abs(k) < 1e-14) fail("R_ISING: degenerate normalizer k = 0");
  double pref = cb / (cb * (1.0 + a) + 1.0 - a * b);
  double bracket = h2(a) + a * h2(b) + (1.0 - a * b) / cb * h2(c) +
                   (1.0 - a * b) * (k - 2.0 * p * p * p +
                                    2.0 * a * b * p * pb * pb) /
                       (k * cb) * h2(p);
  return pref * bracket;
}

double rate_t1(double p) {
  double z = (1.0 - 2.0 * p) / (1.0 - p);
  double inner = (1.0 - z) / (2.0 - z);
  return (h2(z) + z * (1.0 - h2(inner))) / (1.0 + z);
}

double rate_t2(double p, double a, double b) {
  double r = 0.0;
  if (!t2_rate_if_valid(p, a, b, &r))
    fail("R_T2: (p, a, b) do not induce a valid 4-node encoder");
  return r;
}

double rate_ct_ub(double p, double a) {
  return (h2(a) + a * (1.0 - h2(p))) / (1.0 + a);
}

// ---------------------------------------------------------------------------
// Deterministic scalar / simplex maximizers.

// Golden-section maximization of a unimodal function on [lo, hi].
double golden_argmax(const std::function<double(double)>& f, double lo,
                     double hi, double xtol = 1e-13) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > xtol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Grid scan followed by golden-section polish around the best cell.
double grid_golden_argmax(const std::function<double(double)>& f, double lo,
                          double hi, int cells) {
  double best_x = lo, best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= cells; ++i) {
    double x = lo + (hi - lo) * i / cells;
    double v = f(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double h = (hi - lo) / cells;
  double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
  double x = golden_argmax(f, a, b);
  return f(x) >= best_v ? x : best_x;
}

// Deterministic Nelder-Mead maximization; f returns -inf style penalties for
// infeasible points, the start must be feasible.
std::vector<double> nelder_mead_max(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> start, double step, int iters) {
  const int n = (int)start.size();
  std::vector<std::vector<double>> xs(n + 1, start);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) xs[i + 1][i] += step;
  for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);
  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int l, int r) {
      return fs[l] > fs[r] || (fs[l] == fs[r] && l < r);
    });
    std::vector<std::vector<double>> nxs(n + 1);
    std::vector<double> nfs(n + 1);
    for (int i = 0; i <= n; ++i) {
      nxs[i] = xs[idx[i]];
      nfs[i] = fs[idx[i]];
    }
    xs = nxs;
    fs = nfs;
  };
  for (int it = 0; it < iters; ++it) {
    order();
    if (std::abs(fs[0] - fs[n]) < 1e-14) break;
    std::vector<double> centroid(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) centroid[j] += xs[i][j] / n;
    auto blend = [&](double t) {
      std::vector<double> x(n);
      for (int j = 0; j < n; ++j)
        x[j] = centroid[j] + t * (centroid[j] - xs[n][j]);
      return x;
    };
    std::vector<double> xr = blend(1.0);
    double fr = f(xr);
    if (fr > fs[0]) {
      std::vector<double> xe = blend(2.0);
      double fe = f(xe);
      if (fe > fr) {
        xs[n] = xe;
        fs[n] = fe;
      } else {
        xs[n] = xr;
        fs[n] = fr;
      }
    } else if (fr > fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      std::vector<double> xc = blend(fr > fs[n] ? 0.5 : -0.5);
      double fc = f(xc);
      if (fc > std::max(fr, fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int j = 0; j < n; ++j)
            xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]);
          fs[i] = f(xs[i]);
        }
      }
    }
  }
  order();
  return xs[0];
}

// ---------------------------------------------------------------------------
// Encoder constructions (graph + policy).

Built build_bfc1_1node(double p) {
  double pb = 1.0 - p;
  Built b;
  b.g = binary_graph({{0, 0}});
  b.pol = policy_from_x0({{0.0}, {1.0 - 0.5 / pb}});
  return b;
}

Built build_bfc1_2node(double p, double a) {
  double pb = 1.0 - p, ab_ = 1.0 - a;
  if (!(a >= 0.5 - kRangeTol && a < 1.0))
    fail("bfc1_2node: parameter a must lie in [0.5, 1)");
  // quad >= 0 is exactly the condition P(x=1|s=1,q=1) <= 1 below.
  double quad = sq(2.0 * p - 1.0) * a * a - (p + sq(2.0 * p - 1.0)) * a + p * p;
  if (quad < -1e-9)
    fail("bfc1_2node: (p, a) violate the validity constraint");
  Built b;
  // Node 0 moves to node 1 on y=0 and loops on y=1; node 1 always returns.
  b.g = binary_graph({{1, 0}, {0, 0}});
  double p001 = ab_ * (2.0 * p - 1.0) / p;
  double p002 = p * (p - a) * (p * ab_ + a * pb) /
                (ab_ * (2.0 * p - 1.0) * (p * p + a * pb * (2.0 * p - 1.0)));
  double p112 = p * p * (2.0 * a - 1.0) /
                (a * (2.0 * p - 1.0) * (p - ab_ * (2.0 * p - 1.0)));
  b.pol = policy_from_x0({{p001, p002}, {0.0, 1.0 - p112}});
  return b;
}

Built build_bfc2_3node(double p) {
  (void)p;
  Built b;
  b.g = binary_graph({{0, 1}, {2, 2}, {0, 1}});
  // The state-0 rows are immaterial: with this channel the output and the
  // next state do not depend on x when s = 0. Node 0 is only visited with
  // s = 0 and node 1 only with s = 1; the input is uniform on node 1 and
  // deterministic elsewhere. The x = 1 choice at (s = 0, q = 2) matches the
  // joint distribution used in the optimality certificate.
  b.pol = policy_from_x0({{1.0, 1.0, 0.0}, {0.0, 0.5, 0.0}});
  return b;
}

Built build_bfc2_6node_a(double p, double a, double bpar) {
  double pb = 1.0 - p;
  checked_prob(a, "bfc2_6node_a parameter a");
  checked_prob(bpar, "bfc2_6node_a parameter b");
  Built b;
  b.g = binary_graph({{0, 1}, {2, 2}, {3, 4}, {0, 1}, {5, 2}, {0, 1}});
  double p115 = a * (1.0 - 2.0 * p * pb) /
                (2.0 * (a * pb - a * p * pb + p * p));
  std::vector<double> x0s1 = {1.0 - bpar, 0.5, 1.0 - a,
                              0.0,        1.0 - p115, 0.0};
  b.pol = policy_from_x0({{1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, x0s1});
  return b;
}

Built build_bfc2_6node_b(double p, double a) {
  double pb = 1.0 - p;
  checked_prob(a, "bfc2_6node_b parameter a");
  Built b;
  b.g = binary_graph({{0, 1}, {2, 2}, {3, 2}, {4, 2}, {5, 2}, {0, 1}});
  double p113 = (1.0 - 2.0 * p) / (2.0 * pb * pb);
  double p114 = sq(2.0 * p - 1.0) / (2.0 * pb * pb * (1.0 - 2.0 * p * pb));
  double p115 = std::pow(1.0 - 2.0 * p, 3) /
                (2.0 * pb * pb *
                 (4.0 * std::pow(p, 4) - 12.0 * std::pow(p, 3) +
                  10.0 * p * p - 4.0 * p + 1.0));
  std::vector<double> x0s1 = {1.0 - a,    0.5,        1.0 - p113,
                              1.0 - p114, 1.0 - p115, 0.0};
  b.pol = policy_from_x0({{1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, x0s1});
  return b;
}

Built build_ising_6node(double p, double a, double b, double c) {
  if (!ising_region_ok(p, a, b, c))
    fail("ising_6node: (a, b, c) outside the stated parameter region");
  double ab_ = 1.0 - a, bb = 1.0 - b, cb = 1.0 - c;
  double k = ising_k(p, a, b, c);
  double core = a - p - a * b - a * c - a * p + c * p + p * p +
                2.0 * a * b * p + a * c * p - a * b * p * p;
  double p001 = (p * (b * a * a * p - b * a * a + b * a * p * p -
                      a * b * p + a * b - p * p) +
                 k) /
                (p * p * (a - p - a * b + a * b * p) + k);
  double p011 = ab_ * core / (p * p * (a * b + p - a - a * b * p));
  double p002 = (p * (a * b * b * p - a * b * b + a * b * p * p -
                      a * b * p + a * b - p * p) +
                 k) /
                (p * p * (b - p - a * b + a * b * p) + k);
  double p012 = bb * core / (p * p * (a * b + p - b - a * b * p));
  double p003 = (p - c) / p;
  double p013 = cb * p * (a - p - a * b + a * b * p) /
                (a - p - a * b - a * c - a * p + c * p + p * p -
                 p * p * p + 3.0 * a * b * p + a * c * p -
                 3.0 * a * b * p * p + a * b * p * p * p);
  Built bu;
  bu.g = binary_graph({{1, 2}, {0, 2}, {3, 4}, {0, 2}, {3, 5}, {3, 4}});
  bu.pol = policy_from_x0({{p001, p002, p003, 1.0 - p013, 1.0 - p011,
                            1.0 - p012},
                           {p011, p012, p013, 1.0 - p003, 1.0 - p001,
                            1.0 - p002}});
  return bu;
}

Built build_trapdoor_3node(double p) {
  double pb = 1.0 - p;
  Built b;
  b.g = binary_graph({{1, 0}, {2, 0}, {2, 1}});
  b.pol = policy_from_x0({{1.0, 1.0 / (2.0 * pb), p / pb},
                          {1.0 - p / pb, 1.0 - 1.0 / (2.0 * pb), 0.0}});
  return b;
}

Built build_trapdoor_4node(double p, double a, double b) {
  T4Entries e = trapdoor_4node_entries(p, a, b);
  // The rate optimum often sits on the boundary of the validity region,
  // where an entry evaluates to 0 or 1 only up to rounding; snap that debris
  // so the policy validates. Certification still gates real violations.
  for (double* v : {&e.p001, &e.p111, &e.p002, &e.p112}) {
    if (std::abs(*v) <= 1e-8) *v = 0.0;
    if (std::abs(*v - 1.0) <= 1e-8) *v = 1.0;
  }
  Built bu;
  bu.g = binary_graph({{0, 1}, {2, 3}, {0, 1}, {2, 3}});
  bu.pol =
      policy_from_x0({{e.p001, e.p002, e.p112, e.p111},
                      {1.0 - e.p111, 1.0 - e.p112, 1.0 - e.p002, 1.0 - e.p001}});
  return bu;
}

// ---------------------------------------------------------------------------
// Catalog and defaults.

// Maximizes R_T2 over the valid-parameter region.
OptimizedRate optimize_r_t2(double p) {
  check_p_range("R_T2", p, 0.5, 1.0);
  auto value = [&](const std::vector<double>& x) {
    double r = 0.0;
    return t2_rate_if_valid(p, x[0], x[1], &r) ? r : -1e9;
  };
  std::vector<double> best;
  double best_v = -1e9;
  const int n = 200;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      std::vector<double> x = {(double)i / n, (double)j / n};
      double v = value(x);
      if (v > best_v) {
        best_v = v;
        best = x;
      }
    }
  if (best.empty() || best_v <= -1e9)
    fail("R_T2: empty feasible parameter set");
  best = nelder_mead_max(value, best, 1.0 / n, 400);
  OptimizedRate out;
  out.params = best;
  out.rate = value(best);
  return out;
}

const std::vector<EncoderInfo>& catalog() {
  static const std::vector<EncoderInfo> infos = {
      {"bfc1_1node", "bfc1", "R1_I", 1, 0, 0.0, 0.5},
      {"bfc1_2node", "bfc1", "R2_I", 2, 1, 0.5, 1.0},
      {"bfc2_3node", "bfc2", "R1_II", 3, 0, 0.5, 1.0},
      {"bfc2_6node_a", "bfc2", "R2_II", 6, 2, 0.0, 0.5},
      {"bfc2_6node_b", "bfc2", "R3_II", 6, 1, 0.0, 0.5},
      {"ising_6node", "ising", "R_ISING", 6, 3, 0.5, 1.0},
      {"trapdoor_3node", "trapdoor", "R_T1", 3, 0, 0.0, 0.5},
      {"trapdoor_4node", "trapdoor", "R_T2", 4, 2, 0.5, 1.0},
  };
  return infos;
}

const EncoderInfo& info_for(const std::string& id) {
  for (const EncoderInfo& e : catalog())
    if (e.id == id) return e;
  fail("unknown encoder id: " + id);
}

// Largest a in [0.5, 1) satisfying the bfc1_2node validity constraint.
double bfc1_2node_amax(double p) {
  double A = sq(2.0 * p - 1.0);
  double B = p + A;
  double C = p * p;
  if (A < 1e-14) return 0.5;  // constraint degenerates to a <= p = 0.5
  double disc = B * B - 4.0 * A * C;
  if (disc < 0.0) return 0.5;
  double root = (B - std::sqrt(disc)) / (2.0 * A);
  return std::min(root, 1.0 - 1e-9);
}

std::vector<double> default_params(const EncoderInfo& info, double p) {
  if (info.id == "bfc1_2node") {
    double amax = std::max(0.5, bfc1_2node_amax(p));
    double a = grid_golden_argmax([&](double x) { return rate_r2_i(p, x); },
                                  0.5, amax, 400);
    return {a};
  }
  if (info.id == "bfc2_6node_a") {
    double a = grid_golden_argmax([&](double x) { return rate_r2_ii(p, x); },
                                  0.0, 1.0, 400);
    return {a, 0.5};
  }
  if (info.id == "bfc2_6node_b") return {0.5};
  if (info.id == "ising_6node") return optimize_params("R_ISING", p).params;
  if (info.id == "trapdoor_4node") return optimize_r_t2(p).params;
  return {};
}

Built build_encoder(const EncoderInfo& info, double p,
                    const std::vector<double>& par) {
  if (info.id == "bfc1_1node") return build_bfc1_1node(p);
  if (info.id == "bfc1_2node") return build_bfc1_2node(p, par[0]);
  if (info.id == "bfc2_3node") return build_bfc2_3node(p);
  if (info.id == "bfc2_6node_a") return build_bfc2_6node_a(p, par[0], par[1]);
  if (info.id == "bfc2_6node_b") return build_bfc2_6node_b(p, par[0]);
  if (info.id == "ising_6node")
    return build_ising_6node(p, par[0], par[1], par[2]);
  if (info.id == "trapdoor_3node") return build_trapdoor_3node(p);
  return build_trapdoor_4node(p, par[0], par[1]);
}

}  // namespace

const std::vector<EncoderInfo>& builtin_encoders() { return catalog(); }

GraphEncoder builtin_encoder(const std::string& id, double p,
                             const std::vector<double>& params) {
  const EncoderInfo& info = info_for(id);
  check_p_range(id, p, info.p_min, info.p_max);
  std::vector<double> par = params;
  if (par.empty() && info.param_count > 0)
    par = default_params(info, p);
  else
    check_param_count(id, par, info.param_count, info.param_count);
  Built built = build_encoder(info, p, par);
  Channel ch = make_builtin(info.family, p);
  CertResult cert = certify_encoder(ch, built.g, built.pol, 1e-9);
  if (!cert.ok)
    fail("builtin encoder " + id + " failed certification: " + cert.detail);
  GraphEncoder enc;
  enc.ch = ch;
  enc.g = built.g;
  enc.pol = built.pol;
  enc.family = id;
  enc.p = p;
  enc.rate = cert.rate;
  return enc;
}

double closed_form_rate(const std::string& formula, double p,
                        const std::vector<double>& params) {
  if (formula == "R1_I") {
    check_param_count(formula, params, 0, 0);
    check_p_range(formula, p, 0.0, 0.5);
    return rate_r1_i(p);
  }
  if (formula == "R2_I") {
    check_param_count(formula, params, 1, 1);
    check_p_range(formula, p, 0.5, 1.0);
    return rate_r2_i(p, checked_prob(params[0], "R2_I parameter a"));
  }
  if (formula == "R1_II") {
    check_param_count(formula, params, 0, 0);
    check_p_range(formula, p, 0.5, 1.0);
    return rate_r1_ii(p);
  }
  if (formula == "R2_II") {
    check_param_count(formula, params, 1, 2);  // trailing b is unused
    check_p_range(formula, p, 0.0, 0.5);
    return rate_r2_ii(p, checked_prob(params[0], "R2_II parameter a"));
  }
  if (formula == "R3_II") {
    check_param_count(formula, params, 0, 1);  // a is unused
    check_p_range(formula, p, 0.0, 0.5);
    return rate_r3_ii(p);
  }
  if (formula == "R_ISING") {
    check_param_count(formula, params, 3, 3);
    check_p_range(formula, p, 0.5, 1.0);
    return rate_ising(p, params[0], params[1], params[2]);
  }
  if (formula == "R_T1") {
    check_param_count(formula, params, 0, 0);
    check_p_range(formula, p, 0.0, 0.5);
    return rate_t1(p);
  }
  if (formula == "R_T2") {
    check_param_count(formula, params, 2, 2);
    check_p_range(formula, p, 0.5, 1.0);
    return rate_t2(p, checked_prob(params[0], "R_T2 parameter a"),
                   checked_prob(params[1], "R_T2 parameter b"));
  }
  if (formula == "C_T_UB") {
    check_param_count(formula, params, 1, 1);
    check_p_range(formula, p, 0.0, 1.0);
    return rate_ct_ub(p, checked_prob(params[0], "C_T_UB parameter a"));
  }
  fail("unknown closed form: " + formula);
}

OptimizedRate optimize_params(const std::string& formula, double p) {
  OptimizedRate out;
  if (formula == "R1_I" || formula == "R1_II" || formula == "R3_II" ||
      formula == "R_T1") {
    out.rate = closed_form_rate(formula, p, {});
    return out;
  }
  if (formula == "R2_I") {
    check_p_range(formula, p, 0.5, 1.0);
    double a = grid_golden_argmax([&](double x) { return rate_r2_i(p, x); },
                                  0.0, 1.0, 1000);
    out.params = {a};
    out.rate = rate_r2_i(p, a);
    return out;
  }
  if (formula == "R2_II") {
    check_p_range(formula, p, 0.0, 0.5);
    double a = grid_golden_argmax([&](double x) { return rate_r2_ii(p, x); },
                                  0.0, 1.0, 1000);
    out.params = {a};
    out.rate = rate_r2_ii(p, a);
    return out;
  }
  if (formula == "C_T_UB") {
    check_p_range(formula, p, 0.0, 1.0);
    double a = grid_golden_argmax([&](double x) { return rate_ct_ub(p, x); },
                                  0.0, 1.0, 1000);
    out.params = {a};
    out.rate = rate_ct_ub(p, a);
    return out;
  }
  if (formula == "R_T2") return optimize_r_t2(p);
  if (formula == "R_ISING") {
    check_p_range(formula, p, 0.5, 1.0);
    auto value = [&](const std::vector<double>& x) {
      if (!ising_region_ok(p, x[0], x[1], x[2])) return -1e9;
      return rate_ising(p, x[0], x[1], x[2]);
    };
    std::vector<double> best;
    double best_v = -1e9;
    const int n = 25;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j)
        for (int l = 0; l <= n; ++l) {
          std::vector<double> x = {0.5 + 0.5 * i / n, 0.5 + 0.5 * j / n,
                                   0.5 * l / n};
          double v = value(x);
          if (v > best_v) {
            best_v = v;
            best = x;
          }
        }
    if (best.empty() || best_v <= -1e9)
      fail("R_ISING: empty feasible parameter set");
    best = nelder_mead_max(value, best, 0.5 / n, 600);
    out.params = best;
    out.rate = value(best);
    return out;
  }
  fail("unknown closed form: " + formula);
}

PstarResult find_pstar(const std::string& family) {
  std::function<double(double)> f;
  double lo, hi;
  if (family == "bfc2") {
    f = [](double p) {
      double pb = 1.0 - p;
      double den = 1.0 - 2.0 * p * pb;
      return (2.0 + p) * std::log2(2.0 * p * p / den) +
             std::log2(2.0 * pb * pb / den);
    };
    lo = 0.6;
    hi = 0.9;
  } else if (family == "trapdoor") {
    f = [](double p) {
      double pb = 1.0 - p;
      return 1.0 + 2.0 * std::log2(p / pb) - std::log2((1.0 - 2.0 * p) / pb) -
             h2(p);
    };
    lo = 0.05;
    hi = 0.45;
  } else {
    fail("find_pstar: unknown family " + family);
  }
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0) fail("find_pstar: bracket does not straddle a root");
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if ((fm <= 0.0) == (flo <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  PstarResult out;
  out.p_star = 0.5 * (lo + hi);
  out.residual = f(out.p_star);
  return out;
}

KktReport kkt_verify(const Channel& ch, const QGraph& g,
                     const JointDistribution& d, double tol) {
  if (d.S != ch.S || d.Q != g.Q || d.X != ch.X || d.Y != ch.Y)
    fail("kkt_verify: candidate dimensions do not match channel/graph");
  const int n = ch.S * g.Q * ch.X * ch.Y;
  ConstraintSystem cs = build_constraints(ch, g);
  const int m = (int)cs.A.rows();

  Eigen::VectorXd dv(n);
  for (int i = 0; i < n; ++i) dv[i] = d.d[i];

  KktReport rep;
  rep.feasibility = (cs.A * dv - cs.b).cwiseAbs().maxCoeff();
  for (int i = 0; i < n; ++i)
    rep.feasibility = std::max(rep.feasibility, -dv[i]);

  ObjectiveEval obj = objective_and_gradient(ch, g, d);

  const double act_tol = 1e-9;
  std::vector<int> free_idx, active_idx;
  int idx = 0;
  for (int s = 0; s < ch.S; ++s)
    for (int q = 0; q < g.Q; ++q)
      for (int x = 0; x < ch.X; ++x)
        for (int y = 0; y < ch.Y; ++y, ++idx) {
          if (ch.w(s, x, y) <= 0.0) continue;  // pinned by the channel law
          if (dv[idx] > act_tol)
            free_idx.push_back(idx);
          else
            active_idx.push_back(idx);
        }

  Eigen::MatrixXd M((int)free_idx.size(), m);
  Eigen::VectorXd rhs((int)free_idx.size());
  for (int r = 0; r < (int)free_idx.size(); ++r) {
    M.row(r) = cs.A.col(free_idx[r]).transpose();
    rhs[r] = -obj.grad[free_idx[r]];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M);
  rep.lambda = cod.solve(rhs);
  rep.rank = (int)cod.rank();

  // Every lambda solving the free-coordinate stationarity system is
  // admissible, and the inequality multipliers mu = grad + A^T lambda on the
  // active coordinates depend on which solution is picked. Parametrize the
  // solution set as lambda + N z with N a null-space basis of the system and
  // search for a z making every active multiplier nonnegative; this is a
  // convex feasibility problem, handled by damped Gauss-Newton on the squared
  // hinge sum of the negative multipliers.
  const int na = (int)active_idx.size();
  Eigen::VectorXd mu_act(na);
  {
    Eigen::VectorXd atl = cs.A.transpose() * rep.lambda;
    for (int i = 0; i < na; ++i)
      mu_act[i] = obj.grad[active_idx[i]] + atl[active_idx[i]];
  }
  rep.multipliers_unique = true;
  if (m <= 3000) {
    Eigen::MatrixXd N;
    if (free_idx.empty()) {
      N = Eigen::MatrixXd::Identity(m, m);
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
      double smax = svd.singularValues().size()
                        ? svd.singularValues().maxCoeff()
                        : 0.0;
      int numeric_rank = 0;
      for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > 1e-10 * std::max(1.0, smax))
          ++numeric_rank;
      N = svd.matrixV().rightCols(m - numeric_rank);
    }
    const int k = (int)N.cols();
    Eigen::MatrixXd B(na, k);
    for (int i = 0; i < na; ++i)
      B.row(i) = cs.A.col(active_idx[i]).transpose() * N;
    rep.multipliers_unique =
        B.size() == 0 || B.cwiseAbs().maxCoeff() <= 1e-8;
    if (!rep.multipliers_unique && na > 0) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
      auto hinge = [&](const Eigen::VectorXd& zz) {
        Eigen::VectorXd r = mu_act + B * zz;
        double v = 0.0;
        for (int i = 0; i < na; ++i)
          if (r[i] < 0.0) v += 0.5 * r[i] * r[i];
        return v;
      };
      double phi = hinge(z);
      for (int it = 0; it < 500 && phi > 0.0; ++it) {
        Eigen::VectorXd r = mu_act + B * z;
        std::vector<int> neg;
        for (int i = 0; i < na; ++i)
          if (r[i] < 0.0) neg.push_back(i);
        if (neg.empty()) break;
        Eigen::MatrixXd Bn((int)neg.size(), k);
        Eigen::VectorXd rn((int)neg.size());
        for (int i = 0; i < (int)neg.size(); ++i) {
          Bn.row(i) = B.row(neg[i]);
          rn[i] = r[neg[i]];
        }
        Eigen::VectorXd grad_phi = Bn.transpose() * rn;
        Eigen::MatrixXd H = Bn.transpose() * Bn;
        H.diagonal().array() += 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
        Eigen::VectorXd dz = H.ldlt().solve(-grad_phi);
        double slope = grad_phi.dot(dz);
        if (!(slope < 0.0)) break;  // stationary: global minimum reached
        double t = 1.0, next = phi;
        for (int bt = 0; bt < 50; ++bt) {
          next = hinge(z + t * dz);
          if (next <= phi + 1e-4 * t * slope) break;
          t *= 0.5;
        }
        if (next >= phi - 1e-18 * std::max(1.0, phi)) break;
        z += t * dz;
        phi = next;
      }
      mu_act += B * z;
      rep.lambda += N * z;
    }
  } else {
    rep.multipliers_unique = false;
  }

  rep.stationarity_residual =
      free_idx.empty() ? 0.0 : (M * rep.lambda - rhs).cwiseAbs().maxCoeff();
  rep.mu = Eigen::VectorXd::Zero(n);
  rep.min_mu = 0.0;
  rep.complementarity = 0.0;
  for (int i = 0; i < na; ++i) {
    rep.mu[active_idx[i]] = mu_act[i];
    rep.min_mu = std::min(rep.min_mu, mu_act[i]);
    rep.complementarity = std::max(
        rep.complementarity, std::abs(mu_act[i] * dv[active_idx[i]]));
  }

  rep.verdict = rep.stationarity_residual <= tol && rep.feasibility <= tol &&
                rep.min_mu >= -tol && rep.complementarity <= tol;
  return rep;
}

}  // namespace qcap
