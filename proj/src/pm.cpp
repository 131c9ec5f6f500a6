// Posterior-matching simulation. Two representations of the message
// posterior are supported: an exact per-message array for finite M, and a
// run-length representation of the unit message interval for message sets
// too large to enumerate. In both, the transmitted input is the inverse-CDF
// match of the accumulated same-state posterior mass, and the update is the
// Bayes rule with the posterior-predictive output law as normalizer.
#include "qcap/pm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <vector>

#include "qcap/markov.hpp"

namespace qcap {

namespace {

// Platform-independent uniform draw in [0, 1).
double uniform01(std::mt19937_64& rng) {
  return (double)(rng() >> 11) * 0x1.0p-53;
}

int sample_categorical(const std::vector<double>& w, double total,
                       std::mt19937_64& rng) {
  double u = uniform01(rng) * total;
  double c = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    c += w[i];
    if (u < c) return (int)i;
  }
  return (int)w.size() - 1;
}

// min{x : F(x) > w} for the CDF of P(.|s,q); the final input when no strict
// exceedance exists (w at the top of the range).
int inv_cdf(const Policy& pol, int s, int q, double w) {
  double c = 0.0;
  for (int x = 0; x < pol.X; ++x) {
    c += pol.at(s, q, x);
    if (c > w) return x;
  }
  return pol.X - 1;
}

// Initial (s, q): the positive-mass pair of largest stationary weight, so
// the posterior reference pi(s|q) is well defined from the first step.
void initial_pair(const StationaryResult& st, int S, int Q, int* s0, int* q0) {
  int best = 0;
  for (int i = 1; i < S * Q; ++i)
    if (st.pi[i] > st.pi[best]) best = i;
  *s0 = best / Q;
  *q0 = best % Q;
}

struct Common {
  Eigen::MatrixXd pi_sq;  // pi(s | q)
  int s0 = 0, q0 = 0;
};

Common prepare(const GraphEncoder& enc) {
  CertResult cert = certify_encoder(enc.ch, enc.g, enc.pol);
  if (!cert.ok)
    throw QcapError("simulate: encoder failed certification: " + cert.detail);
  Common c;
  c.pi_sq = pi_s_given_q(cert.st, enc.ch.S, enc.g.Q);
  initial_pair(cert.st, enc.ch.S, enc.g.Q, &c.s0, &c.q0);
  return c;
}

void push_record(PmResult& res, const PmOptions& opts, long step, int q,
                 int y, double lambda_true, double growth) {
  res.sum_log_growth += growth;
  if (opts.record_transcript) {
    StepRecord rec;
    rec.step = step;
    rec.q = q;
    rec.y = y;
    rec.lambda_true = lambda_true;
    rec.log_growth = growth;
    res.transcript.push_back(rec);
  }
}

// ---------------------------------------------------------------------------
// Exact array mode: one posterior entry per message.

PmResult simulate_array(const GraphEncoder& enc, const PmOptions& opts,
                        const Common& com) {
  const Channel& ch = enc.ch;
  const QGraph& g = enc.g;
  const Policy& pol = enc.pol;
  const long M = opts.M;
  std::mt19937_64 rng(opts.seed);

  std::vector<double> lam((std::size_t)M, 1.0 / (double)M);
  std::vector<int> st((std::size_t)M, com.s0);
  std::vector<int> xs((std::size_t)M, 0);
  std::vector<double> csum((std::size_t)ch.S, 0.0);
  long mstar = (long)(uniform01(rng) * (double)M);
  if (mstar >= M) mstar = M - 1;
  int q = com.q0;

  PmResult res;
  long done = 0;
  for (long step = 0; step < opts.n; ++step) {
    if (com.pi_sq(st[(std::size_t)mstar], q) <= 0.0) {
      ++res.flagged_steps;
      break;  // the matching reference is undefined; abort the run
    }
    // Lambda(m) accumulates strictly-smaller messages in the same state.
    std::fill(csum.begin(), csum.end(), 0.0);
    for (long m = 0; m < M; ++m) {
      int s = st[(std::size_t)m];
      double pi = com.pi_sq(s, q);
      double big = pi > 0.0 ? csum[(std::size_t)s] / pi : 0.0;
      xs[(std::size_t)m] = inv_cdf(pol, s, q, std::min(big, 1.0));
      csum[(std::size_t)s] += lam[(std::size_t)m];
    }
    int sstar = st[(std::size_t)mstar];
    int xstar = xs[(std::size_t)mstar];
    // Channel draw from the true state.
    std::vector<double> wy((std::size_t)ch.Y);
    for (int y = 0; y < ch.Y; ++y) wy[(std::size_t)y] = ch.w(sstar, xstar, y);
    int y = sample_categorical(wy, 1.0, rng);
    // Posterior-predictive normalizer and Bayes update.
    double z = 0.0;
    for (long m = 0; m < M; ++m)
      z += lam[(std::size_t)m] *
           ch.w(st[(std::size_t)m], xs[(std::size_t)m], y);
    double growth = std::log2(ch.w(sstar, xstar, y) / z);
    for (long m = 0; m < M; ++m) {
      std::size_t i = (std::size_t)m;
      lam[i] *= ch.w(st[i], xs[i], y) / z;
      int nxt = ch.f(st[i], xs[i], y);
      if (lam[i] > 0.0 && nxt >= 0) st[i] = nxt;
    }
    push_record(res, opts, step, q, y, lam[(std::size_t)mstar], growth);
    q = g.at(q, y);
    ++done;
  }
  long argmax = 0;
  for (long m = 1; m < M; ++m)
    if (lam[(std::size_t)m] > lam[(std::size_t)argmax]) argmax = m;
  res.decoded = (argmax == mstar);
  res.empirical_rate = done > 0 ? res.sum_log_growth / (double)done : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Run-length mode: the message interval is partitioned into maximal runs
// sharing one state history. Posterior density is uniform inside a run, so a
// run is fully described by its mass, its state, and (for decoding) the
// log2 of its width in message space. Splits happen where the accumulated
// mass crosses an inverse-CDF threshold; adjacent same-state runs re-merge.

struct Run {
  double mass = 0.0;
  int s = 0;
  double lw = 0.0;  // log2 of the message-interval width
};

PmResult simulate_runs(const GraphEncoder& enc, const PmOptions& opts,
                       const Common& com) {
  const Channel& ch = enc.ch;
  const QGraph& g = enc.g;
  const Policy& pol = enc.pol;
  std::mt19937_64 rng(opts.seed);

  std::vector<Run> runs = {{1.0, com.s0, 0.0}};
  std::size_t tr = 0;  // run holding the true message
  int q = com.q0;
  const double prune = 1e-15;
  // Message-space size in bits; a run narrower than one message means the
  // continuum representation has run out of resolution, which the automatic
  // choice (above the achievable write rate) prevents.
  const double bits = opts.log2M >= 0.0
                          ? opts.log2M
                          : 1.25 * (double)opts.n * enc.rate + 64.0;

  PmResult res;
  std::vector<Run> next;
  std::vector<double> segmass;
  std::vector<int> segx;
  long done = 0;
  for (long step = 0; step < opts.n; ++step) {
    if (com.pi_sq(runs[tr].s, q) <= 0.0) {
      ++res.flagged_steps;
      break;
    }
    int sstar = runs[tr].s;
    // Split each run into constant-input segments, tracking the channel draw
    // for the true segment and the predictive normalizer for the update.
    std::vector<double> csum((std::size_t)ch.S, 0.0);
    int xstar = 0, y = -1;
    // First pass: choose the true segment and draw y (needs only run tr).
    {
      double before = 0.0;
      for (std::size_t r = 0; r < tr; ++r)
        if (runs[r].s == sstar) before += runs[r].mass;
      double pi = com.pi_sq(sstar, q);
      double lam_lo = before / pi;
      double w = runs[tr].mass;
      segmass.clear();
      segx.clear();
      double off = 0.0;
      int x = inv_cdf(pol, sstar, q, std::min(lam_lo, 1.0));
      double cdf = 0.0;
      for (int xx = 0; xx <= x; ++xx) cdf += pol.at(sstar, q, xx);
      while (off < w) {
        // Mass offset where the next threshold F(x) is crossed.
        double cut = (cdf - lam_lo) * pi - off;
        double take = std::min(w - off, std::max(cut, 0.0));
        if (take > 0.0) {
          segmass.push_back(take);
          segx.push_back(x);
          off += take;
        }
        if (off < w) {
          ++x;
          if (x >= pol.X) {  // numerical top of the CDF: extend last segment
            if (segmass.empty()) {
              segmass.push_back(w - off);
              segx.push_back(pol.X - 1);
            } else {
              segmass.back() += w - off;
            }
            break;
          }
          cdf += pol.at(sstar, q, x);
        }
      }
      int pick = sample_categorical(segmass, runs[tr].mass, rng);
      xstar = segx[(std::size_t)pick];
      std::vector<double> wy((std::size_t)ch.Y);
      for (int yy = 0; yy < ch.Y; ++yy)
        wy[(std::size_t)yy] = ch.w(sstar, xstar, yy);
      y = sample_categorical(wy, 1.0, rng);
    }
    // Second pass: split every run, apply the Bayes factor per segment.
    double ztmp = 0.0;
    std::vector<double> allmass;
    std::vector<int> allx;
    std::vector<std::size_t> run_of;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const Run& ru = runs[r];
      double pi = com.pi_sq(ru.s, q);
      double lam_lo = pi > 0.0 ? csum[(std::size_t)ru.s] / pi : 0.0;
      csum[(std::size_t)ru.s] += ru.mass;
      double w = ru.mass;
      double off = 0.0;
      int x = inv_cdf(pol, ru.s, q, std::min(lam_lo, 1.0));
      double cdf = 0.0;
      for (int xx = 0; xx <= x; ++xx) cdf += pol.at(ru.s, q, xx);
      while (off < w) {
        double cut = pi > 0.0 ? (cdf - lam_lo) * pi - off : w - off;
        double take = std::min(w - off, std::max(cut, 0.0));
        if (take > 0.0) {
          allmass.push_back(take);
          allx.push_back(x);
          run_of.push_back(r);
          off += take;
        }
        if (off < w) {
          ++x;
          if (x >= pol.X) {
            if (!allmass.empty() && run_of.back() == r) {
              allmass.back() += w - off;
            } else {
              allmass.push_back(w - off);
              allx.push_back(pol.X - 1);
              run_of.push_back(r);
            }
            break;
          }
          cdf += pol.at(ru.s, q, x);
        }
      }
      for (std::size_t k = allmass.size(); k-- > 0;) {
        if (run_of[k] != r) break;
        ztmp += allmass[k] * ch.w(ru.s, allx[k], y);
      }
    }
    double zden = ztmp;
    double growth = std::log2(ch.w(sstar, xstar, y) / zden);
    // The true segment is the one of run tr carrying input xstar (inputs are
    // nondecreasing along a run, so the pair identifies it uniquely).
    std::size_t true_seg = allmass.size();
    for (std::size_t k = 0; k < allmass.size(); ++k)
      if (run_of[k] == tr && allx[k] == xstar) {
        true_seg = k;
        break;
      }
    next.clear();
    std::size_t next_tr = 0;
    for (std::size_t k = 0; k < allmass.size(); ++k) {
      const Run& ru = runs[run_of[k]];
      double m2 = allmass[k] * ch.w(ru.s, allx[k], y) / zden;
      int s2 = ch.f(ru.s, allx[k], y);
      bool is_true = (k == true_seg);
      if ((m2 <= 0.0 || s2 < 0) && !is_true) continue;
      Run r2;
      r2.mass = m2;
      r2.s = s2;
      r2.lw = ru.lw + std::log2(allmass[k] / ru.mass);
      if (is_true) next_tr = next.size();
      next.push_back(r2);
    }
    // Merge adjacent same-state runs (exact: future behavior depends only on
    // contiguity, total mass, and the shared state).
    std::vector<Run> merged;
    std::size_t merged_tr = 0;
    for (std::size_t k = 0; k < next.size(); ++k) {
      if (!merged.empty() && merged.back().s == next[k].s) {
        if (k == next_tr) merged_tr = merged.size() - 1;
        Run& b = merged.back();
        double hi = std::max(b.lw, next[k].lw);
        b.lw = hi + std::log2(std::exp2(b.lw - hi) + std::exp2(next[k].lw - hi));
        b.mass += next[k].mass;
      } else {
        if (k == next_tr) merged_tr = merged.size();
        merged.push_back(next[k]);
      }
    }
    // Prune negligible runs (never the true one) and renormalize.
    runs.clear();
    tr = 0;
    double total = 0.0;
    for (std::size_t k = 0; k < merged.size(); ++k) {
      if (merged[k].mass < prune && k != merged_tr) continue;
      if (k == merged_tr) tr = runs.size();
      runs.push_back(merged[k]);
      total += merged[k].mass;
    }
    for (Run& r : runs) r.mass /= total;

    if (runs[tr].lw < -bits) ++res.flagged_steps;
    push_record(res, opts, step, q, y, runs[tr].mass, growth);
    q = g.at(q, y);
    ++done;
  }
  // Decode: the single most probable message lies in the densest run.
  std::size_t best = 0;
  double best_den = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    double den = std::log2(runs[k].mass) - runs[k].lw;
    if (den > best_den) {
      best_den = den;
      best = k;
    }
  }
  res.decoded = (best == tr);
  res.empirical_rate = done > 0 ? res.sum_log_growth / (double)done : 0.0;
  return res;
}

}  // namespace

PmResult simulate(const GraphEncoder& enc, const PmOptions& opts) {
  if (opts.n < 1) throw QcapError("simulate: horizon n must be at least 1");
  if (opts.M < 0) throw QcapError("simulate: message count must be >= 0");
  Common com = prepare(enc);
  if (opts.M > 0) return simulate_array(enc, opts, com);
  return simulate_runs(enc, opts, com);
}

double empirical_rate(const std::vector<StepRecord>& transcript) {
  if (transcript.empty()) return 0.0;
  double s = 0.0;
  for (const StepRecord& r : transcript) s += r.log_growth;
  return s / (double)transcript.size();
}

void save_transcript(const std::vector<StepRecord>& transcript,
                     const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw QcapError("cannot open for writing: " + path);
  std::fprintf(fp, "step,q,y,lambda_true,log_growth\n");
  for (const StepRecord& r : transcript)
    std::fprintf(fp, "%ld,%d,%d,%.17g,%.17g\n", r.step, r.q, r.y,
                 r.lambda_true, r.log_growth);
  std::fclose(fp);
}

}  // namespace qcap
