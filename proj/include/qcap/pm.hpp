// Posterior-matching simulation of a certified graph-based encoder over a
// unifilar channel with feedback.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcap/lb.hpp"

namespace qcap {

struct StepRecord {
  long step = 0;
  int q = 0;            // graph node before the step
  int y = 0;            // channel output
  double lambda_true = 0.0;  // posterior mass of the true message
  double log_growth = 0.0;   // log2 of the one-step mass ratio
};

struct PmOptions {
  long n = 100000;         // channel uses
  std::uint64_t seed = 1;
  long M = 0;              // exact message count (array mode) when > 0
  double log2M = -1.0;     // message size in bits for the density mode;
                           // < 0 picks 1.25 * n * rate + 64 automatically
  bool record_transcript = false;
};

struct PmResult {
  double empirical_rate = 0.0;  // mean log-growth in bits per use
  double sum_log_growth = 0.0;
  bool decoded = false;         // posterior argmax covers the true message
  long flagged_steps = 0;       // degenerate updates (zero-mass state)
  std::vector<StepRecord> transcript;
};

// Runs the posterior-matching scheme for the encoder (policy + q-graph +
// channel). With opts.M > 0 an exact M-message posterior is maintained;
// otherwise a run-length representation simulates an effectively infinite
// message set of log2M bits and reports the achieved write rate.
PmResult simulate(const GraphEncoder& enc, const PmOptions& opts);

// Mean log-growth of a recorded transcript (bits per channel use).
double empirical_rate(const std::vector<StepRecord>& transcript);

// CSV export: step,q,y,lambda_true,log_growth.
void save_transcript(const std::vector<StepRecord>& transcript,
                     const std::string& path);

}  // namespace qcap
