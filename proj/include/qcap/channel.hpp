// Unifilar finite-state channels: kernel W(y|x,s) plus deterministic
// next-state map s+ = f(s,x,y).
#pragma once

#include <string>
#include <vector>

#include "qcap/util.hpp"

namespace qcap {

// Marker for next_state entries that can never occur (W(y|x,s) = 0).
inline constexpr int kImpossible = -1;

struct Channel {
  std::string name;  // optional label ("bfc1:0.25", file stem, ...)
  int S = 0, X = 0, Y = 0;
  std::vector<double> W;  // kernel, [s][x][y]
  std::vector<int> F;     // next state, [s][x][y]; kImpossible off support

  double w(int s, int x, int y) const { return W[(s * X + x) * Y + y]; }
  double& w(int s, int x, int y) { return W[(s * X + x) * Y + y]; }
  int f(int s, int x, int y) const { return F[(s * X + x) * Y + y]; }
  int& f(int s, int x, int y) { return F[(s * X + x) * Y + y]; }

  // Throws QcapError unless kernel rows are pmfs (sum within row_tol of 1),
  // every positive-probability transition has a next state in range, and
  // alphabet sizes are positive.
  void validate(double row_tol = 1e-12) const;

  // True when every state can reach every other through positive-probability
  // transitions s -> f(s,x,y).
  bool strongly_connected() const;
};

// Built-in families; p is the noise/crossover parameter.
//   bfc1     Y = (S*X) xor N, N ~ Ber(p), f = s xor x xor y
//   bfc2     same kernel, f = s xor n with n = y xor (s*x)
//   ising    Y = S w.p. p, Y = X w.p. 1-p (deterministic Y=X when X=S), f = x
//   trapdoor same kernel as ising, f = s xor x xor y
Channel make_builtin(const std::string& family, double p);

// JSON file I/O; see README for the schema. load validates before returning.
Channel load_channel(const std::string& path);
void save_channel(const Channel& ch, const std::string& path);

// Parse either "family:p" (builtin) or a path to a channel JSON file.
Channel parse_channel_arg(const std::string& arg);

}  // namespace qcap
