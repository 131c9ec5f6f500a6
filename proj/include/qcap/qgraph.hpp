// Auxiliary directed graphs on the channel output alphabet (Q-graphs) and
// their product with the channel state graph.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qcap/channel.hpp"

namespace qcap {

// Deterministic labeled graph: from node q on output y move to transition[q][y].
struct QGraph {
  int Q = 0;  // node count
  int Y = 0;  // output alphabet size
  std::vector<int> T;  // [q][y] -> next node

  int step(int q, int y) const { return T[q * Y + y]; }
  int& at(int q, int y) { return T[q * Y + y]; }
  int at(int q, int y) const { return T[q * Y + y]; }

  void validate() const;  // sizes and node indices in range
};

// Node that a walk from q0 reaches after consuming ys in order.
int walk(const QGraph& g, int q0, const std::vector<int>& ys);

// A Q-graph qualifies as an auxiliary graph when it is strongly connected
// and aperiodic (so the induced chain can have a unique stationary law).
bool is_valid_qgraph(const QGraph& g);

// Markov-memory graph of order k: nodes are the Y^k recent-output tuples,
// indexed as base-Y integers with the oldest symbol most significant;
// new output y maps node q to (q*Y + y) mod Y^k. k = 0 gives the single-node
// graph (no memory). Throws when Y^k would exceed node_cap.
QGraph markov_qgraph(int k, int Y, std::int64_t node_cap = (1 << 20));

// Enumerate valid Q-graphs with exactly Q nodes and Y outputs, one canonical
// representative per relabeling class, in deterministic (lexicographic)
// order. The callback may return false to stop early. Returns the number of
// representatives visited. table_cap guards the Q^(Q*Y) brute-force space.
std::int64_t enumerate_qgraphs(int Q, int Y,
                               const std::function<bool(const QGraph&)>& visit,
                               std::int64_t table_cap = (std::int64_t)1 << 26);

// Lexicographically smallest transition table over all node relabelings
// (node 0 fixed semantics: tables are compared flattened row-major).
QGraph canonical_form(const QGraph& g);

// JSON file I/O: {"node_count": Q, "output_count": Y, "transition": [[...]]}.
QGraph load_qgraph(const std::string& path);
void save_qgraph(const QGraph& g, const std::string& path);

// Parse "markov:k" or a path to a q-graph JSON file. Needs the channel's
// output alphabet size for the markov form.
QGraph parse_qgraph_arg(const std::string& arg, int Y);

// Product of channel-state dynamics and a Q-graph. Node (s,q) is flattened
// as s*Q + q. An edge (s,q) -(x,y)-> (f(s,x,y), g(q,y)) exists whenever
// W(y|x,s) > 0.
struct CoupledGraph {
  Channel ch;
  QGraph g;
  int N = 0;  // |S| * |Q|

  struct Edge {
    int x, y, to;
    double w;  // W(y|x,s)
  };
  std::vector<std::vector<Edge>> edges;  // per source node

  int node(int s, int q) const { return s * g.Q + q; }
  int s_of(int n) const { return n / g.Q; }
  int q_of(int n) const { return n % g.Q; }
};

CoupledGraph couple(const Channel& ch, const QGraph& g);

// Structure of the coupled graph when every input is allowed (full support).
struct CoupledCheck {
  bool single_closed_class = false;
  bool aperiodic = false;            // every closed class aperiodic
  std::vector<int> closed_class;     // nodes of the unique closed class
  int closed_class_count = 0;
};

CoupledCheck validate_coupled(const CoupledGraph& cg);

}  // namespace qcap
