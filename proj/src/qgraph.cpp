#include "qcap/qgraph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "qcap/digraph.hpp"
#include "qcap/json_io.hpp"

namespace qcap {

using json = nlohmann::json;

void QGraph::validate() const {
  if (Q <= 0 || Y <= 0)
    throw QcapError("qgraph: node and output counts must be positive");
  if ((int)T.size() != Q * Y)
    throw QcapError("qgraph: transition table has wrong size");
  for (int v : T)
    if (v < 0 || v >= Q)
      throw QcapError("qgraph: transition target out of range");
}

int walk(const QGraph& g, int q0, const std::vector<int>& ys) {
  if (q0 < 0 || q0 >= g.Q) throw QcapError("walk: start node out of range");
  int q = q0;
  for (int y : ys) {
    if (y < 0 || y >= g.Y) throw QcapError("walk: output symbol out of range");
    q = g.step(q, y);
  }
  return q;
}

namespace {

Adjacency qgraph_adjacency(const QGraph& g) {
  Adjacency adj(g.Q);
  for (int q = 0; q < g.Q; ++q)
    for (int y = 0; y < g.Y; ++y) adj[q].push_back(g.step(q, y));
  return adj;
}

}  // namespace

bool is_valid_qgraph(const QGraph& g) {
  Adjacency adj = qgraph_adjacency(g);
  if (!digraph_strongly_connected(adj)) return false;
  std::vector<int> all(g.Q);
  std::iota(all.begin(), all.end(), 0);
  return period_of_class(adj, all) == 1;
}

QGraph markov_qgraph(int k, int Y, std::int64_t node_cap) {
  if (k < 0) throw QcapError("markov_qgraph: order must be >= 0");
  if (Y <= 0) throw QcapError("markov_qgraph: output alphabet must be positive");
  std::int64_t Q = 1;
  for (int i = 0; i < k; ++i) {
    Q *= Y;
    if (Q > node_cap)
      throw QcapError("markov_qgraph: Y^k exceeds the node cap (" +
                      std::to_string(node_cap) + ")");
  }
  QGraph g;
  g.Q = (int)Q;
  g.Y = Y;
  g.T.resize(g.Q * Y);
  for (int q = 0; q < g.Q; ++q)
    for (int y = 0; y < Y; ++y) g.at(q, y) = (int)((q * (std::int64_t)Y + y) % Q);
  return g;
}

namespace {

// True when the flattened table of g is <= the table of g relabeled by perm
// (perm[i] = new label of node i), compared lexicographically.
bool leq_under_perm(const QGraph& g, const std::vector<int>& perm) {
  for (int qp = 0; qp < g.Q; ++qp) {
    // Row qp of the permuted table comes from old node q with perm[q] = qp.
    int q = -1;
    for (int i = 0; i < g.Q; ++i)
      if (perm[i] == qp) {
        q = i;
        break;
      }
    for (int y = 0; y < g.Y; ++y) {
      int ours = g.at(qp, y);
      int theirs = perm[g.at(q, y)];
      if (ours != theirs) return ours < theirs;
    }
  }
  return true;  // equal
}

}  // namespace

QGraph canonical_form(const QGraph& g) {
  std::vector<int> perm(g.Q), inv(g.Q);
  std::iota(perm.begin(), perm.end(), 0);
  QGraph best = g;
  do {
    for (int i = 0; i < g.Q; ++i) inv[perm[i]] = i;
    QGraph cand = g;
    for (int qp = 0; qp < g.Q; ++qp)
      for (int y = 0; y < g.Y; ++y) cand.at(qp, y) = perm[g.at(inv[qp], y)];
    if (cand.T < best.T) best = cand;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::int64_t enumerate_qgraphs(int Q, int Y,
                               const std::function<bool(const QGraph&)>& visit,
                               std::int64_t table_cap) {
  if (Q <= 0 || Y <= 0)
    throw QcapError("enumerate_qgraphs: counts must be positive");
  double tables = std::pow((double)Q, (double)Q * Y);
  if (tables > (double)table_cap)
    throw QcapError("enumerate_qgraphs: Q^(Q*Y) = " + std::to_string(tables) +
                    " exceeds the table cap (" + std::to_string(table_cap) +
                    ")");

  std::vector<std::vector<int>> perms;
  {
    std::vector<int> p(Q);
    std::iota(p.begin(), p.end(), 0);
    do {
      perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
  }

  QGraph g;
  g.Q = Q;
  g.Y = Y;
  g.T.assign(Q * Y, 0);
  std::int64_t count = 0;
  bool more = true;
  while (more) {
    if (is_valid_qgraph(g)) {
      // Keep only the lexicographically smallest table of its orbit.
      bool canonical = true;
      for (size_t i = 1; i < perms.size() && canonical; ++i)
        canonical = leq_under_perm(g, perms[i]);
      if (canonical) {
        ++count;
        if (!visit(g)) break;
      }
    }
    // Odometer increment (last entry fastest => lexicographic order).
    int pos = Q * Y - 1;
    while (pos >= 0 && g.T[pos] == Q - 1) g.T[pos--] = 0;
    if (pos < 0)
      more = false;
    else
      ++g.T[pos];
  }
  return count;
}

QGraph qgraph_from_json(const json& j, const std::string& ctx) {
  QGraph g;
  try {
    g.Q = j.at("node_count").get<int>();
    g.Y = j.at("output_count").get<int>();
    const auto& t = j.at("transition");
    if ((int)t.size() != g.Q)
      throw QcapError(ctx + ": transition must have node_count rows");
    g.T.assign(g.Q * g.Y, 0);
    for (int q = 0; q < g.Q; ++q) {
      if ((int)t[q].size() != g.Y)
        throw QcapError(ctx + ": expected output_count entries per node");
      for (int y = 0; y < g.Y; ++y) g.at(q, y) = t[q][y].get<int>();
    }
  } catch (const json::exception& e) {
    throw QcapError(ctx + ": " + e.what());
  }
  g.validate();
  return g;
}

json qgraph_to_json(const QGraph& g) {
  json j;
  j["node_count"] = g.Q;
  j["output_count"] = g.Y;
  json rows = json::array();
  for (int q = 0; q < g.Q; ++q) {
    json row = json::array();
    for (int y = 0; y < g.Y; ++y) row.push_back(g.at(q, y));
    rows.push_back(row);
  }
  j["transition"] = rows;
  return j;
}

QGraph load_qgraph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw QcapError("cannot open qgraph file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw QcapError("qgraph file " + path + ": bad JSON: " + e.what());
  }
  return qgraph_from_json(j, "qgraph file " + path);
}

void save_qgraph(const QGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw QcapError("cannot write qgraph file: " + path);
  out << qgraph_to_json(g).dump(2) << "\n";
}

QGraph parse_qgraph_arg(const std::string& arg, int Y) {
  if (arg.rfind("markov:", 0) == 0) {
    int k;
    try {
      k = std::stoi(arg.substr(7));
    } catch (const std::exception&) {
      throw QcapError("bad markov order in '" + arg + "'");
    }
    return markov_qgraph(k, Y);
  }
  QGraph g = load_qgraph(arg);
  if (g.Y != Y)
    throw QcapError("qgraph output alphabet (" + std::to_string(g.Y) +
                    ") does not match the channel (" + std::to_string(Y) + ")");
  return g;
}

CoupledGraph couple(const Channel& ch, const QGraph& g) {
  ch.validate();
  g.validate();
  if (g.Y != ch.Y)
    throw QcapError("couple: qgraph output alphabet does not match channel");
  CoupledGraph cg;
  cg.ch = ch;
  cg.g = g;
  cg.N = ch.S * g.Q;
  cg.edges.assign(cg.N, {});
  for (int s = 0; s < ch.S; ++s)
    for (int q = 0; q < g.Q; ++q) {
      auto& out = cg.edges[cg.node(s, q)];
      for (int x = 0; x < ch.X; ++x)
        for (int y = 0; y < ch.Y; ++y) {
          double w = ch.w(s, x, y);
          if (w > 0.0)
            out.push_back({x, y, cg.node(ch.f(s, x, y), g.step(q, y)), w});
        }
    }
  return cg;
}

CoupledCheck validate_coupled(const CoupledGraph& cg) {
  Adjacency adj(cg.N);
  for (int n = 0; n < cg.N; ++n) {
    for (const auto& e : cg.edges[n]) adj[n].push_back(e.to);
    std::sort(adj[n].begin(), adj[n].end());
    adj[n].erase(std::unique(adj[n].begin(), adj[n].end()), adj[n].end());
  }
  ClassDecomposition dec = decompose_classes(adj);
  CoupledCheck chk;
  chk.aperiodic = true;
  for (size_t c = 0; c < dec.classes.size(); ++c) {
    if (!dec.closed[c]) continue;
    ++chk.closed_class_count;
    if (period_of_class(adj, dec.classes[c]) != 1) chk.aperiodic = false;
    chk.closed_class = dec.classes[c];
  }
  chk.single_closed_class = (chk.closed_class_count == 1);
  if (!chk.single_closed_class) chk.closed_class.clear();
  std::sort(chk.closed_class.begin(), chk.closed_class.end());
  return chk;
}

}  // namespace qcap
