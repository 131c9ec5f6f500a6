// Command-line front end: bound sweeps over p-grids and graph sources,
// Q-graph enumeration, encoder evaluation, KKT checks, and posterior-matching
// simulation. All commands emit CSV (header row always present) to stdout or
// --out; numeric formatting is fixed so outputs are byte-stable for a given
// seed. Soft per-row failures are annotated in a trailing column and do not
// abort the run; hard errors exit nonzero.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "qcap/channel.hpp"
#include "qcap/encoders.hpp"
#include "qcap/lb.hpp"
#include "qcap/markov.hpp"
#include "qcap/pm.hpp"
#include "qcap/qgraph.hpp"
#include "qcap/ub.hpp"

namespace {

using namespace qcap;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Commas would break the CSV; semicolons keep annotations one-cell wide.
std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;
  void open(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw QcapError("cannot open for writing: " + path);
    os = &file;
  }
};

std::vector<double> parse_grid(const std::string& p_range, double p,
                               bool p_set) {
  std::vector<double> grid;
  if (!p_range.empty()) {
    double a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(p_range);
    if (!(ss >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' ||
        step <= 0)
      throw QcapError("--p-range expects a:b:step with step > 0");
    for (double v = a; v <= b + 1e-12; v += step) grid.push_back(v);
    if (grid.empty()) throw QcapError("--p-range produced an empty grid");
  } else if (p_set) {
    grid.push_back(p);
  }
  for (double v : grid)
    if (v < 0.0 || v > 1.0)
      throw QcapError("p value " + fmt(v) + " outside [0, 1]");
  return grid;
}

// Graph source: "markov:k", "pool:n" (all valid graphs with at most n
// nodes), or "file:PATH" / a bare path.
struct GraphSource {
  std::string kind;  // markov | pool | file
  int arg = 0;
  std::string path;
};

GraphSource parse_graph_source(const std::string& s) {
  GraphSource gs;
  auto starts = [&](const char* pre) { return s.rfind(pre, 0) == 0; };
  if (starts("markov:")) {
    gs.kind = "markov";
    gs.arg = std::stoi(s.substr(7));
  } else if (starts("pool:")) {
    gs.kind = "pool";
    gs.arg = std::stoi(s.substr(5));
    if (gs.arg < 1) throw QcapError("pool size must be at least 1");
  } else if (starts("file:")) {
    gs.kind = "file";
    gs.path = s.substr(5);
  } else {
    gs.kind = "file";
    gs.path = s;
  }
  return gs;
}

std::string file_stem(const std::string& path) {
  std::size_t slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

// Builtin encoder id optionally followed by ":params"? No: ids never contain
// ':', so an argument with ':' or '/' or '.' that is not an id is a path.
bool is_builtin_id(const std::string& s) {
  for (const EncoderInfo& e : builtin_encoders())
    if (e.id == s) return true;
  return false;
}

void run_parallel(int jobs, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, jobs));
  if (threads == 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < jobs; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsArgs {
  std::string channel, p_range, graph = "markov:0", kind = "both", out;
  double p = -1.0;
  int starts = 32, threads = 1;
  std::uint64_t seed = 1;
  double tol_feas = 1e-7, tol_obj = 1e-6;
};

int cmd_bounds(const BoundsArgs& a) {
  bool p_set = a.p >= 0.0;
  std::vector<double> grid = parse_grid(a.p_range, a.p, p_set);
  bool file_channel = a.channel.find(':') == std::string::npos &&
                      grid.empty();
  std::vector<std::pair<double, Channel>> channels;
  if (file_channel) {
    channels.emplace_back(std::nan(""), parse_channel_arg(a.channel));
  } else {
    if (grid.empty())
      throw QcapError("bounds: provide --p or --p-range for a builtin family");
    for (double p : grid)
      channels.emplace_back(p, make_builtin(a.channel, p));
  }
  GraphSource gs = parse_graph_source(a.graph);

  struct Row {
    double p;
    std::string graph_id, note;
    double ub = std::nan(""), lb = std::nan("");
    double ub_res = std::nan(""), lb_res = std::nan("");
  };
  std::vector<Row> rows((std::size_t)channels.size());

  // Pool graphs are enumerated once; they only depend on the output size.
  std::vector<QGraph> pool;
  if (gs.kind == "pool") {
    int Y = channels.front().second.Y;
    for (int Q = 1; Q <= gs.arg; ++Q)
      enumerate_qgraphs(Q, Y, [&](const QGraph& g) {
        pool.push_back(g);
        return true;
      });
  }

  bool want_ub = a.kind == "ub" || a.kind == "both";
  bool want_lb = a.kind == "lb" || a.kind == "both";
  if (!want_ub && !want_lb)
    throw QcapError("bounds: --kind must be ub, lb, or both");

  auto solve_row = [&](int i) {
    double p = channels[(std::size_t)i].first;
    const Channel& ch = channels[(std::size_t)i].second;
    Row& row = rows[(std::size_t)i];
    row.p = p;
    UbOptions uo;
    uo.obj_tol = a.tol_obj;
    LbOptions lo;
    lo.starts = a.starts;
    lo.seed = a.seed;
    lo.bcjr_tol = a.tol_feas;
    auto solve_one = [&](const QGraph& g, double* ub, double* ubr, double* lb,
                         double* lbr, std::string* err) {
      try {
        if (want_ub) {
          BoundResult r = solve_ub(ch, g, uo);
          *ub = r.value;
          *ubr = r.feasibility_residual;
        }
        if (want_lb) {
          LbResult r = solve_lb(ch, g, lo);
          *lb = r.value;
          *lbr = r.residual;
        }
        return true;
      } catch (const std::exception& ex) {
        *err = ex.what();
        return false;
      }
    };
    if (gs.kind == "pool") {
      row.graph_id = "pool:" + std::to_string(gs.arg);
      int best_ub = -1, best_lb = -1, ok_count = 0;
      for (std::size_t gi = 0; gi < pool.size(); ++gi) {
        double ub = std::nan(""), lb = std::nan("");
        double ubr = std::nan(""), lbr = std::nan("");
        std::string err;
        if (!solve_one(pool[gi], &ub, &ubr, &lb, &lbr, &err)) continue;
        ++ok_count;
        if (want_ub && (best_ub < 0 || ub < row.ub)) {
          row.ub = ub;
          row.ub_res = ubr;
          best_ub = (int)gi;
        }
        if (want_lb && (best_lb < 0 || lb > row.lb)) {
          row.lb = lb;
          row.lb_res = lbr;
          best_lb = (int)gi;
        }
      }
      if (ok_count == 0) {
        row.note = "no graph in the pool admits a bound at this p";
      } else {
        std::string n;
        if (best_ub >= 0) n += "ub_graph=" + std::to_string(best_ub);
        if (best_lb >= 0)
          n += (n.empty() ? "" : ";") + std::string("lb_graph=") +
               std::to_string(best_lb);
        row.note = n;
      }
    } else {
      QGraph g;
      if (gs.kind == "markov") {
        row.graph_id = "markov:" + std::to_string(gs.arg);
        g = markov_qgraph(gs.arg, ch.Y);
      } else {
        row.graph_id = file_stem(gs.path);
        g = load_qgraph(gs.path);
      }
      std::string err;
      if (!solve_one(g, &row.ub, &row.ub_res, &row.lb, &row.lb_res, &err))
        row.note = csv_safe(err);
    }
  };
  run_parallel((int)channels.size(), a.threads, solve_row);

  std::stable_sort(rows.begin(), rows.end(), [](const Row& l, const Row& r) {
    if (l.p != r.p) return l.p < r.p || std::isnan(r.p);
    return l.graph_id < r.graph_id;
  });

  Output out;
  out.open(a.out);
  std::ostream& os = *out.os;
  os << "p,graph_id,ub,lb,gap,ub_residual,lb_residual,note\n";
  long data_rows = 0;
  for (const Row& r : rows) {
    bool have_ub = !std::isnan(r.ub), have_lb = !std::isnan(r.lb);
    if (!have_ub && !have_lb && !r.note.empty() &&
        r.note.rfind("no graph", 0) == 0)
      continue;  // empty pool: warn below, emit no data row
    os << (std::isnan(r.p) ? "" : fmt(r.p)) << ',' << r.graph_id << ','
       << (have_ub ? fmt(r.ub) : "") << ',' << (have_lb ? fmt(r.lb) : "")
       << ',' << (have_ub && have_lb ? fmt(r.ub - r.lb) : "") << ','
       << (have_ub ? fmt(r.ub_res) : "") << ','
       << (have_lb ? fmt(r.lb_res) : "") << ',' << r.note << '\n';
    ++data_rows;
  }
  if (data_rows == 0)
    std::cerr << "warning: no data rows (all rows failed the validity "
                 "filter or the solvers)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// enumerate

int cmd_enumerate(int nodes, int outputs, bool list, const std::string& out) {
  Output o;
  o.open(out);
  std::ostream& os = *o.os;
  if (!list) {
    std::int64_t n = enumerate_qgraphs(nodes, outputs,
                                       [](const QGraph&) { return true; });
    os << "nodes,outputs,count\n"
       << nodes << ',' << outputs << ',' << n << '\n';
    return 0;
  }
  os << "index,transition\n";
  std::int64_t idx = 0;
  enumerate_qgraphs(nodes, outputs, [&](const QGraph& g) {
    std::string t;
    for (int q = 0; q < g.Q; ++q) {
      if (q) t += '|';
      for (int y = 0; y < g.Y; ++y) {
        if (y) t += ' ';
        t += std::to_string(g.at(q, y));
      }
    }
    os << idx++ << ',' << t << '\n';
    return true;
  });
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimArgs {
  std::string encoder, p_range, out;
  double p = -1.0;
  long n = 100000, M = 0;
  double log2M = -1.0;
  int trials = 1, threads = 1;
  std::uint64_t seed = 1;
};

GraphEncoder resolve_encoder(const std::string& arg, double p, bool p_set) {
  if (is_builtin_id(arg)) {
    if (!p_set)
      throw QcapError("builtin encoder " + arg + " needs --p");
    return builtin_encoder(arg, p);
  }
  return load_encoder(arg);
}

int cmd_simulate(const SimArgs& a) {
  bool p_set = a.p >= 0.0;
  GraphEncoder enc = resolve_encoder(a.encoder, a.p, p_set);
  std::string id = is_builtin_id(a.encoder) ? a.encoder : file_stem(a.encoder);

  std::vector<PmResult> results((std::size_t)a.trials);
  run_parallel(a.trials, a.threads, [&](int t) {
    PmOptions o;
    o.n = a.n;
    o.M = a.M;
    o.log2M = a.log2M;
    o.seed = a.seed + (std::uint64_t)t;
    results[(std::size_t)t] = simulate(enc, o);
  });
  double mean = 0.0, decoded = 0.0;
  long flagged = 0;
  for (const PmResult& r : results) {
    mean += r.empirical_rate;
    decoded += r.decoded ? 1.0 : 0.0;
    flagged += r.flagged_steps;
  }
  mean /= (double)a.trials;
  double var = 0.0;
  for (const PmResult& r : results)
    var += (r.empirical_rate - mean) * (r.empirical_rate - mean);
  double stderr_ = a.trials > 1
                       ? std::sqrt(var / (a.trials - 1) / a.trials)
                       : 0.0;

  Output out;
  out.open(a.out);
  *out.os << "encoder,p,n,M,trials,seed,rate_mean,rate_stderr,certified_rate,"
             "decoded_fraction,flagged_steps\n"
          << id << ',' << (p_set ? fmt(a.p) : fmt(enc.p)) << ',' << a.n << ','
          << a.M << ',' << a.trials << ',' << a.seed << ',' << fmt(mean)
          << ',' << fmt(stderr_) << ',' << fmt(enc.rate) << ','
          << fmt(decoded / (double)a.trials) << ',' << flagged << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// encoders list | eval

int cmd_encoders_list(const std::string& out) {
  Output o;
  o.open(out);
  std::ostream& os = *o.os;
  os << "id,family,formula,nodes,param_count,p_min,p_max\n";
  for (const EncoderInfo& e : builtin_encoders())
    os << e.id << ',' << e.family << ',' << e.formula << ',' << e.nodes << ','
       << e.param_count << ',' << fmt(e.p_min) << ',' << fmt(e.p_max) << '\n';
  return 0;
}

struct EvalArgs {
  std::string id, p_range, params, out;
  double p = -1.0;
};

int cmd_encoders_eval(const EvalArgs& a) {
  std::vector<double> grid = parse_grid(a.p_range, a.p, a.p >= 0.0);
  if (grid.empty())
    throw QcapError("encoders eval: provide --p or --p-range");
  std::vector<double> params;
  if (!a.params.empty()) {
    std::istringstream ss(a.params);
    std::string tok;
    while (std::getline(ss, tok, ',')) params.push_back(std::stod(tok));
  }
  const EncoderInfo* info = nullptr;
  for (const EncoderInfo& e : builtin_encoders())
    if (e.id == a.id) info = &e;
  if (!info) throw QcapError("unknown encoder id: " + a.id);

  Output out;
  out.open(a.out);
  std::ostream& os = *out.os;
  os << "id,p,certified_rate,formula,formula_rate,bcjr_residual,params,note\n";
  for (double p : grid) {
    std::string note, par_str;
    double rate = std::nan(""), frate = std::nan(""), resid = std::nan("");
    try {
      GraphEncoder enc = builtin_encoder(a.id, p, params);
      rate = enc.rate;
      resid = bcjr_residual(enc.ch, enc.g, enc.pol);
      if (params.empty()) {
        OptimizedRate best = optimize_params(info->formula, p);
        frate = best.rate;
        for (std::size_t i = 0; i < best.params.size(); ++i)
          par_str += (i ? ";" : "") + fmt(best.params[i]);
      } else {
        frate = closed_form_rate(info->formula, p, params);
        for (std::size_t i = 0; i < params.size(); ++i)
          par_str += (i ? ";" : "") + fmt(params[i]);
      }
    } catch (const std::exception& ex) {
      note = csv_safe(ex.what());
    }
    os << a.id << ',' << fmt(p) << ','
       << (std::isnan(rate) ? "" : fmt(rate)) << ',' << info->formula << ','
       << (std::isnan(frate) ? "" : fmt(frate)) << ','
       << (std::isnan(resid) ? "" : fmt(resid)) << ',' << par_str << ','
       << note << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// kkt

struct KktArgs {
  std::string encoder, p_range, out;
  double p = -1.0;
  double tol = 1e-6;
};

int cmd_kkt(const KktArgs& a) {
  std::vector<double> grid = parse_grid(a.p_range, a.p, a.p >= 0.0);
  bool builtin = is_builtin_id(a.encoder);
  if (builtin && grid.empty())
    throw QcapError("kkt: provide --p or --p-range for a builtin encoder");
  if (!builtin) grid = {std::nan("")};

  Output out;
  out.open(a.out);
  std::ostream& os = *out.os;
  os << "encoder,p,verdict,feasibility,stationarity,min_mu,complementarity,"
        "rank,multipliers_unique,note\n";
  for (double p : grid) {
    std::string note;
    std::string verdict;
    KktReport rep;
    double shown_p = p;
    try {
      GraphEncoder enc = builtin
                             ? builtin_encoder(a.encoder, p)
                             : load_encoder(a.encoder);
      if (!builtin) shown_p = enc.p;
      CoupledGraph cg = couple(enc.ch, enc.g);
      StationaryResult st = transition_and_stationary(cg, enc.pol);
      JointDistribution jd = joint_from_policy(cg, enc.pol, st.pi);
      rep = kkt_verify(enc.ch, enc.g, jd, a.tol);
      verdict = rep.verdict ? "1" : "0";
    } catch (const std::exception& ex) {
      note = csv_safe(ex.what());
    }
    std::string id = builtin ? a.encoder : file_stem(a.encoder);
    os << id << ',' << (std::isnan(shown_p) ? "" : fmt(shown_p)) << ','
       << verdict << ',';
    if (!verdict.empty())
      os << fmt(rep.feasibility) << ',' << fmt(rep.stationarity_residual)
         << ',' << fmt(rep.min_mu) << ',' << fmt(rep.complementarity) << ','
         << rep.rank << ',' << (rep.multipliers_unique ? 1 : 0);
    else
      os << ",,,,,";
    os << ',' << note << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// pstar

int cmd_pstar(const std::string& family, const std::string& out) {
  std::vector<std::string> families;
  if (family.empty())
    families = {"bfc2", "trapdoor"};
  else
    families = {family};
  Output o;
  o.open(out);
  std::ostream& os = *o.os;
  os << "family,p_star,residual\n";
  for (const std::string& f : families) {
    PstarResult r = find_pstar(f);
    os << f << ',' << fmt(r.p_star) << ',' << fmt(r.residual) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Feedback-capacity bounds for unifilar finite-state channels over "
      "auxiliary Q-graphs"};
  app.require_subcommand(1);

  BoundsArgs ba;
  CLI::App* bounds = app.add_subcommand(
      "bounds", "Upper/lower bound sweep over a p-grid and a graph source");
  bounds->add_option("--channel", ba.channel,
                     "Builtin family (bfc1|bfc2|ising|trapdoor) or channel "
                     "JSON path")
      ->required();
  bounds->add_option("--p", ba.p, "Single channel parameter");
  bounds->add_option("--p-range", ba.p_range, "Grid a:b:step");
  bounds->add_option("--graph", ba.graph, "markov:k | pool:n | file:PATH");
  bounds->add_option("--kind", ba.kind, "ub | lb | both");
  bounds->add_option("--starts", ba.starts, "Lower-bound multistart count");
  bounds->add_option("--seed", ba.seed, "Lower-bound search seed");
  bounds->add_option("--tol-feas", ba.tol_feas, "Certification tolerance");
  bounds->add_option("--tol-obj", ba.tol_obj, "Upper-bound gap tolerance");
  bounds->add_option("--threads", ba.threads, "Row-level worker threads");
  bounds->add_option("--out", ba.out, "CSV output path (default stdout)");

  int en_nodes = 2, en_outputs = 2;
  bool en_list = false;
  std::string en_out;
  CLI::App* enumerate =
      app.add_subcommand("enumerate", "Count or list valid Q-graphs");
  enumerate->add_option("--nodes", en_nodes, "Node count")->required();
  enumerate->add_option("--outputs", en_outputs, "Output alphabet size")
      ->required();
  enumerate->add_flag("--list", en_list, "List transition tables");
  enumerate->add_option("--out", en_out, "CSV output path");

  SimArgs sa;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Posterior-matching simulation");
  simulate->add_option("--encoder", sa.encoder,
                       "Builtin encoder id or encoder JSON path")
      ->required();
  simulate->add_option("--p", sa.p, "Channel parameter (builtin encoders)");
  simulate->add_option("--n", sa.n, "Channel uses per trial");
  simulate->add_option("--M", sa.M,
                       "Message count (0 = effectively infinite)");
  simulate->add_option("--log2M", sa.log2M,
                       "Message bits in the infinite mode (default auto)");
  simulate->add_option("--trials", sa.trials, "Independent trials");
  simulate->add_option("--seed", sa.seed, "Base seed; trial t uses seed+t");
  simulate->add_option("--threads", sa.threads, "Trial-level worker threads");
  simulate->add_option("--out", sa.out, "CSV output path");

  CLI::App* encoders =
      app.add_subcommand("encoders", "Builtin encoder catalog");
  encoders->require_subcommand(1);
  std::string el_out;
  CLI::App* enc_list =
      encoders->add_subcommand("list", "List the encoder catalog");
  enc_list->add_option("--out", el_out, "CSV output path");
  EvalArgs ea;
  CLI::App* enc_eval = encoders->add_subcommand(
      "eval", "Certified rate and closed form at given p");
  enc_eval->add_option("--id", ea.id, "Encoder id")->required();
  enc_eval->add_option("--p", ea.p, "Single p");
  enc_eval->add_option("--p-range", ea.p_range, "Grid a:b:step");
  enc_eval->add_option("--params", ea.params,
                       "Comma-separated free parameters (default: optimized)");
  enc_eval->add_option("--out", ea.out, "CSV output path");

  KktArgs ka;
  CLI::App* kkt = app.add_subcommand(
      "kkt", "First-order optimality check of an encoder's joint law");
  kkt->add_option("--encoder", ka.encoder,
                  "Builtin encoder id or encoder JSON path")
      ->required();
  kkt->add_option("--p", ka.p, "Single p (builtin encoders)");
  kkt->add_option("--p-range", ka.p_range, "Grid a:b:step");
  kkt->add_option("--tol", ka.tol, "Verdict tolerance");
  kkt->add_option("--out", ka.out, "CSV output path");

  std::string ps_family, ps_out;
  CLI::App* pstar = app.add_subcommand(
      "pstar", "Tightness thresholds of the builtin families");
  pstar->add_option("--family", ps_family, "bfc2 | trapdoor (default both)");
  pstar->add_option("--out", ps_out, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bounds->parsed()) return cmd_bounds(ba);
    if (enumerate->parsed())
      return cmd_enumerate(en_nodes, en_outputs, en_list, en_out);
    if (simulate->parsed()) return cmd_simulate(sa);
    if (encoders->parsed()) {
      if (enc_list->parsed()) return cmd_encoders_list(el_out);
      return cmd_encoders_eval(ea);
    }
    if (kkt->parsed()) return cmd_kkt(ka);
    if (pstar->parsed()) return cmd_pstar(ps_family, ps_out);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}
