// Python bindings for the core library. Options structs are flattened into
// keyword arguments; Eigen vectors cross as numpy arrays (copies).
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qcap/channel.hpp"
#include "qcap/encoders.hpp"
#include "qcap/lb.hpp"
#include "qcap/markov.hpp"
#include "qcap/pm.hpp"
#include "qcap/qgraph.hpp"
#include "qcap/ub.hpp"

namespace py = pybind11;
using namespace qcap;

namespace {

JointDistribution joint_of(const Channel& ch, const QGraph& g,
                           const Policy& pol) {
  CoupledGraph cg = couple(ch, g);
  StationaryResult st = transition_and_stationary(cg, pol);
  return joint_from_policy(cg, pol, st.pi);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Feedback-capacity bounds for unifilar finite-state channels over "
      "auxiliary Q-graphs";

  py::register_exception<QcapError>(m, "Error");

  // ---- channel ----------------------------------------------------------
  py::class_<Channel>(m, "Channel")
      .def_readonly("S", &Channel::S)
      .def_readonly("X", &Channel::X)
      .def_readonly("Y", &Channel::Y)
      .def("w",
           [](const Channel& c, int s, int x, int y) { return c.w(s, x, y); },
           py::arg("s"), py::arg("x"), py::arg("y"))
      .def("f",
           [](const Channel& c, int s, int x, int y) { return c.f(s, x, y); },
           py::arg("s"), py::arg("x"), py::arg("y"))
      .def("validate", &Channel::validate, py::arg("row_tol") = 1e-9)
      .def("strongly_connected", &Channel::strongly_connected)
      .def("__repr__", [](const Channel& c) {
        return "Channel(S=" + std::to_string(c.S) +
               ", X=" + std::to_string(c.X) + ", Y=" + std::to_string(c.Y) +
               ")";
      });
  m.def("make_builtin", &make_builtin, py::arg("family"), py::arg("p"));
  m.def("load_channel", &load_channel, py::arg("path"));
  m.def("save_channel", &save_channel, py::arg("channel"), py::arg("path"));

  // ---- q-graph ----------------------------------------------------------
  py::class_<QGraph>(m, "QGraph")
      .def(py::init([](int Q, int Y, const std::vector<int>& T) {
             QGraph g;
             g.Q = Q;
             g.Y = Y;
             g.T = T;
             if ((int)T.size() != Q * Y)
               throw QcapError("transition table needs Q*Y entries");
             return g;
           }),
           py::arg("Q"), py::arg("Y"), py::arg("T"))
      .def_readonly("Q", &QGraph::Q)
      .def_readonly("Y", &QGraph::Y)
      .def_readonly("T", &QGraph::T)
      .def("at", [](const QGraph& g, int q, int y) { return g.at(q, y); },
           py::arg("q"), py::arg("y"))
      .def("__repr__", [](const QGraph& g) {
        return "QGraph(Q=" + std::to_string(g.Q) +
               ", Y=" + std::to_string(g.Y) + ")";
      });
  m.def("walk", &walk, py::arg("g"), py::arg("q0"), py::arg("ys"));
  m.def("is_valid_qgraph", &is_valid_qgraph, py::arg("g"));
  m.def("canonical_form", &canonical_form, py::arg("g"));
  m.def("markov_qgraph", &markov_qgraph, py::arg("k"), py::arg("Y"),
        py::arg("node_cap") = (std::int64_t)(1 << 20));
  m.def(
      "enumerate_count",
      [](int Q, int Y) {
        return enumerate_qgraphs(Q, Y, [](const QGraph&) { return true; });
      },
      py::arg("Q"), py::arg("Y"));
  m.def(
      "enumerate_list",
      [](int Q, int Y, std::int64_t limit) {
        std::vector<QGraph> out;
        enumerate_qgraphs(Q, Y, [&](const QGraph& g) {
          out.push_back(g);
          return (std::int64_t)out.size() < limit;
        });
        return out;
      },
      py::arg("Q"), py::arg("Y"), py::arg("limit") = (std::int64_t)1 << 40);
  m.def("load_qgraph", &load_qgraph, py::arg("path"));
  m.def("save_qgraph", &save_qgraph, py::arg("g"), py::arg("path"));

  // ---- policy / markov --------------------------------------------------
  py::class_<Policy>(m, "Policy")
      .def(py::init([](int S, int Q, int X, const std::vector<double>& v) {
             Policy p;
             p.S = S;
             p.Q = Q;
             p.X = X;
             p.v = v;
             if ((int)v.size() != S * Q * X)
               throw QcapError("policy table needs S*Q*X entries");
             return p;
           }),
           py::arg("S"), py::arg("Q"), py::arg("X"), py::arg("v"))
      .def_readonly("S", &Policy::S)
      .def_readonly("Q", &Policy::Q)
      .def_readonly("X", &Policy::X)
      .def_readonly("v", &Policy::v)
      .def("at",
           [](const Policy& p, int s, int q, int x) { return p.at(s, q, x); },
           py::arg("s"), py::arg("q"), py::arg("x"))
      .def("validate", &Policy::validate, py::arg("row_tol") = 1e-9);
  m.def("uniform_policy", &uniform_policy, py::arg("S"), py::arg("Q"),
        py::arg("X"));

  py::class_<StationaryResult>(m, "StationaryResult")
      .def_readonly("pi", &StationaryResult::pi)
      .def_readonly("closed", &StationaryResult::closed)
      .def_readonly("aperiodic", &StationaryResult::aperiodic)
      .def_readonly("residual", &StationaryResult::residual);
  m.def(
      "stationary",
      [](const Channel& ch, const QGraph& g, const Policy& pol) {
        return transition_and_stationary(couple(ch, g), pol);
      },
      py::arg("channel"), py::arg("g"), py::arg("policy"));

  py::class_<JointDistribution>(m, "JointDistribution")
      .def_readonly("S", &JointDistribution::S)
      .def_readonly("Q", &JointDistribution::Q)
      .def_readonly("X", &JointDistribution::X)
      .def_readonly("Y", &JointDistribution::Y)
      .def_readonly("d", &JointDistribution::d)
      .def("at",
           [](const JointDistribution& jd, int s, int q, int x, int y) {
             return jd.at(s, q, x, y);
           },
           py::arg("s"), py::arg("q"), py::arg("x"), py::arg("y"))
      .def("mass", &JointDistribution::mass);
  m.def("joint_of", &joint_of, py::arg("channel"), py::arg("g"),
        py::arg("policy"),
        "Stationary joint law d(s,q,x,y) of the coupled chain under the "
        "policy");
  m.def("conditional_mutual_information", &conditional_mutual_information,
        py::arg("jd"));
  m.def("pi_s_given_q", &pi_s_given_q, py::arg("st"), py::arg("S"),
        py::arg("Q"));

  // ---- bounds -----------------------------------------------------------
  py::class_<BoundResult>(m, "BoundResult")
      .def_readonly("value", &BoundResult::value)
      .def_readonly("kind", &BoundResult::kind)
      .def_readonly("feasibility_residual", &BoundResult::feasibility_residual)
      .def_readonly("optimality_gap", &BoundResult::optimality_gap)
      .def_readonly("iterations", &BoundResult::iterations)
      .def_readonly("argmax", &BoundResult::argmax);
  m.def(
      "solve_ub",
      [](const Channel& ch, const QGraph& g, double obj_tol, int max_newton,
         std::uint64_t seed, bool random_start) {
        UbOptions o;
        o.obj_tol = obj_tol;
        o.max_newton = max_newton;
        o.seed = seed;
        o.random_start = random_start;
        return solve_ub(ch, g, o);
      },
      py::arg("channel"), py::arg("g"), py::arg("obj_tol") = 1e-6,
      py::arg("max_newton") = 2000, py::arg("seed") = 0,
      py::arg("random_start") = false);

  py::class_<GraphEncoder>(m, "GraphEncoder")
      .def_readonly("ch", &GraphEncoder::ch)
      .def_readonly("g", &GraphEncoder::g)
      .def_readonly("pol", &GraphEncoder::pol)
      .def_readonly("family", &GraphEncoder::family)
      .def_readonly("p", &GraphEncoder::p)
      .def_readonly("rate", &GraphEncoder::rate);

  py::class_<CertResult>(m, "CertResult")
      .def_readonly("ok", &CertResult::ok)
      .def_readonly("rate", &CertResult::rate)
      .def_readonly("residual", &CertResult::residual)
      .def_readonly("detail", &CertResult::detail);
  m.def("certify_encoder", &certify_encoder, py::arg("channel"), py::arg("g"),
        py::arg("policy"), py::arg("tol") = 1e-7);
  m.def("bcjr_residual",
        py::overload_cast<const Channel&, const QGraph&, const Policy&>(
            &bcjr_residual),
        py::arg("channel"), py::arg("g"), py::arg("policy"));

  py::class_<LbResult>(m, "LbResult")
      .def_readonly("value", &LbResult::value)
      .def_readonly("best", &LbResult::best)
      .def_readonly("all_values", &LbResult::all_values)
      .def_readonly("residual", &LbResult::residual)
      .def_readonly("certified_count", &LbResult::certified_count);
  m.def(
      "solve_lb",
      [](const Channel& ch, const QGraph& g, int starts, std::uint64_t seed,
         double bcjr_tol, bool polish) {
        LbOptions o;
        o.starts = starts;
        o.seed = seed;
        o.bcjr_tol = bcjr_tol;
        o.polish = polish;
        return solve_lb(ch, g, o);
      },
      py::arg("channel"), py::arg("g"), py::arg("starts") = 32,
      py::arg("seed") = 1, py::arg("bcjr_tol") = 1e-7,
      py::arg("polish") = true);
  m.def("load_encoder", &load_encoder, py::arg("path"));
  m.def("save_encoder", &save_encoder, py::arg("encoder"), py::arg("path"));

  // ---- encoder catalog / optimality -------------------------------------
  py::class_<EncoderInfo>(m, "EncoderInfo")
      .def_readonly("id", &EncoderInfo::id)
      .def_readonly("family", &EncoderInfo::family)
      .def_readonly("formula", &EncoderInfo::formula)
      .def_readonly("nodes", &EncoderInfo::nodes)
      .def_readonly("param_count", &EncoderInfo::param_count)
      .def_readonly("p_min", &EncoderInfo::p_min)
      .def_readonly("p_max", &EncoderInfo::p_max);
  m.def("builtin_encoders", &builtin_encoders,
        py::return_value_policy::copy);
  m.def("builtin_encoder", &builtin_encoder, py::arg("id"), py::arg("p"),
        py::arg("params") = std::vector<double>{});
  m.def("closed_form_rate", &closed_form_rate, py::arg("formula"),
        py::arg("p"), py::arg("params") = std::vector<double>{});

  py::class_<OptimizedRate>(m, "OptimizedRate")
      .def_readonly("rate", &OptimizedRate::rate)
      .def_readonly("params", &OptimizedRate::params);
  m.def("optimize_params", &optimize_params, py::arg("formula"), py::arg("p"));

  py::class_<PstarResult>(m, "PstarResult")
      .def_readonly("p_star", &PstarResult::p_star)
      .def_readonly("residual", &PstarResult::residual);
  m.def("find_pstar", &find_pstar, py::arg("family"));

  py::class_<KktReport>(m, "KktReport")
      .def_readonly("verdict", &KktReport::verdict)
      .def_readonly("stationarity_residual", &KktReport::stationarity_residual)
      .def_readonly("min_mu", &KktReport::min_mu)
      .def_readonly("complementarity", &KktReport::complementarity)
      .def_readonly("feasibility", &KktReport::feasibility)
      .def_readonly("mu", &KktReport::mu)
      .def_readonly("lam", &KktReport::lambda)
      .def_readonly("rank", &KktReport::rank)
      .def_readonly("multipliers_unique", &KktReport::multipliers_unique);
  m.def("kkt_verify", &kkt_verify, py::arg("channel"), py::arg("g"),
        py::arg("jd"), py::arg("tol") = 1e-6);
  m.def(
      "kkt_for_encoder",
      [](const GraphEncoder& e, double tol) {
        return kkt_verify(e.ch, e.g, joint_of(e.ch, e.g, e.pol), tol);
      },
      py::arg("encoder"), py::arg("tol") = 1e-6,
      "KKT check of the encoder's own stationary joint law");

  // ---- posterior matching ------------------------------------------------
  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("step", &StepRecord::step)
      .def_readonly("q", &StepRecord::q)
      .def_readonly("y", &StepRecord::y)
      .def_readonly("lambda_true", &StepRecord::lambda_true)
      .def_readonly("log_growth", &StepRecord::log_growth);
  py::class_<PmResult>(m, "PmResult")
      .def_readonly("empirical_rate", &PmResult::empirical_rate)
      .def_readonly("sum_log_growth", &PmResult::sum_log_growth)
      .def_readonly("decoded", &PmResult::decoded)
      .def_readonly("flagged_steps", &PmResult::flagged_steps)
      .def_readonly("transcript", &PmResult::transcript);
  m.def(
      "simulate",
      [](const GraphEncoder& enc, long n, std::uint64_t seed, long M,
         double log2M, bool record_transcript) {
        PmOptions o;
        o.n = n;
        o.seed = seed;
        o.M = M;
        o.log2M = log2M;
        o.record_transcript = record_transcript;
        return simulate(enc, o);
      },
      py::arg("encoder"), py::arg("n") = 100000, py::arg("seed") = 1,
      py::arg("M") = 0, py::arg("log2M") = -1.0,
      py::arg("record_transcript") = false);

  // ---- misc --------------------------------------------------------------
  m.def("h2", &h2, py::arg("p"), "Binary entropy in bits");
}
