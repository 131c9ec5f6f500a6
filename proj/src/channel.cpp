#include "qcap/channel.hpp"

#include <cmath>
#include <fstream>

#include "qcap/json_io.hpp"

namespace qcap {

using json = nlohmann::json;

void Channel::validate(double row_tol) const {
  if (S <= 0 || X <= 0 || Y <= 0)
    throw QcapError("channel: alphabet sizes must be positive");
  if ((int)W.size() != S * X * Y || (int)F.size() != S * X * Y)
    throw QcapError("channel: kernel/next_state tables have wrong size");
  for (int s = 0; s < S; ++s)
    for (int x = 0; x < X; ++x) {
      double row = 0.0;
      for (int y = 0; y < Y; ++y) {
        double v = w(s, x, y);
        if (!(v >= 0.0 && v <= 1.0 + row_tol))
          throw QcapError("channel: kernel entry outside [0,1] at (s=" +
                          std::to_string(s) + ",x=" + std::to_string(x) +
                          ",y=" + std::to_string(y) + ")");
        row += v;
        int nxt = f(s, x, y);
        if (v > 0.0 && (nxt < 0 || nxt >= S))
          throw QcapError(
              "channel: next_state undefined or out of range on the support "
              "at (s=" + std::to_string(s) + ",x=" + std::to_string(x) +
              ",y=" + std::to_string(y) + ")");
        if (v == 0.0 && nxt != kImpossible && (nxt < 0 || nxt >= S))
          throw QcapError("channel: next_state out of range at zero entry");
      }
      if (std::abs(row - 1.0) > row_tol)
        throw QcapError("channel: kernel row (s=" + std::to_string(s) +
                        ",x=" + std::to_string(x) + ") sums to " +
                        std::to_string(row) + ", not 1");
    }
}

bool Channel::strongly_connected() const {
  // Reachability closure over the positive-probability edges s -> f(s,x,y).
  std::vector<std::vector<bool>> reach(S, std::vector<bool>(S, false));
  for (int s = 0; s < S; ++s) {
    reach[s][s] = true;
    for (int x = 0; x < X; ++x)
      for (int y = 0; y < Y; ++y)
        if (w(s, x, y) > 0.0) reach[s][f(s, x, y)] = true;
  }
  for (int k = 0; k < S; ++k)
    for (int i = 0; i < S; ++i)
      if (reach[i][k])
        for (int j = 0; j < S; ++j)
          if (reach[k][j]) reach[i][j] = true;
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j)
      if (!reach[i][j]) return false;
  return true;
}

Channel make_builtin(const std::string& family, double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw QcapError("builtin channel: p must lie in [0,1], got " +
                    std::to_string(p));
  Channel ch;
  ch.S = ch.X = ch.Y = 2;
  ch.W.assign(8, 0.0);
  ch.F.assign(8, kImpossible);
  ch.name = family + ":" + std::to_string(p);

  if (family == "bfc1" || family == "bfc2") {
    // Y = (S*X) xor N with N ~ Ber(p).
    for (int s = 0; s < 2; ++s)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          int n = y ^ (s & x);
          ch.w(s, x, y) = n ? p : 1.0 - p;
          ch.f(s, x, y) = (family == "bfc1") ? (s ^ x ^ y) : (s ^ n);
        }
  } else if (family == "ising" || family == "trapdoor") {
    // Y = S w.p. p and Y = X w.p. 1-p; when X = S the output is X surely.
    for (int s = 0; s < 2; ++s)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          double v;
          if (x == s)
            v = (y == x) ? 1.0 : 0.0;
          else
            v = (y == s) ? p : 1.0 - p;
          ch.w(s, x, y) = v;
          ch.f(s, x, y) = (family == "ising") ? x : (s ^ x ^ y);
        }
  } else {
    throw QcapError("unknown builtin channel family '" + family +
                    "' (known: bfc1, bfc2, ising, trapdoor)");
  }
  ch.validate();
  return ch;
}

namespace {

// next_state entries are scalars; a list with several distinct values would
// describe a multi-valued (non-unifilar) transition and is rejected.
int parse_next_state(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_array()) {
    if (v.empty()) return kImpossible;
    int first = v[0].get<int>();
    for (const auto& e : v)
      if (e.get<int>() != first)
        throw QcapError(
            "channel file: multiple next states for one (s,x,y); "
            "channel is not unifilar");
    return first;
  }
  throw QcapError("channel file: next_state entries must be integers");
}

}  // namespace

Channel channel_from_json(const json& j, const std::string& ctx) {
  Channel ch;
  try {
    if (j.contains("family")) {
      // Builtin shorthand: {"family": "bfc1", "p": 0.25}.
      return make_builtin(j.at("family").get<std::string>(),
                          j.at("p").get<double>());
    }
    const auto& al = j.at("alphabets");
    ch.S = al.at("S").get<int>();
    ch.X = al.at("X").get<int>();
    ch.Y = al.at("Y").get<int>();
    if (ch.S <= 0 || ch.X <= 0 || ch.Y <= 0)
      throw QcapError(ctx + ": alphabet sizes must be positive");
    ch.name = j.value("name", ctx);
    ch.W.assign(ch.S * ch.X * ch.Y, 0.0);
    ch.F.assign(ch.S * ch.X * ch.Y, kImpossible);
    const auto& ker = j.at("kernel");
    const auto& nxt = j.at("next_state");
    if ((int)ker.size() != ch.S || (int)nxt.size() != ch.S)
      throw QcapError(ctx + ": kernel/next_state must have S rows");
    for (int s = 0; s < ch.S; ++s) {
      if ((int)ker[s].size() != ch.X || (int)nxt[s].size() != ch.X)
        throw QcapError(ctx + ": expected X entries per state");
      for (int x = 0; x < ch.X; ++x) {
        if ((int)ker[s][x].size() != ch.Y || (int)nxt[s][x].size() != ch.Y)
          throw QcapError(ctx + ": expected Y entries per (s,x)");
        for (int y = 0; y < ch.Y; ++y) {
          ch.w(s, x, y) = ker[s][x][y].get<double>();
          ch.f(s, x, y) = parse_next_state(nxt[s][x][y]);
        }
      }
    }
  } catch (const json::exception& e) {
    throw QcapError(ctx + ": " + e.what());
  }
  ch.validate();
  return ch;
}

json channel_to_json(const Channel& ch) {
  json j;
  j["name"] = ch.name;
  j["alphabets"] = {{"S", ch.S}, {"X", ch.X}, {"Y", ch.Y}};
  json ker = json::array(), nxt = json::array();
  for (int s = 0; s < ch.S; ++s) {
    json ks = json::array(), ns = json::array();
    for (int x = 0; x < ch.X; ++x) {
      json ky = json::array(), ny = json::array();
      for (int y = 0; y < ch.Y; ++y) {
        ky.push_back(ch.w(s, x, y));
        ny.push_back(ch.f(s, x, y));
      }
      ks.push_back(ky);
      ns.push_back(ny);
    }
    ker.push_back(ks);
    nxt.push_back(ns);
  }
  j["kernel"] = ker;
  j["next_state"] = nxt;
  return j;
}

Channel load_channel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw QcapError("cannot open channel file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw QcapError("channel file " + path + ": bad JSON: " + e.what());
  }
  return channel_from_json(j, "channel file " + path);
}

void save_channel(const Channel& ch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw QcapError("cannot write channel file: " + path);
  out << channel_to_json(ch).dump(2) << "\n";
}

Channel parse_channel_arg(const std::string& arg) {
  auto colon = arg.find(':');
  if (colon != std::string::npos) {
    std::string fam = arg.substr(0, colon);
    if (fam == "bfc1" || fam == "bfc2" || fam == "ising" || fam == "trapdoor") {
      double p;
      try {
        p = std::stod(arg.substr(colon + 1));
      } catch (const std::exception&) {
        throw QcapError("bad channel parameter in '" + arg + "'");
      }
      return make_builtin(fam, p);
    }
  }
  return load_channel(arg);
}

}  // namespace qcap
