#pragma once
// External formats: protocol JSON (with builtin shorthand), trace JSONL,
// witness lassos, and DOT export of configuration graphs.

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kpart/analysis.hpp"
#include "kpart/core.hpp"
#include "kpart/mc.hpp"
#include "kpart/protocols.hpp"
#include "kpart/sim.hpp"

namespace kpart {

using nlohmann::json;

inline std::string spec_hash_hex(const ProtocolSpec& sp) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << sp.structural_hash();
  return os.str();
}

// --- protocol -------------------------------------------------------------

inline ProtocolDraft draft_from_json(const json& j) {
  ProtocolDraft d;
  d.P = j.at("P").get<int>();
  d.k = j.at("k").get<int>();
  d.agent_states = j.at("agent_states").get<std::vector<int>>();
  for (auto& [key, val] : j.at("colors").items()) d.colors[std::stoi(key)] = val.get<int>();
  const auto& bs = j.at("bs");
  if (bs.contains("registers")) {
    BsRegisters r;
    for (auto& [name, range] : bs.at("registers").items()) {
      r.names.push_back(name);
      r.ranges.push_back({range.at(0).get<int>(), range.at(1).get<int>()});
    }
    d.bs = std::move(r);
  } else {
    d.bs = BsExplicit{bs.at("states").get<std::vector<int>>()};
  }
  auto as_draft_state = [](const json& v) -> DraftState {
    if (v.is_string()) return v.get<std::string>();
    return v.get<int>();
  };
  if (j.contains("bs_initial")) d.bs_initial = as_draft_state(j.at("bs_initial"));
  if (j.contains("default_nulls")) d.fill_null_rules = j.at("default_nulls").get<bool>();
  if (j.contains("rules"))
    for (const auto& r : j.at("rules")) {
      DraftRule rule;
      rule.pre = {as_draft_state(r.at(0).at(0)), as_draft_state(r.at(0).at(1))};
      rule.post = {as_draft_state(r.at(1).at(0)), as_draft_state(r.at(1).at(1))};
      d.rules.push_back(std::move(rule));
    }
  return d;
}

/// Builtin shorthand names: "kpartition_asym", "bipartition_oddP",
/// "kpartition_sym_candidate:<name>".
inline BuiltProtocol builtin_protocol(const std::string& name, int P, int k) {
  if (name == "kpartition_asym") return build_kpartition_asym(P, k);
  if (name == "bipartition_oddP") return build_bipartition_oddP(P);
  const std::string prefix = "kpartition_sym_candidate:";
  if (name.rfind(prefix, 0) == 0)
    return build_kpartition_sym_candidate(name.substr(prefix.size()), P, k);
  throw UnknownCandidate("unknown builtin protocol " + name);
}

inline BuiltProtocol protocol_from_json(const json& j) {
  if (j.contains("builtin")) {
    const int P = j.value("P", 0);
    const int k = j.value("k", 2);
    return builtin_protocol(j.at("builtin").get<std::string>(), P, k);
  }
  auto res = validate_protocol(draft_from_json(j));
  if (!res.ok()) throw Error("invalid protocol: " + res.summary());
  BuiltProtocol b;
  b.spec = *std::move(res.spec);
  b.provenance = "json";
  b.expected = {b.spec.is_symmetric(), ExpectedProperties::Correctness::Unknown};
  return b;
}

// --- states and configurations ---------------------------------------------

// Participant state by identity: agents serialize as their external value,
// the BS as its label string.
inline json state_to_json(const ProtocolSpec& sp, int id, int dense) {
  if (id == 0) return json(sp.bs_label(dense));
  return json(sp.agent_value(dense));
}

inline int state_from_json(const ProtocolSpec& sp, int id, const json& v) {
  if (id == 0) {
    const int b = v.is_string() ? sp.bs_index(DraftState{v.get<std::string>()})
                                : sp.bs_index(DraftState{v.get<int>()});
    if (b < 0) throw Error("unknown BS state in trace");
    return b;
  }
  const int a = sp.agent_index(v.get<int>());
  if (a < 0) throw Error("unknown agent state in trace");
  return a;
}

inline json config_to_json(const Configuration& c, const ProtocolSpec& sp) {
  json j;
  j["bs"] = sp.bs_label(c.bs);
  j["agents"] = agent_values_of(sp, c);
  return j;
}

inline Configuration config_from_json(const json& j, const ProtocolSpec& sp) {
  const auto& b = j.at("bs");
  return make_config(sp, b.is_string() ? DraftState{b.get<std::string>()}
                                       : DraftState{b.get<int>()},
                     j.at("agents").get<std::vector<int>>());
}

// --- traces -----------------------------------------------------------------

inline json step_to_json(const Step& s, long long t, const ProtocolSpec& sp) {
  json j;
  j["t"] = t;
  j["i"] = s.i;
  j["j"] = s.j;
  j["pre"] = json::array({state_to_json(sp, s.i, s.pre_i), state_to_json(sp, s.j, s.pre_j)});
  j["post"] = json::array({state_to_json(sp, s.i, s.post_i), state_to_json(sp, s.j, s.post_j)});
  return j;
}

inline Step step_from_json(const json& j, const ProtocolSpec& sp) {
  Step s;
  s.i = j.at("i").get<int>();
  s.j = j.at("j").get<int>();
  s.pre_i = state_from_json(sp, s.i, j.at("pre").at(0));
  s.pre_j = state_from_json(sp, s.j, j.at("pre").at(1));
  s.post_i = state_from_json(sp, s.i, j.at("post").at(0));
  s.post_j = state_from_json(sp, s.j, j.at("post").at(1));
  return s;
}

/// JSON Lines: header record, one record per step, footer with the stop
/// reason and the canonical (sorted) final configuration.
inline void write_trace_jsonl(std::ostream& os, const ExecutionTrace& tr,
                              const ProtocolSpec& sp) {
  json header;
  header["spec"] = spec_hash_hex(sp);
  header["n"] = tr.n;
  header["seed"] = tr.seed;
  header["scheduler"] = tr.scheduler;
  if (tr.fairness_window > 0) header["B"] = tr.fairness_window;
  header["initial"] = config_to_json(tr.initial, sp);
  os << header.dump() << '\n';
  for (std::size_t t = 0; t < tr.steps.size(); ++t)
    os << step_to_json(tr.steps[t], static_cast<long long>(t), sp).dump() << '\n';
  json footer;
  footer["reason"] = to_string(tr.reason);
  footer["final"] = config_to_json(canonicalize(tr.final), sp);
  os << footer.dump() << '\n';
}

inline ExecutionTrace read_trace_jsonl(std::istream& is, const ProtocolSpec& sp) {
  ExecutionTrace tr;
  std::string line;
  bool have_header = false, have_footer = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (!have_header) {
      if (j.at("spec").get<std::string>() != spec_hash_hex(sp))
        throw Error("trace was produced by a different protocol");
      tr.n = j.at("n").get<int>();
      tr.seed = j.value("seed", 0ull);
      tr.scheduler = j.value("scheduler", "");
      tr.fairness_window = j.value("B", 0ll);
      tr.initial = config_from_json(j.at("initial"), sp);
      have_header = true;
    } else if (j.contains("reason")) {
      const std::string r = j.at("reason").get<std::string>();
      tr.reason = r == "silent" ? StopReason::Silent
                                : (r == "predicate" ? StopReason::Predicate : StopReason::Budget);
      have_footer = true;
    } else {
      tr.steps.push_back(step_from_json(j, sp));
    }
  }
  if (!have_header || !have_footer) throw Error("trace file is truncated");
  Configuration c = tr.initial;
  for (const auto& s : tr.steps) c = step(c, s.i, s.j, sp);
  tr.final = c;
  return tr;
}

// --- verdicts ----------------------------------------------------------------

inline json lasso_to_json(const Lasso& l, const ProtocolSpec& sp) {
  json j;
  j["initial"] = config_to_json(l.start, sp);
  j["stem"] = json::array();
  for (std::size_t t = 0; t < l.stem.size(); ++t)
    j["stem"].push_back(step_to_json(l.stem[t], static_cast<long long>(t), sp));
  j["cycle"] = json::array();
  for (std::size_t t = 0; t < l.cycle.size(); ++t)
    j["cycle"].push_back(step_to_json(l.cycle[t], static_cast<long long>(t), sp));
  return j;
}

inline Lasso lasso_from_json(const json& j, const ProtocolSpec& sp) {
  Lasso l;
  l.start = config_from_json(j.at("initial"), sp);
  for (const auto& s : j.at("stem")) l.stem.push_back(step_from_json(s, sp));
  for (const auto& s : j.at("cycle")) l.cycle.push_back(step_from_json(s, sp));
  return l;
}

inline json verdict_to_json(const Verdict& v, const ProtocolSpec& sp) {
  json j;
  j["verdict"] = to_string(v.kind);
  j["note"] = v.note;
  if (v.witness) j["witness"] = lasso_to_json(*v.witness, sp);
  return j;
}

// --- dot export ---------------------------------------------------------------

/// Configuration graph with stability coloring. Parallel edges between the
/// same nodes are merged; null self-loops are noisy and off by default.
inline void write_dot(std::ostream& os, ReachGraph& g, bool include_null_loops = false) {
  const ProtocolSpec& sp = *g.spec;
  os << "digraph reach {\n  rankdir=LR;\n  node [style=filled];\n";
  for (NodeId u = 0; u < g.node_count(); ++u) {
    const char* fill = g.is_strongly_stable(u) ? "green3"
                       : g.is_stable(u)        ? "palegreen"
                       : g.is_silent(u)        ? "lightsalmon"
                                               : "white";
    Configuration c = g.config_of(u);
    std::string label = sp.bs_label(c.bs) + " [";
    for (int a = 0; a < g.n; ++a)
      label += (a ? "," : "") + std::to_string(sp.agent_value(c.agents[a]));
    label += "]";
    os << "  n" << u << " [label=\"" << label << "\", fillcolor=" << fill << "];\n";
  }
  for (NodeId u = 0; u < g.node_count(); ++u) {
    std::map<NodeId, std::string> merged;
    for (int e = 0; e < g.epn; ++e) {
      const NodeId v = g.target(u, e);
      if (v == u && !include_null_loops) continue;
      if (e % 2) continue;  // one arrow per unordered pair
      auto [i, j] = g.edge_identities(e);
      auto& s = merged[v];
      if (!s.empty()) s += " ";
      s += std::to_string(i) + "-" + std::to_string(j);
    }
    for (auto& [v, lbl] : merged)
      os << "  n" << u << " -> n" << v << " [label=\"" << lbl << "\"];\n";
  }
  os << "}\n";
}

}  // namespace kpart
