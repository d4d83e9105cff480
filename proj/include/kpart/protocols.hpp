#pragma once
// Concrete protocol constructions: the P-state asymmetric uniform
// k-partition protocol driven by an initialized base station, its odd-P
// (P-1)-state bipartition variant, and gated symmetric (P+1)-state
// candidates whose correctness is decided by the model-check gate, never
// assumed.

#include <string>
#include <string_view>
#include <vector>

#include "kpart/core.hpp"
#include "kpart/sim.hpp"

namespace kpart {

struct ExpectedProperties {
  bool symmetric = false;
  enum class Correctness { Established, Unknown } correctness = Correctness::Unknown;
};

struct BuiltProtocol {
  ProtocolSpec spec;
  std::string provenance;
  ExpectedProperties expected;
};

namespace detail {

inline DraftState reg_m(const std::string& name, int v) {
  return DraftState{name + "=" + std::to_string(v)};
}

}  // namespace detail

/// Asymmetric uniform k-partition on agent states {0..P-1}, colored s mod k.
/// The BS holds a counter M (initially 0) and assigns M to any agent whose
/// state is at least M; homonyms below P-1 bump the initiator by one.
inline BuiltProtocol build_kpartition_asym(int P, int k) {
  if (P < 1 || k < 1) throw Error("build_kpartition_asym needs P >= 1 and k >= 1");
  ProtocolDraft d;
  d.P = P;
  d.k = k;
  for (int s = 0; s < P; ++s) {
    d.agent_states.push_back(s);
    d.colors[s] = s % k;
  }
  d.bs = BsRegisters{{"M"}, {{0, P}}};
  d.bs_initial = detail::reg_m("M", 0);
  for (int m = 0; m <= P; ++m)
    for (int s = 0; s < P; ++s) {
      if (m > s) continue;  // null
      d.rules.push_back({{detail::reg_m("M", m), s}, {detail::reg_m("M", m + 1), m}});
      d.rules.push_back({{s, detail::reg_m("M", m)}, {m, detail::reg_m("M", m + 1)}});
    }
  for (int x = 0; x + 1 < P; ++x) d.rules.push_back({{x, x}, {x + 1, x}});

  BuiltProtocol b;
  b.spec = validate_protocol_or_throw(d);
  b.provenance = "kpartition_asym(P=" + std::to_string(P) + ",k=" + std::to_string(k) + ")";
  b.expected = {b.spec.is_symmetric(), ExpectedProperties::Correctness::Established};
  return b;
}

/// Odd-P bipartition variant: same rule shapes on agent states {1..P-1},
/// M initially 1, k fixed to 2. At n = P the population settles with two
/// agents sharing state P-1.
inline BuiltProtocol build_bipartition_oddP(int P) {
  if (P < 3 || P % 2 == 0) throw EvenP("build_bipartition_oddP needs odd P >= 3");
  ProtocolDraft d;
  d.P = P;
  d.k = 2;
  for (int s = 1; s < P; ++s) {
    d.agent_states.push_back(s);
    d.colors[s] = s % 2;
  }
  d.bs = BsRegisters{{"M"}, {{1, P}}};
  d.bs_initial = detail::reg_m("M", 1);
  for (int m = 1; m <= P; ++m)
    for (int s = 1; s < P; ++s) {
      if (m > s) continue;
      d.rules.push_back({{detail::reg_m("M", m), s}, {detail::reg_m("M", m + 1), m}});
      d.rules.push_back({{s, detail::reg_m("M", m)}, {m, detail::reg_m("M", m + 1)}});
    }
  for (int x = 1; x + 1 < P; ++x) d.rules.push_back({{x, x}, {x + 1, x}});

  BuiltProtocol b;
  b.spec = validate_protocol_or_throw(d);
  b.provenance = "bipartition_oddP(P=" + std::to_string(P) + ")";
  b.expected = {b.spec.is_symmetric(), ExpectedProperties::Correctness::Established};
  return b;
}

inline std::vector<std::string> sym_candidate_names() { return {"erase_monotone", "sym_climb"}; }

/// Symmetric candidates on P+1 agent states {0..P}. The builder promises
/// symmetry only; convergence is left to the model-check gate.
///   erase_monotone: homonyms (x,x)->(0,0) for x>0; the BS assigns a
///                   monotone counter to 0-agents.
///   sym_climb:      homonyms (x,x)->(x+1,x+1) capped at P; BS rule as in
///                   the asymmetric protocol.
inline BuiltProtocol build_kpartition_sym_candidate(std::string_view name, int P, int k) {
  if (P < 1 || k < 1) throw Error("candidate builders need P >= 1 and k >= 1");
  ProtocolDraft d;
  d.P = P;
  d.k = k;
  for (int s = 0; s <= P; ++s) {
    d.agent_states.push_back(s);
    d.colors[s] = s % k;
  }
  if (name == "erase_monotone") {
    d.bs = BsRegisters{{"M"}, {{1, P + 1}}};
    d.bs_initial = detail::reg_m("M", 1);
    for (int m = 1; m <= P; ++m) {
      d.rules.push_back({{detail::reg_m("M", m), 0}, {detail::reg_m("M", m + 1), m}});
      d.rules.push_back({{0, detail::reg_m("M", m)}, {m, detail::reg_m("M", m + 1)}});
    }
    for (int x = 1; x <= P; ++x) d.rules.push_back({{x, x}, {0, 0}});
  } else if (name == "sym_climb") {
    d.bs = BsRegisters{{"M"}, {{0, P + 1}}};
    d.bs_initial = detail::reg_m("M", 0);
    for (int m = 0; m <= P; ++m)
      for (int s = 0; s <= P; ++s) {
        if (m > s) continue;
        d.rules.push_back({{detail::reg_m("M", m), s}, {detail::reg_m("M", m + 1), m}});
        d.rules.push_back({{s, detail::reg_m("M", m)}, {m, detail::reg_m("M", m + 1)}});
      }
    for (int x = 0; x < P; ++x) d.rules.push_back({{x, x}, {x + 1, x + 1}});
  } else {
    throw UnknownCandidate("no symmetric candidate named " + std::string(name));
  }

  BuiltProtocol b;
  b.spec = validate_protocol_or_throw(d);
  b.provenance = "kpartition_sym_candidate:" + std::string(name) + "(P=" + std::to_string(P) +
                 ",k=" + std::to_string(k) + ")";
  b.expected = {b.spec.is_symmetric(), ExpectedProperties::Correctness::Unknown};
  return b;
}

// ---------------------------------------------------------------------------
// Trace invariants of the asymmetric protocol: every state below M stays
// occupied, M never exceeds n or decreases, agent states never decrease
// except through a BS assignment, and a silent end means M = n with the
// agents holding exactly {0..n-1}.

struct Alg1Report {
  struct Violation {
    long long step;  // configuration index in the trace (0 = initial)
    std::string what;
  };
  bool ok = true;
  std::vector<Violation> violations;
  int final_m = 0;
  bool silence_checked = false;
};

inline Alg1Report check_algorithm1_invariants(const ExecutionTrace& tr, const ProtocolSpec& sp) {
  if (!sp.has_registers() || sp.registers().names != std::vector<std::string>{"M"} ||
      sp.agent_values.front() != 0 || sp.agent_values.back() != sp.P - 1 ||
      sp.na != sp.P)
    throw Error("trace is not from the asymmetric k-partition builder");

  Alg1Report rep;
  auto violate = [&rep](long long t, std::string what) {
    rep.ok = false;
    rep.violations.push_back({t, std::move(what)});
  };

  Configuration c = tr.initial;
  const int n = tr.n;
  auto m_of = [&sp](const Configuration& cfg) { return sp.register_value(cfg.bs, "M"); };

  auto check_config = [&](const Configuration& cfg, long long t) {
    const int m = m_of(cfg);
    if (m > n) violate(t, "M=" + std::to_string(m) + " exceeds n=" + std::to_string(n));
    std::vector<int> cnt(sp.na, 0);
    for (auto s : cfg.agents) ++cnt[s];
    for (int s = 0; s < m; ++s)
      if (cnt[s] == 0) violate(t, "state " + std::to_string(s) + " unoccupied while M=" +
                                      std::to_string(m));
  };

  check_config(c, 0);
  for (long long t = 0; t < static_cast<long long>(tr.steps.size()); ++t) {
    const auto& s = tr.steps[static_cast<std::size_t>(t)];
    const int m_before = m_of(c);
    Configuration next = step(c, s.i, s.j, sp);
    if (m_of(next) < m_before) violate(t + 1, "M decreased");
    const bool bs_involved = (s.i == 0 || s.j == 0);
    for (int a = 0; a < n; ++a)
      if (next.agents[a] < c.agents[a] && !(bs_involved && (s.i == a + 1 || s.j == a + 1)))
        violate(t + 1, "agent " + std::to_string(a + 1) + " decreased without BS");
    c = next;
    check_config(c, t + 1);
  }

  rep.final_m = m_of(c);
  if (tr.reason == StopReason::Silent) {
    rep.silence_checked = true;
    if (rep.final_m != n) violate(static_cast<long long>(tr.steps.size()),
                                  "silent with M=" + std::to_string(rep.final_m) + " != n");
    auto sorted = sorted_agent_values(sp, c);
    for (int s = 0; s < n; ++s)
      if (sorted[static_cast<std::size_t>(s)] != s) {
        violate(static_cast<long long>(tr.steps.size()), "silent states are not {0..n-1}");
        break;
      }
  }
  return rep;
}

}  // namespace kpart
