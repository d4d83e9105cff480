#pragma once
// Small hand-rolled protocols shared across the test suites. Toys have an
// inert explicit-state BS so that every spec is total over the same pair
// structure as the real protocols.

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "kpart/core.hpp"

namespace kpart::testing {

struct Toy {
  int P = 4;
  int k = 2;
  std::vector<int> states;                   // external agent values
  std::map<int, int> colors;                 // defaults to value % k
  std::vector<std::array<int, 4>> aa_rules;  // {p, q, p2, q2}
};

inline ProtocolSpec make_toy(const Toy& t) {
  ProtocolDraft d;
  d.P = t.P;
  d.k = t.k;
  d.agent_states = t.states;
  int max_state = 0;
  for (int s : t.states) {
    max_state = std::max(max_state, s);
    auto it = t.colors.find(s);
    d.colors[s] = it != t.colors.end() ? it->second : s % t.k;
  }
  d.bs = BsExplicit{{max_state + 1}};
  d.bs_initial = DraftState{max_state + 1};
  for (const auto& r : t.aa_rules) d.rules.push_back({{r[0], r[1]}, {r[2], r[3]}});
  return validate_protocol_or_throw(d);
}

/// Agent states {0..count-1}, every rule null, colors value % k.
inline ProtocolSpec all_null_protocol(int count, int k = 2, int P = 4) {
  Toy t;
  t.P = P;
  t.k = k;
  for (int s = 0; s < count; ++s) t.states.push_back(s);
  return make_toy(t);
}

}  // namespace kpart::testing
