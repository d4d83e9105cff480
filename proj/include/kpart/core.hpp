#pragma once
// Population-protocol model with a single base station: state sets,
// deterministic ordered-pair transitions, configurations, and the
// single-interaction step semantics. Everything here is a pure value type.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kpart {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadIdentity : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct PolicyInfeasible : Error { using Error::Error; };
struct EvenP : Error { using Error::Error; };
struct UnknownCandidate : Error { using Error::Error; };
struct NotBipartition : Error { using Error::Error; };
struct StateOutsideQstar : Error { using Error::Error; };

/// Classification of a transition (p,q) -> (p2,q2).
/// Null iff nothing changes; asymmetric iff equal inputs map to distinct
/// outputs; everything else is symmetric.
enum class TransitionClass { Null, Symmetric, Asymmetric };

template <typename T>
TransitionClass classify_transition(const T& p, const T& q, const T& p2, const T& q2) {
  if (p == p2 && q == q2) return TransitionClass::Null;
  if (p == q && p2 != q2) return TransitionClass::Asymmetric;
  return TransitionClass::Symmetric;
}

inline const char* to_string(TransitionClass c) {
  switch (c) {
    case TransitionClass::Null: return "null";
    case TransitionClass::Symmetric: return "symmetric";
    case TransitionClass::Asymmetric: return "asymmetric";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// BS state model: either a finite explicit set sharing the integer state
// space with agents (disjointness validated), or named bounded registers
// whose valuations are enumerated.

struct BsExplicit {
  std::vector<int> states;
};

struct BsRegisters {
  std::vector<std::string> names;
  std::vector<std::array<int, 2>> ranges;  // inclusive [lo, hi] per register
};

using BsModel = std::variant<BsExplicit, BsRegisters>;

/// A configuration: BS state plus an identified vector of agent states.
/// Both sides are dense indices into the owning ProtocolSpec's state tables.
struct Configuration {
  int bs = 0;
  std::vector<std::uint8_t> agents;

  int n() const { return static_cast<int>(agents.size()); }
  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend auto operator<=>(const Configuration&, const Configuration&) = default;
};

// ---------------------------------------------------------------------------
// Unvalidated draft, as parsed from the external format or assembled by a
// builder. States in rules are ints (agent values, or explicit BS values)
// or strings (register valuations like "M=3").

using DraftState = std::variant<int, std::string>;

struct DraftRule {
  std::array<DraftState, 2> pre;
  std::array<DraftState, 2> post;
};

struct ProtocolDraft {
  int P = 0;
  int k = 0;
  std::vector<int> agent_states;
  std::map<int, int> colors;  // agent value -> group in [0, k)
  BsModel bs = BsExplicit{};
  std::optional<DraftState> bs_initial;
  std::vector<DraftRule> rules;
  bool fill_null_rules = true;  // omitted pairs default to null transitions
};

struct ValidationIssue {
  enum class Kind { MissingRule, DuplicateRule, ColorGap, StateClash, Other };
  Kind kind;
  std::string detail;
};

inline const char* to_string(ValidationIssue::Kind k) {
  using K = ValidationIssue::Kind;
  switch (k) {
    case K::MissingRule: return "MissingRule";
    case K::DuplicateRule: return "DuplicateRule";
    case K::ColorGap: return "ColorGap";
    case K::StateClash: return "StateClash";
    case K::Other: return "Other";
  }
  return "?";
}

// ---------------------------------------------------------------------------

/// Validated protocol. Agent states are dense indices 0..na-1 in ascending
/// order of their external integer values; BS states are dense indices
/// 0..nb-1 (explicit values in given order, or register valuations in
/// mixed-radix order, first declared register most significant).
struct ProtocolSpec {
  int P = 0;
  int k = 0;
  std::vector<int> agent_values;          // dense agent index -> external value
  std::vector<int> colors;                // dense agent index -> group
  BsModel bs_model = BsExplicit{};
  std::optional<int> bs_initial;          // dense BS index, if designated

  int na = 0;
  int nb = 0;
  // transition tables, indexed [initiator * width + responder]
  std::vector<std::pair<int, int>> aa;    // agent x agent -> (agent, agent)
  std::vector<std::pair<int, int>> ba;    // bs x agent    -> (bs, agent)
  std::vector<std::pair<int, int>> ab;    // agent x bs    -> (agent, bs)

  const std::pair<int, int>& aa_rule(int p, int q) const { return aa[p * na + q]; }
  const std::pair<int, int>& ba_rule(int b, int q) const { return ba[b * na + q]; }
  const std::pair<int, int>& ab_rule(int p, int b) const { return ab[p * nb + b]; }

  int agent_index(int value) const {
    auto it = std::lower_bound(agent_values.begin(), agent_values.end(), value);
    if (it == agent_values.end() || *it != value) return -1;
    return static_cast<int>(it - agent_values.begin());
  }
  int agent_value(int idx) const { return agent_values.at(idx); }

  bool has_registers() const { return std::holds_alternative<BsRegisters>(bs_model); }
  const BsRegisters& registers() const { return std::get<BsRegisters>(bs_model); }

  int bs_count() const { return nb; }

  /// Register values of a BS state, in declared register order.
  std::vector<int> bs_register_values(int idx) const {
    const auto& r = registers();
    std::vector<int> out(r.names.size());
    for (int i = static_cast<int>(r.names.size()) - 1; i >= 0; --i) {
      const int span = r.ranges[i][1] - r.ranges[i][0] + 1;
      out[i] = r.ranges[i][0] + idx % span;
      idx /= span;
    }
    return out;
  }

  int bs_index_of_registers(const std::vector<int>& vals) const {
    const auto& r = registers();
    int idx = 0;
    for (std::size_t i = 0; i < r.names.size(); ++i) {
      const int span = r.ranges[i][1] - r.ranges[i][0] + 1;
      if (vals[i] < r.ranges[i][0] || vals[i] > r.ranges[i][1]) return -1;
      idx = idx * span + (vals[i] - r.ranges[i][0]);
    }
    return idx;
  }

  /// Value of one named register in a BS state.
  int register_value(int bs_idx, const std::string& name) const {
    const auto& r = registers();
    auto vals = bs_register_values(bs_idx);
    for (std::size_t i = 0; i < r.names.size(); ++i)
      if (r.names[i] == name) return vals[i];
    throw Error("no register named " + name);
  }

  /// External label of a BS state: explicit value as decimal, or "M=3" form.
  std::string bs_label(int idx) const {
    if (const auto* e = std::get_if<BsExplicit>(&bs_model))
      return std::to_string(e->states.at(idx));
    const auto& r = registers();
    auto vals = bs_register_values(idx);
    std::string out;
    for (std::size_t i = 0; i < r.names.size(); ++i) {
      if (i) out += ',';
      out += r.names[i] + "=" + std::to_string(vals[i]);
    }
    return out;
  }

  /// Resolve a BS state from its external label or explicit value. -1 if unknown.
  int bs_index(const DraftState& s) const {
    if (const auto* v = std::get_if<int>(&s)) {
      if (const auto* e = std::get_if<BsExplicit>(&bs_model)) {
        for (std::size_t i = 0; i < e->states.size(); ++i)
          if (e->states[i] == *v) return static_cast<int>(i);
      }
      return -1;
    }
    const std::string& label = std::get<std::string>(s);
    if (!has_registers()) {
      // allow "42" for explicit sets
      try {
        return bs_index(DraftState{std::stoi(label)});
      } catch (...) {
        return -1;
      }
    }
    const auto& r = registers();
    std::vector<int> vals(r.names.size());
    std::vector<bool> seen(r.names.size(), false);
    std::stringstream ss(label);
    std::string part;
    while (std::getline(ss, part, ',')) {
      auto eq = part.find('=');
      if (eq == std::string::npos) return -1;
      const std::string name = part.substr(0, eq);
      bool found = false;
      for (std::size_t i = 0; i < r.names.size(); ++i) {
        if (r.names[i] == name) {
          try {
            vals[i] = std::stoi(part.substr(eq + 1));
          } catch (...) {
            return -1;
          }
          seen[i] = found = true;
        }
      }
      if (!found) return -1;
    }
    for (bool b : seen)
      if (!b) return -1;
    return bs_index_of_registers(vals);
  }

  /// True iff no agent-agent rule is asymmetric. BS-agent rules are exempt:
  /// the BS is distinguishable, so no symmetry constraint applies to them.
  bool is_symmetric() const {
    for (int p = 0; p < na; ++p)
      for (int q = 0; q < na; ++q) {
        auto [p2, q2] = aa_rule(p, q);
        if (classify_transition(p, q, p2, q2) == TransitionClass::Asymmetric)
          return false;
      }
    return true;
  }

  /// Structural FNV-1a hash; stable across runs for identical protocols.
  std::uint64_t structural_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    mix(static_cast<std::uint64_t>(P));
    mix(static_cast<std::uint64_t>(k));
    for (int v : agent_values) mix(static_cast<std::uint64_t>(v));
    for (int c : colors) mix(static_cast<std::uint64_t>(c));
    mix(nb);
    mix(bs_initial ? static_cast<std::uint64_t>(*bs_initial) + 1 : 0);
    if (const auto* r = std::get_if<BsRegisters>(&bs_model)) {
      for (std::size_t i = 0; i < r->names.size(); ++i) {
        for (char ch : r->names[i]) mix(static_cast<unsigned char>(ch));
        mix(static_cast<std::uint64_t>(r->ranges[i][0]));
        mix(static_cast<std::uint64_t>(r->ranges[i][1]));
      }
    } else {
      for (int v : std::get<BsExplicit>(bs_model).states) mix(static_cast<std::uint64_t>(v));
    }
    for (auto& [a, b] : aa) { mix(a); mix(b); }
    for (auto& [a, b] : ba) { mix(a); mix(b); }
    for (auto& [a, b] : ab) { mix(a); mix(b); }
    return h;
  }
};

struct ValidationResult {
  std::optional<ProtocolSpec> spec;
  std::vector<ValidationIssue> issues;
  bool ok() const { return spec.has_value(); }
  std::string summary() const {
    std::string s;
    for (const auto& i : issues) {
      if (!s.empty()) s += "; ";
      s += std::string(to_string(i.kind)) + ": " + i.detail;
    }
    return s;
  }
};

namespace detail {

inline std::string draft_state_text(const DraftState& s) {
  if (const auto* v = std::get_if<int>(&s)) return std::to_string(*v);
  return std::get<std::string>(s);
}

}  // namespace detail

/// Validate a raw draft into a ProtocolSpec, collecting every issue found.
inline ValidationResult validate_protocol(const ProtocolDraft& d) {
  ValidationResult res;
  auto& issues = res.issues;
  auto other = [&issues](std::string msg) {
    issues.push_back({ValidationIssue::Kind::Other, std::move(msg)});
  };

  if (d.P < 1) other("P must be >= 1");
  if (d.k < 1) other("k must be >= 1");
  if (d.agent_states.empty()) other("agent state set is empty");
  if (d.agent_states.size() > 255) other("more than 255 agent states");

  ProtocolSpec sp;
  sp.P = d.P;
  sp.k = d.k;
  sp.bs_model = d.bs;
  sp.agent_values = d.agent_states;
  std::sort(sp.agent_values.begin(), sp.agent_values.end());
  if (std::adjacent_find(sp.agent_values.begin(), sp.agent_values.end()) != sp.agent_values.end())
    other("duplicate agent state value");
  sp.na = static_cast<int>(sp.agent_values.size());

  if (const auto* e = std::get_if<BsExplicit>(&d.bs)) {
    if (e->states.empty()) other("explicit BS state set is empty");
    auto sorted = e->states;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      other("duplicate BS state value");
    for (int v : e->states)
      if (std::binary_search(sp.agent_values.begin(), sp.agent_values.end(), v))
        issues.push_back({ValidationIssue::Kind::StateClash,
                          "state " + std::to_string(v) + " is both an agent and a BS state"});
    sp.nb = static_cast<int>(e->states.size());
  } else {
    const auto& r = std::get<BsRegisters>(d.bs);
    if (r.names.empty()) other("register BS model declares no registers");
    long long count = 1;
    for (std::size_t i = 0; i < r.ranges.size(); ++i) {
      if (r.ranges[i][0] > r.ranges[i][1]) other("register range is empty");
      count *= r.ranges[i][1] - r.ranges[i][0] + 1;
      if (count > 1'000'000) {
        other("BS register space too large to enumerate");
        count = 1;
        break;
      }
    }
    sp.nb = static_cast<int>(count);
  }

  sp.colors.assign(sp.na, -1);
  for (int i = 0; i < sp.na; ++i) {
    auto it = d.colors.find(sp.agent_values[i]);
    if (it == d.colors.end()) {
      issues.push_back({ValidationIssue::Kind::ColorGap,
                        "state " + std::to_string(sp.agent_values[i]) + " has no color"});
    } else if (it->second < 0 || it->second >= d.k) {
      other("state " + std::to_string(sp.agent_values[i]) + " has color outside [0,k)");
    } else {
      sp.colors[i] = it->second;
    }
  }
  for (const auto& [v, c] : d.colors)
    if (sp.agent_index(v) < 0) other("color given for unknown state " + std::to_string(v));

  if (d.bs_initial) {
    if (sp.bs_index(*d.bs_initial) < 0)
      other("bs_initial does not name a BS state: " + detail::draft_state_text(*d.bs_initial));
    else
      sp.bs_initial = sp.bs_index(*d.bs_initial);
  }

  if (!issues.empty()) return res;  // state sets unusable; stop before rules

  // Resolve one draft participant. kind: 0 = agent, 1 = bs, -1 = unknown.
  auto resolve = [&sp](const DraftState& s, int& kind) -> int {
    if (const auto* v = std::get_if<int>(&s)) {
      int a = sp.agent_index(*v);
      if (a >= 0) {
        kind = 0;
        return a;
      }
    }
    int b = sp.bs_index(s);
    if (b >= 0) {
      kind = 1;
      return b;
    }
    kind = -1;
    return -1;
  };

  const auto null_aa = std::pair<int, int>{-1, -1};
  sp.aa.assign(static_cast<std::size_t>(sp.na) * sp.na, null_aa);
  sp.ba.assign(static_cast<std::size_t>(sp.nb) * sp.na, null_aa);
  sp.ab.assign(static_cast<std::size_t>(sp.na) * sp.nb, null_aa);
  std::vector<char> seen_aa(sp.aa.size(), 0), seen_ba(sp.ba.size(), 0), seen_ab(sp.ab.size(), 0);

  for (const auto& rule : d.rules) {
    int k0, k1, k2, k3;
    const int a = resolve(rule.pre[0], k0), b = resolve(rule.pre[1], k1);
    const int a2 = resolve(rule.post[0], k2), b2 = resolve(rule.post[1], k3);
    auto text = [&rule]() {
      return "(" + detail::draft_state_text(rule.pre[0]) + "," +
             detail::draft_state_text(rule.pre[1]) + ")";
    };
    if (k0 < 0 || k1 < 0 || k2 < 0 || k3 < 0) {
      other("rule " + text() + " references an unknown state");
      continue;
    }
    if (k0 == 1 && k1 == 1) {
      other("rule " + text() + " pairs the BS with itself");
      continue;
    }
    if (k0 != k2 || k1 != k3) {
      other("rule " + text() + " moves a state across the agent/BS boundary");
      continue;
    }
    auto put = [&](std::vector<std::pair<int, int>>& tab, std::vector<char>& seen,
                   std::size_t idx, int x, int y) {
      if (seen[idx]) {
        issues.push_back({ValidationIssue::Kind::DuplicateRule, "second rule for pair " + text()});
        return;
      }
      seen[idx] = 1;
      tab[idx] = {x, y};
    };
    if (k0 == 0 && k1 == 0)
      put(sp.aa, seen_aa, static_cast<std::size_t>(a) * sp.na + b, a2, b2);
    else if (k0 == 1)
      put(sp.ba, seen_ba, static_cast<std::size_t>(a) * sp.na + b, a2, b2);
    else
      put(sp.ab, seen_ab, static_cast<std::size_t>(a) * sp.nb + b, a2, b2);
  }

  // Unfilled pairs: default to null, or report missing totality.
  int missing = 0;
  std::string first_missing;
  auto finish = [&](std::vector<std::pair<int, int>>& tab, std::vector<char>& seen, int w,
                    auto name) {
    for (std::size_t i = 0; i < tab.size(); ++i) {
      if (seen[i]) continue;
      const int x = static_cast<int>(i) / w, y = static_cast<int>(i) % w;
      if (d.fill_null_rules) {
        tab[i] = {x, y};
      } else {
        if (missing++ == 0) first_missing = name(x, y);
      }
    }
  };
  finish(sp.aa, seen_aa, sp.na, [&sp](int x, int y) {
    return "(" + std::to_string(sp.agent_value(x)) + "," + std::to_string(sp.agent_value(y)) + ")";
  });
  finish(sp.ba, seen_ba, sp.na, [&sp](int x, int y) {
    return "(" + sp.bs_label(x) + "," + std::to_string(sp.agent_value(y)) + ")";
  });
  finish(sp.ab, seen_ab, sp.nb, [&sp](int x, int y) {
    return "(" + std::to_string(sp.agent_value(x)) + "," + sp.bs_label(y) + ")";
  });
  if (missing > 0)
    issues.push_back({ValidationIssue::Kind::MissingRule,
                      std::to_string(missing) + " ordered pair(s) without a rule, first " +
                          first_missing});

  if (!issues.empty()) return res;
  res.spec = std::move(sp);
  return res;
}

/// Validate or throw; for callers that treat a bad draft as fatal.
inline ProtocolSpec validate_protocol_or_throw(const ProtocolDraft& d) {
  auto r = validate_protocol(d);
  if (!r.ok()) throw Error("invalid protocol: " + r.summary());
  return *std::move(r.spec);
}

// ---------------------------------------------------------------------------
// Single-interaction semantics. Identity 0 is the base station; identities
// 1..n are agents.

inline Configuration step(const Configuration& c, int i, int j, const ProtocolSpec& sp) {
  const int n = c.n();
  if (i == j || i < 0 || j < 0 || i > n || j > n)
    throw BadIdentity("step(" + std::to_string(i) + "," + std::to_string(j) + ") with n=" +
                      std::to_string(n));
  Configuration out = c;
  if (i == 0) {
    auto [b2, q2] = sp.ba_rule(c.bs, c.agents[j - 1]);
    out.bs = b2;
    out.agents[j - 1] = static_cast<std::uint8_t>(q2);
  } else if (j == 0) {
    auto [p2, b2] = sp.ab_rule(c.agents[i - 1], c.bs);
    out.agents[i - 1] = static_cast<std::uint8_t>(p2);
    out.bs = b2;
  } else {
    auto [p2, q2] = sp.aa_rule(c.agents[i - 1], c.agents[j - 1]);
    out.agents[i - 1] = static_cast<std::uint8_t>(p2);
    out.agents[j - 1] = static_cast<std::uint8_t>(q2);
  }
  return out;
}

/// Per-group occupancy; counts sum to n.
inline std::vector<int> group_counts(const Configuration& c, const ProtocolSpec& sp) {
  std::vector<int> counts(sp.k, 0);
  for (auto s : c.agents) ++counts[sp.colors[s]];
  return counts;
}

inline bool balanced(const Configuration& c, const ProtocolSpec& sp) {
  auto counts = group_counts(c, sp);
  auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  return *hi - *lo <= 1;
}

/// Quotient representative under agent anonymity: agents sorted, BS kept.
inline Configuration canonicalize(Configuration c) {
  std::sort(c.agents.begin(), c.agents.end());
  return c;
}

inline void validate_configuration(const Configuration& c, const ProtocolSpec& sp) {
  if (c.n() < 1 || c.n() > sp.P)
    throw Error("population size " + std::to_string(c.n()) + " outside [1," +
                std::to_string(sp.P) + "]");
  if (c.bs < 0 || c.bs >= sp.nb) throw Error("BS state index out of range");
  for (auto s : c.agents)
    if (s >= sp.na) throw Error("agent state index out of range");
}

// Helpers for tests and IO: build/read configurations via external values.

inline Configuration make_config(const ProtocolSpec& sp, const DraftState& bs,
                                 const std::vector<int>& agent_vals) {
  Configuration c;
  c.bs = sp.bs_index(bs);
  if (c.bs < 0) throw Error("unknown BS state " + detail::draft_state_text(bs));
  for (int v : agent_vals) {
    int idx = sp.agent_index(v);
    if (idx < 0) throw Error("unknown agent state " + std::to_string(v));
    c.agents.push_back(static_cast<std::uint8_t>(idx));
  }
  validate_configuration(c, sp);
  return c;
}

inline std::vector<int> agent_values_of(const ProtocolSpec& sp, const Configuration& c) {
  std::vector<int> out;
  out.reserve(c.agents.size());
  for (auto s : c.agents) out.push_back(sp.agent_value(s));
  return out;
}

inline std::vector<int> sorted_agent_values(const ProtocolSpec& sp, const Configuration& c) {
  auto v = agent_values_of(sp, c);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace kpart
