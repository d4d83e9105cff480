#pragma once
// Impossibility-proof objects computed as executable analyses of a protocol:
// homonym reachability relations, blue-state classification with distances
// to red, the robust core Q_{p*} with its distance map and potential
// multisets, loop states, and sink-state / sink-pair detection.

#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "kpart/core.hpp"
#include "kpart/mc.hpp"
#include "kpart/sim.hpp"

namespace kpart {

inline constexpr long long kInfDist = std::numeric_limits<long long>::max();

enum class HomonymKind { Squiggle, StarSquiggle, SymSquiggle };

/// The paper's sym relation sentence is truncated; the default reading uses
/// only rules of shape (x,x)->(y,y). AnyOutput is the looser alternative
/// where either output continues the sequence.
enum class SymInterpretation { EqualOutputs, AnyOutput };

struct HomonymRelation {
  HomonymKind kind = HomonymKind::Squiggle;
  int na = 0;
  std::vector<std::uint8_t> adj;  // adj[p*na+q] != 0 iff p relates to q

  bool at(int p, int q) const { return adj[static_cast<std::size_t>(p) * na + q] != 0; }
};

namespace detail {

// Homonym successor sets: the outputs of the unique rule (x,x) -> (y,z),
// narrowed to equal-output rules for the sym relation.
inline std::vector<std::vector<int>> homonym_successors(const ProtocolSpec& sp, bool sym_only,
                                                        SymInterpretation interp) {
  std::vector<std::vector<int>> succ(sp.na);
  for (int x = 0; x < sp.na; ++x) {
    auto [y, z] = sp.aa_rule(x, x);
    if (sym_only && interp == SymInterpretation::EqualOutputs) {
      if (y == z) succ[x].push_back(y);
      continue;
    }
    succ[x].push_back(y);
    if (z != y) succ[x].push_back(z);
  }
  return succ;
}

inline std::vector<std::uint8_t> reflexive_transitive_closure(
    const std::vector<std::vector<int>>& succ) {
  const int na = static_cast<int>(succ.size());
  std::vector<std::uint8_t> adj(static_cast<std::size_t>(na) * na, 0);
  std::vector<int> stack;
  for (int s = 0; s < na; ++s) {
    stack.assign(1, s);
    adj[static_cast<std::size_t>(s) * na + s] = 1;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (int y : succ[x])
        if (!adj[static_cast<std::size_t>(s) * na + y]) {
          adj[static_cast<std::size_t>(s) * na + y] = 1;
          stack.push_back(y);
        }
    }
  }
  return adj;
}

}  // namespace detail

/// Squiggle: least reflexive-transitive relation containing every homonym
/// output step. Star: q *~> q' iff every x with q ~> x satisfies x ~> q'.
/// Sym: as squiggle but through (x,x)->(y,y) rules only.
inline HomonymRelation homonym_reach(const ProtocolSpec& sp, HomonymKind kind,
                                     SymInterpretation interp = SymInterpretation::EqualOutputs) {
  HomonymRelation rel;
  rel.kind = kind;
  rel.na = sp.na;
  if (kind == HomonymKind::SymSquiggle) {
    rel.adj = detail::reflexive_transitive_closure(detail::homonym_successors(sp, true, interp));
    return rel;
  }
  auto squiggle =
      detail::reflexive_transitive_closure(detail::homonym_successors(sp, false, interp));
  if (kind == HomonymKind::Squiggle) {
    rel.adj = std::move(squiggle);
    return rel;
  }
  rel.adj.assign(static_cast<std::size_t>(sp.na) * sp.na, 0);
  for (int q = 0; q < sp.na; ++q)
    for (int q2 = 0; q2 < sp.na; ++q2) {
      bool all = true;
      for (int x = 0; x < sp.na && all; ++x)
        if (squiggle[static_cast<std::size_t>(q) * sp.na + x] &&
            !squiggle[static_cast<std::size_t>(x) * sp.na + q2])
          all = false;
      rel.adj[static_cast<std::size_t>(q) * sp.na + q2] = all ? 1 : 0;
    }
  return rel;
}

// ---------------------------------------------------------------------------

struct BlueClassification {
  std::vector<int> blue, red;  // dense agent state indices; blue = group 1
  std::vector<int> bc, nbc;    // blue split by homonym reachability to red
  std::vector<long long> dtr;  // per dense state; kInfDist where undefined
};

/// k=2 classification. A blue state is in bc iff homonym interactions can
/// carry it to some red state; dtr is the interaction count to get there,
/// i.e. the least fixpoint of dtr(s) = 1 + min over the outputs of (s,s).
inline BlueClassification classify_blue_states(const ProtocolSpec& sp) {
  if (sp.k != 2) throw NotBipartition("blue/red classification needs k=2");
  BlueClassification out;
  for (int s = 0; s < sp.na; ++s) (sp.colors[s] == 1 ? out.blue : out.red).push_back(s);

  out.dtr.assign(sp.na, kInfDist);
  for (int s : out.red) out.dtr[s] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (int s : out.blue) {
      auto [o1, o2] = sp.aa_rule(s, s);
      const long long best = std::min(out.dtr[o1], out.dtr[o2]);
      if (best != kInfDist && out.dtr[s] > best + 1) {
        out.dtr[s] = best + 1;
        changed = true;
      }
    }
  }

  auto sq = homonym_reach(sp, HomonymKind::Squiggle);
  for (int s : out.blue) {
    bool reaches_red = false;
    for (int r : out.red)
      if (sq.at(s, r)) reaches_red = true;
    (reaches_red ? out.bc : out.nbc).push_back(s);
    if (reaches_red != (out.dtr[s] != kInfDist))
      throw Error("internal: dtr fixpoint disagrees with squiggle reachability");
  }
  return out;
}

struct QStarResult {
  int p_star = -1;             // dense index, in nbc, with p* *~> p*
  std::vector<int> qset;       // Q_{p*} = {q | p* ~> q}, ascending
  std::vector<long long> dtq;  // dtq[s*na + target]; finite inside qset

  long long dtq_at(int s, int target, int na) const {
    return dtq[static_cast<std::size_t>(s) * na + target];
  }
};

/// Locate p* in Q_nbc with p* *~> p* and emit Q_{p*} plus its distance map.
/// Arbitrary input protocols may admit no such state; that returns nullopt.
inline std::optional<QStarResult> find_qstar(const ProtocolSpec& sp) {
  auto cls = classify_blue_states(sp);
  auto sq = homonym_reach(sp, HomonymKind::Squiggle);
  auto star = homonym_reach(sp, HomonymKind::StarSquiggle);

  QStarResult res;
  for (int p : cls.nbc)
    if (star.at(p, p)) {
      res.p_star = p;
      break;
    }
  if (res.p_star < 0) return std::nullopt;

  for (int q = 0; q < sp.na; ++q) {
    if (sq.at(res.p_star, q) != star.at(res.p_star, q))
      throw Error("internal: {q | p* ~> q} differs from {q | p* *~> q}");
    if (sq.at(res.p_star, q)) res.qset.push_back(q);
  }
  for (int p : res.qset) {
    auto [o1, o2] = sp.aa_rule(p, p);
    if (!std::binary_search(res.qset.begin(), res.qset.end(), o1) ||
        !std::binary_search(res.qset.begin(), res.qset.end(), o2))
      throw Error("internal: Q_{p*} not closed under homonym rules");
  }

  res.dtq.assign(static_cast<std::size_t>(sp.na) * sp.na, kInfDist);
  for (int target : res.qset) {
    res.dtq[static_cast<std::size_t>(target) * sp.na + target] = 0;
    for (bool changed = true; changed;) {
      changed = false;
      for (int s : res.qset) {
        if (s == target) continue;
        auto [o1, o2] = sp.aa_rule(s, s);
        const long long best =
            std::min(res.dtq[static_cast<std::size_t>(o1) * sp.na + target],
                     res.dtq[static_cast<std::size_t>(o2) * sp.na + target]);
        auto& cur = res.dtq[static_cast<std::size_t>(s) * sp.na + target];
        if (best != kInfDist && cur > best + 1) {
          cur = best + 1;
          changed = true;
        }
      }
    }
    for (int s : res.qset)
      if (res.dtq[static_cast<std::size_t>(s) * sp.na + target] == kInfDist)
        throw Error("internal: DtQ infinite inside Q_{p*}");
  }
  return res;
}

// ---------------------------------------------------------------------------

/// Potential of a configuration against a target state: the multiset of
/// DtQ distances of all agents. Ordered so that more mass at the smallest
/// differing distance compares smaller; all-zero is the minimum.
struct Phi {
  std::vector<long long> dists;  // ascending
};

inline Phi phi(const Configuration& c, int target_dense, const QStarResult& qs,
               const ProtocolSpec& sp) {
  if (!std::binary_search(qs.qset.begin(), qs.qset.end(), target_dense))
    throw StateOutsideQstar("target state outside Q_{p*}");
  Phi out;
  for (auto s : c.agents) {
    if (!std::binary_search(qs.qset.begin(), qs.qset.end(), static_cast<int>(s)))
      throw StateOutsideQstar("agent state outside Q_{p*}");
    out.dists.push_back(qs.dtq_at(s, target_dense, sp.na));
  }
  std::sort(out.dists.begin(), out.dists.end());
  return out;
}

/// -1, 0, +1 as a orders below, equal to, or above b.
inline int compare_phi(const Phi& a, const Phi& b) {
  std::size_t ia = 0, ib = 0;
  while (ia < a.dists.size() || ib < b.dists.size()) {
    long long v;
    if (ia == a.dists.size())
      v = b.dists[ib];
    else if (ib == b.dists.size())
      v = a.dists[ia];
    else
      v = std::min(a.dists[ia], b.dists[ib]);
    std::size_t ca = 0, cb = 0;
    while (ia < a.dists.size() && a.dists[ia] == v) ++ia, ++ca;
    while (ib < b.dists.size() && b.dists[ib] == v) ++ib, ++cb;
    if (ca != cb) return ca > cb ? -1 : 1;
  }
  return 0;
}

inline bool operator<(const Phi& a, const Phi& b) { return compare_phi(a, b) < 0; }
inline bool operator>(const Phi& a, const Phi& b) { return compare_phi(a, b) > 0; }

// ---------------------------------------------------------------------------

/// States q with q sym~> q through a nonempty rule sequence.
inline std::vector<int> loop_states(const ProtocolSpec& sp,
                                    SymInterpretation interp = SymInterpretation::EqualOutputs) {
  auto succ = detail::homonym_successors(sp, true, interp);
  auto closure = detail::reflexive_transitive_closure(succ);
  std::vector<int> out;
  for (int q = 0; q < sp.na; ++q)
    for (int y : succ[q])
      if (closure[static_cast<std::size_t>(y) * sp.na + q]) {
        out.push_back(q);
        break;
      }
  return out;
}

struct SinkEvidence {
  std::vector<int> loop_set;                    // dense loop states
  bool cond1 = false;                           // fixed-point rule shape
  bool cond2 = false;                           // universal sym-reachability
  std::vector<std::pair<int, bool>> cond3;      // (n, recurrence observed)
  std::vector<int> skipped_ns;                  // outside the valid range
};

struct SinkVerdict {
  enum class Kind { SinkState, SinkPair, None, MultipleLoopStates };
  Kind kind = Kind::None;
  int m1 = -1, m2 = -1;  // dense indices; SinkState uses m1 only
  SinkEvidence evidence;
};

inline const char* to_string(SinkVerdict::Kind k) {
  using K = SinkVerdict::Kind;
  switch (k) {
    case K::SinkState: return "SinkState";
    case K::SinkPair: return "SinkPair";
    case K::None: return "None";
    case K::MultipleLoopStates: return "MultipleLoopStates";
  }
  return "?";
}

namespace detail {

// Recurrence of state s under weak fairness, at one population size. With a
// designated BS initial this is a single graph; otherwise every BS initial
// state is tried (an arbitrary-initial BS admits any of them).
inline bool recurs_anywhere(const ProtocolSpec& sp, int n, int s_dense,
                            std::size_t node_budget) {
  std::vector<int> inits;
  if (sp.bs_initial)
    inits.push_back(*sp.bs_initial);
  else
    for (int b = 0; b < sp.nb; ++b) inits.push_back(b);
  for (int b : inits) {
    ReachGraph g = build_reach_graph(sp, n, InitialSet::all_with_bs(b), node_budget);
    if (state_recurrence(g, s_dense, Fairness::Weak)) return true;
  }
  return false;
}

}  // namespace detail

/// Sink-state / sink-pair detection. Condition 3 (non-recurrence below the
/// population bound) is verified only at the supplied n values; out-of-range
/// values are recorded as skipped, and an empty check set leaves the
/// condition vacuously satisfied.
inline SinkVerdict find_sink(const ProtocolSpec& sp, const std::vector<int>& check_ns,
                             SymInterpretation interp = SymInterpretation::EqualOutputs,
                             bool allow_asymmetric = false,
                             std::size_t node_budget = kDefaultNodeBudget) {
  if (!sp.is_symmetric() && !allow_asymmetric)
    throw Error("sink detection targets symmetric protocols (pass allow_asymmetric to override)");

  SinkVerdict v;
  v.evidence.loop_set = loop_states(sp, interp);
  const auto& L = v.evidence.loop_set;
  if (L.empty()) return v;  // None; only possible with the override
  if (L.size() > 2) {
    v.kind = SinkVerdict::Kind::MultipleLoopStates;
    return v;
  }

  auto sym = homonym_reach(sp, HomonymKind::SymSquiggle, interp);
  auto is_rule = [&sp](int x, int y, int a, int b) {
    return sp.aa_rule(x, y) == std::pair<int, int>{a, b};
  };

  if (L.size() == 1) {
    const int m = L[0];
    v.m1 = m;
    v.evidence.cond1 = is_rule(m, m, m, m);
    v.evidence.cond2 = true;
    for (int s = 0; s < sp.na; ++s)
      if (!sym.at(s, m)) v.evidence.cond2 = false;
    bool cond3 = true;
    for (int n : check_ns) {
      if (n < 1 || n > sp.P - 1) {
        v.evidence.skipped_ns.push_back(n);
        continue;
      }
      const bool rec = detail::recurs_anywhere(sp, n, m, node_budget);
      v.evidence.cond3.push_back({n, rec});
      if (rec) cond3 = false;
    }
    if (v.evidence.cond1 && v.evidence.cond2 && cond3) v.kind = SinkVerdict::Kind::SinkState;
    return v;
  }

  const int m1 = L[0], m2 = L[1];
  v.m1 = m1;
  v.m2 = m2;
  v.evidence.cond1 = (is_rule(m1, m1, m1, m1) && is_rule(m2, m2, m2, m2)) ||
                     (is_rule(m1, m1, m2, m2) && is_rule(m2, m2, m1, m1));
  v.evidence.cond2 = true;
  for (int s = 0; s < sp.na; ++s)
    if (!sym.at(s, m1) || !sym.at(s, m2)) v.evidence.cond2 = false;
  bool cond3 = true;
  for (int n : check_ns) {
    if (n < 1 || n > sp.P - 2) {
      v.evidence.skipped_ns.push_back(n);
      continue;
    }
    const bool rec = detail::recurs_anywhere(sp, n, m1, node_budget) ||
                     detail::recurs_anywhere(sp, n, m2, node_budget);
    v.evidence.cond3.push_back({n, rec});
    if (rec) cond3 = false;
  }
  if (v.evidence.cond1 && v.evidence.cond2 && cond3) v.kind = SinkVerdict::Kind::SinkPair;
  return v;
}

// ---------------------------------------------------------------------------

/// Q_t: external values of agent states occurring in any configuration at
/// or after configuration index t (0 = initial, steps.size() = final).
inline std::vector<int> trace_state_support(const ExecutionTrace& tr, long long t,
                                            const ProtocolSpec& sp) {
  if (t < 0 || t > static_cast<long long>(tr.steps.size()))
    throw Error("support index outside the trace");
  std::set<int> vals;
  Configuration c = tr.initial;
  auto collect = [&](long long idx) {
    if (idx < t) return;
    for (auto s : c.agents) vals.insert(sp.agent_value(s));
  };
  collect(0);
  for (long long i = 0; i < static_cast<long long>(tr.steps.size()); ++i) {
    const auto& s = tr.steps[static_cast<std::size_t>(i)];
    c = step(c, s.i, s.j, sp);
    collect(i + 1);
  }
  return {vals.begin(), vals.end()};
}

}  // namespace kpart
