#pragma once
// Explicit-state model checker: reachable configuration graph over
// identified agents, SCC decomposition, stable/strongly-stable node sets,
// and convergence verdicts under weak and global fairness with lasso
// counterexamples.
//
// Edge layout: node u has exactly n*(n+1) ordered edges, one per ordered
// identity pair, stored at positions [u*epn, (u+1)*epn). Position e encodes
// the unordered pair e/2 (see pair_at) and the orientation e%2, so labels
// and identities are never stored. Null transitions are self-loops and
// carry their pair label like any other edge.

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "kpart/core.hpp"
#include "kpart/sim.hpp"

namespace kpart {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;
inline constexpr std::size_t kDefaultNodeBudget = 5'000'000;

enum class Fairness { Weak, Global };

struct InitialSet {
  bool all_agent_states = true;
  std::optional<int> bs_index;  // defaults to the spec's designated initial
  std::vector<Configuration> explicit_list;

  /// Designated BS initial state, every agent state vector.
  static InitialSet designated_all() { return {}; }
  static InitialSet all_with_bs(int bs) {
    InitialSet s;
    s.bs_index = bs;
    return s;
  }
  static InitialSet of(std::vector<Configuration> list) {
    InitialSet s;
    s.all_agent_states = false;
    s.explicit_list = std::move(list);
    return s;
  }
};

struct Lasso {
  Configuration start;
  std::vector<Step> stem;
  std::vector<Step> cycle;
};

struct Verdict {
  enum class Kind { Proved, Refuted, Inconclusive };
  Kind kind = Kind::Inconclusive;
  std::optional<Lasso> witness;
  std::string note;

  bool proved() const { return kind == Kind::Proved; }
  bool refuted() const { return kind == Kind::Refuted; }
};

inline const char* to_string(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Proved: return "Proved";
    case Verdict::Kind::Refuted: return "Refuted";
    case Verdict::Kind::Inconclusive: return "Inconclusive";
  }
  return "?";
}

namespace detail {

// Open-addressing map from node bytes (in the arena) to node ids.
class NodeMap {
 public:
  explicit NodeMap(int stride) : stride_(stride) { rehash(1 << 12); }

  // Returns {id, inserted}. On insert the caller appends the key to the
  // arena as node `id` and then calls rehash_with to keep the load bounded.
  std::pair<NodeId, bool> find_or_insert(const std::uint8_t* key,
                                         const std::vector<std::uint8_t>& arena, NodeId next_id) {
    std::size_t h = hash(key) & mask_;
    while (slots_[h] != 0) {
      const NodeId id = slots_[h] - 1;
      if (std::memcmp(arena.data() + static_cast<std::size_t>(id) * stride_, key, stride_) == 0)
        return {id, false};
      h = (h + 1) & mask_;
    }
    slots_[h] = next_id + 1;
    ++count_;
    return {next_id, true};
  }

  void rehash_with(const std::vector<std::uint8_t>& arena) {
    if ((count_ + 1) * 10 <= slots_.size() * 7) return;
    std::vector<std::uint32_t> old = std::move(slots_);
    rehash(old.size() * 2);
    for (auto s : old) {
      if (!s) continue;
      const std::uint8_t* key = arena.data() + static_cast<std::size_t>(s - 1) * stride_;
      std::size_t h = hash(key) & mask_;
      while (slots_[h] != 0) h = (h + 1) & mask_;
      slots_[h] = s;
    }
  }

  std::optional<NodeId> find(const std::uint8_t* key,
                             const std::vector<std::uint8_t>& arena) const {
    std::size_t h = hash(key) & mask_;
    while (slots_[h] != 0) {
      const NodeId id = slots_[h] - 1;
      if (std::memcmp(arena.data() + static_cast<std::size_t>(id) * stride_, key, stride_) == 0)
        return id;
      h = (h + 1) & mask_;
    }
    return std::nullopt;
  }

  std::size_t count() const { return count_; }

 private:
  std::size_t hash(const std::uint8_t* key) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int i = 0; i < stride_; ++i) {
      h ^= key[i];
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
  void rehash(std::size_t cap) {
    slots_.assign(cap, 0);
    mask_ = cap - 1;
  }

  int stride_;
  std::vector<std::uint32_t> slots_;
  std::size_t mask_ = 0;
  std::size_t count_ = 0;
};

}  // namespace detail

class ReachGraph {
 public:
  const ProtocolSpec* spec = nullptr;
  int n = 0;
  int epn = 0;    // ordered edges per node
  int pairs = 0;  // unordered pair labels
  std::vector<NodeId> initial;
  std::vector<NodeId> edges;

  NodeId node_count() const { return static_cast<NodeId>(blob_.size() / stride_); }
  NodeId target(NodeId u, int e) const { return edges[static_cast<std::size_t>(u) * epn + e]; }

  /// Ordered identities of edge position e: even positions are (i,j) with
  /// i < j, odd positions the reverse orientation.
  std::pair<int, int> edge_identities(int e) const {
    auto [i, j] = pair_at(e / 2, n);
    return (e % 2) ? std::pair<int, int>{j, i} : std::pair<int, int>{i, j};
  }

  int bs_of(NodeId u) const {
    const std::uint8_t* p = node_ptr(u);
    return p[0] | (p[1] << 8);
  }
  const std::uint8_t* agents_of(NodeId u) const { return node_ptr(u) + 2; }

  Configuration config_of(NodeId u) const {
    Configuration c;
    c.bs = bs_of(u);
    const std::uint8_t* a = agents_of(u);
    c.agents.assign(a, a + n);
    return c;
  }

  std::optional<NodeId> find_node(const Configuration& c) const {
    std::vector<std::uint8_t> key(static_cast<std::size_t>(stride_));
    encode(c, key.data());
    return map_.find(key.data(), blob_);
  }

  bool is_silent(NodeId u) const { return flags_[u] & kSilent; }
  bool is_balanced(NodeId u) const { return flags_[u] & kBalanced; }
  bool is_stable(NodeId u) {
    ensure_stability();
    return flags_[u] & kStable;
  }
  bool is_strongly_stable(NodeId u) {
    ensure_stability();
    return flags_[u] & kStrong;
  }
  std::vector<int> group_counts_of(NodeId u) const {
    std::vector<int> counts(spec->k, 0);
    const std::uint8_t* a = agents_of(u);
    for (int i = 0; i < n; ++i) ++counts[spec->colors[a[i]]];
    return counts;
  }

  // --- construction -------------------------------------------------------

  static ReachGraph build(const ProtocolSpec& sp, int np, const InitialSet& init,
                          std::size_t node_budget = kDefaultNodeBudget) {
    if (sp.nb > 65535) throw Error("BS state space too large for explicit checking");
    ReachGraph g;
    g.spec = &sp;
    g.n = np;
    g.epn = np * (np + 1);
    g.pairs = pair_count(np);
    g.stride_ = np + 2;
    g.map_ = detail::NodeMap(g.stride_);

    // color-change lookup per rule, used for the stability fixpoint
    auto& cc_aa = g.cc_aa_;
    cc_aa.assign(sp.aa.size(), 0);
    for (int p = 0; p < sp.na; ++p)
      for (int q = 0; q < sp.na; ++q) {
        auto [p2, q2] = sp.aa_rule(p, q);
        cc_aa[p * sp.na + q] =
            sp.colors[p] != sp.colors[p2] || sp.colors[q] != sp.colors[q2];
      }
    g.cc_ba_.assign(sp.ba.size(), 0);
    for (int b = 0; b < sp.nb; ++b)
      for (int q = 0; q < sp.na; ++q)
        g.cc_ba_[b * sp.na + q] = sp.colors[q] != sp.colors[sp.ba_rule(b, q).second];
    g.cc_ab_.assign(sp.ab.size(), 0);
    for (int p = 0; p < sp.na; ++p)
      for (int b = 0; b < sp.nb; ++b)
        g.cc_ab_[p * sp.nb + b] = sp.colors[p] != sp.colors[sp.ab_rule(p, b).first];

    auto insert_config = [&g, node_budget](const std::uint8_t* key) -> NodeId {
      auto [id, inserted] = g.map_.find_or_insert(key, g.blob_, g.node_count());
      if (inserted) {
        if (id >= node_budget)
          throw BudgetExceeded("node budget " + std::to_string(node_budget) + " exceeded");
        g.blob_.insert(g.blob_.end(), key, key + g.stride_);
        g.map_.rehash_with(g.blob_);
      }
      return id;
    };

    std::vector<std::uint8_t> key(static_cast<std::size_t>(g.stride_));
    if (init.all_agent_states) {
      int bs = init.bs_index ? *init.bs_index
                             : (sp.bs_initial ? *sp.bs_initial
                                              : throw Error("no designated BS initial state"));
      if (bs < 0 || bs >= sp.nb) throw Error("BS initial index out of range");
      key[0] = static_cast<std::uint8_t>(bs & 0xff);
      key[1] = static_cast<std::uint8_t>(bs >> 8);
      for (int a = 0; a < np; ++a) key[2 + a] = 0;
      // odometer over agent vectors, ascending
      for (;;) {
        g.initial.push_back(insert_config(key.data()));
        int a = np - 1;
        while (a >= 0 && key[2 + a] == sp.na - 1) key[2 + a--] = 0;
        if (a < 0) break;
        ++key[2 + a];
      }
    } else {
      for (const auto& c : init.explicit_list) {
        validate_configuration(c, sp);
        if (c.n() != np) throw Error("explicit initial configuration has wrong n");
        encode_static(c, key.data(), np);
        const NodeId id = insert_config(key.data());
        if (std::find(g.initial.begin(), g.initial.end(), id) == g.initial.end())
          g.initial.push_back(id);
      }
      if (g.initial.empty()) throw Error("empty initial set");
    }

    // breadth-first closure; flags computed as each node is expanded
    std::vector<std::uint8_t> cur(static_cast<std::size_t>(g.stride_));
    std::vector<int> counts(std::max(sp.k, 1));
    for (NodeId u = 0; u < g.node_count(); ++u) {
      std::memcpy(cur.data(), g.node_ptr(u), g.stride_);
      const int bs = cur[0] | (cur[1] << 8);
      std::uint8_t flag = kSilent;

      counts.assign(sp.k, 0);
      bool dup = false;
      {
        std::vector<int> occ(sp.na, 0);
        for (int a = 0; a < np; ++a) {
          ++counts[sp.colors[cur[2 + a]]];
          if (++occ[cur[2 + a]] == 2) dup = true;
        }
        int lo = counts[0], hi = counts[0];
        for (int c : counts) {
          lo = std::min(lo, c);
          hi = std::max(hi, c);
        }
        if (hi - lo <= 1) flag |= kBalanced;
        if (dup) flag |= kDup;
      }

      for (int e = 0; e < g.epn; ++e) {
        auto [i, j] = g.edge_identities(e);
        std::memcpy(key.data(), cur.data(), g.stride_);
        bool color_change = false;
        if (i == 0) {
          const int q = cur[2 + (j - 1)];
          auto [b2, q2] = sp.ba_rule(bs, q);
          key[0] = static_cast<std::uint8_t>(b2 & 0xff);
          key[1] = static_cast<std::uint8_t>(b2 >> 8);
          key[2 + (j - 1)] = static_cast<std::uint8_t>(q2);
          color_change = g.cc_ba_[bs * sp.na + q];
        } else if (j == 0) {
          const int p = cur[2 + (i - 1)];
          auto [p2, b2] = sp.ab_rule(p, bs);
          key[2 + (i - 1)] = static_cast<std::uint8_t>(p2);
          key[0] = static_cast<std::uint8_t>(b2 & 0xff);
          key[1] = static_cast<std::uint8_t>(b2 >> 8);
          color_change = g.cc_ab_[p * sp.nb + bs];
        } else {
          const int p = cur[2 + (i - 1)], q = cur[2 + (j - 1)];
          auto [p2, q2] = sp.aa_rule(p, q);
          key[2 + (i - 1)] = static_cast<std::uint8_t>(p2);
          key[2 + (j - 1)] = static_cast<std::uint8_t>(q2);
          color_change = cc_aa[p * sp.na + q];
        }
        const NodeId v = insert_config(key.data());
        g.edges.push_back(v);
        if (v != u) flag &= static_cast<std::uint8_t>(~kSilent);
        if (color_change) flag |= kColorOut;
      }
      g.flags_.push_back(flag);
    }
    return g;
  }

  // --- SCC decomposition ---------------------------------------------------

  /// Full-graph SCC ids; ids are in completion order, so every inter-SCC
  /// edge points to a strictly smaller id.
  const std::vector<std::uint32_t>& scc_of() {
    ensure_scc();
    return scc_of_;
  }
  std::uint32_t scc_count() {
    ensure_scc();
    return scc_count_;
  }
  bool is_bottom_scc(std::uint32_t s) {
    ensure_bottom();
    return bottom_[s];
  }

  void ensure_scc() {
    if (!scc_of_.empty() || node_count() == 0) return;
    tarjan([](NodeId) { return true; }, scc_of_, scc_count_);
  }

  void ensure_stability() {
    if (stability_done_) return;
    ensure_scc();
    // "some agent's color can still change" propagated backward over the
    // condensation, along with "a duplicate state is still reachable".
    std::vector<std::uint8_t> change(scc_count_, 0), dup(scc_count_, 0);
    const NodeId nnodes = node_count();
    for (NodeId u = 0; u < nnodes; ++u) {
      const std::uint32_t s = scc_of_[u];
      if (flags_[u] & kColorOut) change[s] = 1;
      if (flags_[u] & kDup) dup[s] = 1;
    }
    // members grouped by SCC id; process ascending (reverse topological)
    std::vector<std::uint32_t> order(nnodes), start(scc_count_ + 1, 0);
    for (NodeId u = 0; u < nnodes; ++u) ++start[scc_of_[u] + 1];
    for (std::uint32_t s = 0; s < scc_count_; ++s) start[s + 1] += start[s];
    {
      std::vector<std::uint32_t> fill = start;
      for (NodeId u = 0; u < nnodes; ++u) order[fill[scc_of_[u]]++] = u;
    }
    for (std::uint32_t s = 0; s < scc_count_; ++s) {
      for (std::uint32_t x = start[s]; x < start[s + 1]; ++x) {
        const NodeId u = order[x];
        for (int e = 0; e < epn; ++e) {
          const std::uint32_t t = scc_of_[target(u, e)];
          if (t == s) continue;
          change[s] |= change[t];
          dup[s] |= dup[t];
        }
      }
    }
    for (NodeId u = 0; u < nnodes; ++u) {
      const std::uint32_t s = scc_of_[u];
      if ((flags_[u] & kBalanced) && !change[s]) flags_[u] |= kStable;
      if ((flags_[u] & kStable) && !dup[s]) flags_[u] |= kStrong;
    }
    // closure sanity: stable nodes only reach stable nodes
    for (NodeId u = 0; u < nnodes; ++u) {
      if (!(flags_[u] & kStable)) continue;
      for (int e = 0; e < epn; ++e)
        if (!(flags_[target(u, e)] & kStable))
          throw Error("internal: stable node set is not closed under reachability");
    }
    stability_done_ = true;
  }

  template <class Allowed>
  void tarjan(Allowed allowed, std::vector<std::uint32_t>& scc, std::uint32_t& count) const {
    const NodeId nnodes = node_count();
    constexpr std::uint32_t UNDEF = 0xffffffffu;
    scc.assign(nnodes, UNDEF);
    count = 0;
    std::vector<std::uint32_t> idx(nnodes, UNDEF), low(nnodes, 0);
    std::vector<std::uint8_t> onstk(nnodes, 0);
    std::vector<NodeId> stk;
    std::vector<std::pair<NodeId, std::uint32_t>> frames;
    std::uint32_t counter = 0;
    for (NodeId s0 = 0; s0 < nnodes; ++s0) {
      if (!allowed(s0) || idx[s0] != UNDEF) continue;
      idx[s0] = low[s0] = counter++;
      stk.push_back(s0);
      onstk[s0] = 1;
      frames.push_back({s0, 0});
      while (!frames.empty()) {
        const NodeId u = frames.back().first;
        const std::uint32_t cur = frames.back().second;
        if (cur < static_cast<std::uint32_t>(epn)) {
          ++frames.back().second;
          const NodeId v = target(u, static_cast<int>(cur));
          if (!allowed(v)) continue;
          if (idx[v] == UNDEF) {
            idx[v] = low[v] = counter++;
            stk.push_back(v);
            onstk[v] = 1;
            frames.push_back({v, 0});
          } else if (onstk[v]) {
            low[u] = std::min(low[u], idx[v]);
          }
        } else {
          if (low[u] == idx[u]) {
            NodeId x;
            do {
              x = stk.back();
              stk.pop_back();
              onstk[x] = 0;
              scc[x] = count;
            } while (x != u);
            ++count;
          }
          frames.pop_back();
          if (!frames.empty()) {
            const NodeId p = frames.back().first;
            low[p] = std::min(low[p], low[u]);
          }
        }
      }
    }
  }

 private:
  static constexpr std::uint8_t kSilent = 1, kBalanced = 2, kDup = 4, kColorOut = 8,
                                kStable = 16, kStrong = 32;

  const std::uint8_t* node_ptr(NodeId u) const {
    return blob_.data() + static_cast<std::size_t>(u) * stride_;
  }
  void encode(const Configuration& c, std::uint8_t* out) const { encode_static(c, out, n); }
  static void encode_static(const Configuration& c, std::uint8_t* out, int np) {
    out[0] = static_cast<std::uint8_t>(c.bs & 0xff);
    out[1] = static_cast<std::uint8_t>(c.bs >> 8);
    for (int a = 0; a < np; ++a) out[2 + a] = c.agents[a];
  }

  void ensure_bottom() {
    ensure_scc();
    if (!bottom_.empty()) return;
    bottom_.assign(scc_count_, 1);
    for (NodeId u = 0; u < node_count(); ++u)
      for (int e = 0; e < epn; ++e)
        if (scc_of_[target(u, e)] != scc_of_[u]) bottom_[scc_of_[u]] = 0;
  }

  int stride_ = 0;
  std::vector<std::uint8_t> blob_;
  detail::NodeMap map_{1};
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint8_t> cc_aa_, cc_ba_, cc_ab_;
  std::vector<std::uint32_t> scc_of_;
  std::uint32_t scc_count_ = 0;
  std::vector<std::uint8_t> bottom_;
  bool stability_done_ = false;
};

inline ReachGraph build_reach_graph(const ProtocolSpec& sp, int n, const InitialSet& init,
                                    std::size_t node_budget = kDefaultNodeBudget) {
  return ReachGraph::build(sp, n, init, node_budget);
}

inline std::vector<NodeId> stable_configs(ReachGraph& g) {
  g.ensure_stability();
  std::vector<NodeId> out;
  for (NodeId u = 0; u < g.node_count(); ++u)
    if (g.is_stable(u)) out.push_back(u);
  return out;
}

inline std::vector<NodeId> strongly_stable_configs(ReachGraph& g) {
  g.ensure_stability();
  std::vector<NodeId> out;
  for (NodeId u = 0; u < g.node_count(); ++u)
    if (g.is_strongly_stable(u)) out.push_back(u);
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {

// Step record for a graph edge, with pre/post states read off the configs.
inline Step edge_step(const ReachGraph& g, NodeId u, int e) {
  auto [i, j] = g.edge_identities(e);
  const NodeId v = g.target(u, e);
  auto at = [&g](NodeId x, int id) {
    return id == 0 ? g.bs_of(x) : static_cast<int>(g.agents_of(x)[id - 1]);
  };
  Step s;
  s.i = i;
  s.j = j;
  s.pre_i = at(u, i);
  s.pre_j = at(u, j);
  s.post_i = at(v, i);
  s.post_j = at(v, j);
  return s;
}

// Deterministic BFS path (list of edge positions) within `allowed` nodes.
template <class Allowed>
std::vector<std::pair<NodeId, int>> bfs_path(const ReachGraph& g, const std::vector<NodeId>& from,
                                             NodeId to, Allowed allowed) {
  std::vector<std::uint32_t> par_node(g.node_count(), kNoNode);
  std::vector<int> par_edge(g.node_count(), -1);
  std::vector<NodeId> queue;
  for (NodeId s : from) {
    if (par_node[s] != kNoNode) continue;
    par_node[s] = s;
    queue.push_back(s);
  }
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const NodeId u = queue[qi];
    if (u == to) break;
    for (int e = 0; e < g.epn; ++e) {
      const NodeId v = g.target(u, e);
      if (v == u || !allowed(v) || par_node[v] != kNoNode) continue;
      par_node[v] = u;
      par_edge[v] = e;
      queue.push_back(v);
    }
  }
  if (par_node[to] == kNoNode) throw Error("internal: BFS target unreachable");
  std::vector<std::pair<NodeId, int>> path;
  for (NodeId x = to; par_node[x] != x; x = par_node[x]) path.push_back({par_node[x], par_edge[x]});
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace detail

/// Weak-fairness convergence: Proved iff no weakly-fair infinite execution
/// avoids stable nodes forever. Searches the non-stable restriction for an
/// SCC whose internal edges carry every unordered pair label (generalized
/// Buchi emptiness); a hit yields a stem plus a cycle covering all labels.
inline Verdict verify_weakfair_convergence(ReachGraph& g) {
  g.ensure_stability();
  const NodeId nnodes = g.node_count();
  auto nonstable = [&g](NodeId u) { return !g.is_stable(u); };

  std::vector<std::uint32_t> scc;
  std::uint32_t scc_count = 0;
  g.tarjan(nonstable, scc, scc_count);

  const int words = (g.pairs + 63) / 64;
  std::vector<std::uint64_t> labels(static_cast<std::size_t>(scc_count) * words, 0);
  for (NodeId u = 0; u < nnodes; ++u) {
    if (!nonstable(u)) continue;
    for (int e = 0; e < g.epn; ++e) {
      const NodeId v = g.target(u, e);
      if (!nonstable(v) || scc[v] != scc[u]) continue;
      const int p = e / 2;
      labels[static_cast<std::size_t>(scc[u]) * words + p / 64] |= 1ull << (p % 64);
    }
  }
  auto fair = [&](std::uint32_t s) {
    int bits = 0;
    for (int w = 0; w < words; ++w)
      bits += __builtin_popcountll(labels[static_cast<std::size_t>(s) * words + w]);
    return bits == g.pairs;
  };

  NodeId entry = kNoNode;
  for (NodeId u = 0; u < nnodes && entry == kNoNode; ++u)
    if (nonstable(u) && fair(scc[u])) entry = u;
  if (entry == kNoNode) {
    Verdict v;
    v.kind = Verdict::Kind::Proved;
    v.note = "no weakly-fair cycle avoids stable configurations";
    return v;
  }

  // Every path into a non-stable node is all non-stable (stable nodes only
  // reach stable nodes), so plain BFS from the non-stable initial nodes works.
  std::vector<NodeId> roots;
  for (NodeId s : g.initial)
    if (nonstable(s)) roots.push_back(s);

  Lasso lasso;
  auto stem_path = detail::bfs_path(g, roots, entry, nonstable);
  lasso.start = g.config_of(stem_path.empty() ? entry : stem_path.front().first);
  for (auto [u, e] : stem_path) lasso.stem.push_back(detail::edge_step(g, u, e));

  // cycle: for each label pick an internal edge, walk to it, traverse, close.
  const std::uint32_t s = scc[entry];
  auto in_scc = [&](NodeId u) { return nonstable(u) && scc[u] == s; };
  std::vector<std::pair<NodeId, int>> label_edge(static_cast<std::size_t>(g.pairs),
                                                 {kNoNode, -1});
  for (NodeId u = 0; u < nnodes; ++u) {
    if (!in_scc(u)) continue;
    for (int e = 0; e < g.epn; ++e) {
      if (!in_scc(g.target(u, e))) continue;
      auto& le = label_edge[static_cast<std::size_t>(e / 2)];
      if (le.first == kNoNode) le = {u, e};
    }
  }
  std::vector<bool> covered(static_cast<std::size_t>(g.pairs), false);
  NodeId at = entry;
  auto walk = [&](NodeId to) {
    for (auto [u, e] : detail::bfs_path(g, {at}, to, in_scc)) {
      lasso.cycle.push_back(detail::edge_step(g, u, e));
      covered[static_cast<std::size_t>(e / 2)] = true;
      at = g.target(u, e);
    }
  };
  for (int p = 0; p < g.pairs; ++p) {
    if (covered[static_cast<std::size_t>(p)]) continue;
    auto [u, e] = label_edge[static_cast<std::size_t>(p)];
    if (u == kNoNode) throw Error("internal: fair SCC lost a label");
    walk(u);
    lasso.cycle.push_back(detail::edge_step(g, u, e));
    covered[static_cast<std::size_t>(p)] = true;
    at = g.target(u, e);
  }
  walk(entry);
  if (lasso.cycle.empty()) throw Error("internal: empty witness cycle");

  Verdict v;
  v.kind = Verdict::Kind::Refuted;
  v.witness = std::move(lasso);
  v.note = "weakly-fair cycle through non-stable configurations";
  return v;
}

/// Global-fairness convergence: Proved iff every reachable bottom SCC is
/// all-stable. A refutation walks into an offending bottom SCC and cycles
/// over all of its internal edges.
inline Verdict verify_globalfair_convergence(ReachGraph& g) {
  g.ensure_stability();
  const NodeId nnodes = g.node_count();

  NodeId bad = kNoNode;
  for (NodeId u = 0; u < nnodes && bad == kNoNode; ++u)
    if (!g.is_stable(u) && g.is_bottom_scc(g.scc_of()[u])) bad = u;
  if (bad == kNoNode) {
    Verdict v;
    v.kind = Verdict::Kind::Proved;
    v.note = "every reachable bottom SCC is stable";
    return v;
  }

  const std::uint32_t s = g.scc_of()[bad];
  auto in_scc = [&](NodeId u) { return g.scc_of()[u] == s; };

  Lasso lasso;
  auto stem_path = detail::bfs_path(g, g.initial, bad, [](NodeId) { return true; });
  lasso.start = g.config_of(stem_path.empty() ? bad : stem_path.front().first);
  for (auto [u, e] : stem_path) lasso.stem.push_back(detail::edge_step(g, u, e));

  NodeId at = bad;
  std::size_t budget = 200000;
  for (NodeId u = 0; u < nnodes; ++u) {
    if (!in_scc(u)) continue;
    for (int e = 0; e < g.epn && lasso.cycle.size() < budget; ++e) {
      for (auto [x, pe] : detail::bfs_path(g, {at}, u, in_scc)) {
        lasso.cycle.push_back(detail::edge_step(g, x, pe));
        at = g.target(x, pe);
      }
      lasso.cycle.push_back(detail::edge_step(g, u, e));
      at = g.target(u, e);
    }
  }
  for (auto [x, pe] : detail::bfs_path(g, {at}, bad, in_scc))
    lasso.cycle.push_back(detail::edge_step(g, x, pe));

  Verdict v;
  v.kind = Verdict::Kind::Refuted;
  v.witness = std::move(lasso);
  v.note = "reachable bottom SCC with non-stable configurations";
  return v;
}

/// Can state s be held by some agent infinitely often in a fairness-
/// admissible infinite execution? Weak fairness asks for a fair-labeled SCC
/// containing s; global fairness for a bottom SCC containing s.
inline bool state_recurrence(ReachGraph& g, int agent_state_dense, Fairness f) {
  g.ensure_scc();
  const NodeId nnodes = g.node_count();
  const auto& scc = g.scc_of();
  const std::uint32_t nscc = g.scc_count();

  std::vector<std::uint8_t> holds(nscc, 0);
  for (NodeId u = 0; u < nnodes; ++u) {
    const std::uint8_t* a = g.agents_of(u);
    for (int i = 0; i < g.n; ++i)
      if (a[i] == agent_state_dense) {
        holds[scc[u]] = 1;
        break;
      }
  }

  if (f == Fairness::Global) {
    for (std::uint32_t s = 0; s < nscc; ++s)
      if (holds[s] && g.is_bottom_scc(s)) return true;
    return false;
  }

  const int words = (g.pairs + 63) / 64;
  std::vector<std::uint64_t> labels(static_cast<std::size_t>(nscc) * words, 0);
  for (NodeId u = 0; u < nnodes; ++u)
    for (int e = 0; e < g.epn; ++e) {
      const NodeId v = g.target(u, e);
      if (scc[v] != scc[u]) continue;
      const int p = e / 2;
      labels[static_cast<std::size_t>(scc[u]) * words + p / 64] |= 1ull << (p % 64);
    }
  for (std::uint32_t s = 0; s < nscc; ++s) {
    if (!holds[s]) continue;
    int bits = 0;
    for (int w = 0; w < words; ++w)
      bits += __builtin_popcountll(labels[static_cast<std::size_t>(s) * words + w]);
    if (bits == g.pairs) return true;
  }
  return false;
}

struct BadBsInit {
  int bs_index;
  Verdict verdict;
};

/// Search BS initial states (all agent initial states each time) for one
/// whose graph refutes weak-fairness convergence.
inline std::optional<BadBsInit> find_bad_bs_init(const ProtocolSpec& sp, int n,
                                                 std::vector<int> candidates = {},
                                                 std::size_t node_budget = kDefaultNodeBudget) {
  if (candidates.empty())
    for (int b = 0; b < sp.nb; ++b) candidates.push_back(b);
  for (int b : candidates) {
    if (b < 0 || b >= sp.nb) throw Error("candidate BS state out of range");
    ReachGraph g = build_reach_graph(sp, n, InitialSet::all_with_bs(b), node_budget);
    Verdict v = verify_weakfair_convergence(g);
    if (v.refuted()) return BadBsInit{b, std::move(v)};
  }
  return std::nullopt;
}

/// Replay a lasso through core::step; checks stem and cycle consistency and
/// that the cycle returns to its own starting configuration.
inline ReplayResult replay_lasso(const Lasso& l, const ProtocolSpec& sp) {
  ExecutionTrace stem;
  stem.n = l.start.n();
  stem.initial = l.start;
  stem.steps = l.stem;
  Configuration mid = l.start;
  for (const auto& s : l.stem) mid = step(mid, s.i, s.j, sp);
  stem.final = mid;
  if (auto r = replay(stem, sp); !r.ok) return r;

  ExecutionTrace cyc;
  cyc.n = l.start.n();
  cyc.initial = mid;
  cyc.steps = l.cycle;
  cyc.final = mid;  // a cycle must come back around
  return replay(cyc, sp);
}

/// Convenience wrapper: build at a budget and decide, mapping a blown
/// budget to Inconclusive instead of an exception.
inline Verdict check_convergence(const ProtocolSpec& sp, int n, const InitialSet& init,
                                 Fairness f, std::size_t node_budget = kDefaultNodeBudget) {
  try {
    ReachGraph g = build_reach_graph(sp, n, init, node_budget);
    return f == Fairness::Weak ? verify_weakfair_convergence(g)
                               : verify_globalfair_convergence(g);
  } catch (const BudgetExceeded& e) {
    Verdict v;
    v.kind = Verdict::Kind::Inconclusive;
    v.note = e.what();
    return v;
  }
}

}  // namespace kpart
