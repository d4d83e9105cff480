#pragma once
// Execution engine and schedulers: uniform random (globally fair with
// probability 1), deadline-enforced weak fairness, scripted adversaries,
// the pair-doubling schedule, and the reducing mode that collapses
// homonyms outside an exempt set.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kpart/core.hpp"
#include "kpart/rng.hpp"

namespace kpart {

// Interaction identities run 0..n with 0 the base station. Unordered pairs
// are enumerated lexicographically: (0,1),(0,2),...,(0,n),(1,2),...

inline int pair_count(int n) { return (n + 1) * n / 2; }

inline int pair_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  const int e = n + 1;
  return i * (e - 1) - i * (i - 1) / 2 + (j - i - 1);
}

inline std::pair<int, int> pair_at(int idx, int n) {
  const int e = n + 1;
  for (int i = 0; i < e - 1; ++i) {
    const int row = e - 1 - i;
    if (idx < row) return {i, i + 1 + idx};
    idx -= row;
  }
  throw Error("pair index out of range");
}

struct Step {
  std::int32_t i = 0, j = 0;          // initiator, responder identities
  std::int32_t pre_i = 0, pre_j = 0;  // dense state indices (BS space if id==0)
  std::int32_t post_i = 0, post_j = 0;
};

enum class StopReason { Silent, Budget, Predicate };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Silent: return "silent";
    case StopReason::Budget: return "budget";
    case StopReason::Predicate: return "predicate";
  }
  return "?";
}

struct ExecutionTrace {
  std::uint64_t spec_hash = 0;
  int n = 0;
  Configuration initial;
  std::vector<Step> steps;
  StopReason reason = StopReason::Budget;
  std::string scheduler;
  std::uint64_t seed = 0;
  long long fairness_window = 0;  // B when the scheduler enforces one, else 0
  Configuration final;
};

// ---------------------------------------------------------------------------

struct SchedulerPolicy {
  enum class Kind { UniformRandom, WeaklyFairEnforced, Scripted, PairDoubling, Reduced };
  Kind kind = Kind::UniformRandom;
  std::uint64_t seed = 0;
  long long fairness_window = 0;              // B for WeaklyFairEnforced
  std::vector<std::pair<int, int>> script;    // ordered pairs, applied cyclically
  long long pivot = 0;                        // PairDoubling pivot step
  std::vector<int> exempt_states;             // Reduced: external values
  std::shared_ptr<SchedulerPolicy> inner;     // Reduced inner policy

  static SchedulerPolicy uniform_random(std::uint64_t seed) {
    SchedulerPolicy p;
    p.kind = Kind::UniformRandom;
    p.seed = seed;
    return p;
  }
  static SchedulerPolicy weakly_fair(long long window, std::uint64_t seed) {
    SchedulerPolicy p;
    p.kind = Kind::WeaklyFairEnforced;
    p.fairness_window = window;
    p.seed = seed;
    return p;
  }
  static SchedulerPolicy scripted(std::vector<std::pair<int, int>> pairs) {
    SchedulerPolicy p;
    p.kind = Kind::Scripted;
    p.script = std::move(pairs);
    return p;
  }
  static SchedulerPolicy pair_doubling(long long pivot, std::uint64_t seed) {
    SchedulerPolicy p;
    p.kind = Kind::PairDoubling;
    p.pivot = pivot;
    p.seed = seed;
    return p;
  }
  static SchedulerPolicy reduced(SchedulerPolicy inner_policy, std::vector<int> exempt) {
    SchedulerPolicy p;
    p.kind = Kind::Reduced;
    p.seed = inner_policy.seed;
    p.exempt_states = std::move(exempt);
    p.inner = std::make_shared<SchedulerPolicy>(std::move(inner_policy));
    return p;
  }

  std::string text() const {
    switch (kind) {
      case Kind::UniformRandom: return "random";
      case Kind::WeaklyFairEnforced: return "weakfair:B=" + std::to_string(fairness_window);
      case Kind::Scripted: return "scripted:" + std::to_string(script.size());
      case Kind::PairDoubling: return "doubling:pivot=" + std::to_string(pivot);
      case Kind::Reduced: return "reduced(" + (inner ? inner->text() : "random") + ")";
    }
    return "?";
  }
};

struct StopCondition {
  long long max_steps = 100000;
  bool stop_on_silent = true;
  std::function<bool(const Configuration&)> predicate;  // optional
};

struct AllStatesRandom {
  std::uint64_t seed = 0;
};
using Initial = std::variant<Configuration, AllStatesRandom>;

/// True iff every admissible ordered pair yields a null transition.
inline bool detect_silent(const Configuration& c, const ProtocolSpec& sp) {
  std::vector<int> cnt(sp.na, 0);
  for (auto s : c.agents) ++cnt[s];
  for (int p = 0; p < sp.na; ++p) {
    if (!cnt[p]) continue;
    if (sp.ba_rule(c.bs, p) != std::pair<int, int>{c.bs, p}) return false;
    if (sp.ab_rule(p, c.bs) != std::pair<int, int>{p, c.bs}) return false;
    for (int q = 0; q < sp.na; ++q) {
      if (!cnt[q] || (p == q && cnt[p] < 2)) continue;
      if (sp.aa_rule(p, q) != std::pair<int, int>{p, q}) return false;
    }
  }
  return true;
}

namespace detail {

// One scheduling decision per step. Deadline queue for weak fairness: every
// pair's service deadline is distinct (one pair served per step, virtual
// staggered history before the trace starts), so at most one pair comes due
// per step and gaps stay within the window.
class Scheduler {
 public:
  Scheduler(const SchedulerPolicy& pol, const ProtocolSpec& sp, int n)
      : pol_(pol), sp_(sp), n_(n), rng_(pol.seed), pairs_(pair_count(n)) {
    if (pol.kind == SchedulerPolicy::Kind::WeaklyFairEnforced) {
      if (pol.fairness_window < pairs_)
        throw PolicyInfeasible("fairness window B=" + std::to_string(pol.fairness_window) +
                               " below pair count " + std::to_string(pairs_));
      last_.resize(pairs_);
      for (int p = 0; p < pairs_; ++p) last_[p] = -1 - p;
    }
    if (pol.kind == SchedulerPolicy::Kind::Scripted) {
      if (pol.script.empty()) throw PolicyInfeasible("empty script");
      for (auto [i, j] : pol.script)
        if (i == j || i < 0 || j < 0 || i > n || j > n)
          throw PolicyInfeasible("scripted pair (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") out of range");
    }
    if (pol.kind == SchedulerPolicy::Kind::Reduced) {
      for (int v : pol.exempt_states) {
        int idx = sp.agent_index(v);
        if (idx < 0) throw PolicyInfeasible("exempt state " + std::to_string(v) + " unknown");
        exempt_.push_back(idx);
      }
      inner_ = std::make_unique<Scheduler>(pol.inner ? *pol.inner
                                                     : SchedulerPolicy::uniform_random(pol.seed),
                                           sp, n);
    }
  }

  std::pair<int, int> choose(const Configuration& c, long long t) {
    switch (pol_.kind) {
      case SchedulerPolicy::Kind::UniformRandom:
        return orient(rng_.below_int(pairs_));
      case SchedulerPolicy::Kind::WeaklyFairEnforced: {
        int due = -1;
        for (int p = 0; p < pairs_; ++p) {
          if (t - last_[p] >= pol_.fairness_window - 1 && (due < 0 || last_[p] < last_[due]))
            due = p;
        }
        const int p = due >= 0 ? due : rng_.below_int(pairs_);
        last_[p] = t;
        return orient(p);
      }
      case SchedulerPolicy::Kind::Scripted:
        return pol_.script[static_cast<std::size_t>(t) % pol_.script.size()];
      case SchedulerPolicy::Kind::PairDoubling: {
        if (t < pol_.pivot || (t - pol_.pivot) % 2 == 0) {
          doubled_ = orient(rng_.below_int(pairs_));
          return doubled_;
        }
        return doubled_;
      }
      case SchedulerPolicy::Kind::Reduced: {
        auto hom = find_homonyms(c);
        if (hom.first > 0) return hom;
        return inner_->choose(c, t);
      }
    }
    throw Error("unreachable");
  }

 private:
  std::pair<int, int> orient(int pair_idx) {
    auto [i, j] = pair_at(pair_idx, n_);
    return rng_.coin() ? std::pair<int, int>{j, i} : std::pair<int, int>{i, j};
  }

  // First two agents sharing the lowest non-exempt duplicated state, or (0,0).
  std::pair<int, int> find_homonyms(const Configuration& c) const {
    std::vector<int> cnt(sp_.na, 0);
    for (auto s : c.agents) ++cnt[s];
    for (int s = 0; s < sp_.na; ++s) {
      if (cnt[s] < 2) continue;
      if (std::find(exempt_.begin(), exempt_.end(), s) != exempt_.end()) continue;
      int first = -1;
      for (int a = 0; a < c.n(); ++a) {
        if (c.agents[a] != s) continue;
        if (first < 0)
          first = a + 1;
        else
          return {first, a + 1};
      }
    }
    return {0, 0};
  }

  const SchedulerPolicy& pol_;
  const ProtocolSpec& sp_;
  int n_;
  Rng rng_;
  int pairs_;
  std::vector<long long> last_;
  std::pair<int, int> doubled_{0, 1};
  std::vector<int> exempt_;
  std::unique_ptr<Scheduler> inner_;
};

inline int state_of(const Configuration& c, int id) {
  return id == 0 ? c.bs : c.agents[id - 1];
}

}  // namespace detail

/// Run one execution. Initial agent states come from the given configuration
/// or are drawn uniformly; the BS starts at the designated initial state when
/// the spec declares one, otherwise it is taken from the initial value.
inline ExecutionTrace run(const ProtocolSpec& sp, int n, const Initial& initial,
                          const SchedulerPolicy& policy, const StopCondition& stop) {
  if (n < 1 || n > sp.P)
    throw Error("n=" + std::to_string(n) + " outside [1,P=" + std::to_string(sp.P) + "]");

  Configuration c;
  if (const auto* given = std::get_if<Configuration>(&initial)) {
    c = *given;
    validate_configuration(c, sp);
  } else {
    const auto& rnd = std::get<AllStatesRandom>(initial);
    Rng rng(rnd.seed);
    c.agents.resize(n);
    for (int a = 0; a < n; ++a) c.agents[a] = static_cast<std::uint8_t>(rng.below_int(sp.na));
    c.bs = sp.bs_initial ? *sp.bs_initial : rng.below_int(sp.nb);
  }
  if (sp.bs_initial) c.bs = *sp.bs_initial;

  ExecutionTrace tr;
  tr.spec_hash = sp.structural_hash();
  tr.n = n;
  tr.initial = c;
  tr.scheduler = policy.text();
  tr.seed = policy.seed;
  if (policy.kind == SchedulerPolicy::Kind::WeaklyFairEnforced)
    tr.fairness_window = policy.fairness_window;

  detail::Scheduler sched(policy, sp, n);
  tr.reason = StopReason::Budget;
  for (long long t = 0; t < stop.max_steps; ++t) {
    if (stop.stop_on_silent && detect_silent(c, sp)) {
      tr.reason = StopReason::Silent;
      break;
    }
    if (stop.predicate && stop.predicate(c)) {
      tr.reason = StopReason::Predicate;
      break;
    }
    auto [i, j] = sched.choose(c, t);
    Step s;
    s.i = i;
    s.j = j;
    s.pre_i = detail::state_of(c, i);
    s.pre_j = detail::state_of(c, j);
    c = step(c, i, j, sp);
    s.post_i = detail::state_of(c, i);
    s.post_j = detail::state_of(c, j);
    tr.steps.push_back(s);
  }
  if (tr.reason == StopReason::Budget && stop.stop_on_silent && detect_silent(c, sp))
    tr.reason = StopReason::Silent;  // budget landed exactly on silence
  tr.final = c;
  return tr;
}

// ---------------------------------------------------------------------------

struct PairStats {
  int i = 0, j = 0;
  long long count = 0;
  long long max_gap = 0;
};

struct FairnessReport {
  std::vector<PairStats> pairs;   // indexed by unordered pair id
  long long max_gap = 0;          // over all pairs
  std::vector<int> flagged;       // pair ids whose gap exceeded the window
  long long window = 0;
};

/// Per-pair interaction counts and maximum service gaps; gaps include the
/// stretch before the first and after the last interaction, so a pair that
/// never interacts has gap = trace length.
inline FairnessReport fairness_audit(const ExecutionTrace& tr) {
  const int m = pair_count(tr.n);
  const long long len = static_cast<long long>(tr.steps.size());
  FairnessReport rep;
  rep.window = tr.fairness_window;
  rep.pairs.resize(m);
  std::vector<long long> last(m, -1);
  for (int p = 0; p < m; ++p) {
    auto [i, j] = pair_at(p, tr.n);
    rep.pairs[p].i = i;
    rep.pairs[p].j = j;
  }
  for (long long t = 0; t < len; ++t) {
    const auto& s = tr.steps[static_cast<std::size_t>(t)];
    const int p = pair_index(s.i, s.j, tr.n);
    auto& st = rep.pairs[p];
    ++st.count;
    st.max_gap = std::max(st.max_gap, t - last[p]);
    last[p] = t;
  }
  for (int p = 0; p < m; ++p) {
    rep.pairs[p].max_gap = std::max(rep.pairs[p].max_gap, len - last[p]);
    rep.max_gap = std::max(rep.max_gap, rep.pairs[p].max_gap);
    if (rep.window > 0 && rep.pairs[p].max_gap > rep.window) rep.flagged.push_back(p);
  }
  return rep;
}

struct ReplayResult {
  bool ok = true;
  long long first_bad = -1;
  std::string what;
};

/// Re-execute a trace through core::step and verify every recorded pre/post
/// state and the final configuration.
inline ReplayResult replay(const ExecutionTrace& tr, const ProtocolSpec& sp) {
  ReplayResult res;
  Configuration c = tr.initial;
  auto fail = [&res](long long t, std::string what) {
    res.ok = false;
    res.first_bad = t;
    res.what = std::move(what);
    return res;
  };
  for (long long t = 0; t < static_cast<long long>(tr.steps.size()); ++t) {
    const auto& s = tr.steps[static_cast<std::size_t>(t)];
    if (detail::state_of(c, s.i) != s.pre_i || detail::state_of(c, s.j) != s.pre_j)
      return fail(t, "recorded pre-states do not match configuration");
    c = step(c, s.i, s.j, sp);
    if (detail::state_of(c, s.i) != s.post_i || detail::state_of(c, s.j) != s.post_j)
      return fail(t, "recorded post-states do not match step output");
  }
  if (!(c == tr.final)) return fail(static_cast<long long>(tr.steps.size()), "final mismatch");
  return res;
}

}  // namespace kpart
