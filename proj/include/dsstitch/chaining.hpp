#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dsstitch/stitching.hpp"

namespace dsstitch {

/// Anchor triple of a passage trigger: fires once x has passed `mid` on
/// its way from `from` to `to`.
struct TriggerAnchors {
  Vec from, mid, to;
};

/// True iff |x - from| / |x - to| >= |mid - from| / |mid - to|.
/// Evaluated cross-multiplied, so x == to fires without dividing by zero.
bool trigger_fired(const Vec& from, const Vec& mid, const Vec& to, const Vec& x);

/// Transition duration: time to travel a fraction alpha of |to - mid|
/// under the average of the outgoing and incoming policy speeds at `mid`.
/// alpha = 0 means an immediate transition; a vanishing denominator is
/// capped at t_cap.
double timer_duration(const StablePolicy& current, const StablePolicy& next,
                      const Vec& mid, const Vec& to, double alpha,
                      double v_floor = 1e-6, double t_cap = 100.0);

/// Linear blend from the current to the next policy over the transition
/// window: full weight on `current` at entry, on `next` at exit.
Vec transition_velocity(const StablePolicy& current, const StablePolicy& next,
                        const Vec& x, double elapsed, double duration);

/// Pre-fitted segment policies keyed by vertex id triple and reuse level.
/// Thread safe; counts hits and misses so callers can observe warm reuse.
class SegmentTable {
 public:
  static std::string key(const std::string& a, const std::string& b,
                         const std::string& c, ReuseLevel reuse);

  std::optional<StablePolicy> lookup(const std::string& key) const;
  void insert(const std::string& key, StablePolicy policy);

  std::size_t size() const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

  std::map<std::string, StablePolicy> snapshot() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, StablePolicy> entries_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

/// Sequenced hybrid automaton: policies f_1..f_N with trigger/timer
/// transitions and interpolated dynamics between them.
struct DSChain {
  std::vector<StablePolicy> policies;
  std::vector<TriggerAnchors> triggers;  // N-1
  std::vector<double> timers;            // N-1
  double alpha = 0.5;
  Vec goal;
  bool has_initial_policy = false;
  ReuseLevel reuse = ReuseLevel::NoReuse;

  std::vector<std::string> sigma_ids;
  std::vector<bool> sigma_reversed;

  // Velocity-error evaluation plan: each synthesis point with the chain
  // policy (or equal mix of two policies around a handover vertex) that
  // owns it.
  struct RmsePoint {
    ReferencePoint point;
    int policy_a = 0;
    int policy_b = -1;
  };
  std::vector<RmsePoint> rmse_plan;

  int policy_count() const { return static_cast<int>(policies.size()); }
};

/// Automaton mode: even = nominal state s_{i+1} (policy i active),
/// odd = intermediate state s'_{i+1} (transition i active).
struct ChainExecState {
  int mode = 0;
  double entry_time = 0.0;

  bool nominal() const { return mode % 2 == 0; }
  int index() const { return mode / 2; }
};

/// Pure transition logic: advances the automaton through any trigger or
/// expired-timer transitions (possibly several at once when timers are
/// zero) without computing a velocity.
ChainExecState advance_mode(const DSChain& chain, const ChainExecState& state,
                            const Vec& x, double t);

/// One control-rate evaluation: advances the automaton and returns the
/// commanded velocity.
std::pair<Vec, ChainExecState> step_chain(const DSChain& chain,
                                          const ChainExecState& state,
                                          const Vec& x, double t);

struct ChainBuildOptions {
  double alpha = 0.5;
  ReuseLevel reuse = ReuseLevel::NoReuse;
  std::uint64_t seed = 0;
  // Prepend the optional f_0 (GAS at the first vertex) when a start is
  // given. Off by default: a single-vertex fit sees through-flowing data
  // whose best stable compromise can be arbitrarily slow.
  bool include_initial_policy = false;
  double v_floor = -1.0;  // <=0: 1e-6 * workspace diagonal
  double t_cap = 100.0;
  SegmentTable* table = nullptr;
  GmmOptions gmm;
  DsFitOptions ds;
};

/// Builds a GAS DS-Chain along a shortest-path vertex sequence: one policy
/// per overlapping vertex triplet, a final policy on the last two vertices
/// GAS at the goal, and optionally an initial policy toward the first
/// vertex.
DSChain build_chain(const GaussianGraph& graph, const std::vector<int>& sigma,
                    const std::optional<Vec>& start, const Vec& goal,
                    const DemonstrationSet& set, const ChainBuildOptions& opts);

/// Eagerly fits every realizable triplet (edge followed by edge) into the
/// table. Bounded by edge count times maximum out-degree.
void precompute_segment_table(const GaussianGraph& graph, ReuseLevel reuse,
                              const DemonstrationSet& set, SegmentTable& table,
                              const ChainBuildOptions& opts);

/// Fits just the triplets of one vertex sequence into the table; used to
/// shift segment fitting into an offline phase.
void warm_segment_table(const GaussianGraph& graph,
                        const std::vector<int>& sigma,
                        const DemonstrationSet& set, SegmentTable& table,
                        const ChainBuildOptions& opts);

struct GasCriteriaReport {
  bool dynamics_bounded = false;
  bool triggers_fire = false;
  bool timers_finite = false;
  bool final_policy_gas = false;
  std::vector<double> trigger_times;

  bool all() const {
    return dynamics_bounded && triggers_fire && timers_finite && final_policy_gas;
  }
};

struct GasVerifyOptions {
  double dt = 0.01;
  double time_budget = 1000.0;
};

/// Checks the four chain convergence criteria: bounded (stable) dynamics,
/// finite-time triggers (by rollout), finite timers, and a final policy
/// GAS at the goal.
GasCriteriaReport verify_gas_criteria(const DSChain& chain,
                                      const GasVerifyOptions& opts = {});

}  // namespace dsstitch
