#include "dsstitch/chaining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsstitch/errors.hpp"

namespace dsstitch {

bool trigger_fired(const Vec& from, const Vec& mid, const Vec& to, const Vec& x) {
  // |x-from| / |x-to| >= |mid-from| / |mid-to|, cross-multiplied.
  const double lhs = (x - from).norm() * (mid - to).norm();
  const double rhs = (mid - from).norm() * (x - to).norm();
  return lhs >= rhs;
}

double timer_duration(const StablePolicy& current, const StablePolicy& next,
                      const Vec& mid, const Vec& to, double alpha,
                      double v_floor, double t_cap) {
  if (alpha == 0.0) return 0.0;
  const double avg_speed =
      0.5 * (evaluate(current, mid) + evaluate(next, mid)).norm();
  if (avg_speed < v_floor) return t_cap;
  return alpha * (to - mid).norm() / avg_speed;
}

Vec transition_velocity(const StablePolicy& current, const StablePolicy& next,
                        const Vec& x, double elapsed, double duration) {
  const double s =
      duration <= 0.0 ? 1.0 : std::min(elapsed / duration, 1.0);
  if (s >= 1.0) return evaluate(next, x);
  return (1.0 - s) * evaluate(current, x) + s * evaluate(next, x);
}

std::string SegmentTable::key(const std::string& a, const std::string& b,
                              const std::string& c, ReuseLevel reuse) {
  return a + "|" + b + "|" + c + "|" + to_string(reuse);
}

std::optional<StablePolicy> SegmentTable::lookup(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  return it->second;
}

void SegmentTable::insert(const std::string& key, StablePolicy policy) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_.insert_or_assign(key, std::move(policy));
}

std::size_t SegmentTable::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

std::map<std::string, StablePolicy> SegmentTable::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_;
}

ChainExecState advance_mode(const DSChain& chain, const ChainExecState& state,
                            const Vec& x, double t) {
  const int n = chain.policy_count();
  ChainExecState st = state;
  for (;;) {
    if (st.nominal()) {
      const int i = st.index();
      if (i < n - 1 && trigger_fired(chain.triggers[i].from, chain.triggers[i].mid,
                                     chain.triggers[i].to, x)) {
        st.mode = 2 * i + 1;
        st.entry_time = t;
        continue;
      }
      break;
    }
    const int i = st.index();
    if (t - st.entry_time >= chain.timers[i]) {
      st.mode = 2 * (i + 1);
      st.entry_time = t;
      continue;
    }
    break;
  }
  return st;
}

std::pair<Vec, ChainExecState> step_chain(const DSChain& chain,
                                          const ChainExecState& state,
                                          const Vec& x, double t) {
  const ChainExecState st = advance_mode(chain, state, x, t);
  Vec velocity;
  if (st.nominal()) {
    velocity = evaluate(chain.policies[st.index()], x);
  } else {
    const int i = st.index();
    velocity = transition_velocity(chain.policies[i], chain.policies[i + 1], x,
                                   t - st.entry_time, chain.timers[i]);
  }
  return {std::move(velocity), st};
}

namespace {

void check_reversal_conflict(const GaussianGraph& graph,
                             const std::vector<int>& window) {
  for (std::size_t a = 0; a < window.size(); ++a)
    for (std::size_t b = a + 1; b < window.size(); ++b) {
      const auto& va = graph.vertices[window[a]];
      const auto& vb = graph.vertices[window[b]];
      if (va.source == vb.source && va.reversed != vb.reversed)
        throw SegmentReversalConflict(
            "segment contains a vertex and its reversal: " + va.id());
    }
}

// Fits one chain policy on the data of `vertices`, GAS at `attractor`.
// When `drop_around_last` is set, reference points of the final vertex
// that lie farther than l from the middle vertex yet closer than 0.1 l to
// the target are discarded (l = distance between the last two vertices).
StablePolicy fit_chain_policy(const GaussianGraph& graph,
                              const std::vector<int>& vertices,
                              const Vec& attractor, bool drop_around_last,
                              const DemonstrationSet& set,
                              const ChainBuildOptions& opts) {
  CollectedData data = collect_filtered_data(graph, vertices, set);
  if (drop_around_last && vertices.size() >= 2) {
    const int last = static_cast<int>(vertices.size()) - 1;
    const Vec& mu_mid = graph.vertices[vertices[last - 1]].component.mean;
    const Vec& mu_last = graph.vertices[vertices[last]].component.mean;
    const double l = (mu_last - mu_mid).norm();
    CollectedData kept;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
      const auto& p = data.points[i];
      const bool drop = data.vertex_of_point[i] == last &&
                        (p.position - mu_mid).norm() > l &&
                        (p.position - mu_last).norm() < 0.1 * l;
      if (drop) continue;
      kept.points.push_back(p);
      kept.vertex_of_point.push_back(data.vertex_of_point[i]);
    }
    data = std::move(kept);
  }

  if (opts.reuse == ReuseLevel::ReuseGaussians) {
    MixtureFit mixture;
    double prior_sum = 0.0;
    for (int v : vertices) {
      mixture.components.push_back(graph.vertices[v].component);
      prior_sum += mixture.components.back().prior;
    }
    for (auto& c : mixture.components) c.prior /= prior_sum;
    mixture.assignments = data.vertex_of_point;
    return fit_ds_given_gmm(mixture, data.points, attractor, opts.ds).first;
  }
  const int k_max = static_cast<int>(vertices.size());
  return fit_lpvds(data.points, attractor, k_max, opts.seed, opts.gmm, opts.ds)
      .policy;
}

StablePolicy segment_policy(const GaussianGraph& graph, int a, int b, int c,
                            const DemonstrationSet& set,
                            const ChainBuildOptions& opts) {
  check_reversal_conflict(graph, {a, b, c});
  const auto fit = [&] {
    return fit_chain_policy(graph, {a, b, c},
                            graph.vertices[c].component.mean,
                            /*drop_around_last=*/true, set, opts);
  };
  if (opts.table == nullptr) return fit();
  const std::string key = SegmentTable::key(
      graph.vertices[a].id(), graph.vertices[b].id(), graph.vertices[c].id(),
      opts.reuse);
  if (auto cached = opts.table->lookup(key)) return *cached;
  StablePolicy policy = fit();
  opts.table->insert(key, policy);
  return policy;
}

}  // namespace

DSChain build_chain(const GaussianGraph& graph, const std::vector<int>& sigma,
                    const std::optional<Vec>& start, const Vec& goal,
                    const DemonstrationSet& set,
                    const ChainBuildOptions& opts) {
  if (sigma.empty()) throw EmptySelection("build_chain: empty sigma");
  const int m = static_cast<int>(sigma.size());
  const bool with_initial = start.has_value() && opts.include_initial_policy;

  DSChain chain;
  chain.alpha = opts.alpha;
  chain.goal = goal;
  chain.has_initial_policy = with_initial;
  chain.reuse = opts.reuse;
  for (int v : sigma) {
    chain.sigma_ids.push_back(graph.vertices[v].id());
    chain.sigma_reversed.push_back(graph.vertices[v].reversed);
  }

  const Vec mu_first = graph.vertices[sigma[0]].component.mean;
  if (with_initial) {
    chain.policies.push_back(fit_chain_policy(graph, {sigma[0]}, mu_first,
                                              false, set, opts));
    TriggerAnchors t;
    t.from = *start;
    t.mid = 0.5 * (*start + mu_first);
    t.to = mu_first;
    chain.triggers.push_back(std::move(t));
  }

  if (m >= 3) {
    for (int i = 0; i + 2 < m; ++i) {
      chain.policies.push_back(segment_policy(graph, sigma[i], sigma[i + 1],
                                              sigma[i + 2], set, opts));
      TriggerAnchors t;
      t.from = graph.vertices[sigma[i]].component.mean;
      t.mid = graph.vertices[sigma[i + 1]].component.mean;
      t.to = graph.vertices[sigma[i + 2]].component.mean;
      chain.triggers.push_back(std::move(t));
    }
    check_reversal_conflict(
        graph, {sigma[m - 2], sigma[m - 1]});  // final policy's vertex pair
    chain.policies.push_back(fit_chain_policy(
        graph, {sigma[m - 2], sigma[m - 1]}, goal, false, set, opts));
  } else {
    // Degenerate paths skip segmentation: a single final policy over the
    // selected vertices, GAS at the goal.
    std::vector<int> rest(sigma.begin(), sigma.end());
    check_reversal_conflict(graph, rest);
    chain.policies.push_back(
        fit_chain_policy(graph, rest, goal, false, set, opts));
  }

  const double v_floor = opts.v_floor > 0.0
                             ? opts.v_floor
                             : 1e-6 * std::max(set.bbox().diagonal(), 1e-9);
  chain.timers.reserve(chain.triggers.size());
  for (std::size_t i = 0; i < chain.triggers.size(); ++i)
    chain.timers.push_back(timer_duration(
        chain.policies[i], chain.policies[i + 1], chain.triggers[i].mid,
        chain.triggers[i].to, opts.alpha, v_floor, opts.t_cap));

  // Velocity-error plan: each vertex's points belong to the policy active
  // around it; handover vertices mix the incoming and outgoing policies.
  const int base = with_initial ? 1 : 0;
  const int seg_count = std::max(m - 2, 0);
  const int final_index = base + seg_count;
  for (int m0 = 0; m0 < m; ++m0) {
    int policy_a, policy_b;
    if (m >= 3) {
      if (m0 == 0) {
        policy_a = base;
        policy_b = with_initial ? 0 : -1;
      } else if (m0 <= m - 2) {
        policy_a = base + m0 - 1;
        policy_b = base + m0;
      } else {
        policy_a = final_index;
        policy_b = -1;
      }
    } else {
      policy_a = final_index;
      policy_b = (m0 == 0 && with_initial) ? 0 : -1;
    }
    const GraphVertex& v = graph.vertices[sigma[m0]];
    const auto flat = set.by_id(v.source.demo_id).flattened();
    for (std::size_t idx : v.cluster) {
      DSChain::RmsePoint rp;
      rp.point = flat[idx];
      if (v.reversed) rp.point.velocity = -rp.point.velocity;
      rp.policy_a = policy_a;
      rp.policy_b = policy_b;
      chain.rmse_plan.push_back(std::move(rp));
    }
  }
  return chain;
}

void precompute_segment_table(const GaussianGraph& graph, ReuseLevel reuse,
                              const DemonstrationSet& set, SegmentTable& table,
                              const ChainBuildOptions& opts) {
  ChainBuildOptions local = opts;
  local.reuse = reuse;
  local.table = &table;
  for (int i = 0; i < graph.vertex_count(); ++i) {
    for (const auto& [j, wij] : graph.adjacency[i]) {
      for (const auto& [k, wjk] : graph.adjacency[j]) {
        if (k == i) continue;
        try {
          segment_policy(graph, i, j, k, set, local);
        } catch (const SegmentReversalConflict&) {
          // such a triplet can never appear in a valid chain
        }
      }
    }
  }
}

void warm_segment_table(const GaussianGraph& graph,
                        const std::vector<int>& sigma,
                        const DemonstrationSet& set, SegmentTable& table,
                        const ChainBuildOptions& opts) {
  ChainBuildOptions local = opts;
  local.table = &table;
  for (std::size_t i = 0; i + 2 < sigma.size(); ++i)
    segment_policy(graph, sigma[i], sigma[i + 1], sigma[i + 2], set, local);
}

GasCriteriaReport verify_gas_criteria(const DSChain& chain,
                                      const GasVerifyOptions& opts) {
  GasCriteriaReport report;

  report.dynamics_bounded = true;
  for (const auto& p : chain.policies)
    if (!verify_stability(p).pass) report.dynamics_bounded = false;

  report.timers_finite = true;
  for (double t : chain.timers)
    if (!std::isfinite(t) || t < 0.0) report.timers_finite = false;

  const StablePolicy& final_policy = chain.policies.back();
  report.final_policy_gas = verify_stability(final_policy).pass &&
                            (final_policy.attractor - chain.goal).norm() <= 1e-12;

  // Every trigger must fire in finite time under its own policy; each
  // policy is GAS at the trigger's target anchor, so a rollout from the
  // entry anchor must cross the passage ratio within the budget.
  report.triggers_fire = true;
  for (std::size_t i = 0; i < chain.triggers.size(); ++i) {
    const auto& tr = chain.triggers[i];
    const PolicyEvaluator ev(chain.policies[i]);
    Vec x = tr.from;
    double t = 0.0;
    bool fired = trigger_fired(tr.from, tr.mid, tr.to, x);
    while (!fired && t < opts.time_budget) {
      x += opts.dt * ev.velocity(x);
      t += opts.dt;
      fired = trigger_fired(tr.from, tr.mid, tr.to, x);
    }
    report.trigger_times.push_back(fired ? t : std::numeric_limits<double>::infinity());
    if (!fired) report.triggers_fire = false;
  }
  return report;
}

}  // namespace dsstitch
