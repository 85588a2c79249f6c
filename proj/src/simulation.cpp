#include "dsstitch/simulation.hpp"

#include <cmath>

#include "dsstitch/errors.hpp"

namespace dsstitch {

namespace {

void check_options(const SimulationOptions& opts) {
  if (!(opts.dt > 0.0)) throw ValidationError("simulate: dt must be > 0");
  if (!(opts.t_max >= opts.dt))
    throw ValidationError("simulate: t_max must be >= dt");
}

Vec capped(Vec v, double v_max) {
  const double n = v.norm();
  if (n > v_max) v *= v_max / n;
  return v;
}

template <typename FieldFn>
SimulationResult rollout(const Vec& start, const Vec& goal, FieldFn&& field,
                         const SimulationOptions& opts) {
  check_options(opts);
  SimulationResult result;
  Vec x = start;
  double t = 0.0;
  const auto steps =
      static_cast<std::size_t>(std::ceil(opts.t_max / opts.dt));
  for (std::size_t step = 0; step <= steps; ++step) {
    if ((x - goal).norm() < opts.eps_goal) {
      result.success = true;
      result.time_to_goal = t;
      result.times.push_back(t);
      result.positions.push_back(x);
      result.velocities.push_back(Vec::Zero(x.size()));
      return result;
    }
    if (step == steps) break;
    const Vec v = capped(field(x, t, result), opts.v_max);
    result.times.push_back(t);
    result.positions.push_back(x);
    result.velocities.push_back(v);
    x += opts.dt * v;
    t += opts.dt;
  }
  result.times.push_back(t);
  result.positions.push_back(x);
  result.velocities.push_back(Vec::Zero(x.size()));
  return result;
}

}  // namespace

SimulationResult simulate(const StablePolicy& policy, const Vec& start,
                          const SimulationOptions& opts) {
  const PolicyEvaluator ev(policy);
  return rollout(
      start, policy.attractor,
      [&ev](const Vec& x, double, SimulationResult&) { return ev.velocity(x); },
      opts);
}

SimulationResult simulate(const DSChain& chain, const Vec& start,
                          const SimulationOptions& opts) {
  std::vector<PolicyEvaluator> evs;
  evs.reserve(chain.policies.size());
  for (const auto& p : chain.policies) evs.emplace_back(p);

  ChainExecState state;
  return rollout(
      start, chain.goal,
      [&](const Vec& x, double t, SimulationResult& partial) {
        const ChainExecState next = advance_mode(chain, state, x, t);
        if (partial.mode_transitions.empty() ||
            partial.mode_transitions.back().second != next.mode)
          partial.mode_transitions.emplace_back(partial.times.size(), next.mode);
        state = next;
        const int i = state.index();
        if (state.nominal()) return evs[i].velocity(x);
        // Same blend as transition_velocity, on the prepared evaluators.
        const double duration = chain.timers[i];
        const double elapsed = t - state.entry_time;
        const double s =
            duration <= 0.0 ? 1.0 : std::min(elapsed / duration, 1.0);
        if (s >= 1.0) return evs[i + 1].velocity(x);
        return Vec((1.0 - s) * evs[i].velocity(x) + s * evs[i + 1].velocity(x));
      },
      opts);
}

bool mode_trace_monotone(const SimulationResult& result) {
  for (std::size_t i = 1; i < result.mode_transitions.size(); ++i)
    if (result.mode_transitions[i].second <=
        result.mode_transitions[i - 1].second)
      return false;
  return true;
}

}  // namespace dsstitch
