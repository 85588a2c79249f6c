#pragma once

#include <optional>
#include <vector>

#include "dsstitch/chaining.hpp"
#include "dsstitch/lpvds.hpp"

namespace dsstitch {

struct SimulationOptions {
  double dt = 0.01;
  double t_max = 1000.0;
  double eps_goal = 1e-2;
  double v_max = 1e9;  // per-step speed cap
};

struct SimulationResult {
  std::vector<double> times;
  std::vector<Vec> positions;
  std::vector<Vec> velocities;
  bool success = false;
  std::optional<double> time_to_goal;
  // Chain runs also record (sample index, mode) at every mode change.
  std::vector<std::pair<std::size_t, int>> mode_transitions;

  std::size_t size() const { return times.size(); }
};

/// Explicit Euler rollout of a stable policy toward its attractor.
SimulationResult simulate(const StablePolicy& policy, const Vec& start,
                          const SimulationOptions& opts);

/// Explicit Euler rollout of a DS-Chain toward its goal, with the
/// automaton advanced at every step.
SimulationResult simulate(const DSChain& chain, const Vec& start,
                          const SimulationOptions& opts);

/// True when the recorded mode trace never moves backwards.
bool mode_trace_monotone(const SimulationResult& result);

}  // namespace dsstitch
