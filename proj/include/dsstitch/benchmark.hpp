#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsstitch/gaussian_graph.hpp"
#include "dsstitch/metrics.hpp"
#include "dsstitch/simulation.hpp"
#include "dsstitch/stitching.hpp"

namespace dsstitch {

/// A pooled task anchor: a demonstration attractor or a (merged)
/// trajectory start position.
struct Endpoint {
  Vec position;
  int demo_index = 0;
  bool is_attractor = false;
};

/// Attractors plus distinct trajectory starts of every demonstration;
/// starts of the same demonstration closer than merge_tol_rel times the
/// dataset diagonal collapse to their mean.
std::vector<Endpoint> pooled_endpoints(const DemonstrationSet& set,
                                       double merge_tol_rel = 0.05);

struct BenchInstance {
  int id = 0;
  int start_index = 0;
  int goal_index = 0;
  bool cross_demo = false;
};

/// All ordered pairs of distinct pooled endpoints: n * (n - 1) instances.
std::vector<BenchInstance> make_instances(const std::vector<Endpoint>& endpoints);

enum class Method {
  BaselineAll,
  BaselineDs,
  StitchSpAll,
  StitchSpDs,
  StitchSptAll,
  StitchSptDs,
  ChainAll,
  ChainDs,
};

std::string to_string(Method method);
std::optional<Method> parse_method(const std::string& name);
std::vector<Method> all_methods();

struct BenchParams {
  GraphParams graph;
  double alpha = 0.5;
  double dt = 0.01;
  double t_max = 1000.0;
  // Goal tolerance as a fraction of the dataset bounding-box diagonal.
  double eps_goal_rel = 0.01;
  // Rollout speed cap as a multiple of the mean demonstration speed.
  double v_max_factor = 10.0;
  int learn_k_max = 6;
  int stitch_k_cap = 8;
  int baseline_k_max = 6;
  int support_stride = 10;
  int jobs = 1;
};

struct InstanceRecord {
  int instance = 0;
  int start_index = 0;
  int goal_index = 0;
  bool cross_demo = false;
  Method method = Method::BaselineAll;
  std::uint64_t seed = 0;
  bool success = false;
  double rmse = 0.0;
  double support = 0.0;
  double time_to_goal = 0.0;  // simulated seconds; NaN on failure
  bool mode_monotone = true;  // chains only; true otherwise
  bool gas_ok = true;         // chains only; true otherwise
  double synth_seconds = 0.0;
  double sim_seconds = 0.0;
  std::string failure;
};

struct MetricsRow {
  std::string method_id;
  double success_rate = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
  double support_mean = 0.0, support_std = 0.0;
  double synth_mean = 0.0, synth_std = 0.0;
  int successes = 0;
  int total = 0;
};

struct BenchResult {
  std::vector<Endpoint> endpoints;
  std::vector<BenchInstance> instances;
  std::vector<InstanceRecord> records;
  double offline_seconds = 0.0;

  /// Per-method aggregate over all records; metric means cover successful
  /// runs only. `cross_demo_only` restricts to instances whose start and
  /// goal come from different demonstrations.
  std::vector<MetricsRow> aggregate(bool cross_demo_only = false) const;
};

/// Full pairwise benchmark: per seed, learns per-demo policies, builds the
/// graph, prewarms chain segment tables (offline), then times synthesis
/// and rollout per method and instance.
BenchResult run_benchmark(const DemonstrationSet& set,
                          const std::vector<Method>& methods,
                          const std::vector<std::uint64_t>& seeds,
                          const BenchParams& params);

void write_results_csv(const BenchResult& result, const std::string& path);
void write_aggregate_csv(const BenchResult& result, const std::string& path);
void write_timings_csv(const BenchResult& result, const std::string& path);

}  // namespace dsstitch
