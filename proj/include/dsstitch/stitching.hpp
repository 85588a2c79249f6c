#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsstitch/gaussian_graph.hpp"

namespace dsstitch {

enum class ReuseLevel { NoReuse, ReuseGaussians };
enum class GraphMethod { ShortestPath, ShortestPathTree };

std::string to_string(ReuseLevel level);

struct StitchRequest {
  std::vector<int> sigma;  // vertex indices into the graph
  Vec goal;
  ReuseLevel reuse = ReuseLevel::NoReuse;
  GraphMethod method = GraphMethod::ShortestPath;
};

/// Reference points gathered from the clusters of the selected vertices.
/// Velocities of reversed vertices come out negated.
struct CollectedData {
  std::vector<ReferencePoint> points;
  std::vector<int> vertex_of_point;  // index into the sigma ordering
};

CollectedData collect_filtered_data(const GaussianGraph& graph,
                                    const std::vector<int>& sigma,
                                    const DemonstrationSet& set);

struct StitchResult {
  StablePolicy policy;
  FitReport report;
  std::vector<std::string> sigma_ids;
  std::vector<bool> sigma_reversed;
  CollectedData data;
};

struct StitchOptions {
  // Upper bound on the refit mixture size; the BIC search runs over
  // 1..min(|sigma|, k_cap).
  int k_cap = 8;
  GmmOptions gmm;
  DsFitOptions ds;
};

/// Refits both the mixture and the dynamics on the collected data.
StitchResult stitch_no_reuse(const GaussianGraph& graph,
                             const StitchRequest& req,
                             const DemonstrationSet& set, std::uint64_t seed,
                             const StitchOptions& opts = {});

/// Keeps the selected Gaussians (priors renormalized) and refits only the
/// dynamics and the Lyapunov matrix.
StitchResult stitch_reuse_gaussians(const GaussianGraph& graph,
                                    const StitchRequest& req,
                                    const DemonstrationSet& set,
                                    const StitchOptions& opts = {});

}  // namespace dsstitch
