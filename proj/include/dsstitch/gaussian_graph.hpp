#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsstitch/dataset.hpp"
#include "dsstitch/lpvds.hpp"
#include "dsstitch/types.hpp"

namespace dsstitch {

struct VertexSource {
  std::string demo_id;
  int component_index = 0;

  bool operator==(const VertexSource& o) const {
    return demo_id == o.demo_id && component_index == o.component_index;
  }
};

/// A mixture component promoted to a graph vertex, carrying its linear
/// dynamics and the direction psi = A (mu - attractor) the flow takes at
/// the component center.
struct GraphVertex {
  GaussianComponent component;
  Mat dynamics;
  Vec direction;
  VertexSource source;
  bool reversed = false;
  std::vector<std::size_t> cluster;  // flat point indices in the source demo

  std::string id() const {
    return source.demo_id + "#" + std::to_string(source.component_index) +
           (reversed ? "'" : "");
  }
};

struct GraphParams {
  double eta_bc = 0.05;
  double eta_dist = 2.0;
  double eta_dir = 1.0;
};

struct GaussianGraph {
  std::vector<GraphVertex> vertices;
  // adjacency[i] = outgoing (target, weight) pairs, sorted by target.
  std::vector<std::vector<std::pair<int, double>>> adjacency;
  GraphParams params;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  std::size_t edge_count() const;
  std::optional<double> edge_weight(int from, int to) const;
  int max_out_degree() const;
  int find_vertex(const std::string& id) const;
};

/// Start/goal vertices attached to a built graph. The goal has only
/// incoming edges, the start only outgoing ones.
struct EndpointAttachment {
  const GaussianGraph* graph = nullptr;
  std::optional<Vec> start;
  Vec goal;
  std::vector<std::pair<int, double>> start_edges;  // (vertex, weight)
  std::vector<std::pair<int, double>> goal_edges;   // (vertex, weight)
};

struct PolicyRef {
  const StablePolicy* policy = nullptr;
  const MixtureFit* mixture = nullptr;
  std::string demo_id;
};

/// Edge weight of the graph: distance^eta_dist / cos^eta_dir, with the
/// distance clamped at 1e-9 so coincident centers stay finite.
double edge_weight_value(double distance, double cos_phi,
                         const GraphParams& params);

/// Cosine between a direction and a displacement; zero-norm inputs give 0
/// (no edge can use them).
double direction_cosine(const Vec& direction, const Vec& displacement);

GaussianGraph build_graph(const std::vector<PolicyRef>& policies,
                          const GraphParams& params);

/// Adds reversed counterparts (A' = -A, psi' = -psi) for every vertex of a
/// bidirectional demonstration, then recomputes all edges.
GaussianGraph expand_bidirectional(const GaussianGraph& graph,
                                   const DemonstrationSet& set);

/// Drops every edge strictly beaten by an alternative path. All-pairs
/// shortest distances are unchanged.
GaussianGraph reduce_graph(const GaussianGraph& graph);

EndpointAttachment attach_endpoints(const GaussianGraph& graph,
                                    const std::optional<Vec>& start,
                                    const Vec& goal);

/// Interior vertices of the minimal-weight start-to-goal path (endpoints
/// excluded). Deterministic tie-breaking.
std::vector<int> shortest_path(const EndpointAttachment& att);

/// All vertices with a finite-weight path to the goal, with the longer
/// member of each forward/reversed pair pruned (ties keep the forward one).
std::vector<int> shortest_path_tree(const EndpointAttachment& att);

/// Distance of every vertex to the goal vertex (infinity if unreachable).
std::vector<double> distances_to_goal(const EndpointAttachment& att);

}  // namespace dsstitch
