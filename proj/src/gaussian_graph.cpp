#include "dsstitch/gaussian_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "dsstitch/errors.hpp"

namespace dsstitch {

namespace {

constexpr double kPdfFloor = 1e-12;
constexpr double kDistFloor = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Rebuilds the full adjacency from the edge criteria: cos(phi_ij) > 0 and
// BC(i, j) > eta_bc. Exactly coincident centers leave the angle undefined
// and produce no edge.
void recompute_edges(GaussianGraph& graph) {
  const int n = graph.vertex_count();
  graph.adjacency.assign(n, {});
  Mat bc = Mat::Ones(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      bc(i, j) = bc(j, i) = bhattacharyya_coefficient(
          graph.vertices[i].component, graph.vertices[j].component);
    }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!(bc(i, j) > graph.params.eta_bc)) continue;
      const Vec delta =
          graph.vertices[j].component.mean - graph.vertices[i].component.mean;
      const double cos_phi = direction_cosine(graph.vertices[i].direction, delta);
      if (!(cos_phi > 0.0)) continue;
      graph.adjacency[i].emplace_back(
          j, edge_weight_value(delta.norm(), cos_phi, graph.params));
    }
  }
}

struct DijkstraResult {
  std::vector<double> dist;
  std::vector<int> parent;
};

// Deterministic Dijkstra over an explicit adjacency; ties in the queue are
// broken by vertex index.
DijkstraResult dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj,
                        int source) {
  const int n = static_cast<int>(adj.size());
  DijkstraResult result;
  result.dist.assign(n, kInf);
  result.parent.assign(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  result.dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > result.dist[u]) continue;
    for (const auto& [v, w] : adj[u]) {
      const double cand = d + w;
      if (cand < result.dist[v]) {
        result.dist[v] = cand;
        result.parent[v] = u;
        queue.emplace(cand, v);
      }
    }
  }
  return result;
}

}  // namespace

std::size_t GaussianGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& out : adjacency) n += out.size();
  return n;
}

std::optional<double> GaussianGraph::edge_weight(int from, int to) const {
  for (const auto& [v, w] : adjacency[from])
    if (v == to) return w;
  return std::nullopt;
}

int GaussianGraph::max_out_degree() const {
  std::size_t best = 0;
  for (const auto& out : adjacency) best = std::max(best, out.size());
  return static_cast<int>(best);
}

int GaussianGraph::find_vertex(const std::string& id) const {
  for (int i = 0; i < vertex_count(); ++i)
    if (vertices[i].id() == id) return i;
  return -1;
}

double edge_weight_value(double distance, double cos_phi,
                         const GraphParams& params) {
  return std::pow(std::max(distance, kDistFloor), params.eta_dist) /
         std::pow(cos_phi, params.eta_dir);
}

double direction_cosine(const Vec& direction, const Vec& displacement) {
  const double nd = direction.norm();
  const double nx = displacement.norm();
  if (nd < 1e-12 || nx < 1e-12) return 0.0;
  return direction.dot(displacement) / (nd * nx);
}

GaussianGraph build_graph(const std::vector<PolicyRef>& policies,
                          const GraphParams& params) {
  if (policies.empty()) throw ValidationError("build_graph: no policies");
  GaussianGraph graph;
  graph.params = params;
  for (const auto& ref : policies) {
    const auto& policy = *ref.policy;
    const auto& mixture = *ref.mixture;
    for (int k = 0; k < policy.component_count(); ++k) {
      GraphVertex v;
      v.component = policy.components[k];
      v.dynamics = policy.dynamics[k];
      v.direction = v.dynamics * (v.component.mean - policy.attractor);
      v.source = {ref.demo_id, k};
      v.reversed = false;
      for (std::size_t i = 0; i < mixture.assignments.size(); ++i)
        if (mixture.assignments[i] == k) v.cluster.push_back(i);
      graph.vertices.push_back(std::move(v));
    }
  }
  recompute_edges(graph);
  return graph;
}

GaussianGraph expand_bidirectional(const GaussianGraph& graph,
                                   const DemonstrationSet& set) {
  GaussianGraph out;
  out.params = graph.params;
  out.vertices = graph.vertices;
  for (const auto& v : graph.vertices) {
    if (v.reversed) continue;
    if (!set.by_id(v.source.demo_id).bidirectional) continue;
    GraphVertex r = v;
    r.dynamics = -v.dynamics;
    r.direction = -v.direction;
    r.reversed = true;
    out.vertices.push_back(std::move(r));
  }
  recompute_edges(out);
  return out;
}

GaussianGraph reduce_graph(const GaussianGraph& graph) {
  const int n = graph.vertex_count();
  GaussianGraph out;
  out.params = graph.params;
  out.vertices = graph.vertices;
  out.adjacency.assign(n, {});
  for (int i = 0; i < n; ++i) {
    const DijkstraResult sp = dijkstra(graph.adjacency, i);
    for (const auto& [j, w] : graph.adjacency[i])
      if (!(sp.dist[j] < w)) out.adjacency[i].emplace_back(j, w);
  }
  return out;
}

EndpointAttachment attach_endpoints(const GaussianGraph& graph,
                                    const std::optional<Vec>& start,
                                    const Vec& goal) {
  if (!goal.allFinite()) throw ValidationError("attach_endpoints: bad goal");
  if (start && !start->allFinite())
    throw ValidationError("attach_endpoints: bad start");
  EndpointAttachment att;
  att.graph = &graph;
  att.start = start;
  att.goal = goal;
  for (int j = 0; j < graph.vertex_count(); ++j) {
    const auto& v = graph.vertices[j];
    const Vec delta = goal - v.component.mean;
    // A goal sitting exactly on a component center counts as aligned.
    const double cos_phi =
        delta.norm() < kDistFloor ? 1.0 : direction_cosine(v.direction, delta);
    if (!(cos_phi > 0.0)) continue;
    const double base = edge_weight_value(delta.norm(), cos_phi, graph.params);
    const double support = std::max(gaussian_pdf(v.component, goal), kPdfFloor);
    att.goal_edges.emplace_back(j, base / support);
  }
  if (att.goal_edges.empty())
    throw NoGoalEdges("attach_endpoints: no vertex direction admits the goal");
  if (start) {
    for (int j = 0; j < graph.vertex_count(); ++j) {
      const auto& v = graph.vertices[j];
      const Vec delta = v.component.mean - *start;
      // The start has no direction of its own; it adopts psi_j.
      const double cos_phi =
          delta.norm() < kDistFloor ? 1.0 : direction_cosine(v.direction, delta);
      if (!(cos_phi > 0.0)) continue;
      const double base = edge_weight_value(delta.norm(), cos_phi, graph.params);
      const double support =
          std::max(gaussian_pdf(v.component, *start), kPdfFloor);
      att.start_edges.emplace_back(j, base / support);
    }
  }
  return att;
}

std::vector<int> shortest_path(const EndpointAttachment& att) {
  if (!att.start)
    throw ValidationError("shortest_path: attachment has no start");
  const GaussianGraph& graph = *att.graph;
  const int n = graph.vertex_count();
  const int start_node = n;
  const int goal_node = n + 1;
  std::vector<std::vector<std::pair<int, double>>> adj = graph.adjacency;
  adj.resize(n + 2);
  for (const auto& [j, w] : att.start_edges) adj[start_node].emplace_back(j, w);
  for (const auto& [j, w] : att.goal_edges) adj[j].emplace_back(goal_node, w);

  const DijkstraResult sp = dijkstra(adj, start_node);
  if (!std::isfinite(sp.dist[goal_node]))
    throw NoPath("shortest_path: goal unreachable from start");
  std::vector<int> path;
  for (int v = sp.parent[goal_node]; v != -1 && v != start_node;
       v = sp.parent[v])
    path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<double> distances_to_goal(const EndpointAttachment& att) {
  const GaussianGraph& graph = *att.graph;
  const int n = graph.vertex_count();
  const int goal_node = n;
  // Reverse every edge and run Dijkstra from the goal.
  std::vector<std::vector<std::pair<int, double>>> radj(n + 1);
  for (int i = 0; i < n; ++i)
    for (const auto& [j, w] : graph.adjacency[i]) radj[j].emplace_back(i, w);
  for (const auto& [j, w] : att.goal_edges) radj[goal_node].emplace_back(j, w);
  DijkstraResult sp = dijkstra(radj, goal_node);
  sp.dist.resize(n);
  return sp.dist;
}

std::vector<int> shortest_path_tree(const EndpointAttachment& att) {
  const GaussianGraph& graph = *att.graph;
  const std::vector<double> dist = distances_to_goal(att);
  const int n = graph.vertex_count();
  std::vector<bool> keep(n, false);
  for (int i = 0; i < n; ++i) keep[i] = std::isfinite(dist[i]);

  // Of each forward/reversed pair, retain only the shorter path to the
  // goal; ties keep the forward vertex.
  for (int i = 0; i < n; ++i) {
    if (!keep[i] || graph.vertices[i].reversed) continue;
    for (int j = 0; j < n; ++j) {
      if (!keep[j] || !graph.vertices[j].reversed) continue;
      if (!(graph.vertices[j].source == graph.vertices[i].source)) continue;
      if (dist[j] < dist[i])
        keep[i] = false;
      else
        keep[j] = false;
    }
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (keep[i]) out.push_back(i);
  if (out.empty())
    throw NoGoalEdges("shortest_path_tree: nothing reaches the goal");
  return out;
}

}  // namespace dsstitch
