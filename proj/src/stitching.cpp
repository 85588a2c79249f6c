#include "dsstitch/stitching.hpp"

#include <algorithm>

#include "dsstitch/errors.hpp"

namespace dsstitch {

std::string to_string(ReuseLevel level) {
  return level == ReuseLevel::NoReuse ? "all" : "ds";
}

CollectedData collect_filtered_data(const GaussianGraph& graph,
                                    const std::vector<int>& sigma,
                                    const DemonstrationSet& set) {
  if (sigma.empty()) throw EmptySelection("collect_filtered_data: empty sigma");
  CollectedData out;
  for (std::size_t s = 0; s < sigma.size(); ++s) {
    const GraphVertex& v = graph.vertices[sigma[s]];
    const auto flat = set.by_id(v.source.demo_id).flattened();
    for (std::size_t idx : v.cluster) {
      if (idx >= flat.size())
        throw ValidationError("collect_filtered_data: cluster index out of range");
      ReferencePoint p = flat[idx];
      if (v.reversed) p.velocity = -p.velocity;
      out.points.push_back(std::move(p));
      out.vertex_of_point.push_back(static_cast<int>(s));
    }
  }
  if (out.points.empty())
    throw EmptySelection("collect_filtered_data: selection has no points");
  return out;
}

namespace {

StitchResult finish(const GaussianGraph& graph, const std::vector<int>& sigma,
                    StablePolicy policy, FitReport report, CollectedData data) {
  StitchResult result;
  result.policy = std::move(policy);
  result.report = std::move(report);
  result.data = std::move(data);
  for (int v : sigma) {
    result.sigma_ids.push_back(graph.vertices[v].id());
    result.sigma_reversed.push_back(graph.vertices[v].reversed);
  }
  return result;
}

}  // namespace

StitchResult stitch_no_reuse(const GaussianGraph& graph,
                             const StitchRequest& req,
                             const DemonstrationSet& set, std::uint64_t seed,
                             const StitchOptions& opts) {
  CollectedData data = collect_filtered_data(graph, req.sigma, set);
  const int k_max =
      std::max(1, std::min<int>(static_cast<int>(req.sigma.size()), opts.k_cap));
  LpvdsResult fit =
      fit_lpvds(data.points, req.goal, k_max, seed, opts.gmm, opts.ds);
  return finish(graph, req.sigma, std::move(fit.policy), std::move(fit.report),
                std::move(data));
}

StitchResult stitch_reuse_gaussians(const GaussianGraph& graph,
                                    const StitchRequest& req,
                                    const DemonstrationSet& set,
                                    const StitchOptions& opts) {
  CollectedData data = collect_filtered_data(graph, req.sigma, set);
  MixtureFit mixture;
  double prior_sum = 0.0;
  for (int v : req.sigma) {
    mixture.components.push_back(graph.vertices[v].component);
    prior_sum += mixture.components.back().prior;
  }
  for (auto& c : mixture.components) c.prior /= prior_sum;
  mixture.assignments = data.vertex_of_point;
  auto [policy, report] =
      fit_ds_given_gmm(mixture, data.points, req.goal, opts.ds);
  return finish(graph, req.sigma, std::move(policy), std::move(report),
                std::move(data));
}

}  // namespace dsstitch
