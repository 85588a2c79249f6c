#include "dsstitch/metrics.hpp"

#include <cmath>
#include <limits>

#include "dsstitch/errors.hpp"

namespace dsstitch {

double SupportStats::nearest_distance(const Vec& q) const {
  return std::sqrt((reference.colwise() - q).colwise().squaredNorm().minCoeff());
}

SupportStats compute_support_stats(const DemonstrationSet& set) {
  SupportStats stats;
  const int d = set.dimension;
  std::vector<Vec> positions;
  std::vector<int> trajectory_of;
  int traj_id = 0;
  for (const auto& demo : set.demonstrations) {
    for (const auto& traj : demo.trajectories) {
      for (const auto& p : traj.points) {
        positions.push_back(p.position);
        trajectory_of.push_back(traj_id);
      }
      ++traj_id;
    }
  }
  const int n = static_cast<int>(positions.size());
  if (n == 0) throw ValidationError("compute_support_stats: empty dataset");
  stats.reference.resize(d, n);
  for (int i = 0; i < n; ++i) stats.reference.col(i) = positions[i];

  // Nearest neighbor in a *different* trajectory, for every point.
  double sum = 0.0, sum_sq = 0.0;
  int counted = 0;
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (trajectory_of[j] == trajectory_of[i]) continue;
      best = std::min(best, (positions[j] - positions[i]).squaredNorm());
    }
    if (!std::isfinite(best)) continue;  // single-trajectory dataset
    const double dist = std::sqrt(best);
    sum += dist;
    sum_sq += dist * dist;
    ++counted;
  }
  if (counted == 0) {
    stats.degenerate = true;
    return stats;
  }
  stats.mu = sum / counted;
  const double var = std::max(sum_sq / counted - stats.mu * stats.mu, 0.0);
  stats.sigma = std::sqrt(var);
  if (stats.sigma <= 0.0) stats.degenerate = true;
  return stats;
}

DataSupportResult data_support(const std::vector<Vec>& trajectory,
                               const SupportStats& stats, int stride) {
  if (trajectory.empty())
    throw ValidationError("data_support: empty trajectory");
  stride = std::max(stride, 1);
  DataSupportResult result;
  result.degenerate_stats = stats.degenerate;
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < trajectory.size(); i += stride) {
    const double d = stats.nearest_distance(trajectory[i]);
    double score;
    if (d < stats.mu) {
      score = 1.0;
    } else if (stats.degenerate) {
      score = 0.0;  // hard threshold when sigma is unusable
    } else {
      const double z = (d - stats.mu) / stats.sigma;
      score = std::exp(-0.5 * z * z);
    }
    sum += score;
    ++count;
  }
  result.value = sum / count;
  return result;
}

double velocity_rmse(const StablePolicy& policy,
                     const std::vector<ReferencePoint>& points) {
  if (points.empty()) throw EmptySelection("velocity_rmse: no points");
  const PolicyEvaluator ev(policy);
  double acc = 0.0;
  for (const auto& p : points)
    acc += (ev.velocity(p.position) - p.velocity).squaredNorm();
  return std::sqrt(acc / points.size());
}

double velocity_rmse(const DSChain& chain) {
  if (chain.rmse_plan.empty()) throw EmptySelection("velocity_rmse: empty plan");
  std::vector<PolicyEvaluator> evs;
  evs.reserve(chain.policies.size());
  for (const auto& p : chain.policies) evs.emplace_back(p);
  double acc = 0.0;
  for (const auto& entry : chain.rmse_plan) {
    Vec v = evs[entry.policy_a].velocity(entry.point.position);
    if (entry.policy_b >= 0)
      v = 0.5 * (v + evs[entry.policy_b].velocity(entry.point.position));
    acc += (v - entry.point.velocity).squaredNorm();
  }
  return std::sqrt(acc / chain.rmse_plan.size());
}

}  // namespace dsstitch
