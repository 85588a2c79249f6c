#pragma once

#include <vector>

#include "dsstitch/chaining.hpp"
#include "dsstitch/dataset.hpp"
#include "dsstitch/lpvds.hpp"

namespace dsstitch {

/// Inter-trajectory nearest-neighbor calibration of the data-support
/// score, plus the flattened reference cloud for queries.
struct SupportStats {
  double mu = 0.0;     // mean nearest-other-trajectory distance
  double sigma = 0.0;  // standard deviation of the same
  bool degenerate = false;
  Mat reference;  // d x N reference positions

  /// Distance from q to the nearest reference point.
  double nearest_distance(const Vec& q) const;
};

SupportStats compute_support_stats(const DemonstrationSet& set);

struct DataSupportResult {
  double value = 0.0;
  bool degenerate_stats = false;
};

/// Mean per-point support score of a trajectory: 1 inside the calibrated
/// band, Gaussian tail beyond it. `stride` subsamples long rollouts.
DataSupportResult data_support(const std::vector<Vec>& trajectory,
                               const SupportStats& stats, int stride = 1);

/// Root mean squared error between the policy velocity and the reference
/// velocities at the given points.
double velocity_rmse(const StablePolicy& policy,
                     const std::vector<ReferencePoint>& points);

/// Chain variant: each point is evaluated under the policy that owns its
/// vertex, with handover vertices mixing the two adjacent policies equally.
double velocity_rmse(const DSChain& chain);

}  // namespace dsstitch
