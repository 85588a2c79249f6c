#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace dsstitch {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One position-velocity sample of a reference trajectory.
struct ReferencePoint {
  Vec position;
  Vec velocity;

  ReferencePoint() = default;
  ReferencePoint(Vec p, Vec v) : position(std::move(p)), velocity(std::move(v)) {}
};

/// Axis-aligned bounding box of a point cloud.
struct BoundingBox {
  Vec lo;
  Vec hi;

  double diagonal() const { return (hi - lo).norm(); }
  Vec center() const { return 0.5 * (lo + hi); }

  void extend(const Vec& p) {
    if (lo.size() == 0) {
      lo = p;
      hi = p;
      return;
    }
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
};

inline BoundingBox bounding_box(const std::vector<ReferencePoint>& pts) {
  BoundingBox box;
  for (const auto& p : pts) box.extend(p.position);
  return box;
}

}  // namespace dsstitch
