#include "dsstitch/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "dsstitch/errors.hpp"

namespace dsstitch {

std::size_t Demonstration::point_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.points.size();
  return n;
}

std::vector<ReferencePoint> Demonstration::flattened() const {
  std::vector<ReferencePoint> out;
  out.reserve(point_count());
  for (const auto& t : trajectories)
    out.insert(out.end(), t.points.begin(), t.points.end());
  return out;
}

std::vector<Vec> Demonstration::trajectory_starts() const {
  std::vector<Vec> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories)
    if (!t.points.empty()) out.push_back(t.points.front().position);
  return out;
}

BoundingBox Demonstration::bbox() const {
  BoundingBox box;
  for (const auto& t : trajectories)
    for (const auto& p : t.points) box.extend(p.position);
  return box;
}

const Demonstration& DemonstrationSet::by_id(const std::string& id) const {
  for (const auto& d : demonstrations)
    if (d.id == id) return d;
  throw ValidationError("unknown demonstration id: " + id);
}

BoundingBox DemonstrationSet::bbox() const {
  BoundingBox box;
  for (const auto& d : demonstrations) {
    for (const auto& t : d.trajectories)
      for (const auto& p : t.points) box.extend(p.position);
    box.extend(d.attractor);
  }
  return box;
}

std::size_t DemonstrationSet::point_count() const {
  std::size_t n = 0;
  for (const auto& d : demonstrations) n += d.point_count();
  return n;
}

double DemonstrationSet::mean_speed() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& d : demonstrations)
    for (const auto& t : d.trajectories)
      for (const auto& p : t.points) {
        sum += p.velocity.norm();
        ++n;
      }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

void validate(const Demonstration& demo, const ValidationOptions& opts) {
  if (demo.trajectories.empty())
    throw EmptyDemonstration("demonstration '" + demo.id + "' has no trajectories");
  const int d = demo.dimension();
  if (d < 2)
    throw DimensionMismatch("demonstration '" + demo.id + "' has dimension " +
                            std::to_string(d) + ", need >= 2");
  for (const auto& t : demo.trajectories) {
    if (t.points.size() < 2)
      throw EmptyDemonstration("demonstration '" + demo.id +
                               "' has a trajectory with < 2 points");
    for (const auto& p : t.points) {
      if (p.position.size() != d || p.velocity.size() != d)
        throw DimensionMismatch("demonstration '" + demo.id +
                                "' mixes point dimensions");
      if (!p.position.allFinite() || !p.velocity.allFinite())
        throw ValidationError("demonstration '" + demo.id +
                              "' contains non-finite entries");
    }
  }
  const double tol = opts.attractor_tolerance * std::max(demo.bbox().diagonal(), 1e-12);
  for (const auto& t : demo.trajectories) {
    const double gap = (t.points.back().position - demo.attractor).norm();
    if (gap > tol)
      throw AttractorInconsistent(
          "demonstration '" + demo.id + "': trajectory ends " + std::to_string(gap) +
          " away from the attractor (tolerance " + std::to_string(tol) + ")");
  }
}

void validate(const DemonstrationSet& set, const ValidationOptions& opts) {
  if (set.demonstrations.empty())
    throw EmptyDemonstration("dataset has no demonstrations");
  for (std::size_t i = 0; i < set.demonstrations.size(); ++i) {
    const auto& demo = set.demonstrations[i];
    validate(demo, opts);
    if (demo.dimension() != set.dimension)
      throw DimensionMismatch("demonstration '" + demo.id +
                              "' does not match the dataset dimension");
    for (std::size_t j = i + 1; j < set.demonstrations.size(); ++j)
      if (set.demonstrations[j].id == demo.id)
        throw ValidationError("duplicate demonstration id: " + demo.id);
  }
}

std::vector<Vec> estimate_velocities(const std::vector<Vec>& positions,
                                     const std::vector<double>& timestamps,
                                     int smoothing_window) {
  const std::size_t n = positions.size();
  if (n < 2) throw TooFewPoints("velocity estimation needs at least 2 points");
  if (timestamps.size() != n)
    throw DimensionMismatch("timestamps and positions differ in length");
  for (std::size_t i = 1; i < n; ++i)
    if (!(timestamps[i] > timestamps[i - 1]))
      throw ValidationError("timestamps must be strictly increasing");

  std::vector<Vec> vel(n);
  vel[0] = (positions[1] - positions[0]) / (timestamps[1] - timestamps[0]);
  vel[n - 1] =
      (positions[n - 1] - positions[n - 2]) / (timestamps[n - 1] - timestamps[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    vel[i] = (positions[i + 1] - positions[i - 1]) /
             (timestamps[i + 1] - timestamps[i - 1]);

  if (smoothing_window > 1) {
    const int half = smoothing_window / 2;
    std::vector<Vec> smoothed(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vec acc = Vec::Zero(vel[i].size());
      int count = 0;
      for (int k = -half; k <= half; ++k) {
        const long j = static_cast<long>(i) + k;
        if (j < 0 || j >= static_cast<long>(n)) continue;
        acc += vel[static_cast<std::size_t>(j)];
        ++count;
      }
      smoothed[i] = acc / count;
    }
    vel = std::move(smoothed);
  }
  return vel;
}

}  // namespace dsstitch
