#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsstitch/types.hpp"

namespace dsstitch {

/// One recorded trajectory: ordered position-velocity samples.
struct Trajectory {
  std::vector<ReferencePoint> points;
  std::vector<double> timestamps;  // same length as points when present
  // Set when velocities were reconstructed by finite differences rather
  // than read from the source file.
  bool velocities_estimated = false;
};

/// A demonstration aggregates the trajectories of one task region,
/// all ending at a common attractor.
struct Demonstration {
  std::string id;
  std::vector<Trajectory> trajectories;
  Vec attractor;
  bool bidirectional = false;

  int dimension() const { return static_cast<int>(attractor.size()); }
  std::size_t point_count() const;

  /// All points of all trajectories, concatenated in file order.
  /// Flat indices into this sequence identify points elsewhere (clusters).
  std::vector<ReferencePoint> flattened() const;

  /// First position of each trajectory.
  std::vector<Vec> trajectory_starts() const;

  BoundingBox bbox() const;
};

struct DemonstrationSet {
  std::vector<Demonstration> demonstrations;
  int dimension = 0;

  const Demonstration& by_id(const std::string& id) const;
  BoundingBox bbox() const;
  std::size_t point_count() const;
  /// Mean speed over every reference point; used for velocity caps and
  /// stability margins.
  double mean_speed() const;
};

struct ValidationOptions {
  // Trajectory endpoints must lie within this fraction of the demonstration
  // bounding-box diagonal from the attractor.
  double attractor_tolerance = 0.05;
};

/// Checks the demonstration invariants; throws a ValidationError subclass.
void validate(const Demonstration& demo, const ValidationOptions& opts = {});
void validate(const DemonstrationSet& set, const ValidationOptions& opts = {});

/// Central differences for interior points, one-sided at the ends.
/// A moving-average window > 1 smooths the result.
std::vector<Vec> estimate_velocities(const std::vector<Vec>& positions,
                                     const std::vector<double>& timestamps,
                                     int smoothing_window = 1);

DemonstrationSet load_dataset(const std::string& path,
                              const ValidationOptions& opts = {});
void save_dataset(const DemonstrationSet& set, const std::string& path);

struct SyntheticOptions {
  double noise_sigma = 0.25;
  int points_per_trajectory = 120;
};

/// Built-in 2D scenarios: "two-crossing", "six-network", "s-curves".
/// Deterministic for a fixed (scenario, seed).
DemonstrationSet generate_synthetic_2d(const std::string& scenario,
                                       std::uint64_t seed,
                                       const SyntheticOptions& opts = {});

}  // namespace dsstitch
