#include <cmath>
#include <random>

#include "dsstitch/dataset.hpp"
#include "dsstitch/errors.hpp"

namespace dsstitch {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Eigen::Vector2d v2(double x, double y) { return Eigen::Vector2d(x, y); }

// Cubic Bezier with analytic derivative; the demonstrations are sampled
// from these arcs at uniform parameter speed.
struct Bezier {
  Eigen::Vector2d p0, p1, p2, p3;

  Eigen::Vector2d at(double s) const {
    const double u = 1.0 - s;
    return u * u * u * p0 + 3 * u * u * s * p1 + 3 * u * s * s * p2 + s * s * s * p3;
  }
  Eigen::Vector2d derivative(double s) const {
    const double u = 1.0 - s;
    return 3 * u * u * (p1 - p0) + 6 * u * s * (p2 - p1) + 3 * s * s * (p3 - p2);
  }
  double approx_length() const {
    double len = 0.0;
    Eigen::Vector2d prev = p0;
    for (int i = 1; i <= 64; ++i) {
      const Eigen::Vector2d q = at(i / 64.0);
      len += (q - prev).norm();
      prev = q;
    }
    return len;
  }
};

Trajectory sample_trajectory(const Bezier& arc, double speed, int n,
                             double noise_sigma, std::mt19937_64& rng) {
  Trajectory traj;
  traj.points.reserve(n);
  // Smoothstep time profile: the motion accelerates from rest and
  // decelerates into the attractor, peaking mid-corridor.
  const double duration = arc.approx_length() / speed;
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    const double s = u * u * (3.0 - 2.0 * u);
    const double ds_du = 6.0 * u * (1.0 - u);
    Eigen::Vector2d pos = arc.at(s);
    Eigen::Vector2d vel = arc.derivative(s) * ds_du / duration;
    // Taper the noise to zero at the endpoints so starts and attractors
    // stay exact.
    const double taper =
        std::min({1.0, i / 5.0, (n - 1 - i) / 5.0});
    pos.x() += taper * noise(rng);
    pos.y() += taper * noise(rng);
    vel.x() += taper * noise(rng);
    vel.y() += taper * noise(rng);
    traj.points.emplace_back(Vec(pos), Vec(vel));
    traj.timestamps.push_back(u * duration);
  }
  return traj;
}

struct ArcSpec {
  Bezier arc;
  bool jittered_copy = false;  // add a second trajectory with perturbed controls
};

Demonstration make_demo(const std::string& id, const std::vector<ArcSpec>& arcs,
                        double speed, const SyntheticOptions& opts,
                        std::uint64_t seed) {
  Demonstration demo;
  demo.id = id;
  demo.bidirectional = true;
  demo.attractor = Vec(arcs.front().arc.p3);
  std::size_t traj_index = 0;
  for (const auto& spec : arcs) {
    {
      std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (traj_index + 1)));
      demo.trajectories.push_back(sample_trajectory(
          spec.arc, speed, opts.points_per_trajectory, opts.noise_sigma, rng));
      ++traj_index;
    }
    if (spec.jittered_copy) {
      std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (traj_index + 1)));
      std::normal_distribution<double> jit(0.0, 0.15);
      Bezier b = spec.arc;
      b.p0 += v2(jit(rng), jit(rng));
      b.p1 += v2(jit(rng), jit(rng));
      b.p2 += v2(jit(rng), jit(rng));
      // End point stays at the attractor.
      demo.trajectories.push_back(sample_trajectory(
          b, speed, opts.points_per_trajectory, opts.noise_sigma, rng));
      ++traj_index;
    }
  }
  return demo;
}

DemonstrationSet two_crossing(std::uint64_t seed, const SyntheticOptions& opts) {
  DemonstrationSet set;
  set.dimension = 2;
  // Two C-shaped corridors of opposing curvature crossing mid-workspace:
  // A sweeps clockwise from the west over the top, B counterclockwise
  // from the south around the right. Each has two distinct start regions.
  set.demonstrations.push_back(make_demo(
      "A",
      {{{v2(-8.0, -2.0), v2(-6.0, 6.0), v2(2.0, 8.0), v2(6.0, 2.0)}, true},
       {{v2(-8.0, -5.0), v2(-8.0, 4.0), v2(0.0, 7.0), v2(6.0, 2.0)}, false}},
      1.5, opts, seed ^ fnv1a("A")));
  set.demonstrations.push_back(make_demo(
      "B",
      {{{v2(3.0, -7.0), v2(8.0, -4.0), v2(7.0, 4.0), v2(-1.0, 5.0)}, true},
       {{v2(8.0, -8.0), v2(10.0, -2.0), v2(6.0, 4.0), v2(-1.0, 5.0)}, false}},
      1.5, opts, seed ^ fnv1a("B")));
  return set;
}

DemonstrationSet six_network(std::uint64_t seed, const SyntheticOptions& opts) {
  DemonstrationSet set;
  set.dimension = 2;
  // Hub-and-spoke web: D1 feeds the hub from the west, D2/D3/D4/D6 leave
  // the hub east/north/south/southwest, D5 continues from D2's end.
  set.demonstrations.push_back(make_demo(
      "D1",
      {{{v2(-9.0, 4.0), v2(-6.0, 3.0), v2(-4.0, 1.5), v2(-1.5, 0.8)}, true},
       {{v2(-9.0, 1.0), v2(-6.0, 0.6), v2(-4.0, 0.6), v2(-1.5, 0.8)}, false}},
      1.5, opts, seed ^ fnv1a("D1")));
  set.demonstrations.push_back(make_demo(
      "D2",
      {{{v2(-0.6, -0.6), v2(1.5, -0.9), v2(4.0, -1.2), v2(6.5, -1.0)}, true}},
      1.5, opts, seed ^ fnv1a("D2")));
  set.demonstrations.push_back(make_demo(
      "D3",
      {{{v2(0.4, 1.4), v2(0.8, 3.0), v2(1.6, 5.0), v2(2.5, 7.5)}, true}},
      1.5, opts, seed ^ fnv1a("D3")));
  set.demonstrations.push_back(make_demo(
      "D4",
      {{{v2(0.6, -1.6), v2(0.8, -3.5), v2(1.0, -5.5), v2(1.2, -7.5)}, true},
       {{v2(2.6, -2.2), v2(2.2, -4.0), v2(1.6, -6.0), v2(1.2, -7.5)}, false}},
      1.5, opts, seed ^ fnv1a("D4")));
  set.demonstrations.push_back(make_demo(
      "D5",
      {{{v2(7.4, 0.4), v2(8.0, 1.8), v2(8.6, 4.0), v2(9.0, 6.0)}, true}},
      1.5, opts, seed ^ fnv1a("D5")));
  set.demonstrations.push_back(make_demo(
      "D6",
      {{{v2(-2.2, -1.0), v2(-3.5, -2.5), v2(-5.0, -4.5), v2(-6.5, -6.5)}, true}},
      1.5, opts, seed ^ fnv1a("D6")));
  return set;
}

DemonstrationSet s_curves(std::uint64_t seed, const SyntheticOptions& opts) {
  DemonstrationSet set;
  set.dimension = 2;
  // Two S-shaped corridors meeting near the origin; reaching one start
  // from the other requires traversing a demonstration in reverse.
  set.demonstrations.push_back(make_demo(
      "E1",
      {{{v2(-8.0, -6.0), v2(-5.5, -1.5), v2(-2.5, -4.5), v2(0.0, -0.3)}, true}},
      1.4, opts, seed ^ fnv1a("E1")));
  set.demonstrations.push_back(make_demo(
      "E2",
      {{{v2(8.0, 6.0), v2(5.5, 1.5), v2(2.5, 4.5), v2(0.6, 0.5)}, true}},
      1.4, opts, seed ^ fnv1a("E2")));
  return set;
}

}  // namespace

DemonstrationSet generate_synthetic_2d(const std::string& scenario,
                                       std::uint64_t seed,
                                       const SyntheticOptions& opts) {
  DemonstrationSet set;
  if (scenario == "two-crossing") {
    set = two_crossing(seed, opts);
  } else if (scenario == "six-network") {
    set = six_network(seed, opts);
  } else if (scenario == "s-curves") {
    set = s_curves(seed, opts);
  } else {
    throw UnknownScenario("unknown scenario: " + scenario);
  }
  validate(set);
  return set;
}

}  // namespace dsstitch
