#include <doctest.h>

#include <cmath>
#include <random>

#include "dsstitch/chaining.hpp"
#include "dsstitch/errors.hpp"
#include "dsstitch/metrics.hpp"
#include "dsstitch/simulation.hpp"

using namespace dsstitch;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

StablePolicy constant_pull(const Vec& attractor, double rate = 1.0) {
  StablePolicy p;
  p.attractor = attractor;
  p.components.push_back({1.0, attractor, Mat::Identity(2, 2)});
  p.dynamics.push_back(-rate * Mat::Identity(2, 2));
  p.lyapunov = Mat::Identity(2, 2);
  return p;
}

// One long bidirectional corridor along the x axis, so shortest paths are
// simple vertex chains. Noise gives the corridor a realistic width.
DemonstrationSet corridor_set(double length = 12.0, int points = 150) {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> noise(0.0, 0.2);
  DemonstrationSet set;
  set.dimension = 2;
  Demonstration demo;
  demo.id = "c";
  demo.bidirectional = true;
  for (int rep = 0; rep < 2; ++rep) {
    Trajectory traj;
    for (int i = 0; i < points; ++i) {
      const double x = length * i / (points - 1);
      const double y = 0.3 * std::sin(x * 0.8) + (rep == 1 ? 0.08 : 0.0);
      const double vy = 0.3 * 0.8 * std::cos(x * 0.8) * 1.2;
      const double taper = std::min({1.0, i / 4.0, (points - 1 - i) / 4.0});
      traj.points.emplace_back(v2(x + taper * noise(rng), y + taper * noise(rng)),
                               v2(1.2 + taper * noise(rng), vy + taper * noise(rng)));
      traj.timestamps.push_back(i * 0.05);
    }
    if (rep == 1) traj.points.back().position = demo.trajectories[0].points.back().position;
    demo.trajectories.push_back(std::move(traj));
  }
  demo.attractor = demo.trajectories[0].points.back().position;
  set.demonstrations.push_back(demo);
  validate(set);
  return set;
}

struct ChainFixture {
  DemonstrationSet set = corridor_set();
  std::vector<LpvdsResult> learned;
  GaussianGraph graph;

  ChainFixture() {
    learned.push_back(fit_lpvds(set.demonstrations[0].flattened(),
                                set.demonstrations[0].attractor, 5, 3));
    std::vector<PolicyRef> refs = {
        {&learned[0].policy, &learned[0].mixture, "c"}};
    graph = reduce_graph(expand_bidirectional(build_graph(refs, {}), set));
  }
};

}  // namespace

TEST_SUITE("chaining") {

TEST_CASE("trigger_fired anchors") {
  const Vec a = v2(0, 0), b = v2(1, 0), c = v2(3, 0);
  CHECK(trigger_fired(a, b, c, b));        // equality case at the middle
  CHECK_FALSE(trigger_fired(a, b, c, a));  // at the first anchor
  CHECK(trigger_fired(a, b, c, c));        // at the target: fires
  CHECK_FALSE(trigger_fired(a, b, c, v2(0.5, 0.0)));
  CHECK(trigger_fired(a, b, c, v2(1.5, 0.0)));
}

TEST_CASE("timer_duration anchors") {
  // Make policies whose velocity at mid has norm 0.4 and 0.6: average 0.5.
  // pull rates scaled so |f(mid)| = rate * |mid - attractor|.
  const Vec mid = v2(0, 0), to = v2(1, 0);
  const StablePolicy f1 = constant_pull(v2(0, 0.4), 1.0);   // |f1(mid)| = 0.4
  const StablePolicy f2 = constant_pull(v2(0, 0.6), 1.0);   // |f2(mid)| = 0.6
  // f1(mid) = (0,0.4), f2(mid) = (0,0.6): average vector norm = 0.5.
  CHECK(timer_duration(f1, f2, mid, to, 0.0) == doctest::Approx(0.0));
  CHECK(timer_duration(f1, f2, mid, to, 1.0) == doctest::Approx(2.0));
  CHECK(timer_duration(f1, f2, mid, to, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("timer_duration caps a vanishing denominator") {
  const StablePolicy still = constant_pull(v2(0, 0), 1e-12);
  CHECK(timer_duration(still, still, v2(0, 0), v2(1, 0), 0.5, 1e-6, 100.0) ==
        doctest::Approx(100.0));
  // alpha = 0 wins over the cap.
  CHECK(timer_duration(still, still, v2(0, 0), v2(1, 0), 0.0, 1e-6, 100.0) ==
        doctest::Approx(0.0));
}

TEST_CASE("transition_velocity anchors") {
  const StablePolicy f1 = constant_pull(v2(10, 0));
  const StablePolicy f2 = constant_pull(v2(-10, 0));
  const Vec x = v2(1, 2);
  const Vec va = evaluate(f1, x), vb = evaluate(f2, x);
  CHECK((transition_velocity(f1, f2, x, 0.0, 2.0) - va).norm() < 1e-14);
  CHECK((transition_velocity(f1, f2, x, 2.0, 2.0) - vb).norm() < 1e-14);
  CHECK((transition_velocity(f1, f2, x, 1.0, 2.0) - 0.5 * (va + vb)).norm() <
        1e-14);
  // Zero-duration transitions evaluate the next policy.
  CHECK((transition_velocity(f1, f2, x, 0.0, 0.0) - vb).norm() < 1e-14);
}

TEST_CASE("build_chain: triplet windowing and degenerate fallbacks") {
  ChainFixture fx;
  // Forward corridor vertices sorted by x position.
  std::vector<int> forward;
  for (int i = 0; i < fx.graph.vertex_count(); ++i)
    if (!fx.graph.vertices[i].reversed) forward.push_back(i);
  std::sort(forward.begin(), forward.end(), [&](int a, int b) {
    return fx.graph.vertices[a].component.mean[0] <
           fx.graph.vertices[b].component.mean[0];
  });
  REQUIRE(forward.size() >= 4);
  const Vec goal = fx.set.demonstrations[0].attractor;

  ChainBuildOptions opts;
  opts.reuse = ReuseLevel::ReuseGaussians;

  SUBCASE("sigma of 4 gives 2 segments + final policy") {
    const std::vector<int> sigma(forward.begin(), forward.begin() + 4);
    const DSChain chain =
        build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);
    CHECK(chain.policy_count() == 3);
    CHECK(chain.triggers.size() == 2);
    CHECK(chain.timers.size() == 2);
    CHECK((chain.policies.back().attractor - goal).norm() == 0.0);
  }
  SUBCASE("sigma of 2 degenerates to a single final policy") {
    const std::vector<int> sigma(forward.begin(), forward.begin() + 2);
    const DSChain chain =
        build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);
    CHECK(chain.policy_count() == 1);
    CHECK(chain.triggers.empty());
  }
  SUBCASE("optional initial policy prepends a synthetic trigger") {
    const std::vector<int> sigma(forward.begin(), forward.begin() + 4);
    ChainBuildOptions with_f0 = opts;
    with_f0.include_initial_policy = true;
    const Vec start = v2(-1.0, 0.0);
    const DSChain chain =
        build_chain(fx.graph, sigma, start, goal, fx.set, with_f0);
    CHECK(chain.policy_count() == 4);
    CHECK(chain.has_initial_policy);
    const Vec mu1 = fx.graph.vertices[sigma[0]].component.mean;
    CHECK((chain.triggers[0].from - start).norm() == 0.0);
    CHECK((chain.triggers[0].mid - 0.5 * (start + mu1)).norm() < 1e-12);
    CHECK((chain.triggers[0].to - mu1).norm() == 0.0);
  }
  SUBCASE("vertex plus its reversal in one window is rejected") {
    const int fwd = forward[1];
    int rev = -1;
    for (int i = 0; i < fx.graph.vertex_count(); ++i)
      if (fx.graph.vertices[i].reversed &&
          fx.graph.vertices[i].source == fx.graph.vertices[fwd].source)
        rev = i;
    REQUIRE(rev >= 0);
    const std::vector<int> sigma = {forward[0], fwd, rev};
    CHECK_THROWS_AS(
        build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts),
        SegmentReversalConflict);
  }
}

TEST_CASE("segment data filtering drops the far-but-close ring") {
  // Construct a tiny graph by hand where the rule's effect is checkable
  // through the fitted chain: a point of the target vertex that is farther
  // than l from the middle and inside 0.1 l of the target must not affect
  // the fit. We verify the rule directly on collect + filter logic by
  // fitting two chains whose only difference is one such point.
  // Here we check the geometric predicate itself.
  const Vec mu_mid = v2(0, 0), mu_last = v2(1, 0);
  const double l = 1.0;
  const auto dropped = [&](const Vec& p) {
    return (p - mu_mid).norm() > l && (p - mu_last).norm() < 0.1 * l;
  };
  CHECK(dropped(v2(1.05, 0)));        // behind the target, within 0.1 l
  CHECK_FALSE(dropped(v2(0.95, 0)));  // in front: closer to mid than l
  CHECK_FALSE(dropped(v2(0.5, 0)));
  CHECK_FALSE(dropped(v2(1.3, 0)));   // behind but outside the 0.1 l ball
}

TEST_CASE("step_chain and the mode trace on a built corridor chain") {
  ChainFixture fx;
  std::vector<int> forward;
  for (int i = 0; i < fx.graph.vertex_count(); ++i)
    if (!fx.graph.vertices[i].reversed) forward.push_back(i);
  std::sort(forward.begin(), forward.end(), [&](int a, int b) {
    return fx.graph.vertices[a].component.mean[0] <
           fx.graph.vertices[b].component.mean[0];
  });
  REQUIRE(forward.size() >= 4);
  const std::vector<int> sigma(forward.begin(), forward.begin() + 4);
  const Vec goal = fx.graph.vertices[sigma.back()].component.mean;

  ChainBuildOptions opts;
  opts.reuse = ReuseLevel::ReuseGaussians;
  const DSChain chain =
      build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);
  REQUIRE(chain.policy_count() == 3);

  SimulationOptions sim;
  sim.eps_goal = 0.15;
  sim.t_max = 1000.0;
  sim.v_max = 20.0;
  const Vec start = v2(0.0, 0.0);
  const SimulationResult run = simulate(chain, start, sim);
  CHECK(run.success);
  CHECK(mode_trace_monotone(run));
  // Full mode sequence s1, s1', s2, s2', s3 (modes 0..4).
  std::vector<int> modes;
  for (const auto& [step, mode] : run.mode_transitions) modes.push_back(mode);
  CHECK(modes == std::vector<int>{0, 1, 2, 3, 4});

  SUBCASE("terminal mode keeps the final policy") {
    ChainExecState st;
    st.mode = 2 * (chain.policy_count() - 1);
    const auto [v, next] = step_chain(chain, st, goal + v2(0.5, 0), 123.0);
    CHECK(next.mode == st.mode);
    CHECK((v - evaluate(chain.policies.back(), goal + v2(0.5, 0))).norm() <
          1e-14);
  }
  SUBCASE("trigger transition enters the intermediate state") {
    ChainExecState st;  // s1
    const Vec past_mid = chain.triggers[0].mid + v2(0.4, 0);
    const auto [v, next] = step_chain(chain, st, past_mid, 10.0);
    CHECK(next.mode >= 1);
    CHECK(next.entry_time == doctest::Approx(10.0));
  }
  SUBCASE("step_chain agrees with the rollout fast path") {
    ChainExecState st;
    Vec x = start;
    double t = 0.0;
    for (std::size_t i = 0; i + 1 < run.size() && i < 2000; ++i) {
      const auto [v, next] = step_chain(chain, st, x, t);
      CHECK((v - run.velocities[i]).norm() == 0.0);
      x += sim.dt * v;
      t += sim.dt;
      st = next;
    }
  }
}

TEST_CASE("alpha=0 yields zero intermediate time and exact switches") {
  ChainFixture fx;
  std::vector<int> forward;
  for (int i = 0; i < fx.graph.vertex_count(); ++i)
    if (!fx.graph.vertices[i].reversed) forward.push_back(i);
  std::sort(forward.begin(), forward.end(), [&](int a, int b) {
    return fx.graph.vertices[a].component.mean[0] <
           fx.graph.vertices[b].component.mean[0];
  });
  const std::vector<int> sigma(forward.begin(), forward.begin() + 4);
  const Vec goal = fx.graph.vertices[sigma.back()].component.mean;
  ChainBuildOptions opts;
  opts.reuse = ReuseLevel::ReuseGaussians;
  opts.alpha = 0.0;
  const DSChain chain =
      build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);
  for (double t : chain.timers) CHECK(t == 0.0);

  SimulationOptions sim;
  sim.eps_goal = 0.15;
  sim.t_max = 1000.0;
  sim.v_max = 20.0;
  const SimulationResult run = simulate(chain, v2(0, 0), sim);
  CHECK(run.success);
  // Intermediate (odd) modes must never own a sample interval: every odd
  // transition is immediately followed by an even one at the same step.
  for (std::size_t i = 0; i < run.mode_transitions.size(); ++i) {
    if (run.mode_transitions[i].second % 2 == 1) {
      REQUIRE(i + 1 < run.mode_transitions.size());
      CHECK(run.mode_transitions[i + 1].first ==
            run.mode_transitions[i].first);
    }
  }
}

TEST_CASE("segment table: warm reuse and the size bound") {
  ChainFixture fx;
  std::vector<int> forward;
  for (int i = 0; i < fx.graph.vertex_count(); ++i)
    if (!fx.graph.vertices[i].reversed) forward.push_back(i);
  std::sort(forward.begin(), forward.end(), [&](int a, int b) {
    return fx.graph.vertices[a].component.mean[0] <
           fx.graph.vertices[b].component.mean[0];
  });
  const std::vector<int> sigma(forward.begin(), forward.begin() + 4);
  const Vec goal = fx.graph.vertices[sigma.back()].component.mean;

  SegmentTable table;
  ChainBuildOptions opts;
  opts.reuse = ReuseLevel::ReuseGaussians;
  opts.table = &table;
  (void)build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);
  const std::size_t fits_after_first = table.misses();
  CHECK(fits_after_first == 2);  // two triplets
  (void)build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);
  CHECK(table.misses() == fits_after_first);  // warm: zero new fits
  CHECK(table.hits() >= 2);

  SegmentTable full;
  precompute_segment_table(fx.graph, ReuseLevel::ReuseGaussians, fx.set, full,
                           opts);
  CHECK(full.size() <=
        fx.graph.edge_count() * static_cast<std::size_t>(
                                    std::max(fx.graph.max_out_degree(), 1)));
  // A chain built against the precomputed table performs no segment fits.
  ChainBuildOptions warm_opts = opts;
  warm_opts.table = &full;
  const std::size_t misses_before = full.misses();
  (void)build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, warm_opts);
  CHECK(full.misses() == misses_before);
}

TEST_CASE("verify_gas_criteria passes on built chains and flags tampering") {
  ChainFixture fx;
  std::vector<int> forward;
  for (int i = 0; i < fx.graph.vertex_count(); ++i)
    if (!fx.graph.vertices[i].reversed) forward.push_back(i);
  std::sort(forward.begin(), forward.end(), [&](int a, int b) {
    return fx.graph.vertices[a].component.mean[0] <
           fx.graph.vertices[b].component.mean[0];
  });
  const std::vector<int> sigma(forward.begin(), forward.begin() + 4);
  const Vec goal = fx.graph.vertices[sigma.back()].component.mean;
  ChainBuildOptions opts;
  opts.reuse = ReuseLevel::ReuseGaussians;
  DSChain chain = build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);

  const GasCriteriaReport ok = verify_gas_criteria(chain);
  CHECK(ok.dynamics_bounded);
  CHECK(ok.triggers_fire);
  CHECK(ok.timers_finite);
  CHECK(ok.final_policy_gas);
  CHECK(ok.all());

  SUBCASE("infinite timer fails criterion 3") {
    chain.timers[0] = std::numeric_limits<double>::infinity();
    const GasCriteriaReport report = verify_gas_criteria(chain);
    CHECK_FALSE(report.timers_finite);
    CHECK(report.dynamics_bounded);
  }
  SUBCASE("unstable final policy fails criterion 4") {
    chain.policies.back().dynamics[0] = Mat::Identity(2, 2);
    const GasCriteriaReport report = verify_gas_criteria(chain);
    CHECK_FALSE(report.final_policy_gas);
  }
}

TEST_CASE("chain velocity-error plan matches an independent loop") {
  ChainFixture fx;
  std::vector<int> forward;
  for (int i = 0; i < fx.graph.vertex_count(); ++i)
    if (!fx.graph.vertices[i].reversed) forward.push_back(i);
  std::sort(forward.begin(), forward.end(), [&](int a, int b) {
    return fx.graph.vertices[a].component.mean[0] <
           fx.graph.vertices[b].component.mean[0];
  });
  const std::vector<int> sigma(forward.begin(), forward.begin() + 4);
  const Vec goal = fx.graph.vertices[sigma.back()].component.mean;
  ChainBuildOptions opts;
  opts.reuse = ReuseLevel::ReuseGaussians;
  const DSChain chain =
      build_chain(fx.graph, sigma, std::nullopt, goal, fx.set, opts);

  // Independent re-derivation: vertex m's points belong to the policy
  // handing over at m (mix of the two policies meeting there).
  const int m_count = static_cast<int>(sigma.size());
  double acc = 0.0;
  std::size_t n = 0;
  for (int m = 0; m < m_count; ++m) {
    int a, b;
    if (m == 0) {
      a = 0;
      b = -1;
    } else if (m <= m_count - 2) {
      a = m - 1;
      b = m;
    } else {
      a = chain.policy_count() - 1;
      b = -1;
    }
    const auto& vert = fx.graph.vertices[sigma[m]];
    const auto flat = fx.set.by_id(vert.source.demo_id).flattened();
    for (std::size_t idx : vert.cluster) {
      Vec v = evaluate(chain.policies[a], flat[idx].position);
      if (b >= 0)
        v = 0.5 * (v + evaluate(chain.policies[b], flat[idx].position));
      Vec ref = flat[idx].velocity;
      if (vert.reversed) ref = -ref;
      acc += (v - ref).squaredNorm();
      ++n;
    }
  }
  const double oracle = std::sqrt(acc / n);
  CHECK(velocity_rmse(chain) == doctest::Approx(oracle).epsilon(1e-12));
}

}  // TEST_SUITE
