#include "dsstitch/benchmark.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "dsstitch/errors.hpp"
#include "dsstitch/hashing.hpp"

namespace dsstitch {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::vector<Endpoint> pooled_endpoints(const DemonstrationSet& set,
                                       double merge_tol_rel) {
  const double tol = merge_tol_rel * std::max(set.bbox().diagonal(), 1e-12);
  std::vector<Endpoint> out;
  for (std::size_t di = 0; di < set.demonstrations.size(); ++di) {
    const auto& demo = set.demonstrations[di];
    out.push_back({demo.attractor, static_cast<int>(di), true});
    // Merge trajectory starts closer than the tolerance into their mean.
    std::vector<std::vector<Vec>> groups;
    for (const Vec& s : demo.trajectory_starts()) {
      bool placed = false;
      for (auto& group : groups)
        if ((group.front() - s).norm() <= tol) {
          group.push_back(s);
          placed = true;
          break;
        }
      if (!placed) groups.push_back({s});
    }
    for (const auto& group : groups) {
      Vec mean = Vec::Zero(set.dimension);
      for (const Vec& s : group) mean += s;
      mean /= static_cast<double>(group.size());
      out.push_back({std::move(mean), static_cast<int>(di), false});
    }
  }
  return out;
}

std::vector<BenchInstance> make_instances(
    const std::vector<Endpoint>& endpoints) {
  std::vector<BenchInstance> out;
  const int n = static_cast<int>(endpoints.size());
  int id = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      BenchInstance inst;
      inst.id = id++;
      inst.start_index = a;
      inst.goal_index = b;
      inst.cross_demo = endpoints[a].demo_index != endpoints[b].demo_index;
      out.push_back(inst);
    }
  return out;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::BaselineAll: return "baseline-all";
    case Method::BaselineDs: return "baseline-ds";
    case Method::StitchSpAll: return "stitch-sp-all";
    case Method::StitchSpDs: return "stitch-sp-ds";
    case Method::StitchSptAll: return "stitch-spt-all";
    case Method::StitchSptDs: return "stitch-spt-ds";
    case Method::ChainAll: return "chain-all";
    case Method::ChainDs: return "chain-ds";
  }
  return "?";
}

std::optional<Method> parse_method(const std::string& name) {
  for (Method m : all_methods())
    if (to_string(m) == name) return m;
  return std::nullopt;
}

std::vector<Method> all_methods() {
  return {Method::BaselineAll,   Method::BaselineDs,  Method::StitchSpAll,
          Method::StitchSpDs,    Method::StitchSptAll, Method::StitchSptDs,
          Method::ChainAll,      Method::ChainDs};
}

namespace {

struct SeedContext {
  std::uint64_t seed = 0;
  std::vector<LpvdsResult> learned;
  GaussianGraph graph;
  // Pooled mixture over every demonstration's components, priors weighted
  // by data share; used by the DS-reuse baseline.
  MixtureFit pooled_mixture;
  SegmentTable table_all;
  SegmentTable table_ds;

  struct CachedStitch {
    bool ok = false;
    StitchResult result;
    double seconds = 0.0;
    std::string failure;
  };
  // Keyed by goal endpoint index; SPT policies depend on the goal only.
  std::map<std::pair<int, int>, CachedStitch> spt_cache;  // (reuse, goal)

  struct CachedMixture {
    MixtureFit mixture;
    double seconds = 0.0;
  };
  std::map<std::uint64_t, CachedMixture> baseline_gmm_cache;  // by mask
};

std::vector<ReferencePoint> oriented_pool(const DemonstrationSet& set,
                                          std::uint64_t mask) {
  std::vector<ReferencePoint> out;
  for (std::size_t di = 0; di < set.demonstrations.size(); ++di) {
    const bool flip = (mask >> di) & 1ull;
    for (const auto& p : set.demonstrations[di].flattened()) {
      ReferencePoint q = p;
      if (flip) q.velocity = -q.velocity;
      out.push_back(std::move(q));
    }
  }
  return out;
}

// Orientation heuristic for pooled baselines: a bidirectional
// demonstration runs backwards only when the instance goal is one of its
// demonstrated start points; everything else keeps its recorded flow.
std::uint64_t orientation_mask(const DemonstrationSet& set, const Vec& goal) {
  const double tol = 0.05 * std::max(set.bbox().diagonal(), 1e-12);
  std::uint64_t mask = 0;
  for (std::size_t di = 0; di < set.demonstrations.size(); ++di) {
    const auto& demo = set.demonstrations[di];
    if (!demo.bidirectional) continue;
    for (const Vec& s : demo.trajectory_starts())
      if ((s - goal).norm() <= tol) {
        mask |= 1ull << di;
        break;
      }
  }
  return mask;
}

struct TaskOutcome {
  bool success = false;
  double rmse = kNan;
  double support = kNan;
  double time_to_goal = kNan;
  bool mode_monotone = true;
  bool gas_ok = true;
  double synth_seconds = 0.0;
  double sim_seconds = 0.0;
  std::string failure;
};

TaskOutcome run_task(const DemonstrationSet& set, const BenchParams& params,
                     const SupportStats& stats, const SimulationOptions& sim,
                     SeedContext& ctx, Method method, const Vec& start,
                     const Vec& goal, int goal_index) {
  TaskOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    StitchOptions stitch_opts;
    stitch_opts.k_cap = params.stitch_k_cap;
    const bool reuse_ds = method == Method::StitchSpDs ||
                          method == Method::StitchSptDs ||
                          method == Method::ChainDs ||
                          method == Method::BaselineDs;

    SimulationResult rollout;
    switch (method) {
      case Method::StitchSpAll:
      case Method::StitchSpDs: {
        const auto att = attach_endpoints(ctx.graph, start, goal);
        StitchRequest req;
        req.sigma = shortest_path(att);
        req.goal = goal;
        req.method = GraphMethod::ShortestPath;
        req.reuse = reuse_ds ? ReuseLevel::ReuseGaussians : ReuseLevel::NoReuse;
        const StitchResult stitched =
            reuse_ds ? stitch_reuse_gaussians(ctx.graph, req, set, stitch_opts)
                     : stitch_no_reuse(ctx.graph, req, set,
                                       mix_seed(ctx.seed, "stitch-sp"),
                                       stitch_opts);
        out.synth_seconds = seconds_since(t0);
        out.rmse = velocity_rmse(stitched.policy, stitched.data.points);
        const auto s0 = std::chrono::steady_clock::now();
        rollout = simulate(stitched.policy, start, sim);
        out.sim_seconds = seconds_since(s0);
        break;
      }
      case Method::StitchSptAll:
      case Method::StitchSptDs: {
        const auto key = std::make_pair(reuse_ds ? 1 : 0, goal_index);
        const auto& cached = ctx.spt_cache.at(key);
        out.synth_seconds = cached.seconds;
        if (!cached.ok) {
          out.failure = cached.failure;
          return out;
        }
        out.rmse = velocity_rmse(cached.result.policy, cached.result.data.points);
        const auto s0 = std::chrono::steady_clock::now();
        rollout = simulate(cached.result.policy, start, sim);
        out.sim_seconds = seconds_since(s0);
        break;
      }
      case Method::ChainAll:
      case Method::ChainDs: {
        const auto att = attach_endpoints(ctx.graph, start, goal);
        const std::vector<int> sigma = shortest_path(att);
        ChainBuildOptions chain_opts;
        chain_opts.alpha = params.alpha;
        chain_opts.reuse = reuse_ds ? ReuseLevel::ReuseGaussians
                                    : ReuseLevel::NoReuse;
        chain_opts.seed = mix_seed(ctx.seed, "chain");
        chain_opts.table = reuse_ds ? &ctx.table_ds : &ctx.table_all;
        const DSChain chain =
            build_chain(ctx.graph, sigma, start, goal, set, chain_opts);
        out.synth_seconds = seconds_since(t0);
        out.rmse = velocity_rmse(chain);
        const auto s0 = std::chrono::steady_clock::now();
        rollout = simulate(chain, start, sim);
        out.sim_seconds = seconds_since(s0);
        out.mode_monotone = mode_trace_monotone(rollout);
        out.gas_ok = verify_gas_criteria(chain).all();
        break;
      }
      case Method::BaselineAll: {
        const std::uint64_t mask = orientation_mask(set, goal);
        const auto& cached = ctx.baseline_gmm_cache.at(mask);
        const auto points = oriented_pool(set, mask);
        auto [policy, report] =
            fit_ds_given_gmm(cached.mixture, points, goal);
        out.synth_seconds = cached.seconds + seconds_since(t0);
        out.rmse = velocity_rmse(policy, points);
        const auto s0 = std::chrono::steady_clock::now();
        rollout = simulate(policy, start, sim);
        out.sim_seconds = seconds_since(s0);
        break;
      }
      case Method::BaselineDs: {
        const std::uint64_t mask = orientation_mask(set, goal);
        const auto points = oriented_pool(set, mask);
        auto [policy, report] =
            fit_ds_given_gmm(ctx.pooled_mixture, points, goal);
        out.synth_seconds = seconds_since(t0);
        out.rmse = velocity_rmse(policy, points);
        const auto s0 = std::chrono::steady_clock::now();
        rollout = simulate(policy, start, sim);
        out.sim_seconds = seconds_since(s0);
        break;
      }
    }
    out.success = rollout.success;
    if (rollout.time_to_goal) out.time_to_goal = *rollout.time_to_goal;
    if (!rollout.success && out.failure.empty()) out.failure = "timeout";
    if (rollout.success)
      out.support =
          data_support(rollout.positions, stats, params.support_stride).value;
  } catch (const MethodFailure& e) {
    out.failure = e.what();
    out.synth_seconds = seconds_since(t0);
  } catch (const ValidationError& e) {
    // Data-driven synthesis failure (e.g. a selection too small to fit):
    // a legitimate negative outcome for this instance.
    out.failure = e.what();
    out.synth_seconds = seconds_since(t0);
  }
  return out;
}

}  // namespace

BenchResult run_benchmark(const DemonstrationSet& set,
                          const std::vector<Method>& methods,
                          const std::vector<std::uint64_t>& seeds,
                          const BenchParams& params) {
  if (methods.empty()) throw ValidationError("run_benchmark: no methods");
  if (seeds.empty()) throw ValidationError("run_benchmark: no seeds");
  if (set.demonstrations.size() < 2)
    throw ValidationError("run_benchmark: need at least 2 demonstrations");
  if (set.demonstrations.size() > 64)
    throw ValidationError("run_benchmark: more than 64 demonstrations");

  BenchResult result;
  result.endpoints = pooled_endpoints(set);
  result.instances = make_instances(result.endpoints);

  const SupportStats stats = compute_support_stats(set);
  SimulationOptions sim;
  sim.dt = params.dt;
  sim.t_max = params.t_max;
  sim.eps_goal = params.eps_goal_rel * set.bbox().diagonal();
  sim.v_max = params.v_max_factor * std::max(set.mean_speed(), 1e-9);

  const bool wants_chain =
      std::count(methods.begin(), methods.end(), Method::ChainAll) +
          std::count(methods.begin(), methods.end(), Method::ChainDs) >
      0;
  const bool wants_spt =
      std::count(methods.begin(), methods.end(), Method::StitchSptAll) +
          std::count(methods.begin(), methods.end(), Method::StitchSptDs) >
      0;
  const bool wants_baseline_all =
      std::count(methods.begin(), methods.end(), Method::BaselineAll) > 0;

  for (const std::uint64_t seed : seeds) {
    SeedContext ctx;
    ctx.seed = seed;

    // Per-demonstration policies.
    std::vector<PolicyRef> refs;
    for (const auto& demo : set.demonstrations) {
      ctx.learned.push_back(fit_lpvds(demo.flattened(), demo.attractor,
                                      params.learn_k_max,
                                      mix_seed(seed, "learn:" + demo.id)));
    }
    for (std::size_t i = 0; i < set.demonstrations.size(); ++i)
      refs.push_back({&ctx.learned[i].policy, &ctx.learned[i].mixture,
                      set.demonstrations[i].id});
    ctx.graph = reduce_graph(
        expand_bidirectional(build_graph(refs, params.graph), set));

    // Pooled mixture for the DS-reuse baseline: per-demo priors scaled by
    // data share, then renormalized.
    {
      const double total = static_cast<double>(set.point_count());
      for (std::size_t i = 0; i < ctx.learned.size(); ++i) {
        const double share =
            set.demonstrations[i].point_count() / total;
        for (const auto& c : ctx.learned[i].mixture.components) {
          GaussianComponent scaled = c;
          scaled.prior *= share;
          ctx.pooled_mixture.components.push_back(std::move(scaled));
        }
      }
    }

    const auto offline0 = std::chrono::steady_clock::now();

    // Offline phase 1: chain segment tables for every reachable path.
    if (wants_chain) {
      for (const auto& inst : result.instances) {
        try {
          const auto att = attach_endpoints(
              ctx.graph, result.endpoints[inst.start_index].position,
              result.endpoints[inst.goal_index].position);
          const std::vector<int> sigma = shortest_path(att);
          ChainBuildOptions warm_opts;
          warm_opts.seed = mix_seed(seed, "chain");
          for (Method m : methods) {
            if (m == Method::ChainAll) {
              warm_opts.reuse = ReuseLevel::NoReuse;
              warm_segment_table(ctx.graph, sigma, set, ctx.table_all, warm_opts);
            } else if (m == Method::ChainDs) {
              warm_opts.reuse = ReuseLevel::ReuseGaussians;
              warm_segment_table(ctx.graph, sigma, set, ctx.table_ds, warm_opts);
            }
          }
        } catch (const MethodFailure&) {
          // unreachable pair; the instance will record its own failure
        }
      }
    }

    // Offline phase 2: start-agnostic SPT policies, one per goal.
    if (wants_spt) {
      for (std::size_t gi = 0; gi < result.endpoints.size(); ++gi) {
        for (int reuse = 0; reuse < 2; ++reuse) {
          const Method m =
              reuse ? Method::StitchSptDs : Method::StitchSptAll;
          if (!std::count(methods.begin(), methods.end(), m)) continue;
          SeedContext::CachedStitch entry;
          const auto c0 = std::chrono::steady_clock::now();
          try {
            const auto att = attach_endpoints(
                ctx.graph, std::nullopt, result.endpoints[gi].position);
            StitchRequest req;
            req.sigma = shortest_path_tree(att);
            req.goal = result.endpoints[gi].position;
            req.method = GraphMethod::ShortestPathTree;
            req.reuse = reuse ? ReuseLevel::ReuseGaussians : ReuseLevel::NoReuse;
            StitchOptions stitch_opts;
            stitch_opts.k_cap = params.stitch_k_cap;
            entry.result =
                reuse ? stitch_reuse_gaussians(ctx.graph, req, set, stitch_opts)
                      : stitch_no_reuse(ctx.graph, req, set,
                                        mix_seed(seed, "stitch-spt"),
                                        stitch_opts);
            entry.ok = true;
          } catch (const MethodFailure& e) {
            entry.failure = e.what();
          }
          entry.seconds = seconds_since(c0);
          ctx.spt_cache.emplace(std::make_pair(reuse, static_cast<int>(gi)),
                                std::move(entry));
        }
      }
    }

    // Offline phase 3: pooled-GMM fits per orientation pattern.
    if (wants_baseline_all) {
      for (const auto& endpoint : result.endpoints) {
        const std::uint64_t mask = orientation_mask(set, endpoint.position);
        if (ctx.baseline_gmm_cache.count(mask)) continue;
        SeedContext::CachedMixture entry;
        const auto c0 = std::chrono::steady_clock::now();
        entry.mixture = fit_gmm(oriented_pool(set, mask), params.baseline_k_max,
                                mix_seed(seed, "baseline-gmm"));
        entry.seconds = seconds_since(c0);
        ctx.baseline_gmm_cache.emplace(mask, std::move(entry));
      }
    }

    result.offline_seconds += seconds_since(offline0);

    // Timed pass over method x instance, parallel over a work queue.
    struct Task {
      Method method;
      int instance_index;
    };
    std::vector<Task> tasks;
    for (Method m : methods)
      for (std::size_t i = 0; i < result.instances.size(); ++i)
        tasks.push_back({m, static_cast<int>(i)});
    std::vector<InstanceRecord> records(tasks.size());

    std::atomic<std::size_t> next{0};
    const int jobs = std::max(params.jobs, 1);
    const auto worker = [&]() {
      for (;;) {
        const std::size_t idx = next.fetch_add(1);
        if (idx >= tasks.size()) break;
        const Task& task = tasks[idx];
        const BenchInstance& inst = result.instances[task.instance_index];
        const TaskOutcome outcome = run_task(
            set, params, stats, sim, ctx, task.method,
            result.endpoints[inst.start_index].position,
            result.endpoints[inst.goal_index].position, inst.goal_index);
        InstanceRecord rec;
        rec.instance = inst.id;
        rec.start_index = inst.start_index;
        rec.goal_index = inst.goal_index;
        rec.cross_demo = inst.cross_demo;
        rec.method = task.method;
        rec.seed = seed;
        rec.success = outcome.success;
        rec.rmse = outcome.rmse;
        rec.support = outcome.support;
        rec.time_to_goal = outcome.time_to_goal;
        rec.mode_monotone = outcome.mode_monotone;
        rec.gas_ok = outcome.gas_ok;
        rec.synth_seconds = outcome.synth_seconds;
        rec.sim_seconds = outcome.sim_seconds;
        rec.failure = outcome.failure;
        records[idx] = std::move(rec);
      }
    };
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    result.records.insert(result.records.end(),
                          std::make_move_iterator(records.begin()),
                          std::make_move_iterator(records.end()));
  }
  return result;
}

std::vector<MetricsRow> BenchResult::aggregate(bool cross_demo_only) const {
  std::vector<MetricsRow> rows;
  std::vector<Method> seen;
  for (const auto& rec : records)
    if (!std::count(seen.begin(), seen.end(), rec.method))
      seen.push_back(rec.method);

  for (Method m : seen) {
    MetricsRow row;
    row.method_id = to_string(m);
    std::vector<double> rmse, support, synth;
    for (const auto& rec : records) {
      if (rec.method != m) continue;
      if (cross_demo_only && !rec.cross_demo) continue;
      ++row.total;
      if (!rec.success) continue;
      ++row.successes;
      rmse.push_back(rec.rmse);
      support.push_back(rec.support);
      synth.push_back(rec.synth_seconds);
    }
    row.success_rate = row.total > 0
                           ? static_cast<double>(row.successes) / row.total
                           : 0.0;
    const auto mean_std = [](const std::vector<double>& xs,
                             double& mean, double& std_dev) {
      if (xs.empty()) {
        mean = kNan;
        std_dev = kNan;
        return;
      }
      mean = 0.0;
      for (double x : xs) mean += x;
      mean /= xs.size();
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      std_dev = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.0;
    };
    mean_std(rmse, row.rmse_mean, row.rmse_std);
    mean_std(support, row.support_mean, row.support_std);
    mean_std(synth, row.synth_mean, row.synth_std);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string csv_num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

void write_results_csv(const BenchResult& result, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write " + path);
  file << "instance,start,goal,cross_demo,method,seed,success,rmse,"
          "data_support,time_to_goal,mode_monotone,gas_ok,failure\n";
  for (const auto& r : result.records) {
    file << r.instance << ',' << r.start_index << ',' << r.goal_index << ','
         << (r.cross_demo ? 1 : 0) << ',' << to_string(r.method) << ','
         << r.seed << ',' << (r.success ? 1 : 0) << ',' << csv_num(r.rmse)
         << ',' << csv_num(r.support) << ',' << csv_num(r.time_to_goal)
         << ',' << (r.mode_monotone ? 1 : 0)
         << ',' << (r.gas_ok ? 1 : 0) << ',' << r.failure << '\n';
  }
}

void write_aggregate_csv(const BenchResult& result, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write " + path);
  file << "method,success_rate,rmse_mean,rmse_std,data_support_mean,"
          "data_support_std,successes,total\n";
  for (const auto& row : result.aggregate()) {
    file << row.method_id << ',' << csv_num(row.success_rate) << ','
         << csv_num(row.rmse_mean) << ',' << csv_num(row.rmse_std) << ','
         << csv_num(row.support_mean) << ',' << csv_num(row.support_std) << ','
         << row.successes << ',' << row.total << '\n';
  }
}

void write_timings_csv(const BenchResult& result, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write " + path);
  file << "kind,instance,method,seed,synth_seconds,sim_seconds\n";
  file << "offline,,,," << csv_num(result.offline_seconds) << ",\n";
  for (const auto& r : result.records) {
    file << "instance," << r.instance << ',' << to_string(r.method) << ','
         << r.seed << ',' << csv_num(r.synth_seconds) << ','
         << csv_num(r.sim_seconds) << '\n';
  }
}

}  // namespace dsstitch
