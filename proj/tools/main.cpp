// dsstitch: learn stable motion policies from demonstrations, compose them
// over a Gaussian graph, and synthesize policies for unseen start/goal
// pairs by stitching or chaining.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include "dsstitch/benchmark.hpp"
#include "dsstitch/chaining.hpp"
#include "dsstitch/dataset.hpp"
#include "dsstitch/errors.hpp"
#include "dsstitch/hashing.hpp"
#include "dsstitch/json_io.hpp"
#include "dsstitch/metrics.hpp"
#include "dsstitch/simulation.hpp"
#include "dsstitch/stitching.hpp"
#include "dsstitch/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dsstitch;

namespace {

Vec parse_point(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  if (values.size() < 2)
    throw ValidationError("expected a comma-separated point: " + text);
  Vec v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[i] = values[i];
  return v;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) seeds.push_back(std::stoull(item));
  if (seeds.empty()) throw ValidationError("empty seed list");
  return seeds;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DSSTITCH_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw ValidationError("DSSTITCH_SEED is not an integer");
    }
  }
  return 1;
}

// Optional JSON config; command-line flags win over config values.
struct Config {
  json doc = json::object();

  void load(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ValidationError("cannot open config " + path);
    file >> doc;
  }
  double number(const std::string& key, double fallback) const {
    return doc.contains(key) ? doc.at(key).get<double>() : fallback;
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return doc.contains(key) ? doc.at(key).get<std::string>() : fallback;
  }
};

struct ModelSet {
  std::vector<LpvdsResult> learned;
  std::vector<std::string> demo_ids;
};

// Loads the per-demonstration models of `learn` and checks their recorded
// dataset hash against the dataset file in use.
ModelSet load_models(const std::string& dir, const DemonstrationSet& set,
                     const std::string& dataset_hash) {
  ModelSet models;
  for (const auto& demo : set.demonstrations) {
    const std::string path = dir + "/" + demo.id + ".model.json";
    ModelFile file = load_model(path);
    if (!file.dataset_hash.empty() && !dataset_hash.empty() &&
        file.dataset_hash != dataset_hash)
      throw ValidationError(path + ": dataset hash mismatch (model was "
                                   "trained on a different dataset)");
    LpvdsResult result;
    result.mixture.components = file.policy.components;
    const json doc = [&] {
      std::ifstream f(path);
      json d;
      f >> d;
      return d;
    }();
    if (!doc.contains("assignments"))
      throw ValidationError(path + ": missing assignments (not a learn output)");
    result.mixture.assignments = doc.at("assignments").get<std::vector<int>>();
    if (result.mixture.assignments.size() != demo.point_count())
      throw ValidationError(path + ": assignments do not match the dataset");
    result.policy = std::move(file.policy);
    models.learned.push_back(std::move(result));
    models.demo_ids.push_back(demo.id);
  }
  return models;
}

GaussianGraph build_full_graph(const ModelSet& models,
                               const DemonstrationSet& set,
                               const GraphParams& params, bool reduce) {
  std::vector<PolicyRef> refs;
  for (std::size_t i = 0; i < models.learned.size(); ++i)
    refs.push_back({&models.learned[i].policy, &models.learned[i].mixture,
                    models.demo_ids[i]});
  GaussianGraph graph =
      expand_bidirectional(build_graph(refs, params), set);
  return reduce ? reduce_graph(graph) : graph;
}

void write_rollout_csv(const SimulationResult& sim, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write " + path);
  const int d = sim.positions.empty() ? 0 : static_cast<int>(sim.positions[0].size());
  file << "t";
  for (int j = 0; j < d; ++j) file << ",p" << j;
  for (int j = 0; j < d; ++j) file << ",v" << j;
  file << ",mode\n";
  std::size_t mode_idx = 0;
  int mode = 0;
  file.precision(17);
  for (std::size_t i = 0; i < sim.size(); ++i) {
    while (mode_idx < sim.mode_transitions.size() &&
           sim.mode_transitions[mode_idx].first <= i)
      mode = sim.mode_transitions[mode_idx++].second;
    file << sim.times[i];
    for (int j = 0; j < d; ++j) file << ',' << sim.positions[i][j];
    for (int j = 0; j < d; ++j) file << ',' << sim.velocities[i][j];
    file << ',' << mode << '\n';
  }
}

std::vector<Vec> read_rollout_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ValidationError("cannot open " + path);
  std::string line;
  if (!std::getline(file, line)) throw ParseError(path + ": empty rollout");
  // Header: t,p0,...,p{d-1},v0,...,mode
  int d = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ','))
      if (!col.empty() && col[0] == 'p') ++d;
  }
  if (d == 0) throw ParseError(path + ": no position columns");
  std::vector<Vec> positions;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string col;
    std::getline(ss, col, ',');  // t
    Vec p(d);
    for (int j = 0; j < d; ++j) {
      std::getline(ss, col, ',');
      p[j] = std::stod(col);
    }
    positions.push_back(std::move(p));
  }
  return positions;
}

int cmd_gen(const std::string& scenario, std::uint64_t seed, double noise,
            int points, const std::string& out) {
  SyntheticOptions opts;
  opts.noise_sigma = noise;
  opts.points_per_trajectory = points;
  save_dataset(generate_synthetic_2d(scenario, seed, opts), out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_learn(const std::string& dataset_path, const std::string& out_dir,
              std::uint64_t seed, int k_max) {
  const DemonstrationSet set = load_dataset(dataset_path);
  const std::string hash = hash_file(dataset_path);
  fs::create_directories(out_dir);
  json timings = json::object();
  for (const auto& demo : set.demonstrations) {
    LpvdsResult result =
        fit_lpvds(demo.flattened(), demo.attractor, k_max,
                  mix_seed(seed, "learn:" + demo.id));
    ModelFile file;
    file.policy = result.policy;
    file.dataset_hash = hash;
    const std::string model_path = out_dir + "/" + demo.id + ".model.json";
    save_model(file, model_path);
    // Attach the hard assignments so graph construction can recover the
    // per-component clusters.
    {
      std::ifstream in(model_path);
      json doc;
      in >> doc;
      in.close();
      doc["assignments"] = result.mixture.assignments;
      std::ofstream outf(model_path);
      outf << doc.dump(2) << '\n';
    }
    json report{{"final_objective", result.report.final_objective},
                {"iterations", result.report.iterations},
                {"min_eig_p", result.report.stability.min_eig_p},
                {"margins", result.report.stability.margins},
                {"stable", result.report.stability.pass}};
    std::ofstream rep(out_dir + "/" + demo.id + ".report.json");
    rep << report.dump(2) << '\n';
    timings[demo.id] = result.report.wall_seconds;
    std::cout << "learned " << demo.id << ": K="
              << result.policy.component_count()
              << " objective=" << result.report.final_objective << "\n";
  }
  std::ofstream tf(out_dir + "/timings.json");
  tf << timings.dump(2) << '\n';
  return 0;
}

int cmd_graph(const std::string& dataset_path, const std::string& models_dir,
              const GraphParams& params, bool reduce, const std::string& out) {
  const DemonstrationSet set = load_dataset(dataset_path);
  const std::string hash = hash_file(dataset_path);
  const ModelSet models = load_models(models_dir, set, hash);
  const GaussianGraph graph = build_full_graph(models, set, params, reduce);
  save_graph(graph, out, hash);
  std::cout << "graph: " << graph.vertex_count() << " vertices, "
            << graph.edge_count() << " edges\n";
  return 0;
}

int cmd_solve(const std::string& dataset_path, const std::string& models_dir,
              const std::string& method, const std::string& reuse,
              const std::optional<Vec>& start, const Vec& goal,
              const GraphParams& params, double alpha,
              const std::string& table_path, std::uint64_t seed,
              const std::string& out) {
  const DemonstrationSet set = load_dataset(dataset_path);
  const std::string hash = hash_file(dataset_path);
  const ModelSet models = load_models(models_dir, set, hash);
  const GaussianGraph graph = build_full_graph(models, set, params, true);
  const ReuseLevel level =
      reuse == "ds" ? ReuseLevel::ReuseGaussians : ReuseLevel::NoReuse;

  if (method == "stitch-sp" || method == "stitch-spt") {
    StitchRequest req;
    req.goal = goal;
    req.reuse = level;
    if (method == "stitch-sp") {
      if (!start)
        throw ValidationError("stitch-sp requires --start");
      req.method = GraphMethod::ShortestPath;
      req.sigma = shortest_path(attach_endpoints(graph, start, goal));
    } else {
      req.method = GraphMethod::ShortestPathTree;
      req.sigma = shortest_path_tree(attach_endpoints(graph, std::nullopt, goal));
    }
    const StitchResult stitched =
        level == ReuseLevel::ReuseGaussians
            ? stitch_reuse_gaussians(graph, req, set)
            : stitch_no_reuse(graph, req, set, mix_seed(seed, "stitch"));
    ModelFile file;
    file.policy = stitched.policy;
    file.dataset_hash = hash;
    file.sigma_ids = stitched.sigma_ids;
    file.sigma_reversed = stitched.sigma_reversed;
    save_model(file, out);
    std::cout << "stitched " << stitched.sigma_ids.size() << " vertices, rmse="
              << velocity_rmse(stitched.policy, stitched.data.points) << "\n";
    return 0;
  }
  if (method == "chain") {
    if (!start) throw ValidationError("chain requires --start");
    SegmentTable table;
    if (!table_path.empty() && fs::exists(table_path))
      load_segment_table(table_path, table);
    ChainBuildOptions opts;
    opts.alpha = alpha;
    opts.reuse = level;
    opts.seed = mix_seed(seed, "chain");
    opts.table = &table;
    const std::vector<int> sigma =
        shortest_path(attach_endpoints(graph, start, goal));
    const DSChain chain = build_chain(graph, sigma, start, goal, set, opts);
    ChainFile file;
    file.chain = chain;
    file.dataset_hash = hash;
    if (!table_path.empty()) {
      save_segment_table(table, table_path);
      file.table_file = table_path;
    }
    save_chain(file, out);
    std::cout << "chain: " << chain.policy_count() << " policies, segment_fits="
              << table.misses() << " cache_hits=" << table.hits() << "\n";
    return 0;
  }
  throw ValidationError("unknown method: " + method +
                        " (expected stitch-sp, stitch-spt, or chain)");
}

int cmd_simulate(const std::string& artifact, const std::string& dataset_path,
                 const Vec& start, SimulationOptions sim, double eps_goal_rel,
                 const std::string& out) {
  if (!dataset_path.empty()) {
    const DemonstrationSet set = load_dataset(dataset_path);
    sim.eps_goal = eps_goal_rel * set.bbox().diagonal();
    sim.v_max = 10.0 * std::max(set.mean_speed(), 1e-9);
  }
  std::ifstream probe(artifact);
  if (!probe) throw ValidationError("cannot open " + artifact);
  json doc;
  probe >> doc;
  SimulationResult result;
  if (doc.contains("policies")) {
    const ChainFile chain = load_chain(artifact);
    result = simulate(chain.chain, start, sim);
  } else {
    const ModelFile model = load_model(artifact);
    result = simulate(model.policy, start, sim);
  }
  if (!out.empty()) write_rollout_csv(result, out);
  std::cout << (result.success ? "success" : "failure");
  if (result.time_to_goal) std::cout << " t=" << *result.time_to_goal;
  std::cout << "\n";
  return result.success ? 0 : 1;
}

int cmd_bench(const std::string& dataset_path, const std::string& methods_csv,
              const std::string& seeds_csv, const std::string& out_dir,
              BenchParams params) {
  const DemonstrationSet set = load_dataset(dataset_path);
  std::vector<Method> methods;
  {
    std::stringstream ss(methods_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto m = parse_method(item);
      if (!m) throw ValidationError("unknown method: " + item);
      methods.push_back(*m);
    }
  }
  if (methods.empty()) throw ValidationError("empty method list");
  const std::vector<std::uint64_t> seeds = parse_seeds(seeds_csv);
  const BenchResult result = run_benchmark(set, methods, seeds, params);
  fs::create_directories(out_dir);
  write_results_csv(result, out_dir + "/results.csv");
  write_aggregate_csv(result, out_dir + "/aggregate.csv");
  write_timings_csv(result, out_dir + "/timings.csv");
  for (const auto& row : result.aggregate()) {
    std::cout << row.method_id << ": success=" << row.success_rate
              << " rmse=" << row.rmse_mean << " support=" << row.support_mean
              << " synth=" << row.synth_mean << "s (" << row.successes << "/"
              << row.total << ")\n";
  }
  return 0;
}

int cmd_plot(const std::string& dataset_path, const std::string& graph_path,
             const std::vector<std::string>& rollouts, const std::string& out) {
  const DemonstrationSet set = load_dataset(dataset_path);
  if (set.dimension != 2)
    throw ValidationError("plotting supports d=2 only");
  BoundingBox box = set.bbox();
  // Pad the box a little so ellipses stay inside.
  const Vec pad = 0.1 * (box.hi - box.lo);
  box.lo -= pad;
  box.hi += pad;
  SvgPlot plot(box);
  if (!graph_path.empty()) plot.add_graph(load_graph(graph_path));
  plot.add_dataset(set);
  for (const auto& r : rollouts) plot.add_rollout(read_rollout_csv(r));
  plot.write(out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_verify(const std::string& artifact) {
  std::ifstream probe(artifact);
  if (!probe) throw ValidationError("cannot open " + artifact);
  json doc;
  probe >> doc;
  if (doc.contains("policies")) {
    const ChainFile chain = load_chain(artifact);
    const GasCriteriaReport report = verify_gas_criteria(chain.chain);
    std::cout << "1. dynamics bounded:      "
              << (report.dynamics_bounded ? "pass" : "FAIL") << "\n"
              << "2. triggers fire:         "
              << (report.triggers_fire ? "pass" : "FAIL") << "\n"
              << "3. timers finite:         "
              << (report.timers_finite ? "pass" : "FAIL") << "\n"
              << "4. final policy GAS:      "
              << (report.final_policy_gas ? "pass" : "FAIL") << "\n";
    return report.all() ? 0 : 1;
  }
  const ModelFile model = load_model(artifact);
  const StabilityReport report = verify_stability(model.policy);
  std::cout << "min eig(P) = " << report.min_eig_p << "\n";
  for (std::size_t k = 0; k < report.margins.size(); ++k)
    std::cout << "margin[" << k << "] = " << report.margins[k] << "\n";
  std::cout << (report.pass ? "stable" : "UNSTABLE") << "\n";
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stable motion-policy stitching and chaining"};
  app.require_subcommand(1);

  Config config;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config.load(argv[i + 1]);
  app.add_option("--config", "JSON config file (flags override it)")
      ->expected(1);

  GraphParams graph_params;
  graph_params.eta_bc = config.number("eta_bc", 0.05);
  graph_params.eta_dist = config.number("eta_dist", 2.0);
  graph_params.eta_dir = config.number("eta_dir", 1.0);
  double alpha = config.number("alpha", 0.5);
  std::uint64_t seed = default_seed();

  const auto add_graph_options = [&graph_params](CLI::App* cmd) {
    cmd->add_option("--eta-bc", graph_params.eta_bc,
                    "Bhattacharyya edge threshold");
    cmd->add_option("--eta-dist", graph_params.eta_dist,
                    "distance weight exponent");
    cmd->add_option("--eta-dir", graph_params.eta_dir,
                    "alignment weight exponent");
  };

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic 2D dataset");
  std::string scenario, out_path;
  double noise = config.number("noise", 0.05);
  int traj_points = 120;
  gen->add_option("--scenario", scenario,
                  "two-crossing | six-network | s-curves")
      ->required();
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--noise", noise, "position noise sigma");
  gen->add_option("--points", traj_points, "samples per trajectory");
  gen->add_option("-o,--out", out_path, "output dataset file")->required();

  // learn
  auto* learn = app.add_subcommand("learn", "fit one policy per demonstration");
  std::string dataset_path, out_dir;
  int k_max = static_cast<int>(config.number("k_max", 6));
  learn->add_option("--dataset", dataset_path, "dataset file")->required();
  learn->add_option("--out-dir", out_dir, "model output directory")->required();
  learn->add_option("--seed", seed, "RNG seed");
  learn->add_option("--k-max", k_max, "maximum mixture size per demo");

  // graph
  auto* graph_cmd = app.add_subcommand("graph", "build and dump the Gaussian graph");
  std::string models_dir;
  bool no_reduce = false;
  graph_cmd->add_option("--dataset", dataset_path, "dataset file")->required();
  graph_cmd->add_option("--models", models_dir, "learned model directory")
      ->required();
  graph_cmd->add_option("-o,--out", out_path, "output graph file")->required();
  graph_cmd->add_flag("--no-reduce", no_reduce, "skip edge reduction");
  add_graph_options(graph_cmd);

  // solve
  auto* solve = app.add_subcommand("solve", "synthesize a policy or chain");
  std::string method = config.text("method", "");
  std::string reuse = config.text("reuse", "all");
  std::string start_text, goal_text, table_path;
  solve->add_option("--dataset", dataset_path, "dataset file")->required();
  solve->add_option("--models", models_dir, "learned model directory")
      ->required();
  solve->add_option("--method", method, "stitch-sp | stitch-spt | chain")
      ->required();
  solve->add_option("--reuse", reuse, "all (refit everything) | ds (reuse Gaussians)");
  solve->add_option("--start", start_text, "start position x,y[,z...]");
  solve->add_option("--goal", goal_text, "goal position x,y[,z...]")->required();
  solve->add_option("--alpha", alpha, "transition fraction in [0,1]");
  solve->add_option("--precompute", table_path, "segment table file (chain)");
  solve->add_option("--seed", seed, "RNG seed");
  solve->add_option("-o,--out", out_path, "output artifact")->required();
  add_graph_options(solve);

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "roll out an artifact");
  std::string artifact;
  SimulationOptions sim_opts;
  sim_opts.dt = config.number("dt", 0.01);
  sim_opts.t_max = config.number("t_max", 1000.0);
  sim_opts.eps_goal = config.number("eps_goal", 0.01);
  double eps_goal_rel = config.number("eps_goal_rel", 0.01);
  simulate_cmd->add_option("--artifact", artifact, "model or chain file")
      ->required();
  simulate_cmd->add_option("--dataset", dataset_path,
                           "dataset file (sets goal tolerance and speed cap)");
  simulate_cmd->add_option("--start", start_text, "start position")->required();
  simulate_cmd->add_option("--dt", sim_opts.dt, "integration step");
  simulate_cmd->add_option("--t-max", sim_opts.t_max, "time horizon");
  simulate_cmd->add_option("--eps-goal", sim_opts.eps_goal, "goal tolerance");
  simulate_cmd->add_option("--eps-goal-rel", eps_goal_rel,
                           "goal tolerance as a fraction of the workspace");
  simulate_cmd->add_option("-o,--out", out_path, "rollout CSV");

  // bench
  auto* bench = app.add_subcommand("bench", "pairwise endpoint benchmark");
  std::string methods_csv = config.text(
      "methods",
      "baseline-all,baseline-ds,stitch-sp-all,stitch-sp-ds,stitch-spt-all,"
      "stitch-spt-ds,chain-all,chain-ds");
  std::string seeds_csv = config.text("seeds", "1,2,3,4");
  BenchParams bench_params;
  bench_params.jobs = static_cast<int>(std::thread::hardware_concurrency());
  bench->add_option("--dataset", dataset_path, "dataset file")->required();
  bench->add_option("--out-dir", out_dir, "output directory")->required();
  bench->add_option("--methods", methods_csv, "comma-separated method list");
  bench->add_option("--seeds", seeds_csv, "comma-separated seeds");
  bench->add_option("--jobs", bench_params.jobs, "parallel workers");
  bench->add_option("--alpha", bench_params.alpha, "chain transition fraction");
  bench->add_option("--dt", bench_params.dt, "integration step");
  bench->add_option("--t-max", bench_params.t_max, "rollout horizon");
  bench->add_option("--eps-goal-rel", bench_params.eps_goal_rel,
                    "goal tolerance (fraction of workspace diagonal)");
  bench->add_option("--k-max", bench_params.learn_k_max,
                    "per-demo mixture size bound");
  add_graph_options(bench);

  // plot
  auto* plot = app.add_subcommand("plot", "render dataset/graph/rollouts as SVG");
  std::string graph_path;
  std::vector<std::string> rollout_paths;
  plot->add_option("--dataset", dataset_path, "dataset file")->required();
  plot->add_option("--graph", graph_path, "graph file to overlay");
  plot->add_option("--rollout", rollout_paths, "rollout CSVs to overlay");
  plot->add_option("-o,--out", out_path, "output SVG")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "check stability / chain criteria");
  verify->add_option("--artifact", artifact, "model or chain file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
      return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen(scenario, seed, noise, traj_points, out_path);
    if (*learn) return cmd_learn(dataset_path, out_dir, seed, k_max);
    if (*graph_cmd)
      return cmd_graph(dataset_path, models_dir, graph_params, !no_reduce,
                       out_path);
    if (*solve) {
      std::optional<Vec> start;
      if (!start_text.empty()) start = parse_point(start_text);
      return cmd_solve(dataset_path, models_dir, method, reuse, start,
                       parse_point(goal_text), graph_params, alpha, table_path,
                       seed, out_path);
    }
    if (*simulate_cmd)
      return cmd_simulate(artifact, dataset_path, parse_point(start_text),
                          sim_opts, eps_goal_rel, out_path);
    if (*bench)
      return cmd_bench(dataset_path, methods_csv, seeds_csv, out_dir,
                       bench_params);
    if (*plot) return cmd_plot(dataset_path, graph_path, rollout_paths, out_path);
    if (*verify) return cmd_verify(artifact);
  } catch (const MethodFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
