#include "dsstitch/json_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dsstitch/errors.hpp"
#include "dsstitch/hashing.hpp"

namespace dsstitch {

using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ParseError("cannot open " + path);
  json doc;
  try {
    file >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return doc;
}

void write_json(const json& doc, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write " + path);
  file << doc.dump(2) << '\n';
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array()) throw ParseError(what + ": expected an array");
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(what + ": expected numbers");
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty())
    throw ParseError(what + ": expected a matrix");
  const auto nr = rows.size();
  const auto nc = rows[0].size();
  Mat m(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    if (rows[r].size() != nc) throw ParseError(what + ": ragged matrix");
    for (std::size_t c = 0; c < nc; ++c)
      m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
  }
  return m;
}

json component_to_json(const GaussianComponent& c) {
  return json{{"prior", c.prior},
              {"mean", vec_to_json(c.mean)},
              {"covariance", mat_to_json(c.covariance)}};
}

GaussianComponent component_from_json(const json& doc) {
  GaussianComponent c;
  c.prior = doc.at("prior").get<double>();
  c.mean = vec_from_json(doc.at("mean"), "component mean");
  c.covariance = mat_from_json(doc.at("covariance"), "component covariance");
  return c;
}

json policy_to_json(const StablePolicy& policy) {
  json comps = json::array();
  for (const auto& c : policy.components) comps.push_back(component_to_json(c));
  json dyn = json::array();
  for (const auto& a : policy.dynamics) dyn.push_back(mat_to_json(a));
  return json{{"version", 1},
              {"dimension", policy.dimension()},
              {"attractor", vec_to_json(policy.attractor)},
              {"components", std::move(comps)},
              {"dynamics", std::move(dyn)},
              {"lyapunov", mat_to_json(policy.lyapunov)}};
}

StablePolicy policy_from_json(const json& doc) {
  StablePolicy policy;
  for (const auto& c : doc.at("components"))
    policy.components.push_back(component_from_json(c));
  for (const auto& a : doc.at("dynamics"))
    policy.dynamics.push_back(mat_from_json(a, "dynamics"));
  policy.lyapunov = mat_from_json(doc.at("lyapunov"), "lyapunov");
  policy.attractor = vec_from_json(doc.at("attractor"), "attractor");
  if (policy.dynamics.size() != policy.components.size())
    throw ParseError("model: dynamics/components count mismatch");
  return policy;
}

}  // namespace

std::string hash_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ParseError("cannot open " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  const std::string bytes = buffer.str();
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

DemonstrationSet load_dataset(const std::string& path,
                              const ValidationOptions& opts) {
  const json doc = read_json(path);
  DemonstrationSet set;
  try {
    if (doc.at("version").get<int>() != 1)
      throw ParseError(path + ": unsupported dataset version");
    set.dimension = doc.at("dimension").get<int>();
    for (const auto& jdemo : doc.at("demonstrations")) {
      Demonstration demo;
      demo.id = jdemo.at("id").get<std::string>();
      demo.bidirectional = jdemo.value("bidirectional", false);
      for (const auto& jtraj : jdemo.at("trajectories")) {
        Trajectory traj;
        std::vector<Vec> positions;
        for (const auto& row : jtraj.at("positions"))
          positions.push_back(vec_from_json(row, "positions"));
        std::vector<double> timestamps;
        if (jtraj.contains("timestamps")) {
          for (const auto& t : jtraj.at("timestamps"))
            timestamps.push_back(t.get<double>());
          if (timestamps.size() != positions.size())
            throw ParseError(path + ": timestamps/positions length mismatch");
        } else {
          const double dt = jtraj.value("dt", 1.0);
          if (!(dt > 0.0)) throw ParseError(path + ": dt must be > 0");
          for (std::size_t i = 0; i < positions.size(); ++i)
            timestamps.push_back(dt * static_cast<double>(i));
        }
        std::vector<Vec> velocities;
        if (jtraj.contains("velocities")) {
          for (const auto& row : jtraj.at("velocities"))
            velocities.push_back(vec_from_json(row, "velocities"));
          if (velocities.size() != positions.size())
            throw ParseError(path + ": velocities/positions length mismatch");
        } else {
          velocities = estimate_velocities(positions, timestamps);
          traj.velocities_estimated = true;
        }
        for (std::size_t i = 0; i < positions.size(); ++i)
          traj.points.emplace_back(std::move(positions[i]),
                                   std::move(velocities[i]));
        traj.timestamps = std::move(timestamps);
        demo.trajectories.push_back(std::move(traj));
      }
      if (jdemo.contains("attractor")) {
        demo.attractor = vec_from_json(jdemo.at("attractor"), "attractor");
      } else {
        // Default: mean of trajectory endpoints.
        Vec mean = Vec::Zero(set.dimension);
        for (const auto& t : demo.trajectories)
          mean += t.points.back().position;
        demo.attractor = mean / static_cast<double>(demo.trajectories.size());
      }
      set.demonstrations.push_back(std::move(demo));
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  validate(set, opts);
  return set;
}

void save_dataset(const DemonstrationSet& set, const std::string& path) {
  json demos = json::array();
  for (const auto& demo : set.demonstrations) {
    json trajs = json::array();
    for (const auto& traj : demo.trajectories) {
      json positions = json::array();
      json velocities = json::array();
      json timestamps = json::array();
      const bool have_times = traj.timestamps.size() == traj.points.size();
      for (std::size_t i = 0; i < traj.points.size(); ++i) {
        positions.push_back(vec_to_json(traj.points[i].position));
        velocities.push_back(vec_to_json(traj.points[i].velocity));
        timestamps.push_back(have_times ? traj.timestamps[i]
                                        : static_cast<double>(i));
      }
      trajs.push_back(json{{"timestamps", std::move(timestamps)},
                           {"positions", std::move(positions)},
                           {"velocities", std::move(velocities)}});
    }
    demos.push_back(json{{"id", demo.id},
                         {"bidirectional", demo.bidirectional},
                         {"attractor", vec_to_json(demo.attractor)},
                         {"trajectories", std::move(trajs)}});
  }
  write_json(json{{"version", 1},
                  {"dimension", set.dimension},
                  {"demonstrations", std::move(demos)}},
             path);
}

void save_model(const ModelFile& model, const std::string& path) {
  json doc = policy_to_json(model.policy);
  if (!model.dataset_hash.empty()) doc["dataset_hash"] = model.dataset_hash;
  if (!model.sigma_ids.empty()) {
    json sigma = json::array();
    for (std::size_t i = 0; i < model.sigma_ids.size(); ++i)
      sigma.push_back(json{{"id", model.sigma_ids[i]},
                           {"reversed", bool(model.sigma_reversed[i])}});
    doc["provenance"] = json{{"sigma", std::move(sigma)}};
  }
  write_json(doc, path);
}

ModelFile load_model(const std::string& path) {
  const json doc = read_json(path);
  ModelFile model;
  try {
    model.policy = policy_from_json(doc);
    model.dataset_hash = doc.value("dataset_hash", "");
    if (doc.contains("provenance")) {
      for (const auto& v : doc.at("provenance").at("sigma")) {
        model.sigma_ids.push_back(v.at("id").get<std::string>());
        model.sigma_reversed.push_back(v.at("reversed").get<bool>());
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model;
}

void save_graph(const GaussianGraph& graph, const std::string& path,
                const std::string& dataset_hash) {
  json vertices = json::array();
  for (const auto& v : graph.vertices) {
    json jv = component_to_json(v.component);
    jv["id"] = v.id();
    jv["demo"] = v.source.demo_id;
    jv["component_index"] = v.source.component_index;
    jv["reversed"] = v.reversed;
    jv["dynamics"] = mat_to_json(v.dynamics);
    jv["direction"] = vec_to_json(v.direction);
    jv["cluster"] = v.cluster;
    vertices.push_back(std::move(jv));
  }
  json edges = json::array();
  for (int i = 0; i < graph.vertex_count(); ++i)
    for (const auto& [j, w] : graph.adjacency[i])
      edges.push_back(json{{"from", graph.vertices[i].id()},
                           {"to", graph.vertices[j].id()},
                           {"weight", w}});
  json doc{{"version", 1},
           {"params",
            {{"eta_bc", graph.params.eta_bc},
             {"eta_dist", graph.params.eta_dist},
             {"eta_dir", graph.params.eta_dir}}},
           {"vertices", std::move(vertices)},
           {"edges", std::move(edges)}};
  if (!dataset_hash.empty()) doc["dataset_hash"] = dataset_hash;
  write_json(doc, path);
}

GaussianGraph load_graph(const std::string& path) {
  const json doc = read_json(path);
  GaussianGraph graph;
  try {
    graph.params.eta_bc = doc.at("params").at("eta_bc").get<double>();
    graph.params.eta_dist = doc.at("params").at("eta_dist").get<double>();
    graph.params.eta_dir = doc.at("params").at("eta_dir").get<double>();
    for (const auto& jv : doc.at("vertices")) {
      GraphVertex v;
      v.component = component_from_json(jv);
      v.source = {jv.at("demo").get<std::string>(),
                  jv.at("component_index").get<int>()};
      v.reversed = jv.at("reversed").get<bool>();
      v.dynamics = mat_from_json(jv.at("dynamics"), "vertex dynamics");
      v.direction = vec_from_json(jv.at("direction"), "vertex direction");
      v.cluster = jv.at("cluster").get<std::vector<std::size_t>>();
      graph.vertices.push_back(std::move(v));
    }
    graph.adjacency.assign(graph.vertex_count(), {});
    for (const auto& je : doc.at("edges")) {
      const int from = graph.find_vertex(je.at("from").get<std::string>());
      const int to = graph.find_vertex(je.at("to").get<std::string>());
      if (from < 0 || to < 0) throw ParseError(path + ": unknown edge vertex");
      graph.adjacency[from].emplace_back(to, je.at("weight").get<double>());
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return graph;
}

void save_chain(const ChainFile& file, const std::string& path) {
  const DSChain& chain = file.chain;
  json policies = json::array();
  const int base = chain.has_initial_policy ? 1 : 0;
  const int seg_count =
      std::max(static_cast<int>(chain.sigma_ids.size()) - 2, 0);
  for (int i = 0; i < chain.policy_count(); ++i) {
    const bool is_segment = i >= base && i < base + seg_count;
    if (is_segment && !file.table_file.empty()) {
      const int s = i - base;
      policies.push_back(json{
          {"table_key", SegmentTable::key(chain.sigma_ids[s],
                                          chain.sigma_ids[s + 1],
                                          chain.sigma_ids[s + 2], chain.reuse)}});
    } else {
      policies.push_back(json{{"model", policy_to_json(chain.policies[i])}});
    }
  }
  json triggers = json::array();
  for (const auto& t : chain.triggers)
    triggers.push_back(json{{"from", vec_to_json(t.from)},
                            {"mid", vec_to_json(t.mid)},
                            {"to", vec_to_json(t.to)}});
  json sigma = json::array();
  for (std::size_t i = 0; i < chain.sigma_ids.size(); ++i)
    sigma.push_back(json{{"id", chain.sigma_ids[i]},
                         {"reversed", bool(chain.sigma_reversed[i])}});
  json doc{{"version", 1},
           {"alpha", chain.alpha},
           {"goal", vec_to_json(chain.goal)},
           {"reuse", to_string(chain.reuse)},
           {"has_initial_policy", chain.has_initial_policy},
           {"policies", std::move(policies)},
           {"triggers", std::move(triggers)},
           {"timers", chain.timers},
           {"sigma", std::move(sigma)}};
  if (!file.table_file.empty()) doc["table_file"] = file.table_file;
  if (!file.dataset_hash.empty()) doc["dataset_hash"] = file.dataset_hash;
  write_json(doc, path);
}

ChainFile load_chain(const std::string& path) {
  const json doc = read_json(path);
  ChainFile file;
  try {
    DSChain& chain = file.chain;
    chain.alpha = doc.at("alpha").get<double>();
    chain.goal = vec_from_json(doc.at("goal"), "chain goal");
    chain.reuse = doc.value("reuse", "all") == std::string("ds")
                      ? ReuseLevel::ReuseGaussians
                      : ReuseLevel::NoReuse;
    chain.has_initial_policy = doc.at("has_initial_policy").get<bool>();
    file.table_file = doc.value("table_file", "");
    file.dataset_hash = doc.value("dataset_hash", "");
    SegmentTable table;
    if (!file.table_file.empty()) load_segment_table(file.table_file, table);
    for (const auto& jp : doc.at("policies")) {
      if (jp.contains("table_key")) {
        const auto key = jp.at("table_key").get<std::string>();
        auto policy = table.lookup(key);
        if (!policy)
          throw ParseError(path + ": missing table entry " + key);
        chain.policies.push_back(std::move(*policy));
      } else {
        chain.policies.push_back(policy_from_json(jp.at("model")));
      }
    }
    for (const auto& jt : doc.at("triggers")) {
      TriggerAnchors t;
      t.from = vec_from_json(jt.at("from"), "trigger from");
      t.mid = vec_from_json(jt.at("mid"), "trigger mid");
      t.to = vec_from_json(jt.at("to"), "trigger to");
      chain.triggers.push_back(std::move(t));
    }
    chain.timers = doc.at("timers").get<std::vector<double>>();
    for (const auto& v : doc.at("sigma")) {
      chain.sigma_ids.push_back(v.at("id").get<std::string>());
      chain.sigma_reversed.push_back(v.at("reversed").get<bool>());
    }
    if (chain.timers.size() != chain.triggers.size() ||
        chain.triggers.size() + 1 !=
            static_cast<std::size_t>(chain.policy_count()))
      throw ParseError(path + ": inconsistent chain structure");
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return file;
}

void save_segment_table(const SegmentTable& table, const std::string& path) {
  json entries = json::object();
  for (const auto& [key, policy] : table.snapshot())
    entries[key] = policy_to_json(policy);
  write_json(json{{"version", 1}, {"entries", std::move(entries)}}, path);
}

void load_segment_table(const std::string& path, SegmentTable& table) {
  const json doc = read_json(path);
  try {
    for (const auto& [key, value] : doc.at("entries").items())
      table.insert(key, policy_from_json(value));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace dsstitch
