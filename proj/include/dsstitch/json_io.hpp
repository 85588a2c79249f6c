#pragma once

#include <map>
#include <optional>
#include <string>

#include "dsstitch/benchmark.hpp"
#include "dsstitch/chaining.hpp"
#include "dsstitch/dataset.hpp"
#include "dsstitch/gaussian_graph.hpp"
#include "dsstitch/lpvds.hpp"

namespace dsstitch {

/// FNV-1a over the raw file bytes, hex encoded; stored in model artifacts
/// so downstream commands can refuse mismatched datasets.
std::string hash_file(const std::string& path);

struct ModelFile {
  StablePolicy policy;
  std::string dataset_hash;
  // Provenance of stitched models: the vertex selection that produced it.
  std::vector<std::string> sigma_ids;
  std::vector<bool> sigma_reversed;
};

void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);

void save_graph(const GaussianGraph& graph, const std::string& path,
                const std::string& dataset_hash = "");
GaussianGraph load_graph(const std::string& path);

struct ChainFile {
  DSChain chain;
  std::string dataset_hash;
  std::string table_file;  // optional external segment-table reference
};

void save_chain(const ChainFile& chain, const std::string& path);
/// Loads a chain; policies stored as table references are resolved from
/// the table file recorded in the artifact.
ChainFile load_chain(const std::string& path);

void save_segment_table(const SegmentTable& table, const std::string& path);
void load_segment_table(const std::string& path, SegmentTable& table);

}  // namespace dsstitch
