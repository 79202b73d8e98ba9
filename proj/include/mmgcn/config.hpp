#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "mmgcn/data.hpp"
#include "mmgcn/params.hpp"
#include "mmgcn/regularization.hpp"
#include "mmgcn/training.hpp"

namespace mmgcn {

enum class Variant { Mgcn, GgcnOnly, MrgcnOnly, GgcnPlusMrgcn2S, GgcnPlusMrgcn4S };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);  // throws ConfigError("variant", ...)

struct NetworkSpec {
  std::size_t degree = 4;
  std::size_t modalities = 3;
  std::vector<std::size_t> dims{32, 64, 32, 1};  // output width of each layer
  BasisKind basis = BasisKind::Power;
  bool per_vertex_bias = false;
};

/// Layer kinds and priors implied by the variant. Two-plus-two layouts split
/// the stack in half: lower GGCN, upper MRGCN.
NetworkConfig build_network(Variant variant, const NetworkSpec& spec, std::size_t vertex_count);
/// Frozen covariance modes implied by the variant (2S freezes I and O).
std::array<bool, 4> variant_frozen_modes(Variant variant);

struct AnalysisOptions {
  bool off_diagonal_only = false;  // feature-independence norm without variances
  double graph_threshold = 0.0;    // edge threshold for graph statistics
};

struct RunConfig {
  std::filesystem::path dataset;     // manifest.json, resolved against the config file's directory
  std::filesystem::path output_dir = "run";
  Variant variant = Variant::GgcnPlusMrgcn2S;
  NetworkSpec network;
  TrainConfig train;
  long long predict_target_index = -1;  // -1: first test index
  AnalysisOptions analysis;
};

/// Parses a run config; unknown keys and ill-typed values throw ConfigError naming the field.
/// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

SynthConfig parse_synth_config(const nlohmann::json& j);
SynthConfig load_synth_config(const std::filesystem::path& path);
nlohmann::json to_json(const SynthConfig& cfg);

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RegularizerConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

/// Reads and parses a JSON file; throws LoadError when unreadable or malformed.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace mmgcn
