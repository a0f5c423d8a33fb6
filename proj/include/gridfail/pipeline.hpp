#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridfail/cluster.hpp"
#include "gridfail/dataset.hpp"
#include "gridfail/synth.hpp"
#include "gridfail/trees.hpp"
#include "gridfail/tuner.hpp"

namespace gridfail {

// CLI exit code categories.
enum class PipelineErrorKind : int { kMissingInput = 2, kConfig = 3, kData = 4 };

struct PipelineError : std::runtime_error {
  PipelineError(PipelineErrorKind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
  PipelineErrorKind kind;
  int exit_code() const { return static_cast<int>(kind); }
};

struct OodSpec {
  bool enabled = false;
  int n_chronics = 12;
  std::uint64_t seed = 999;
  std::string chronic_prefix = "ood";
  double load_peak_mw = 0.0;     // 0 = inherit
  double attacks_per_day = -1.0; // <0 = inherit
  double load_noise_sd = -1.0;   // <0 = inherit
};

struct PipelineConfig {
  int workers = 1;
  std::filesystem::path output_dir = "out";

  CorpusSpec corpus;  // synth section
  OodSpec ood;

  int tracked_line = -1;
  int tracked_gen = -1;

  double cluster_variance_threshold = 0.05;
  int cluster_k_lo = 2, cluster_k_hi = 10;
  int cluster_k = 0;  // 0 = pick by silhouette
  std::uint64_t cluster_seed = 5;
  int cluster_restarts = 10;
  std::vector<std::string> cluster_names;

  DatasetBuildOptions dataset;
  SplitFractions fractions;

  std::string learner = "GBDT";  // or RANDOM_FOREST
  GbdtConfig gbdt;
  RfConfig rf;

  bool tune_enabled = false;
  TpeOptions tune;

  int top_k_features = 30;
  int top_k_elements = 10;
};

nlohmann::ordered_json default_pipeline_json();

// Strict parse: unknown keys are errors (PipelineError, kConfig), as are
// malformed values.
PipelineConfig pipeline_config_from_json(const nlohmann::ordered_json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// One line per config key with its meaning, for --help.
std::string pipeline_config_reference();

// Each step reads its declared inputs from cfg.output_dir and returns the
// files it wrote. Missing upstream artifacts raise kMissingInput.
std::vector<std::filesystem::path> run_synth(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_ingest(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_features(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_cluster(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_build_dataset(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_train(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_tune(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_eval(const PipelineConfig& cfg);
std::vector<std::filesystem::path> run_importance(const PipelineConfig& cfg);
// Full chain plus report_manifest.csv with per-file content hashes.
std::vector<std::filesystem::path> run_report_all(const PipelineConfig& cfg);

std::uint64_t fnv1a64_file(const std::filesystem::path& p);

}  // namespace gridfail
