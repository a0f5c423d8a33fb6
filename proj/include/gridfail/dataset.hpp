#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridfail/grid_model.hpp"
#include "gridfail/table.hpp"

namespace gridfail {

enum class ForecastLabel : int { kSurvived = 0, kNMinus5 = 1, kNMinus3 = 2, kNMinus1 = 3 };

std::string to_string(ForecastLabel l);
std::optional<ForecastLabel> parse_forecast_label(const std::string& s);
const std::vector<std::string>& forecast_class_names();

// Fixed-order feature layout derived from the grid schema, with the element
// mapping used by importance aggregation.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<std::string> element_type;  // line | generator | load | substation | descriptive
  std::vector<int> element_id;            // -1 for descriptive features

  std::size_t size() const { return names.size(); }
  bool operator==(const FeatureSchema&) const = default;
};

FeatureSchema make_feature_schema(const GridSchema& s);
void write_feature_schema(const FeatureSchema& fs, const std::filesystem::path& dest);
FeatureSchema read_feature_schema(const std::filesystem::path& source);

struct ForecastSample {
  std::vector<double> features;
  ForecastLabel label = ForecastLabel::kSurvived;
  std::string chronic_id;
  std::int64_t seed = 0;
  int source_step = 0;

  bool operator==(const ForecastSample&) const = default;
};

// Feature vector for one observation: per-line families, per-generator and
// per-load power, per-substation changed-vs-step-0 flags, calendar fields and
// the agent code. Throws on schema mismatch.
std::vector<double> featurize_observation(const Observation& o, const Observation& first,
                                          const AgentKind& agent, const GridSchema& s);

struct DatasetBuildOptions {
  std::uint64_t seed = 0;
  int survived_per_failure = 3;
  int min_gap = 6;
  double high_rho_quantile = 0.75;
  bool survived_from_failed = true;
  bool survived_from_survived = true;
};

// Re-playable episode stream; must yield the same episodes in the same order
// on every call (the builder runs two passes).
using EpisodeVisitor = std::function<void(const std::function<void(const Episode&)>&)>;

// Failure samples at n-1 / n-3 / n-5 plus seeded survived samples from
// high-rho observations, balanced so survived = failure-sample count.
// Throws when no episode yields a sample.
std::vector<ForecastSample> build_dataset(const EpisodeVisitor& for_each,
                                          const GridSchema& s,
                                          const DatasetBuildOptions& opt);

struct SplitFractions {
  double train = 0.8, validation = 0.1, test = 0.1;
};

struct DatasetSplit {
  std::vector<ForecastSample> train, validation, test, ood;
  SplitFractions fractions;
  std::uint64_t seed = 0;
};

// Chronics are shuffled by seed and partitioned; every sample of a chronic
// lands in exactly one split. Throws when fractions are invalid or there are
// fewer chronics than splits.
DatasetSplit split_by_chronic(const std::vector<ForecastSample>& samples,
                              SplitFractions fractions, std::uint64_t seed);

// Empty result = no leakage; otherwise the offending chronic ids.
std::vector<std::string> chronic_leakage(const DatasetSplit& split);

std::vector<double> label_proportions(const std::vector<ForecastSample>& samples);

Table samples_to_table(const std::vector<ForecastSample>& samples,
                       const FeatureSchema& fs);
std::vector<ForecastSample> samples_from_table(const Table& t, const FeatureSchema& fs);

}  // namespace gridfail
