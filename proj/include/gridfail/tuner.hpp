#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "gridfail/grid_model.hpp"
#include "gridfail/table.hpp"

namespace gridfail {

struct ParamDomain {
  enum class Kind { kUniform, kLogUniform, kInt, kCategorical };
  Kind kind = Kind::kUniform;
  double lo = 0.0, hi = 1.0;           // numeric kinds; inclusive for kInt
  std::vector<std::string> categories;  // kCategorical

  static ParamDomain uniform(double lo, double hi);
  static ParamDomain log_uniform(double lo, double hi);
  static ParamDomain integer(int lo, int hi);
  static ParamDomain categorical(std::vector<std::string> values);
};

using ParamValue = std::variant<double, std::string>;
using ParamConfig = std::map<std::string, ParamValue>;

struct SearchSpace {
  std::map<std::string, ParamDomain> params;  // ordered; iteration is deterministic
};

ValidationReport validate_search_space(const SearchSpace& space);

struct TrialRecord {
  ParamConfig config;
  double objective = 0.0;  // maximized
  int index = 0;
  bool failed = false;
};

struct TpeOptions {
  int n_trials = 50;
  int n_startup_random = 10;
  double gamma = 0.25;
  int n_candidates = 24;
  std::uint64_t seed = 0;
};

struct TpeResult {
  ParamConfig best;
  double best_objective = 0.0;
  std::vector<TrialRecord> history;
};

// Sequential model-based search: random startup trials, then candidates drawn
// from a Gaussian/categorical kernel estimate of the best gamma-fraction and
// scored by good/all density ratio. A throwing or NaN objective marks the
// trial failed and it is skipped in the density fits. Deterministic given the
// seed.
TpeResult tpe_optimize(const SearchSpace& space,
                       const std::function<double(const ParamConfig&)>& objective,
                       const TpeOptions& opt);

Table trial_history_table(const TpeResult& result, const SearchSpace& space);

}  // namespace gridfail
