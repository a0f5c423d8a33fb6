#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace gridfail {

// Static description of the grid: element counts and how elements attach to
// substations. All ids are dense zero-based indices.
struct GridSchema {
  std::string id;
  int n_substations = 0;
  int n_lines = 0;
  int n_generators = 0;
  int n_loads = 0;
  std::vector<std::pair<int, int>> line_endpoints;  // (origin sub, extremity sub)
  std::vector<int> gen_substation;
  std::vector<int> load_substation;
  std::set<int> attackable_line_ids;
  std::vector<int> sub_grid_id;  // optional region label per substation; empty = none

  bool operator==(const GridSchema&) const = default;
};

struct AgentKind {
  enum Value : int { kDoNothing = 0, kSenior = 1, kTopology = 2, kOther = 3 };
  Value value = kDoNothing;
  std::string other_label;  // only meaningful when value == kOther

  std::string name() const;
  static AgentKind parse(const std::string& name);
  bool operator==(const AgentKind&) const = default;
};

enum class ErrorType {
  kDcInitSolverFactor,
  kAcTooManyIterations,
  kDcInitSolverSolve,
  kNone,
};

std::string to_string(ErrorType e);
// Accepts both the canonical token and the raw solver message text; nullopt on
// unrecognized input.
std::optional<ErrorType> parse_error_type(const std::string& s);

// One grid snapshot. Per-element vectors are indexed by the schema's ids.
struct Observation {
  int step = 0;
  int minute_of_hour = 0;
  int hour_of_day = 0;
  int day_of_week = 0;
  std::vector<double> rho;                  // per line, loading ratio >= 0
  std::vector<std::uint8_t> line_status;    // per line, 1 = connected
  std::vector<int> ts_overflow_line;        // per line, consecutive steps at rho >= 1
  std::vector<int> cooldown_line;           // per line
  std::vector<int> cooldown_sub;            // per substation
  std::vector<int> maintenance_time;        // per line, steps to next outage, -1 = none
  std::vector<double> p_or;                 // per line, MW at origin
  std::vector<double> p_ex;                 // per line, MW at extremity
  std::vector<double> gen_p;                // per generator, MW
  std::vector<double> load_p;               // per load, MW
  std::vector<int> sub_topology;            // per substation, bus config, 0 = default

  bool operator==(const Observation&) const = default;
};

struct TerminationInfo {
  enum class Outcome { kSurvived, kFailed };
  Outcome outcome = Outcome::kSurvived;
  std::optional<int> failed_step;  // present iff kFailed
  ErrorType error_type = ErrorType::kNone;
  int horizon = 2016;

  bool operator==(const TerminationInfo&) const = default;
};

std::string to_string(TerminationInfo::Outcome o);
std::optional<TerminationInfo::Outcome> parse_outcome(const std::string& s);

// One chronic run by one agent/seed. Observations are steps 0..n-1; if the run
// failed at step n the last recorded observation is step n-1.
struct Episode {
  std::string chronic_id;
  AgentKind agent;
  std::int64_t seed = 0;
  std::string schema_ref;
  std::vector<Observation> observations;
  TerminationInfo termination;

  bool operator==(const Episode&) const = default;
};

struct Violation {
  std::string message;  // human-readable, includes element/step where known
  int step = -1;        // -1 = not step-specific
  int element = -1;     // -1 = not element-specific
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_schema(const GridSchema& s);

// Total: reports every invariant violation instead of throwing, even on
// non-finite numeric content.
ValidationReport validate_episode(const Episode& e, const GridSchema& s);

}  // namespace gridfail
