#include "gridfail/grid_model.hpp"

#include <cmath>
#include <string>

namespace gridfail {
namespace {

std::string fmt(const char* what, const char* kind, int element, int step) {
  std::string m = what;
  m += ", ";
  m += kind;
  m += " " + std::to_string(element) + ", step " + std::to_string(step);
  return m;
}

void check_len(std::vector<Violation>& out, std::size_t got, int want,
               const char* field, int step) {
  if (static_cast<int>(got) != want) {
    out.push_back({std::string(field) + " length " + std::to_string(got) +
                       " does not match schema count " + std::to_string(want) +
                       ", step " + std::to_string(step),
                   step, -1});
  }
}

}  // namespace

std::string AgentKind::name() const {
  switch (value) {
    case kDoNothing: return "DO_NOTHING";
    case kSenior: return "SENIOR";
    case kTopology: return "TOPOLOGY";
    case kOther: return other_label.empty() ? "OTHER" : other_label;
  }
  return "OTHER";
}

AgentKind AgentKind::parse(const std::string& name) {
  if (name == "DO_NOTHING") return {kDoNothing, {}};
  if (name == "SENIOR") return {kSenior, {}};
  if (name == "TOPOLOGY") return {kTopology, {}};
  return {kOther, name};
}

std::string to_string(ErrorType e) {
  switch (e) {
    case ErrorType::kDcInitSolverFactor: return "DC_INIT_SOLVER_FACTOR";
    case ErrorType::kAcTooManyIterations: return "AC_TOO_MANY_ITERATIONS";
    case ErrorType::kDcInitSolverSolve: return "DC_INIT_SOLVER_SOLVE";
    case ErrorType::kNone: return "NONE";
  }
  return "NONE";
}

std::optional<ErrorType> parse_error_type(const std::string& s) {
  if (s == "DC_INIT_SOLVER_FACTOR") return ErrorType::kDcInitSolverFactor;
  if (s == "AC_TOO_MANY_ITERATIONS") return ErrorType::kAcTooManyIterations;
  if (s == "DC_INIT_SOLVER_SOLVE") return ErrorType::kDcInitSolverSolve;
  if (s == "NONE") return ErrorType::kNone;
  // Raw solver messages distinguish the three failure flavors by suffix.
  if (s.find("TooManyIterations") != std::string::npos) return ErrorType::kAcTooManyIterations;
  if (s.find("SolverFactor") != std::string::npos) return ErrorType::kDcInitSolverFactor;
  if (s.find("SolverSolve") != std::string::npos) return ErrorType::kDcInitSolverSolve;
  return std::nullopt;
}

std::string to_string(TerminationInfo::Outcome o) {
  return o == TerminationInfo::Outcome::kSurvived ? "SURVIVED" : "FAILED";
}

std::optional<TerminationInfo::Outcome> parse_outcome(const std::string& s) {
  if (s == "SURVIVED") return TerminationInfo::Outcome::kSurvived;
  if (s == "FAILED") return TerminationInfo::Outcome::kFailed;
  return std::nullopt;
}

ValidationReport validate_schema(const GridSchema& s) {
  ValidationReport r;
  auto& v = r.violations;
  if (s.n_substations < 1) v.push_back({"n_substations must be >= 1", -1, -1});
  check_len(v, s.line_endpoints.size(), s.n_lines, "line_endpoints", -1);
  check_len(v, s.gen_substation.size(), s.n_generators, "gen_substation", -1);
  check_len(v, s.load_substation.size(), s.n_loads, "load_substation", -1);
  if (!s.sub_grid_id.empty())
    check_len(v, s.sub_grid_id.size(), s.n_substations, "sub_grid_id", -1);
  for (std::size_t i = 0; i < s.line_endpoints.size(); ++i) {
    auto [a, b] = s.line_endpoints[i];
    if (a < 0 || a >= s.n_substations || b < 0 || b >= s.n_substations)
      v.push_back({fmt("line endpoint out of range", "line", static_cast<int>(i), -1),
                   -1, static_cast<int>(i)});
  }
  for (std::size_t i = 0; i < s.gen_substation.size(); ++i)
    if (s.gen_substation[i] < 0 || s.gen_substation[i] >= s.n_substations)
      v.push_back({fmt("generator substation out of range", "generator",
                       static_cast<int>(i), -1), -1, static_cast<int>(i)});
  for (std::size_t i = 0; i < s.load_substation.size(); ++i)
    if (s.load_substation[i] < 0 || s.load_substation[i] >= s.n_substations)
      v.push_back({fmt("load substation out of range", "load", static_cast<int>(i), -1),
                   -1, static_cast<int>(i)});
  for (int l : s.attackable_line_ids)
    if (l < 0 || l >= s.n_lines)
      v.push_back({fmt("attackable line id out of range", "line", l, -1), -1, l});
  return r;
}

ValidationReport validate_episode(const Episode& e, const GridSchema& s) {
  ValidationReport r;
  auto& v = r.violations;

  if (e.observations.empty()) {
    v.push_back({"episode has no observations", -1, -1});
  }
  for (std::size_t i = 0; i < e.observations.size(); ++i) {
    const Observation& o = e.observations[i];
    const int step = o.step;
    if (o.step != static_cast<int>(i))
      v.push_back({"step values must increase by 1 from 0, found " +
                       std::to_string(o.step) + " at position " + std::to_string(i),
                   step, -1});
    check_len(v, o.rho.size(), s.n_lines, "rho", step);
    check_len(v, o.line_status.size(), s.n_lines, "line_status", step);
    check_len(v, o.ts_overflow_line.size(), s.n_lines, "ts_overflow_line", step);
    check_len(v, o.cooldown_line.size(), s.n_lines, "cooldown_line", step);
    check_len(v, o.maintenance_time.size(), s.n_lines, "maintenance_time", step);
    check_len(v, o.p_or.size(), s.n_lines, "p_or", step);
    check_len(v, o.p_ex.size(), s.n_lines, "p_ex", step);
    check_len(v, o.cooldown_sub.size(), s.n_substations, "cooldown_sub", step);
    check_len(v, o.sub_topology.size(), s.n_substations, "sub_topology", step);
    check_len(v, o.gen_p.size(), s.n_generators, "gen_p", step);
    check_len(v, o.load_p.size(), s.n_loads, "load_p", step);

    const std::size_t nl = std::min(o.rho.size(), o.line_status.size());
    for (std::size_t l = 0; l < o.rho.size(); ++l) {
      if (!std::isfinite(o.rho[l]))
        v.push_back({fmt("rho not finite", "line", static_cast<int>(l), step), step,
                     static_cast<int>(l)});
      else if (o.rho[l] < 0.0)
        v.push_back({fmt("rho negative", "line", static_cast<int>(l), step), step,
                     static_cast<int>(l)});
    }
    for (std::size_t l = 0; l < o.p_or.size(); ++l)
      if (!std::isfinite(o.p_or[l]))
        v.push_back({fmt("p_or not finite", "line", static_cast<int>(l), step), step,
                     static_cast<int>(l)});
    for (std::size_t l = 0; l < o.p_ex.size(); ++l)
      if (!std::isfinite(o.p_ex[l]))
        v.push_back({fmt("p_ex not finite", "line", static_cast<int>(l), step), step,
                     static_cast<int>(l)});
    for (std::size_t g = 0; g < o.gen_p.size(); ++g)
      if (!std::isfinite(o.gen_p[g]))
        v.push_back({fmt("gen_p not finite", "generator", static_cast<int>(g), step),
                     step, static_cast<int>(g)});
    for (std::size_t d = 0; d < o.load_p.size(); ++d)
      if (!std::isfinite(o.load_p[d]))
        v.push_back({fmt("load_p not finite", "load", static_cast<int>(d), step), step,
                     static_cast<int>(d)});

    for (std::size_t l = 0; l < nl; ++l) {
      const bool connected = o.line_status[l] != 0;
      if (!connected) {
        if (o.rho[l] != 0.0)
          v.push_back({fmt("disconnected line must have rho 0", "line",
                           static_cast<int>(l), step), step, static_cast<int>(l)});
        if (l < o.p_or.size() && o.p_or[l] != 0.0)
          v.push_back({fmt("disconnected line must have p_or 0", "line",
                           static_cast<int>(l), step), step, static_cast<int>(l)});
        if (l < o.p_ex.size() && o.p_ex[l] != 0.0)
          v.push_back({fmt("disconnected line must have p_ex 0", "line",
                           static_cast<int>(l), step), step, static_cast<int>(l)});
      } else if (l < o.ts_overflow_line.size() && o.rho[l] < 1.0 &&
                 o.ts_overflow_line[l] != 0) {
        v.push_back({fmt("ts_overflow_line must be 0 when rho < 1 on a connected line",
                         "line", static_cast<int>(l), step), step, static_cast<int>(l)});
      }
    }
  }

  const TerminationInfo& t = e.termination;
  const bool survived = t.outcome == TerminationInfo::Outcome::kSurvived;
  if (survived != (t.error_type == ErrorType::kNone))
    v.push_back({"outcome and error_type are inconsistent", -1, -1});
  if (survived != !t.failed_step.has_value())
    v.push_back({survived ? "survived episode must not carry failed_step"
                          : "failed episode must carry failed_step", -1, -1});
  if (t.failed_step && *t.failed_step > t.horizon)
    v.push_back({"failed_step exceeds horizon", -1, -1});
  if (t.failed_step && !e.observations.empty() &&
      e.observations.back().step != *t.failed_step - 1)
    v.push_back({"last observation must be n-1", e.observations.back().step, -1});

  return r;
}

}  // namespace gridfail
