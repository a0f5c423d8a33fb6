#include "gridfail/episode_io.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace gridfail {

using json = nlohmann::ordered_json;

namespace {

std::string summarize(const ValidationReport& r) {
  std::string msg = "episode failed validation with " +
                    std::to_string(r.violations.size()) + " violation(s)";
  for (std::size_t i = 0; i < r.violations.size() && i < 5; ++i)
    msg += "; " + r.violations[i].message;
  return msg;
}

json obs_to_json(const Observation& o) {
  json j;
  j["record"] = "obs";
  j["step"] = o.step;
  j["minute_of_hour"] = o.minute_of_hour;
  j["hour_of_day"] = o.hour_of_day;
  j["day_of_week"] = o.day_of_week;
  j["rho"] = o.rho;
  j["line_status"] = o.line_status;
  j["ts_overflow_line"] = o.ts_overflow_line;
  j["cooldown_line"] = o.cooldown_line;
  j["cooldown_sub"] = o.cooldown_sub;
  j["maintenance_time"] = o.maintenance_time;
  j["p_or"] = o.p_or;
  j["p_ex"] = o.p_ex;
  j["gen_p"] = o.gen_p;
  j["load_p"] = o.load_p;
  j["sub_topology"] = o.sub_topology;
  return j;
}

template <typename T>
T require(const json& j, const char* key, int line_no) {
  if (!j.contains(key)) throw ParseError("missing field", line_no, key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError("type mismatch", line_no, key);
  }
}

Observation obs_from_json(const json& j, int line_no) {
  Observation o;
  o.step = require<int>(j, "step", line_no);
  o.minute_of_hour = require<int>(j, "minute_of_hour", line_no);
  o.hour_of_day = require<int>(j, "hour_of_day", line_no);
  o.day_of_week = require<int>(j, "day_of_week", line_no);
  o.rho = require<std::vector<double>>(j, "rho", line_no);
  o.line_status = require<std::vector<std::uint8_t>>(j, "line_status", line_no);
  o.ts_overflow_line = require<std::vector<int>>(j, "ts_overflow_line", line_no);
  o.cooldown_line = require<std::vector<int>>(j, "cooldown_line", line_no);
  o.cooldown_sub = require<std::vector<int>>(j, "cooldown_sub", line_no);
  o.maintenance_time = require<std::vector<int>>(j, "maintenance_time", line_no);
  o.p_or = require<std::vector<double>>(j, "p_or", line_no);
  o.p_ex = require<std::vector<double>>(j, "p_ex", line_no);
  o.gen_p = require<std::vector<double>>(j, "gen_p", line_no);
  o.load_p = require<std::vector<double>>(j, "load_p", line_no);
  o.sub_topology = require<std::vector<int>>(j, "sub_topology", line_no);
  return o;
}

}  // namespace

InvalidEpisodeError::InvalidEpisodeError(const ValidationReport& r)
    : std::runtime_error(summarize(r)), report(r) {}

std::size_t write_episode(const Episode& e, const GridSchema& s, std::ostream& out) {
  const ValidationReport report = validate_episode(e, s);
  if (!report.ok()) throw InvalidEpisodeError(report);

  std::size_t bytes = 0;
  auto emit = [&](const json& j) {
    const std::string line = j.dump();
    out << line << '\n';
    bytes += line.size() + 1;
  };

  json header;
  header["record"] = "header";
  header["format"] = kEpisodeFormatVersion;
  header["schema"] = e.schema_ref;
  header["chronic_id"] = e.chronic_id;
  header["agent"] = e.agent.name();
  header["seed"] = e.seed;
  emit(header);
  for (const Observation& o : e.observations) emit(obs_to_json(o));

  json term;
  term["record"] = "termination";
  term["outcome"] = to_string(e.termination.outcome);
  if (e.termination.failed_step) term["failed_step"] = *e.termination.failed_step;
  term["error_type"] = to_string(e.termination.error_type);
  term["horizon"] = e.termination.horizon;
  emit(term);

  if (!out) throw std::runtime_error("write failed");
  return bytes;
}

std::size_t write_episode(const Episode& e, const GridSchema& s,
                          const std::filesystem::path& dest) {
  // Validate before touching the file so a failed precondition writes nothing.
  const ValidationReport report = validate_episode(e, s);
  if (!report.ok()) throw InvalidEpisodeError(report);
  std::ofstream f(dest, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + dest.string() + " for writing");
  return write_episode(e, s, f);
}

Episode read_episode(std::istream& in) {
  Episode e;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  bool saw_termination = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw ParseError(std::string("invalid record: ") + ex.what(), line_no, "");
    }
    const auto record = require<std::string>(j, "record", line_no);
    if (!saw_header) {
      if (record != "header") throw ParseError("first record must be header", line_no, "record");
      const auto format = require<std::string>(j, "format", line_no);
      if (format != kEpisodeFormatVersion)
        throw ParseError("unknown format version '" + format + "'", line_no, "format");
      e.schema_ref = require<std::string>(j, "schema", line_no);
      e.chronic_id = require<std::string>(j, "chronic_id", line_no);
      e.agent = AgentKind::parse(require<std::string>(j, "agent", line_no));
      e.seed = require<std::int64_t>(j, "seed", line_no);
      saw_header = true;
    } else if (record == "obs") {
      if (saw_termination)
        throw ParseError("observation after termination record", line_no, "record");
      e.observations.push_back(obs_from_json(j, line_no));
    } else if (record == "termination") {
      TerminationInfo t;
      const auto outcome = parse_outcome(require<std::string>(j, "outcome", line_no));
      if (!outcome) throw ParseError("unknown outcome", line_no, "outcome");
      t.outcome = *outcome;
      if (j.contains("failed_step")) t.failed_step = require<int>(j, "failed_step", line_no);
      const auto err = parse_error_type(require<std::string>(j, "error_type", line_no));
      if (!err) throw ParseError("unknown error_type", line_no, "error_type");
      t.error_type = *err;
      t.horizon = require<int>(j, "horizon", line_no);
      e.termination = t;
      saw_termination = true;
    } else {
      throw ParseError("unknown record type '" + record + "'", line_no, "record");
    }
  }
  if (!saw_header) throw ParseError("missing header record", line_no + 1, "");
  if (!saw_termination) throw ParseError("missing termination record", line_no + 1, "");
  return e;
}

Episode read_episode(const std::filesystem::path& source) {
  std::ifstream f(source, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + source.string());
  return read_episode(f);
}

std::size_t write_schema(const GridSchema& s, const std::filesystem::path& dest) {
  json j;
  j["format"] = "schema/1";
  j["id"] = s.id;
  j["n_substations"] = s.n_substations;
  j["n_lines"] = s.n_lines;
  j["n_generators"] = s.n_generators;
  j["n_loads"] = s.n_loads;
  json eps = json::array();
  for (auto [a, b] : s.line_endpoints) eps.push_back(json::array({a, b}));
  j["line_endpoints"] = std::move(eps);
  j["gen_substation"] = s.gen_substation;
  j["load_substation"] = s.load_substation;
  j["attackable_line_ids"] = std::vector<int>(s.attackable_line_ids.begin(),
                                              s.attackable_line_ids.end());
  j["sub_grid_id"] = s.sub_grid_id;
  std::ofstream f(dest, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + dest.string() + " for writing");
  const std::string body = j.dump(2);
  f << body << '\n';
  if (!f) throw std::runtime_error("write failed");
  return body.size() + 1;
}

GridSchema read_schema(const std::filesystem::path& source) {
  std::ifstream f(source, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + source.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& ex) {
    throw ParseError(std::string("invalid schema file: ") + ex.what(), 1, "");
  }
  const auto format = require<std::string>(j, "format", 1);
  if (format != "schema/1")
    throw ParseError("unknown format version '" + format + "'", 1, "format");
  GridSchema s;
  s.id = require<std::string>(j, "id", 1);
  s.n_substations = require<int>(j, "n_substations", 1);
  s.n_lines = require<int>(j, "n_lines", 1);
  s.n_generators = require<int>(j, "n_generators", 1);
  s.n_loads = require<int>(j, "n_loads", 1);
  for (const auto& ep : j.at("line_endpoints"))
    s.line_endpoints.emplace_back(ep.at(0).get<int>(), ep.at(1).get<int>());
  s.gen_substation = require<std::vector<int>>(j, "gen_substation", 1);
  s.load_substation = require<std::vector<int>>(j, "load_substation", 1);
  for (int l : require<std::vector<int>>(j, "attackable_line_ids", 1))
    s.attackable_line_ids.insert(l);
  s.sub_grid_id = require<std::vector<int>>(j, "sub_grid_id", 1);
  return s;
}

}  // namespace gridfail
