#include "gridfail/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "gridfail/rng.hpp"

namespace gridfail {

std::string to_string(ForecastLabel l) {
  switch (l) {
    case ForecastLabel::kSurvived: return "SURVIVED";
    case ForecastLabel::kNMinus5: return "N_MINUS_5";
    case ForecastLabel::kNMinus3: return "N_MINUS_3";
    case ForecastLabel::kNMinus1: return "N_MINUS_1";
  }
  return "SURVIVED";
}

std::optional<ForecastLabel> parse_forecast_label(const std::string& s) {
  for (ForecastLabel l : {ForecastLabel::kSurvived, ForecastLabel::kNMinus5,
                          ForecastLabel::kNMinus3, ForecastLabel::kNMinus1})
    if (to_string(l) == s) return l;
  return std::nullopt;
}

const std::vector<std::string>& forecast_class_names() {
  static const std::vector<std::string> names = {"SURVIVED", "N_MINUS_5", "N_MINUS_3",
                                                 "N_MINUS_1"};
  return names;
}

FeatureSchema make_feature_schema(const GridSchema& s) {
  FeatureSchema fs;
  auto add = [&](const std::string& name, const std::string& type, int id) {
    fs.names.push_back(name);
    fs.element_type.push_back(type);
    fs.element_id.push_back(id);
  };
  const char* line_families[] = {"rho",      "p_or",     "p_ex",       "status",
                                 "ts_overflow", "cooldown", "maintenance"};
  for (const char* fam : line_families)
    for (int l = 0; l < s.n_lines; ++l)
      add(std::string(fam) + "_line" + std::to_string(l), "line", l);
  for (int g = 0; g < s.n_generators; ++g)
    add("gen_p_gen" + std::to_string(g), "generator", g);
  for (int d = 0; d < s.n_loads; ++d)
    add("load_p_load" + std::to_string(d), "load", d);
  for (int sub = 0; sub < s.n_substations; ++sub)
    add("changed_sub" + std::to_string(sub), "substation", sub);
  add("current_step", "descriptive", -1);
  add("minute_of_hour", "descriptive", -1);
  add("hour_of_day", "descriptive", -1);
  add("day_of_week", "descriptive", -1);
  add("agent", "descriptive", -1);
  return fs;
}

void write_feature_schema(const FeatureSchema& fs, const std::filesystem::path& dest) {
  nlohmann::ordered_json j;
  j["format"] = "feature_schema/1";
  j["names"] = fs.names;
  j["element_type"] = fs.element_type;
  j["element_id"] = fs.element_id;
  std::ofstream f(dest, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + dest.string() + " for writing");
  f << j.dump(2) << '\n';
}

FeatureSchema read_feature_schema(const std::filesystem::path& source) {
  std::ifstream f(source, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + source.string());
  nlohmann::ordered_json j;
  f >> j;
  if (j.value("format", "") != std::string("feature_schema/1"))
    throw std::runtime_error("unknown feature schema format in " + source.string());
  FeatureSchema fs;
  fs.names = j.at("names").get<std::vector<std::string>>();
  fs.element_type = j.at("element_type").get<std::vector<std::string>>();
  fs.element_id = j.at("element_id").get<std::vector<int>>();
  return fs;
}

std::vector<double> featurize_observation(const Observation& o, const Observation& first,
                                          const AgentKind& agent, const GridSchema& s) {
  if (static_cast<int>(o.rho.size()) != s.n_lines ||
      static_cast<int>(o.gen_p.size()) != s.n_generators ||
      static_cast<int>(o.load_p.size()) != s.n_loads ||
      static_cast<int>(o.sub_topology.size()) != s.n_substations ||
      first.sub_topology.size() != o.sub_topology.size())
    throw std::invalid_argument("featurize_observation: schema mismatch");

  std::vector<double> v;
  v.reserve(7 * s.n_lines + s.n_generators + s.n_loads + s.n_substations + 5);
  for (double x : o.rho) v.push_back(x);
  for (double x : o.p_or) v.push_back(x);
  for (double x : o.p_ex) v.push_back(x);
  for (std::uint8_t x : o.line_status) v.push_back(static_cast<double>(x));
  for (int x : o.ts_overflow_line) v.push_back(static_cast<double>(x));
  for (int x : o.cooldown_line) v.push_back(static_cast<double>(x));
  for (int x : o.maintenance_time) v.push_back(static_cast<double>(x));
  for (double x : o.gen_p) v.push_back(x);
  for (double x : o.load_p) v.push_back(x);
  for (int sub = 0; sub < s.n_substations; ++sub)
    v.push_back(o.sub_topology[sub] != first.sub_topology[sub] ? 1.0 : 0.0);
  v.push_back(static_cast<double>(o.step));
  v.push_back(static_cast<double>(o.minute_of_hour));
  v.push_back(static_cast<double>(o.hour_of_day));
  v.push_back(static_cast<double>(o.day_of_week));
  v.push_back(static_cast<double>(agent.value));
  return v;
}

namespace {

struct SurvivedCandidate {
  std::uint64_t priority;
  std::string episode_uid;
  int step;
  bool operator<(const SurvivedCandidate& o) const {
    if (priority != o.priority) return priority < o.priority;
    if (episode_uid != o.episode_uid) return episode_uid < o.episode_uid;
    return step < o.step;
  }
};

std::string episode_uid(const Episode& e) {
  return e.chronic_id + "/" + e.agent.name() + "/" + std::to_string(e.seed);
}

double episode_rho_quantile(const std::vector<double>& rho_max_series, double q) {
  std::vector<double> sorted = rho_max_series;
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] * (1.0 - (pos - lo)) + sorted[hi] * (pos - lo);
}

}  // namespace

std::vector<ForecastSample> build_dataset(const EpisodeVisitor& for_each,
                                          const GridSchema& s,
                                          const DatasetBuildOptions& opt) {
  std::vector<ForecastSample> failure_samples;
  std::vector<SurvivedCandidate> candidates;
  const CounterRng rng = CounterRng(opt.seed).with("survived_sampling");

  // Pass 1: failure samples and survived candidate keys.
  for_each([&](const Episode& e) {
    const bool failed = e.termination.outcome == TerminationInfo::Outcome::kFailed;
    const int n = failed ? *e.termination.failed_step
                         : static_cast<int>(e.observations.size());
    if (e.observations.empty()) return;
    const Observation& first = e.observations.front();

    if (failed) {
      for (int k : {5, 3, 1}) {
        const int step = n - k;
        if (step < 0) continue;
        ForecastSample smp;
        smp.features = featurize_observation(e.observations[step], first, e.agent, s);
        smp.label = k == 1 ? ForecastLabel::kNMinus1
                           : (k == 3 ? ForecastLabel::kNMinus3 : ForecastLabel::kNMinus5);
        smp.chronic_id = e.chronic_id;
        smp.seed = e.seed;
        smp.source_step = step;
        failure_samples.push_back(std::move(smp));
      }
    }

    const bool eligible = failed ? opt.survived_from_failed : opt.survived_from_survived;
    if (!eligible) return;
    std::vector<double> rho_max_series;
    rho_max_series.reserve(e.observations.size());
    for (const Observation& o : e.observations) {
      double mx = 0.0;
      for (double r : o.rho) mx = std::max(mx, r);
      rho_max_series.push_back(mx);
    }
    const double threshold = episode_rho_quantile(rho_max_series, opt.high_rho_quantile);
    const int last_eligible = failed ? n - opt.min_gap
                                     : static_cast<int>(e.observations.size()) - 1;
    const CounterRng ep_rng =
        rng.with(e.chronic_id).with(e.agent.name()).with(static_cast<std::uint64_t>(e.seed));
    for (int t = 0; t <= last_eligible; ++t) {
      if (rho_max_series[t] < threshold) continue;
      candidates.push_back({ep_rng.bits(static_cast<std::uint64_t>(t)),
                            episode_uid(e), t});
    }
  });

  if (failure_samples.empty() && candidates.empty())
    throw std::runtime_error("build_dataset: corpus yielded no eligible episodes");

  // Survived quota keeps classes at 50 / 16.7 / 16.7 / 16.7 by default.
  const std::size_t quota = static_cast<std::size_t>(
      std::llround(static_cast<double>(failure_samples.size()) *
                   opt.survived_per_failure / 3.0));
  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() > quota) candidates.resize(quota);

  std::map<std::string, std::vector<int>> selected;
  for (const SurvivedCandidate& c : candidates) selected[c.episode_uid].push_back(c.step);
  for (auto& [uid, steps] : selected) std::sort(steps.begin(), steps.end());

  // Pass 2: featurize the selected survived observations.
  std::vector<ForecastSample> survived_samples;
  survived_samples.reserve(candidates.size());
  for_each([&](const Episode& e) {
    const auto it = selected.find(episode_uid(e));
    if (it == selected.end()) return;
    const Observation& first = e.observations.front();
    for (int t : it->second) {
      ForecastSample smp;
      smp.features = featurize_observation(e.observations[t], first, e.agent, s);
      smp.label = ForecastLabel::kSurvived;
      smp.chronic_id = e.chronic_id;
      smp.seed = e.seed;
      smp.source_step = t;
      survived_samples.push_back(std::move(smp));
    }
  });

  std::vector<ForecastSample> all = std::move(survived_samples);
  all.insert(all.end(), std::make_move_iterator(failure_samples.begin()),
             std::make_move_iterator(failure_samples.end()));
  return all;
}

DatasetSplit split_by_chronic(const std::vector<ForecastSample>& samples,
                              SplitFractions fractions, std::uint64_t seed) {
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (fractions.train <= 0 || fractions.validation <= 0 || fractions.test <= 0 ||
      std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must be positive and sum to 1");

  std::set<std::string> chronic_set;
  for (const ForecastSample& s : samples) chronic_set.insert(s.chronic_id);
  std::vector<std::string> chronics(chronic_set.begin(), chronic_set.end());
  if (chronics.size() < 3)
    throw std::invalid_argument("fewer chronics than splits");

  const CounterRng rng = CounterRng(seed).with("chronic_split");
  for (std::size_t i = chronics.size() - 1; i > 0; --i)
    std::swap(chronics[i], chronics[rng.pick(i, i + 1)]);

  // Largest-remainder apportionment with at least one chronic per split.
  const std::size_t n = chronics.size();
  const double want[3] = {fractions.train * n, fractions.validation * n,
                          fractions.test * n};
  std::size_t counts[3];
  for (int i = 0; i < 3; ++i) counts[i] = static_cast<std::size_t>(want[i]);
  std::size_t assigned = counts[0] + counts[1] + counts[2];
  while (assigned < n) {
    int best = 0;
    double best_frac = -1.0;
    for (int i = 0; i < 3; ++i) {
      const double frac = want[i] - counts[i];
      if (frac > best_frac) {
        best_frac = frac;
        best = i;
      }
    }
    ++counts[best];
    ++assigned;
  }
  for (int i = 0; i < 3; ++i)
    if (counts[i] == 0) {
      int donor = 0;
      for (int j = 1; j < 3; ++j)
        if (counts[j] > counts[donor]) donor = j;
      --counts[donor];
      ++counts[i];
    }

  std::map<std::string, int> split_of;
  std::size_t at = 0;
  for (int part = 0; part < 3; ++part)
    for (std::size_t i = 0; i < counts[part]; ++i) split_of[chronics[at++]] = part;

  DatasetSplit out;
  out.fractions = fractions;
  out.seed = seed;
  for (const ForecastSample& s : samples) {
    switch (split_of.at(s.chronic_id)) {
      case 0: out.train.push_back(s); break;
      case 1: out.validation.push_back(s); break;
      default: out.test.push_back(s); break;
    }
  }
  return out;
}

std::vector<std::string> chronic_leakage(const DatasetSplit& split) {
  const std::vector<const std::vector<ForecastSample>*> parts = {
      &split.train, &split.validation, &split.test, &split.ood};
  std::map<std::string, std::set<int>> seen;
  for (std::size_t p = 0; p < parts.size(); ++p)
    for (const ForecastSample& s : *parts[p]) seen[s.chronic_id].insert(static_cast<int>(p));
  std::vector<std::string> bad;
  for (const auto& [chronic, where] : seen)
    if (where.size() > 1) bad.push_back(chronic);
  return bad;
}

std::vector<double> label_proportions(const std::vector<ForecastSample>& samples) {
  std::vector<double> p(4, 0.0);
  if (samples.empty()) return p;
  for (const ForecastSample& s : samples) p[static_cast<int>(s.label)] += 1.0;
  for (double& v : p) v /= static_cast<double>(samples.size());
  return p;
}

Table samples_to_table(const std::vector<ForecastSample>& samples,
                       const FeatureSchema& fs) {
  std::vector<std::string> cols = {"label", "chronic_id", "seed", "source_step"};
  cols.insert(cols.end(), fs.names.begin(), fs.names.end());
  Table t(cols);
  for (const ForecastSample& s : samples) {
    if (s.features.size() != fs.size())
      throw std::invalid_argument("sample feature count does not match schema");
    Table::Row row = {to_string(s.label), s.chronic_id, static_cast<double>(s.seed),
                      static_cast<double>(s.source_step)};
    for (double v : s.features) row.push_back(v);
    t.add_row(std::move(row));
  }
  return t;
}

std::vector<ForecastSample> samples_from_table(const Table& t, const FeatureSchema& fs) {
  std::vector<int> fcols;
  for (const std::string& n : fs.names) {
    const int c = t.column_index(n);
    if (c < 0) throw std::invalid_argument("dataset table missing feature " + n);
    fcols.push_back(c);
  }
  const int c_label = t.column_index("label");
  const int c_chronic = t.column_index("chronic_id");
  const int c_seed = t.column_index("seed");
  const int c_step = t.column_index("source_step");
  if (c_label < 0 || c_chronic < 0 || c_seed < 0 || c_step < 0)
    throw std::invalid_argument("dataset table missing bookkeeping columns");
  std::vector<ForecastSample> out;
  out.reserve(t.n_rows());
  for (std::size_t i = 0; i < t.n_rows(); ++i) {
    ForecastSample s;
    const auto label = parse_forecast_label(std::get<std::string>(t.at(i, c_label)));
    if (!label) throw std::invalid_argument("unknown label in dataset table");
    s.label = *label;
    const Table::Cell& cc = t.at(i, c_chronic);
    s.chronic_id = std::holds_alternative<std::string>(cc)
                       ? std::get<std::string>(cc)
                       : format_double(std::get<double>(cc));
    s.seed = static_cast<std::int64_t>(std::get<double>(t.at(i, c_seed)));
    s.source_step = static_cast<int>(std::get<double>(t.at(i, c_step)));
    s.features.reserve(fcols.size());
    for (int c : fcols) s.features.push_back(std::get<double>(t.at(i, c)));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gridfail
