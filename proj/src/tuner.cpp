#include "gridfail/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gridfail/rng.hpp"

namespace gridfail {

ParamDomain ParamDomain::uniform(double lo, double hi) {
  return {Kind::kUniform, lo, hi, {}};
}
ParamDomain ParamDomain::log_uniform(double lo, double hi) {
  return {Kind::kLogUniform, lo, hi, {}};
}
ParamDomain ParamDomain::integer(int lo, int hi) {
  return {Kind::kInt, static_cast<double>(lo), static_cast<double>(hi), {}};
}
ParamDomain ParamDomain::categorical(std::vector<std::string> values) {
  return {Kind::kCategorical, 0.0, 0.0, std::move(values)};
}

ValidationReport validate_search_space(const SearchSpace& space) {
  ValidationReport r;
  if (space.params.empty()) r.violations.push_back({"empty search space", -1, -1});
  for (const auto& [name, dom] : space.params) {
    switch (dom.kind) {
      case ParamDomain::Kind::kUniform:
      case ParamDomain::Kind::kInt:
        if (!(dom.lo < dom.hi))
          r.violations.push_back({"degenerate interval for " + name, -1, -1});
        break;
      case ParamDomain::Kind::kLogUniform:
        if (!(0 < dom.lo && dom.lo < dom.hi))
          r.violations.push_back({"log-uniform needs 0 < lo < hi for " + name, -1, -1});
        break;
      case ParamDomain::Kind::kCategorical:
        if (dom.categories.empty())
          r.violations.push_back({"empty categorical set for " + name, -1, -1});
        break;
    }
  }
  return r;
}

namespace {

bool is_numeric(const ParamDomain& d) {
  return d.kind != ParamDomain::Kind::kCategorical;
}

// Numeric params are modeled in a transformed space (log for log-uniform).
double to_internal(const ParamDomain& d, double v) {
  return d.kind == ParamDomain::Kind::kLogUniform ? std::log(v) : v;
}

double from_internal(const ParamDomain& d, double x) {
  double v = d.kind == ParamDomain::Kind::kLogUniform ? std::exp(x) : x;
  v = std::clamp(v, d.lo, d.hi);
  if (d.kind == ParamDomain::Kind::kInt) v = std::round(v);
  return v;
}

double internal_lo(const ParamDomain& d) { return to_internal(d, d.lo); }
double internal_hi(const ParamDomain& d) { return to_internal(d, d.hi); }

ParamValue sample_random(const ParamDomain& d, const CounterRng& rng,
                         std::uint64_t counter) {
  if (d.kind == ParamDomain::Kind::kCategorical)
    return d.categories[rng.pick(counter, d.categories.size())];
  if (d.kind == ParamDomain::Kind::kInt) {
    const std::uint64_t span = static_cast<std::uint64_t>(d.hi - d.lo) + 1;
    return d.lo + static_cast<double>(rng.pick(counter, span));
  }
  const double u = rng.uniform(counter);
  return from_internal(d, internal_lo(d) + u * (internal_hi(d) - internal_lo(d)));
}

struct ParamKde {
  std::vector<double> centers;  // internal space
  double bandwidth = 1.0;
  std::vector<double> cat_freq;  // Laplace-smoothed, for categoricals
};

double silverman_bandwidth(const std::vector<double>& xs, double domain_span) {
  const std::size_t n = xs.size();
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  const double bw = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
  return bw > 0 ? bw : std::max(domain_span / 20.0, 1e-12);
}

ParamKde fit_kde(const std::string& name, const ParamDomain& d,
                 const std::vector<const TrialRecord*>& trials) {
  ParamKde kde;
  if (is_numeric(d)) {
    for (const TrialRecord* t : trials)
      kde.centers.push_back(to_internal(d, std::get<double>(t->config.at(name))));
    kde.bandwidth = silverman_bandwidth(kde.centers, internal_hi(d) - internal_lo(d));
  } else {
    kde.cat_freq.assign(d.categories.size(), 1.0);  // Laplace smoothing
    for (const TrialRecord* t : trials) {
      const std::string& v = std::get<std::string>(t->config.at(name));
      const auto it = std::find(d.categories.begin(), d.categories.end(), v);
      if (it != d.categories.end()) kde.cat_freq[it - d.categories.begin()] += 1.0;
    }
    double total = 0.0;
    for (double c : kde.cat_freq) total += c;
    for (double& c : kde.cat_freq) c /= total;
  }
  return kde;
}

double kde_log_density(const ParamKde& kde, const ParamDomain& d, const ParamValue& v) {
  if (!is_numeric(d)) {
    const std::string& s = std::get<std::string>(v);
    const auto it = std::find(d.categories.begin(), d.categories.end(), s);
    const double p = it == d.categories.end() ? 1e-12
                                              : kde.cat_freq[it - d.categories.begin()];
    return std::log(p);
  }
  const double x = to_internal(d, std::get<double>(v));
  const double bw = kde.bandwidth;
  double density = 0.0;
  for (double c : kde.centers) {
    const double z = (x - c) / bw;
    density += std::exp(-0.5 * z * z);
  }
  density /= kde.centers.size() * bw * std::sqrt(2.0 * std::numbers::pi);
  return std::log(std::max(density, 1e-300));
}

}  // namespace

TpeResult tpe_optimize(const SearchSpace& space,
                       const std::function<double(const ParamConfig&)>& objective,
                       const TpeOptions& opt) {
  const ValidationReport vr = validate_search_space(space);
  if (!vr.ok()) throw std::invalid_argument("invalid search space: " + vr.violations[0].message);
  if (opt.n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");

  const CounterRng rng(opt.seed);
  TpeResult res;
  res.best_objective = -std::numeric_limits<double>::infinity();

  for (int trial = 0; trial < opt.n_trials; ++trial) {
    const CounterRng trial_rng = rng.with("trial").with(static_cast<std::uint64_t>(trial));
    std::vector<const TrialRecord*> completed;
    for (const TrialRecord& t : res.history)
      if (!t.failed) completed.push_back(&t);

    ParamConfig config;
    if (static_cast<int>(completed.size()) < opt.n_startup_random) {
      std::uint64_t counter = 0;
      for (const auto& [name, dom] : space.params)
        config[name] = sample_random(dom, trial_rng, counter++);
    } else {
      // Split history into the good gamma-fraction and the rest.
      std::vector<const TrialRecord*> sorted = completed;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const TrialRecord* a, const TrialRecord* b) {
                         return a->objective > b->objective;
                       });
      const std::size_t n_good = static_cast<std::size_t>(
          std::ceil(opt.gamma * static_cast<double>(sorted.size())));
      std::vector<const TrialRecord*> good(sorted.begin(), sorted.begin() + n_good);

      std::map<std::string, ParamKde> kde_good, kde_all;
      for (const auto& [name, dom] : space.params) {
        kde_good.emplace(name, fit_kde(name, dom, good));
        kde_all.emplace(name, fit_kde(name, dom, completed));
      }

      double best_score = -std::numeric_limits<double>::infinity();
      for (int cand = 0; cand < opt.n_candidates; ++cand) {
        const CounterRng cand_rng = trial_rng.with("cand").with(static_cast<std::uint64_t>(cand));
        const TrialRecord* center = good[cand_rng.pick(0, good.size())];
        ParamConfig c;
        std::uint64_t counter = 1;
        for (const auto& [name, dom] : space.params) {
          if (is_numeric(dom)) {
            const double mu = to_internal(dom, std::get<double>(center->config.at(name)));
            const double x = mu + kde_good.at(name).bandwidth * cand_rng.normal(counter++);
            c[name] = from_internal(dom, x);
          } else {
            // Draw from the good-set category frequencies.
            const auto& freq = kde_good.at(name).cat_freq;
            double u = cand_rng.uniform(counter++);
            std::size_t idx = freq.size() - 1;
            for (std::size_t i = 0; i < freq.size(); ++i) {
              u -= freq[i];
              if (u <= 0) {
                idx = i;
                break;
              }
            }
            c[name] = dom.categories[idx];
          }
        }
        double score = 0.0;
        for (const auto& [name, dom] : space.params)
          score += kde_log_density(kde_good.at(name), dom, c.at(name)) -
                   kde_log_density(kde_all.at(name), dom, c.at(name));
        if (score > best_score) {
          best_score = score;
          config = std::move(c);
        }
      }
    }

    TrialRecord record;
    record.config = config;
    record.index = trial;
    try {
      record.objective = objective(config);
      if (!std::isfinite(record.objective)) record.failed = true;
    } catch (const std::exception&) {
      record.failed = true;
    }
    if (record.failed) record.objective = 0.0;
    if (!record.failed && record.objective > res.best_objective) {
      res.best_objective = record.objective;
      res.best = record.config;
    }
    res.history.push_back(std::move(record));
  }
  if (res.best.empty() && !res.history.empty())
    throw std::runtime_error("tpe_optimize: every trial failed");
  return res;
}

Table trial_history_table(const TpeResult& result, const SearchSpace& space) {
  std::vector<std::string> cols = {"trial", "objective", "failed", "best_so_far"};
  for (const auto& [name, dom] : space.params) cols.push_back(name);
  Table t(cols);
  double running = -std::numeric_limits<double>::infinity();
  for (const TrialRecord& r : result.history) {
    if (!r.failed) running = std::max(running, r.objective);
    Table::Row row = {static_cast<double>(r.index), r.objective,
                      static_cast<double>(r.failed ? 1 : 0), running};
    for (const auto& [name, dom] : space.params) {
      const auto it = r.config.find(name);
      if (it == r.config.end())
        row.push_back(std::string());
      else if (const double* d = std::get_if<double>(&it->second))
        row.push_back(*d);
      else
        row.push_back(std::get<std::string>(it->second));
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace gridfail
