#include "gridfail/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "gridfail/parallel.hpp"
#include "gridfail/rng.hpp"

namespace gridfail {

std::string to_string(FailureMode m) {
  switch (m) {
    case FailureMode::kTopoDrift: return "TOPO_DRIFT";
    case FailureMode::kLoadDrop: return "LOAD_DROP";
    case FailureMode::kLineCascade: return "LINE_CASCADE";
    case FailureMode::kGenSurge: return "GEN_SURGE";
    case FailureMode::kFlowSurge: return "FLOW_SURGE";
    case FailureMode::kNone: return "NONE";
  }
  return "NONE";
}

std::optional<FailureMode> parse_failure_mode(const std::string& s) {
  for (FailureMode m : {FailureMode::kTopoDrift, FailureMode::kLoadDrop,
                        FailureMode::kLineCascade, FailureMode::kGenSurge,
                        FailureMode::kFlowSurge, FailureMode::kNone})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

std::string to_string(AgentProfile a) {
  switch (a) {
    case AgentProfile::kPassive: return "PASSIVE";
    case AgentProfile::kReconnector: return "RECONNECTOR";
    case AgentProfile::kTopologyFixer: return "TOPOLOGY_FIXER";
  }
  return "PASSIVE";
}

std::optional<AgentProfile> parse_agent_profile(const std::string& s) {
  for (AgentProfile a : {AgentProfile::kPassive, AgentProfile::kReconnector,
                         AgentProfile::kTopologyFixer})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

AgentKind agent_kind_for(AgentProfile p) {
  switch (p) {
    case AgentProfile::kPassive: return {AgentKind::kDoNothing, {}};
    case AgentProfile::kReconnector: return {AgentKind::kSenior, {}};
    case AgentProfile::kTopologyFixer: return {AgentKind::kTopology, {}};
  }
  return {AgentKind::kDoNothing, {}};
}

GridSchema make_default_schema() {
  GridSchema s;
  s.id = "toy14";
  s.n_substations = 14;
  s.line_endpoints = {
      {0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 0},   // region-0 ring
      {1, 7},                                                   // tie
      {7, 8}, {8, 9}, {9, 10}, {10, 11}, {11, 12}, {12, 13}, {13, 7},  // region-1 ring
      {2, 9}, {4, 11},                                          // ties
      {0, 3},                                                   // region-0 chord
      {7, 10},                                                  // region-1 chord
      {5, 12}, {6, 13},                                         // ties
  };
  s.n_lines = static_cast<int>(s.line_endpoints.size());
  s.gen_substation = {0, 3, 5, 9, 11, 13};
  s.n_generators = static_cast<int>(s.gen_substation.size());
  s.load_substation = {1, 2, 4, 6, 7, 8, 10, 12, 13};
  s.n_loads = static_cast<int>(s.load_substation.size());
  s.attackable_line_ids = {2, 5, 8, 9, 15, 16, 18, 20};
  s.sub_grid_id = {0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1};
  return s;
}

SynthConfig make_default_config() {
  SynthConfig cfg;
  cfg.schema = make_default_schema();
  cfg.gen_kind = {0, 0, 1, 1, 0, 2};  // two solar units, one wind
  cfg.gen_base_weight = {1.0, 0.8, 1.0, 1.0, 0.9, 1.0};
  return cfg;
}

ValidationReport validate_synth_config(const SynthConfig& cfg) {
  ValidationReport r = validate_schema(cfg.schema);
  auto& v = r.violations;
  if (cfg.horizon < 1) v.push_back({"horizon must be >= 1", -1, -1});
  if (cfg.overflow_disconnect_after < 1)
    v.push_back({"overflow_disconnect_after must be >= 1", -1, -1});
  for (const Attack& a : cfg.attack_schedule) {
    if (a.step < 0 || a.step >= cfg.horizon)
      v.push_back({"attack step " + std::to_string(a.step) + " outside horizon",
                   a.step, a.line});
    if (!cfg.schema.attackable_line_ids.count(a.line))
      v.push_back({"attacked line " + std::to_string(a.line) + " is not attackable",
                   a.step, a.line});
  }
  if (!cfg.gen_kind.empty() &&
      static_cast<int>(cfg.gen_kind.size()) != cfg.schema.n_generators)
    v.push_back({"gen_kind length does not match generator count", -1, -1});
  if (!cfg.gen_base_weight.empty() &&
      static_cast<int>(cfg.gen_base_weight.size()) != cfg.schema.n_generators)
    v.push_back({"gen_base_weight length does not match generator count", -1, -1});
  for (const MaintenanceWindow& m : cfg.maintenance)
    if (m.line < 0 || m.line >= cfg.schema.n_lines || m.duration < 1)
      v.push_back({"invalid maintenance window", m.start, m.line});
  return r;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double daily_curve(double night_floor, int step) {
  const double u = static_cast<double>(step % 288) / 288.0;
  return night_floor + (1.0 - night_floor) * 0.5 * (1.0 - std::cos(kTwoPi * u));
}

double daylight(int step) {
  const double u = static_cast<double>(step % 288) / 288.0;
  if (u < 0.25 || u > 0.75) return 0.0;
  const double x = std::sin(std::numbers::pi * (u - 0.25) / 0.5);
  return x * x;
}

// Shortest-path routing over the currently connected lines. Paths and
// reachability are cached per connectivity mask.
class FlowRouter {
 public:
  explicit FlowRouter(const GridSchema& schema) : schema_(schema) {
    adj_.resize(schema.n_substations);
    for (int l = 0; l < schema.n_lines; ++l) {
      auto [a, b] = schema.line_endpoints[l];
      adj_[a].push_back({l, b});
      adj_[b].push_back({l, a});
    }
    // Stable neighbor order keeps BFS parents deterministic.
    for (auto& lst : adj_)
      std::sort(lst.begin(), lst.end());
  }

  struct Routes {
    // paths[g * n_loads + d]: (line, +1 when traversed origin->extremity)
    std::vector<std::vector<std::pair<int, int>>> paths;
    std::vector<std::uint8_t> reachable;  // same indexing
  };

  const Routes& routes(const std::vector<std::uint8_t>& line_status) {
    std::uint64_t mask = 0;
    for (std::size_t l = 0; l < line_status.size(); ++l)
      if (line_status[l]) mask |= (1ULL << l);
    auto it = cache_.find(mask);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(mask, build(line_status)).first->second;
  }

 private:
  Routes build(const std::vector<std::uint8_t>& status) const {
    const int n_g = schema_.n_generators;
    const int n_d = schema_.n_loads;
    Routes r;
    r.paths.resize(static_cast<std::size_t>(n_g) * n_d);
    r.reachable.assign(static_cast<std::size_t>(n_g) * n_d, 0);
    std::vector<int> parent_line(schema_.n_substations);
    std::vector<int> parent_sub(schema_.n_substations);
    std::vector<int> queue(schema_.n_substations);
    for (int g = 0; g < n_g; ++g) {
      std::fill(parent_line.begin(), parent_line.end(), -2);  // -2 unvisited
      const int src = schema_.gen_substation[g];
      parent_line[src] = -1;
      int head = 0, tail = 0;
      queue[tail++] = src;
      while (head < tail) {
        const int s = queue[head++];
        for (auto [l, other] : adj_[s]) {
          if (!status[l] || parent_line[other] != -2) continue;
          parent_line[other] = l;
          parent_sub[other] = s;
          queue[tail++] = other;
        }
      }
      for (int d = 0; d < n_d; ++d) {
        int s = schema_.load_substation[d];
        if (parent_line[s] == -2) continue;
        auto& path = r.paths[static_cast<std::size_t>(g) * n_d + d];
        r.reachable[static_cast<std::size_t>(g) * n_d + d] = 1;
        while (parent_line[s] != -1) {
          const int l = parent_line[s];
          const int from = parent_sub[s];
          // Power flows from `from` (closer to the generator) into `s`.
          path.push_back({l, schema_.line_endpoints[l].first == from ? 1 : -1});
          s = from;
        }
      }
    }
    return r;
  }

  const GridSchema& schema_;
  std::vector<std::vector<std::pair<int, int>>> adj_;
  std::unordered_map<std::uint64_t, Routes> cache_;
};

struct ModeState {
  int onset = -1;
  int load_drop_region = 0;
  int cascade_region = 0;
  int surge_gen = 0;
  double surge_scale = 0.0;
  std::vector<int> drift_order;  // substations in drift order
};

class EpisodeSim {
 public:
  explicit EpisodeSim(const SynthConfig& cfg)
      : cfg_(cfg),
        schema_(cfg.schema),
        router_(cfg.schema),
        rng_(CounterRng(cfg.seed).with(cfg.chronic_id)) {
    init_elements();
    init_mode();
    init_attacks();
    compute_limits();
  }

  Episode run() {
    Episode e;
    e.chronic_id = cfg_.chronic_id;
    e.agent = agent_kind_for(cfg_.agent_profile);
    e.seed = static_cast<std::int64_t>(cfg_.seed);
    e.schema_ref = schema_.id;
    e.termination.horizon = cfg_.horizon;

    status_.assign(schema_.n_lines, 1);
    ts_overflow_.assign(schema_.n_lines, 0);
    cooldown_line_.assign(schema_.n_lines, 0);
    attack_until_.assign(schema_.n_lines, 0);
    maint_until_.assign(schema_.n_lines, 0);
    cooldown_sub_.assign(schema_.n_substations, 0);
    topo_.assign(schema_.n_substations, 0);
    drift_level_.assign(schema_.n_substations, 0);
    drift_count_ = 0;

    std::optional<int> failed_at;
    for (int t = 0; t < cfg_.horizon; ++t) {
      if (t > 0) advance_state(t);
      StepPhysics phys = compute_physics(t);
      if (t > 0) {
        if (auto reason = failure_check(t, phys)) {
          failed_at = t;
          e.termination.outcome = TerminationInfo::Outcome::kFailed;
          e.termination.failed_step = t;
          e.termination.error_type = pick_error(t);
          break;
        }
      }
      // Overflow counters follow the freshly computed loading.
      for (int l = 0; l < schema_.n_lines; ++l)
        ts_overflow_[l] = (status_[l] && phys.rho[l] >= 1.0) ? ts_overflow_[l] + 1 : 0;
      e.observations.push_back(make_observation(t, phys));
      prev_rho_ = phys.rho;
    }
    if (!failed_at) {
      e.termination.outcome = TerminationInfo::Outcome::kSurvived;
      e.termination.error_type = ErrorType::kNone;
    }
    return e;
  }

 private:
  struct StepPhysics {
    std::vector<double> load_p, gen_p, flow, rho;
    bool unserved = false;
    double tie_abs_flow = 0.0;
    double total_load = 0.0;
    double max_gen_share = 0.0;
  };

  void init_elements() {
    const auto base_rng = rng_.with("load_base");
    load_base_.resize(schema_.n_loads);
    for (int d = 0; d < schema_.n_loads; ++d) {
      const double spread = cfg_.profile.chronic_spread;
      load_base_[d] = cfg_.profile.load_peak_mw *
                      (1.0 - spread + 2.0 * spread * base_rng.uniform(d));
    }
    gen_kind_ = cfg_.gen_kind;
    if (gen_kind_.empty()) gen_kind_.assign(schema_.n_generators, 0);
    gen_weight_ = cfg_.gen_base_weight;
    if (gen_weight_.empty()) gen_weight_.assign(schema_.n_generators, 1.0);
    wind_phase_ = rng_.with("wind").uniform(0) * kTwoPi;

    const auto bg_rng = rng_.with("background");
    background_.resize(schema_.n_lines);
    for (int l = 0; l < schema_.n_lines; ++l)
      background_[l] = cfg_.profile.background_flow_mw * (0.5 + bg_rng.uniform(l));

    region_of_sub_ = schema_.sub_grid_id;
    if (region_of_sub_.empty()) region_of_sub_.assign(schema_.n_substations, 0);
    n_regions_ = 1 + *std::max_element(region_of_sub_.begin(), region_of_sub_.end());
    tie_line_.assign(schema_.n_lines, 0);
    for (int l = 0; l < schema_.n_lines; ++l) {
      auto [a, b] = schema_.line_endpoints[l];
      tie_line_[l] = region_of_sub_[a] != region_of_sub_[b];
    }
  }

  void init_mode() {
    const ModeParams& mp = cfg_.modes;
    const auto mode_rng = rng_.with("mode");
    mode_ = cfg_.planted_failure_mode;
    switch (mode_) {
      case FailureMode::kTopoDrift: {
        state_.onset = mp.drift_onset_lo +
                       static_cast<int>(mode_rng.pick(0, mp.drift_onset_hi - mp.drift_onset_lo + 1));
        state_.drift_order.resize(schema_.n_substations);
        std::iota(state_.drift_order.begin(), state_.drift_order.end(), 0);
        for (int i = schema_.n_substations - 1; i > 0; --i)
          std::swap(state_.drift_order[i],
                    state_.drift_order[mode_rng.pick(100 + i, i + 1)]);
        break;
      }
      case FailureMode::kLoadDrop: {
        // Collapse is timed to land in the overnight trough so the regional
        // demand at failure sits below the chronic's starting demand.
        const int target = 288 - 20 - static_cast<int>(mode_rng.pick(2, 13));
        state_.onset = target - mp.load_drop_ramp;
        state_.load_drop_region = static_cast<int>(mode_rng.pick(3, n_regions_));
        break;
      }
      case FailureMode::kLineCascade: {
        state_.onset = mp.cascade_onset_lo +
                       static_cast<int>(mode_rng.pick(0, mp.cascade_onset_hi - mp.cascade_onset_lo + 1));
        state_.cascade_region = static_cast<int>(mode_rng.pick(3, n_regions_));
        break;
      }
      case FailureMode::kGenSurge: {
        state_.onset = mp.surge_onset_lo +
                       static_cast<int>(mode_rng.pick(0, mp.surge_onset_hi - mp.surge_onset_lo + 1));
        std::vector<int> small;
        for (int g = 0; g < schema_.n_generators; ++g)
          if (gen_kind_[g] != 0) small.push_back(g);
        if (small.empty()) small.push_back(0);
        state_.surge_gen = small[mode_rng.pick(4, small.size())];
        state_.surge_scale = mp.surge_scale_lo +
                             mode_rng.uniform(5) * (mp.surge_scale_hi - mp.surge_scale_lo);
        break;
      }
      case FailureMode::kFlowSurge: {
        state_.onset = mp.transfer_onset_lo +
                       static_cast<int>(mode_rng.pick(0, mp.transfer_onset_hi - mp.transfer_onset_lo + 1));
        // Import region: its generators back off and ties carry the slack.
        state_.load_drop_region = static_cast<int>(mode_rng.pick(3, n_regions_));
        break;
      }
      case FailureMode::kNone:
        break;
    }
  }

  void init_attacks() {
    attack_at_.assign(cfg_.horizon, -1);
    for (const Attack& a : cfg_.attack_schedule)
      if (a.step >= 0 && a.step < cfg_.horizon) attack_at_[a.step] = a.line;
    if (cfg_.profile.attacks_per_day > 0 && !schema_.attackable_line_ids.empty()) {
      const std::vector<int> attackable(schema_.attackable_line_ids.begin(),
                                        schema_.attackable_line_ids.end());
      const auto atk_rng = rng_.with("attack");
      const int n_days = (cfg_.horizon + 287) / 288;
      for (int day = 0; day < n_days; ++day) {
        if (atk_rng.uniform(2 * day) >= cfg_.profile.attacks_per_day) continue;
        const int step = 288 * day + static_cast<int>(atk_rng.pick(2 * day + 1, 288));
        if (step > 0 && step < cfg_.horizon && attack_at_[step] < 0)
          attack_at_[step] = attackable[atk_rng.pick(1000 + day, attackable.size())];
      }
    }
  }

  std::vector<double> nominal_flows(int step) const {
    // Noise-free snapshot with nominal bases, everything connected, no mode.
    std::vector<double> load(schema_.n_loads);
    for (int d = 0; d < schema_.n_loads; ++d)
      load[d] = cfg_.profile.load_peak_mw * daily_curve(cfg_.profile.night_floor, step);
    std::vector<double> w(schema_.n_generators);
    for (int g = 0; g < schema_.n_generators; ++g) w[g] = raw_gen_weight(g, step, false);
    std::vector<std::uint8_t> all_on(schema_.n_lines, 1);
    return accumulate_flows(all_on, load, w, nullptr, nullptr, nullptr).flow;
  }

  void compute_limits() {
    limit_.assign(schema_.n_lines, cfg_.profile.limit_floor_mw);
    const std::vector<double> peak = nominal_flows(144);
    for (int l = 0; l < schema_.n_lines; ++l)
      limit_[l] = std::max(std::abs(peak[l]) * cfg_.profile.limit_headroom,
                           cfg_.profile.limit_floor_mw);
  }

  double raw_gen_weight(int g, int step, bool with_noise) const {
    double w = gen_weight_[g];
    switch (gen_kind_[g]) {
      case 1: w *= 0.02 + 1.4 * daylight(step); break;
      case 2: w *= 0.25 + 0.15 * (1.0 + std::sin(kTwoPi * step / 288.0 * 2.4 + wind_phase_)) * 0.5;
              break;
      default: break;
    }
    if (with_noise) {
      const double n = rng_.with("gen_noise").normal(
          static_cast<std::uint64_t>(step) * schema_.n_generators + g);
      w *= std::max(0.05, 1.0 + cfg_.profile.gen_noise_sd * n);
    }
    return w;
  }

  StepPhysics accumulate_flows(const std::vector<std::uint8_t>& status,
                               const std::vector<double>& load_p,
                               const std::vector<double>& weights,
                               FlowRouter* router, bool* unserved_out,
                               double* max_share_out) const {
    StepPhysics ph;
    ph.load_p = load_p;
    ph.gen_p.assign(schema_.n_generators, 0.0);
    ph.flow.assign(schema_.n_lines, 0.0);
    std::optional<FlowRouter> local;
    if (!router) local.emplace(schema_);
    const FlowRouter::Routes& routes = (router ? *router : *local).routes(status);
    const int n_d = schema_.n_loads;
    const double lambda = cfg_.profile.cross_region_affinity;

    for (int d = 0; d < n_d; ++d) {
      double denom = 0.0;
      const int dr = region_of_sub_[schema_.load_substation[d]];
      for (int g = 0; g < schema_.n_generators; ++g) {
        if (!routes.reachable[static_cast<std::size_t>(g) * n_d + d]) continue;
        const int gr = region_of_sub_[schema_.gen_substation[g]];
        denom += weights[g] * (gr == dr ? 1.0 : lambda);
      }
      if (denom <= 0.0) {
        if (unserved_out) *unserved_out = true;
        continue;
      }
      for (int g = 0; g < schema_.n_generators; ++g) {
        const std::size_t idx = static_cast<std::size_t>(g) * n_d + d;
        if (!routes.reachable[idx]) continue;
        const int gr = region_of_sub_[schema_.gen_substation[g]];
        const double p = load_p[d] * weights[g] * (gr == dr ? 1.0 : lambda) / denom;
        ph.gen_p[g] += p;
        for (auto [l, sgn] : routes.paths[idx]) ph.flow[l] += sgn * p;
      }
    }
    ph.total_load = std::accumulate(load_p.begin(), load_p.end(), 0.0);
    if (max_share_out) {
      const double total_gen = std::accumulate(ph.gen_p.begin(), ph.gen_p.end(), 0.0);
      double mx = 0.0;
      for (double g : ph.gen_p) mx = std::max(mx, g);
      *max_share_out = total_gen > 0 ? mx / total_gen : 0.0;
    }
    return ph;
  }

  // Per-step element multipliers from the planted driver.
  double mode_load_mult(int d, int t) const {
    if (mode_ != FailureMode::kLoadDrop || state_.onset < 0 || t < state_.onset) return 1.0;
    const double ramp = std::min(1.0, static_cast<double>(t - state_.onset) /
                                          cfg_.modes.load_drop_ramp);
    if (region_of_sub_[schema_.load_substation[d]] != state_.load_drop_region)
      return 1.0 - ramp * cfg_.modes.load_drop_spill;
    return 1.0 - ramp * (1.0 - cfg_.modes.load_drop_floor);
  }

  double mode_gen_mult(int g, int t) const {
    if (state_.onset < 0 || t < state_.onset) return 1.0;
    const double ramp01 = std::min(1.0, static_cast<double>(t - state_.onset) /
                                            std::max(1, mode_ramp_steps()));
    if (mode_ == FailureMode::kGenSurge) {
      if (g != state_.surge_gen) return 1.0;
      return 1.0 + state_.surge_scale * ramp01 * ramp01;
    }
    if (mode_ == FailureMode::kFlowSurge) {
      const int gr = region_of_sub_[schema_.gen_substation[g]];
      if (gr == state_.load_drop_region) return std::max(0.02, 1.0 - 0.98 * ramp01);
      return 1.0 + 1.2 * ramp01;
    }
    return 1.0;
  }

  int mode_ramp_steps() const {
    switch (mode_) {
      case FailureMode::kGenSurge: return cfg_.modes.surge_ramp;
      case FailureMode::kFlowSurge: return cfg_.modes.transfer_ramp;
      case FailureMode::kLineCascade: return cfg_.modes.cascade_ramp;
      default: return 1;
    }
  }

  double mode_limit_mult(int l, int t) const {
    if (mode_ != FailureMode::kLineCascade || state_.onset < 0 || t < state_.onset) return 1.0;
    auto [a, b] = schema_.line_endpoints[l];
    if (tie_line_[l] || region_of_sub_[a] != state_.cascade_region) return 1.0;
    const double ramp = std::min(1.0, static_cast<double>(t - state_.onset) /
                                          cfg_.modes.cascade_ramp);
    return 1.0 - ramp * (1.0 - cfg_.modes.cascade_derate);
  }

  double topo_relief(int l) const {
    double relief = 1.0;
    auto [a, b] = schema_.line_endpoints[l];
    for (int s : {a, b}) {
      if (topo_[s] == 1) relief *= 1.15;
      else if (topo_[s] == 2)
        relief *= std::pow(cfg_.modes.drift_derate, drift_level_[s]);
    }
    return relief;
  }

  void disconnect(int l) {
    status_[l] = 0;
    ts_overflow_[l] = 0;
  }

  void advance_state(int t) {
    for (int& c : cooldown_line_)
      if (c > 0) --c;
    for (int& c : cooldown_sub_)
      if (c > 0) --c;

    for (int l = 0; l < schema_.n_lines; ++l)
      if (status_[l] && ts_overflow_[l] >= cfg_.overflow_disconnect_after) {
        disconnect(l);
        cooldown_line_[l] = cfg_.overflow_cooldown;
      }

    for (const MaintenanceWindow& m : cfg_.maintenance)
      if (m.start == t) {
        disconnect(m.line);
        maint_until_[m.line] = t + m.duration;
        cooldown_line_[m.line] = std::max(cooldown_line_[m.line], m.duration);
      }

    if (attack_at_[t] >= 0) {
      const int l = attack_at_[t];
      disconnect(l);
      attack_until_[l] = t + cfg_.profile.attack_duration;
      cooldown_line_[l] = std::max(cooldown_line_[l], cfg_.profile.attack_duration);
    }

    const bool can_act = cfg_.agent_profile != AgentProfile::kPassive;
    if (can_act) {
      for (int l = 0; l < schema_.n_lines; ++l)
        if (!status_[l] && cooldown_line_[l] == 0 && t >= attack_until_[l] &&
            t >= maint_until_[l]) {
          status_[l] = 1;
          ts_overflow_[l] = 0;
        }
    }
    if (cfg_.agent_profile == AgentProfile::kTopologyFixer && !prev_rho_.empty()) {
      int worst = -1;
      double worst_rho = 0.0;
      for (int l = 0; l < schema_.n_lines; ++l)
        if (prev_rho_[l] > worst_rho) {
          worst_rho = prev_rho_[l];
          worst = l;
        }
      if (worst_rho >= 0.95 && worst >= 0) {
        const int s = schema_.line_endpoints[worst].first;
        if (topo_[s] == 0 && cooldown_sub_[s] == 0) {
          topo_[s] = 1;
          cooldown_sub_[s] = cfg_.sub_cooldown;
        }
      } else if (worst_rho < 0.70) {
        for (int s = 0; s < schema_.n_substations; ++s)
          if (topo_[s] == 1) topo_[s] = 0;
      }
    }

    if (mode_ == FailureMode::kTopoDrift && state_.onset >= 0 && t >= state_.onset &&
        (t - state_.onset) % cfg_.modes.drift_every == 0) {
      // Cycles through the substations; repeat passes deepen the derating so
      // even lightly loaded chronics eventually overload.
      const int s = state_.drift_order[drift_count_ % state_.drift_order.size()];
      topo_[s] = 2;
      ++drift_level_[s];
      ++drift_count_;
    }
  }

  StepPhysics compute_physics(int t) {
    std::vector<double> load(schema_.n_loads);
    const auto load_rng = rng_.with("load_noise");
    for (int d = 0; d < schema_.n_loads; ++d) {
      const double noise = 1.0 + cfg_.profile.load_noise_sd *
                                     load_rng.normal(static_cast<std::uint64_t>(t) *
                                                         schema_.n_loads + d);
      load[d] = load_base_[d] * daily_curve(cfg_.profile.night_floor, t) *
                std::max(0.05, noise) * mode_load_mult(d, t);
    }
    std::vector<double> w(schema_.n_generators);
    for (int g = 0; g < schema_.n_generators; ++g)
      w[g] = raw_gen_weight(g, t, true) * mode_gen_mult(g, t);

    bool unserved = false;
    double max_share = 0.0;
    StepPhysics ph = accumulate_flows(status_, load, w, &router_, &unserved, &max_share);
    ph.unserved = unserved;
    ph.max_gen_share = max_share;

    const auto bg_rng = rng_.with("bg_noise");
    for (int l = 0; l < schema_.n_lines; ++l) {
      if (!status_[l]) {
        ph.flow[l] = 0.0;
        continue;
      }
      const double bg = background_[l] * daily_curve(cfg_.profile.night_floor, t) *
                        (1.0 + 0.1 * bg_rng.normal(static_cast<std::uint64_t>(t) *
                                                       schema_.n_lines + l));
      ph.flow[l] += bg;
      if (tie_line_[l]) ph.tie_abs_flow += std::abs(ph.flow[l]);
    }
    ph.rho.assign(schema_.n_lines, 0.0);
    for (int l = 0; l < schema_.n_lines; ++l)
      if (status_[l])
        ph.rho[l] = std::abs(ph.flow[l]) /
                    (limit_[l] * mode_limit_mult(l, t) * topo_relief(l));
    return ph;
  }

  std::optional<std::string> failure_check(int t, const StepPhysics& ph) {
    if (ph.unserved) return "unserved load";
    double rho_max = 0.0;
    int n_over = 0;
    for (int l = 0; l < schema_.n_lines; ++l) {
      rho_max = std::max(rho_max, ph.rho[l]);
      if (status_[l] && ph.rho[l] >= 1.0) ++n_over;
    }
    if (rho_max >= cfg_.modes.rho_fail) return "loading diverged";
    if (n_over >= cfg_.modes.stress_overflow_count) return "overflow stress";
    switch (mode_) {
      case FailureMode::kTopoDrift: {
        int changed = 0;
        for (int s = 0; s < schema_.n_substations; ++s)
          if (topo_[s] != 0) ++changed;
        if (changed >= cfg_.modes.drift_fail_subs && rho_max >= 1.02)
          return "topology infeasible";
        break;
      }
      case FailureMode::kLoadDrop: {
        if (state_.onset >= 0 && t >= state_.onset) {
          const double ramp = std::min(1.0, static_cast<double>(t - state_.onset) /
                                                cfg_.modes.load_drop_ramp);
          const double mult = 1.0 - ramp * (1.0 - cfg_.modes.load_drop_floor);
          if (mult <= cfg_.modes.load_collapse_level) return "regional imbalance";
        }
        break;
      }
      case FailureMode::kGenSurge:
        if (ph.max_gen_share >= cfg_.modes.surge_share_fail) return "injection diverged";
        break;
      case FailureMode::kFlowSurge:
        if (state_.onset >= 0 && t >= state_.onset &&
            ph.tie_abs_flow >= cfg_.modes.transfer_fail_frac * ph.total_load)
          return "transfer capacity exceeded";
        break;
      default:
        break;
    }
    return std::nullopt;
  }

  ErrorType pick_error(int t) const {
    const double u = rng_.with("error_type").uniform(t);
    if (u < 0.65) return ErrorType::kDcInitSolverFactor;
    if (u < 0.91) return ErrorType::kAcTooManyIterations;
    return ErrorType::kDcInitSolverSolve;
  }

  Observation make_observation(int t, const StepPhysics& ph) const {
    Observation o;
    o.step = t;
    o.minute_of_hour = (5 * t) % 60;
    o.hour_of_day = (5 * t / 60) % 24;
    o.day_of_week = (t / 288) % 7;
    o.rho = ph.rho;
    o.line_status = status_;
    o.ts_overflow_line = ts_overflow_;
    o.cooldown_line = cooldown_line_;
    o.cooldown_sub = cooldown_sub_;
    o.maintenance_time.assign(schema_.n_lines, -1);
    for (const MaintenanceWindow& m : cfg_.maintenance)
      if (m.start >= t) {
        int& slot = o.maintenance_time[m.line];
        const int dist = m.start - t;
        if (slot < 0 || dist < slot) slot = dist;
      }
    o.p_or.resize(schema_.n_lines);
    o.p_ex.resize(schema_.n_lines);
    for (int l = 0; l < schema_.n_lines; ++l) {
      o.p_or[l] = ph.flow[l];
      o.p_ex[l] = -0.98 * ph.flow[l];
    }
    o.gen_p = ph.gen_p;
    o.load_p = ph.load_p;
    o.sub_topology = topo_;
    return o;
  }

  const SynthConfig& cfg_;
  const GridSchema& schema_;
  FlowRouter router_;
  CounterRng rng_;

  std::vector<double> load_base_, gen_weight_, background_, limit_;
  std::vector<int> gen_kind_, region_of_sub_;
  std::vector<std::uint8_t> tie_line_;
  double wind_phase_ = 0.0;
  int n_regions_ = 1;
  FailureMode mode_ = FailureMode::kNone;
  ModeState state_;

  std::vector<std::uint8_t> status_;
  std::vector<int> ts_overflow_, cooldown_line_, cooldown_sub_, topo_, drift_level_;
  std::vector<int> attack_until_, maint_until_, attack_at_;
  std::vector<double> prev_rho_;
  int drift_count_ = 0;
};

}  // namespace

Episode generate_episode(const SynthConfig& cfg) {
  const ValidationReport r = validate_synth_config(cfg);
  if (!r.ok()) throw std::invalid_argument("invalid synth config: " + r.violations[0].message);
  EpisodeSim sim(cfg);
  return sim.run();
}

ValidationReport validate_corpus_spec(const CorpusSpec& spec) {
  ValidationReport r = validate_synth_config(spec.base);
  auto& v = r.violations;
  if (spec.n_chronics < 1) v.push_back({"n_chronics must be >= 1", -1, -1});
  if (spec.n_seeds < 1) v.push_back({"n_seeds must be >= 1", -1, -1});
  if (spec.agents.empty()) v.push_back({"agents must be non-empty", -1, -1});
  double sum = 0.0;
  for (const auto& [mode, frac] : spec.mode_mix) {
    if (frac < 0) v.push_back({"negative fraction for mode " + to_string(mode), -1, -1});
    sum += frac;
  }
  if (spec.mode_mix.empty())
    v.push_back({"mode_mix must be non-empty", -1, -1});
  else if (std::abs(sum - 1.0) > 1e-9)
    v.push_back({"mode_mix fractions sum to " + format_double(sum) + ", expected 1", -1, -1});
  return r;
}

FailureMode mode_for_chronic(const CorpusSpec& spec, int chronic_index) {
  const double u = (chronic_index + 0.5) / spec.n_chronics;
  double acc = 0.0;
  FailureMode last = FailureMode::kNone;
  for (const auto& [mode, frac] : spec.mode_mix) {
    acc += frac;
    last = mode;
    if (u < acc) return mode;
  }
  return last;
}

Table corpus_manifest_header() {
  return Table({"chronic_id", "agent", "seed", "mode", "outcome", "n_steps",
                "failed_step", "error_type"});
}

Table::Row manifest_row(const Episode& e, FailureMode mode) {
  const bool failed = e.termination.outcome == TerminationInfo::Outcome::kFailed;
  return {e.chronic_id,
          e.agent.name(),
          static_cast<double>(e.seed),
          to_string(mode),
          to_string(e.termination.outcome),
          static_cast<double>(e.observations.size()),
          static_cast<double>(failed ? *e.termination.failed_step : -1),
          to_string(e.termination.error_type)};
}

namespace {

std::string chronic_name(const std::string& prefix, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", index);
  return prefix + buf;
}

}  // namespace

Table for_each_corpus_episode(const CorpusSpec& spec, int workers,
                              const std::function<void(const Episode&, FailureMode)>& sink) {
  const ValidationReport r = validate_corpus_spec(spec);
  if (!r.ok()) throw std::invalid_argument("invalid corpus spec: " + r.violations[0].message);

  const int n_agents = static_cast<int>(spec.agents.size());
  const std::size_t total =
      static_cast<std::size_t>(spec.n_chronics) * spec.n_seeds * n_agents;
  Table manifest = corpus_manifest_header();

  const std::size_t batch = std::max<std::size_t>(1, 4 * std::max(1, workers));
  std::vector<Episode> slot(batch);
  std::vector<FailureMode> slot_mode(batch);
  for (std::size_t start = 0; start < total; start += batch) {
    const std::size_t count = std::min(batch, total - start);
    parallel_for(count, workers, [&](std::size_t k) {
      const std::size_t idx = start + k;
      const int chronic = static_cast<int>(idx / (spec.n_seeds * n_agents));
      const int rem = static_cast<int>(idx % (spec.n_seeds * n_agents));
      const int seed_idx = rem / n_agents;
      const int agent_idx = rem % n_agents;
      SynthConfig cfg = spec.base;
      cfg.chronic_id = chronic_name(spec.chronic_prefix, chronic);
      cfg.seed = spec.base.seed + static_cast<std::uint64_t>(seed_idx);
      cfg.agent_profile = spec.agents[agent_idx];
      cfg.planted_failure_mode = mode_for_chronic(spec, chronic);
      slot_mode[k] = cfg.planted_failure_mode;
      slot[k] = generate_episode(cfg);
    });
    for (std::size_t k = 0; k < count; ++k) {
      manifest.add_row(manifest_row(slot[k], slot_mode[k]));
      sink(slot[k], slot_mode[k]);
    }
  }
  return manifest;
}

CorpusResult generate_corpus(const CorpusSpec& spec, int workers) {
  CorpusResult out;
  out.manifest = for_each_corpus_episode(spec, workers,
                                         [&](const Episode& e, FailureMode) {
                                           out.episodes.push_back(e);
                                         });
  return out;
}

}  // namespace gridfail
