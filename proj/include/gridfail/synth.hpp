#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridfail/grid_model.hpp"
#include "gridfail/table.hpp"

namespace gridfail {

enum class FailureMode { kTopoDrift, kLoadDrop, kLineCascade, kGenSurge, kFlowSurge, kNone };
enum class AgentProfile { kPassive, kReconnector, kTopologyFixer };

std::string to_string(FailureMode m);
std::optional<FailureMode> parse_failure_mode(const std::string& s);
std::string to_string(AgentProfile a);
std::optional<AgentProfile> parse_agent_profile(const std::string& s);
AgentKind agent_kind_for(AgentProfile p);

struct Attack {
  int step = 0;
  int line = 0;
};

struct MaintenanceWindow {
  int line = 0;
  int start = 0;
  int duration = 0;
};

// Daily demand/generation shape and the toy grid's electrical constants.
// Chronics start at the overnight trough of the load curve.
struct DailyProfile {
  double load_peak_mw = 30.0;       // nominal per-load peak
  double night_floor = 0.25;        // overnight demand as fraction of peak
  double chronic_spread = 0.3;      // per-chronic load base in peak*(1 +- spread)
  double load_noise_sd = 0.015;
  double gen_noise_sd = 0.02;
  double background_flow_mw = 0.9;  // small circulating flow so baselines are nonzero
  double cross_region_affinity = 0.03;
  double limit_headroom = 1.35;     // thermal limit over nominal peak flow
  double limit_floor_mw = 50.0;     // minimum thermal limit for lightly used lines
  double attacks_per_day = 0.0;     // expected random forced outages per day
  int attack_duration = 9;          // steps a forced outage lasts
};

// Knobs for the planted failure drivers. Onset windows are in steps.
struct ModeParams {
  int drift_onset_lo = 100, drift_onset_hi = 300;
  int drift_every = 22;           // steps between drift topology events
  int drift_fail_subs = 8;        // changed substations needed before collapse
  double drift_derate = 0.82;     // limit derating per drifted endpoint

  int load_drop_ramp = 34;        // steps from onset to full regional decay
  double load_drop_floor = 0.35;  // regional demand multiplier at full decay
  double load_drop_spill = 0.15;  // mild decay applied outside the region
  double load_collapse_level = 0.40;  // imbalance failure when multiplier <= this

  int cascade_onset_lo = 40, cascade_onset_hi = 280;
  int cascade_ramp = 45;
  double cascade_derate = 0.45;   // regional limits shrink to this fraction

  int surge_onset_lo = 20, surge_onset_hi = 70;
  int surge_ramp = 10;
  double surge_scale_lo = 150.0, surge_scale_hi = 500.0;
  double surge_share_fail = 0.30;  // single-generator share that diverges the solver

  int transfer_onset_lo = 50, transfer_onset_hi = 260;
  int transfer_ramp = 70;
  double transfer_fail_frac = 0.5;  // tie-line transfer as fraction of total load

  double rho_fail = 1.8;           // instant divergence level
  int stress_overflow_count = 5;   // simultaneous overflows that diverge the solver
};

struct SynthConfig {
  GridSchema schema;
  std::vector<int> gen_kind;          // 0 baseline, 1 solar, 2 wind; empty = all baseline
  std::vector<double> gen_base_weight;  // empty = all 1.0
  std::string chronic_id = "chr0000";
  int horizon = 2016;
  std::uint64_t seed = 0;
  AgentProfile agent_profile = AgentProfile::kPassive;
  std::vector<Attack> attack_schedule;
  FailureMode planted_failure_mode = FailureMode::kNone;
  DailyProfile profile;
  ModeParams modes;
  int overflow_disconnect_after = 3;
  int overflow_cooldown = 6;
  int sub_cooldown = 3;
  std::vector<MaintenanceWindow> maintenance;
};

// Two-region 14-substation mesh with 21 lines, 6 generators, 9 loads.
GridSchema make_default_schema();
// Default schema plus matching generator kinds/weights.
SynthConfig make_default_config();

ValidationReport validate_synth_config(const SynthConfig& cfg);

// Deterministic function of cfg; the returned episode always passes
// validate_episode against cfg.schema. Throws std::invalid_argument when the
// config fails validation.
Episode generate_episode(const SynthConfig& cfg);

struct CorpusSpec {
  SynthConfig base;
  int n_chronics = 10;
  int n_seeds = 1;
  std::vector<AgentProfile> agents = {AgentProfile::kPassive};
  std::map<FailureMode, double> mode_mix;  // fractions over chronics, must sum to 1
  std::string chronic_prefix = "chr";
};

ValidationReport validate_corpus_spec(const CorpusSpec& spec);

Table corpus_manifest_header();
Table::Row manifest_row(const Episode& e, FailureMode mode);

// Mode assigned to each chronic index by cumulative mix fractions.
FailureMode mode_for_chronic(const CorpusSpec& spec, int chronic_index);

struct CorpusResult {
  std::vector<Episode> episodes;
  Table manifest;
};

// n_chronics x n_seeds x agents episodes, generated in parallel but emitted in
// deterministic index order. Throws std::invalid_argument on an invalid mix.
CorpusResult generate_corpus(const CorpusSpec& spec, int workers = 1);

// Streaming variant for corpora too large to hold: sink is called in index
// order. Returns the manifest.
Table for_each_corpus_episode(const CorpusSpec& spec, int workers,
                              const std::function<void(const Episode&, FailureMode)>& sink);

}  // namespace gridfail
