#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbmi/config.hpp"
#include "vbmi/decoder.hpp"
#include "vbmi/serialize.hpp"

namespace vbmi::harness {

// Training-phase schedule. The budget covers stimulation plus inter-trial
// gaps; the lead-in is the contact-check settle window before the first cue
// and sits outside it.
struct TrainingPlan {
  int reps_per_class{3};
  double inter_trial_gap_s{0.3};
  double budget_s{30.0};
  double lead_in_s{1.0};
};

struct ExperimentConfig {
  int n_targets{7};
  int n_trials_per_selection{2};
  int selections_per_class{2};  // per subject
  int n_subjects{20};
  backend::Algo algo{backend::Algo::trca};
  double snr_db{8.0};
  std::uint64_t seed{1};
  TrainingPlan training;
  double selection_gap_s{0.5};  // gaze shift between selections, excluded from DTI
  double pace{1000.0};          // device pacing speedup for simulation runs
  int samples_per_packet{10};
  // empty = stock subject contacts; 9 entries override the simulated
  // electrode impedances (kOhm, stream channel order)
  std::vector<double> impedances_kohm;

  int selections_per_subject() const { return selections_per_class * n_targets; }
  void validate() const;  // throws std::invalid_argument

  // keys: n_targets, n_trials, selections_per_class, n_subjects, algo,
  // snr_db, seed, reps_per_class, inter_trial_gap_s, training_budget_s,
  // selection_gap_s, pace, samples_per_packet
  static ExperimentConfig from_config(const Config& cfg);
};

// Session abort: electrode contact failed the pre-session check.
struct WearError : std::runtime_error {
  explicit WearError(std::vector<std::string> channels);
  std::vector<std::string> poor_channels;
};

// Decoder trained on one subject's calibration run, plus its wire form.
struct TrainedSession {
  backend::Algo algo{backend::Algo::trca};
  decode::TrcaModel trca;
  decode::TdcaModel tdca;
  std::string serialized;  // template blob, ready for the store
  double training_signal_s{0.0};
};

// Calibration: schedules reps_per_class cues per target, streams the
// synthetic recording through the device server, client, filter cascade and
// epoch extractor, and trains the configured algorithm. Throws WearError if
// any channel is poor during the lead-in, std::invalid_argument if the
// schedule exceeds the training budget.
TrainedSession run_training_session(const ExperimentConfig& cfg, std::uint64_t subject_seed);

struct SubjectOutcome {
  std::uint64_t seed{0};
  int selections{0};
  int correct{0};
  int skipped{0};  // selections lost to stream gaps
  double accuracy{0.0};
  std::vector<int> cues;
  std::vector<int> decisions;
  std::vector<double> score_latency_ms;  // one per scored selection
};

struct LatencySummary {
  double p50_ms{0.0};
  double p90_ms{0.0};
  double p99_ms{0.0};
  double max_ms{0.0};
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SubjectOutcome> subjects;
  double mean_accuracy{0.0};
  double std_error{0.0};  // sample stddev across subjects / sqrt(n_subjects)
  double dti_s{0.0};
  double itr_bits_per_min{0.0};  // 0 when accuracy is at or below chance
  std::vector<std::vector<int>> confusion;  // [cued][decided]
  LatencySummary latency;
  int total_selections{0};
  int total_skipped{0};

  // Deterministic for a fixed (seed, config): everything except wall-clock
  // timing. This is the byte-compared form.
  std::string canonical_json() const;
  // canonical content plus the latency summary
  std::string full_json() const;
};

// Full closed-loop run: per subject train-then-test through the simulated
// device, scored selection by selection. Subjects run in parallel; the report
// reduction is in fixed subject order.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Published operating points used as reference annotations beside measured
// numbers (not pass gates: they came from human recordings).
struct ReferencePoint {
  int n_targets;
  int n_trials;
  double accuracy_pct;
};
const std::vector<ReferencePoint>& reference_grid();
std::string reference_comparison(const ExperimentReport& report);

// Bisects snr_db until the 7-target / 2-trial accuracy lands within
// +/- 3 points of target over at least 200 selections. Throws
// std::invalid_argument for targets outside (1/7, 1) and std::runtime_error
// when the bracket cannot reach the target.
double calibrate_snr(double target_accuracy, ExperimentConfig cfg);

}  // namespace vbmi::harness
