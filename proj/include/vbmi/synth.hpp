#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "vbmi/codebook.hpp"
#include "vbmi/config.hpp"

namespace vbmi::synth {

// Weights of the three additive noise components. The mix as a whole is
// rescaled per trial to hit the configured SNR, so only the proportions
// between the weights matter.
struct NoiseMix {
  double pink{1.0};   // 1/f background, independent per channel
  double alpha{0.5};  // 10 Hz rhythm, common across channels, random phase per trial
  double mains{1.0};  // 50 Hz interference, common across channels, fixed absolute phase
  bool all_zero() const { return pink == 0.0 && alpha == 0.0 && mains == 0.0; }
};

// A simulated wearer: evoked-response kernel, spatial mixing onto the 7
// acquisition channels, noise profile, and electrode impedances for the
// 9-channel stream (7 acquisition + reference + bias).
struct SubjectModel {
  std::vector<double> kernel;           // evoked impulse response, volts
  Eigen::VectorXd mixing;               // 7 channel gains
  double snr_db{0.0};                   // in-band (1-100 Hz) evoked/noise power ratio
  NoiseMix noise_mix;
  std::vector<double> impedances_kohm;  // 9 entries, stream channel order
  double impedance_drift{0.0};          // fractional walk band, 0 disables drift
  double floor_uvrms{0.15};             // instrument noise floor, every channel
  std::uint64_t rng_seed{1};

  void validate() const;  // throws std::invalid_argument
};

// Difference-of-gamma VEP-like pulse: positive lobe peaking near 100 ms with
// a shallow undershoot, 63 taps at 250 Hz, peak amplitude peak_volt.
std::vector<double> vep_kernel(double fs_hz = 250.0, double peak_volt = 5e-6);

SubjectModel default_subject(std::uint64_t seed);

// Reads seed / snr_db / noise_* / mixing / impedances_kohm / impedance_drift
// / floor_uvrms / kernel_peak_uv; anything absent keeps the default.
SubjectModel subject_from_config(const Config& cfg);

// Noise-free evoked response: the +/-1 code waveform at `lag`, circularly
// convolved with the kernel over the trial period, mapped through the mixing
// vector. duration_s must be a positive whole number of trials.
Eigen::MatrixXd clean_response(const SubjectModel& subject, const code::CodeSequence& code,
                               std::size_t lag, double fs_hz, double duration_s);

// One entry of a rendered session: a trial of the given label starting at an
// absolute sample index.
struct TrialSlot {
  std::uint64_t onset_sample;
  std::size_t lag;
  int label;
};

// Stateful per-subject generator. Each generated trial advances an ordinal
// that seeds an independent, replayable noise stream.
class Subject {
 public:
  Subject(SubjectModel model, code::CodeSequence code, double fs_hz = 250.0);

  const SubjectModel& model() const { return model_; }
  const code::CodeSequence& code() const { return code_; }
  double fs_hz() const { return fs_hz_; }
  std::uint64_t trials_generated() const { return next_ordinal_; }

  // 7 x trial_samples volts; advances the trial ordinal
  Eigen::MatrixXd generate_trial(std::size_t target_lag);
  // replay of a specific ordinal without touching the counter;
  // start_sample fixes the absolute phase of the mains component
  Eigen::MatrixXd generate_trial_at(std::size_t target_lag, std::uint64_t ordinal,
                                    std::uint64_t start_sample = 0) const;

  // 9 x total_samples volts: trial slots carry evoked responses with noise,
  // everything between them carries noise only. Deterministic for a given
  // (model, slots, total) regardless of call history.
  Eigen::MatrixXd render_session(const std::vector<TrialSlot>& slots,
                                 std::uint64_t total_samples) const;

  // electrode contact impedance in kOhm; advances a bounded random walk
  // when drift is enabled. Throws std::out_of_range off the montage.
  double impedance_of(std::size_t stream_channel);

 private:
  SubjectModel model_;
  code::CodeSequence code_;
  double fs_hz_;
  std::uint64_t next_ordinal_{0};
  std::vector<double> drift_state_;  // walk position per electrode, in [-1,1]
  std::mt19937_64 drift_rng_;
};

}  // namespace vbmi::synth
