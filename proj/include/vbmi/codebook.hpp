#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vbmi/config.hpp"

namespace vbmi::code {

// A binary flicker code driven at a fixed bit rate. One full pass through the
// code is one trial; the default runs 28 bits at 25 Hz, i.e. 1.12 s per trial.
// Immutable after construction.
class CodeSequence {
 public:
  CodeSequence(std::vector<uint8_t> bits, double bit_rate_hz);

  size_t length() const { return bits_.size(); }
  const std::vector<uint8_t>& bits() const { return bits_; }
  double bit_rate_hz() const { return bit_rate_hz_; }
  double trial_duration_s() const { return static_cast<double>(bits_.size()) / bit_rate_hz_; }

  // Samples per trial at a given sampling rate.
  size_t trial_samples(double fs_hz) const;

  // Fingerprint of (bits, rate) carried in model metadata for compatibility checks.
  uint32_t hash() const;

  std::string to_string() const;  // e.g. "1011111..."

 private:
  std::vector<uint8_t> bits_;
  double bit_rate_hz_;
};

// Which symbol of the built-in 29-symbol listing to drop to reach 28 bits.
// The two candidates are cyclic rotations of one another (the listing begins
// and ends with the same symbol), so their autocorrelation profiles coincide.
enum class DropSide { trailing, leading };

// The built-in 28-bit code at 25 Hz.
CodeSequence base_code(DropSide drop = DropSide::trailing);

// Code override from a config block:
//   code = "10111111111110011100000000001"
//   bit_rate_hz = 25
//   drop = trailing | leading   (only applied when `code` is absent)
CodeSequence code_from_config(const Config& cfg);

// Periodic autocorrelation under the ±1 mapping: sum_i s_i * s_{(i+lag) mod L}.
int periodic_autocorrelation(const CodeSequence& code, size_t lag);

// Max and min autocorrelation over all nonzero lags; the spread between them
// is the sequence-quality figure logged when a code is selected.
struct OffPeakRange {
  int max_value;
  int min_value;
  int spread() const { return max_value - min_value; }
};
OffPeakRange off_peak_autocorrelation(const CodeSequence& code);

// Per-target circular lags plus bit-onset timing for one trial.
struct StimulusSchedule {
  std::vector<size_t> target_lags;
  std::vector<double> bit_onsets_s;
  size_t n_targets;
  double trial_duration_s;
};

// Target k flickers the base code circularly shifted by k*floor(L/n) bits.
StimulusSchedule target_codes(const CodeSequence& code, size_t n_targets);

// Sampled ±1 waveform of the code at a circular lag. Sample m carries the
// value of bit (floor(m * bit_rate / fs) + lag) mod L; length is
// round(duration_s * fs_hz). duration_s must be a positive whole number of
// trials.
std::vector<double> code_waveform(const CodeSequence& code, size_t lag, double fs_hz,
                                  double duration_s);

}  // namespace vbmi::code
