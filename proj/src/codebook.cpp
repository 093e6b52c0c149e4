#include "vbmi/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vbmi/hashes.hpp"

namespace vbmi::code {

namespace {

// The device's printed flicker listing carries 29 symbols while the sequence
// is 28 bits long; one symbol is dropped according to DropSide.
constexpr uint8_t kPrintedListing[29] = {1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0,
                                         1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1};

}  // namespace

CodeSequence::CodeSequence(std::vector<uint8_t> bits, double bit_rate_hz)
    : bits_(std::move(bits)), bit_rate_hz_(bit_rate_hz) {
  if (bits_.size() < 2) {
    throw std::invalid_argument("CodeSequence: code must have at least 2 bits");
  }
  for (uint8_t b : bits_) {
    if (b != 0 && b != 1) {
      throw std::invalid_argument("CodeSequence: non-binary symbol " + std::to_string(int(b)));
    }
  }
  if (!(bit_rate_hz_ > 0.0)) {
    throw std::invalid_argument("CodeSequence: bit rate must be positive");
  }
}

size_t CodeSequence::trial_samples(double fs_hz) const {
  return static_cast<size_t>(std::llround(trial_duration_s() * fs_hz));
}

uint32_t CodeSequence::hash() const {
  std::string canon = to_string() + "@" + std::to_string(bit_rate_hz_);
  return fnv1a32(canon);
}

std::string CodeSequence::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (uint8_t b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

CodeSequence base_code(DropSide drop) {
  std::vector<uint8_t> bits;
  bits.reserve(28);
  size_t begin = drop == DropSide::leading ? 1 : 0;
  for (size_t i = begin; i < begin + 28; ++i) bits.push_back(kPrintedListing[i]);
  return CodeSequence(std::move(bits), 25.0);
}

CodeSequence code_from_config(const Config& cfg) {
  double rate = cfg.get_double("bit_rate_hz", 25.0);
  if (cfg.has("code")) {
    std::string s = cfg.get_string("code");
    std::vector<uint8_t> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c == '0') {
        bits.push_back(0);
      } else if (c == '1') {
        bits.push_back(1);
      } else {
        throw std::invalid_argument(std::string("code_from_config: non-binary symbol '") + c +
                                    "' in code string");
      }
    }
    return CodeSequence(std::move(bits), rate);
  }
  std::string drop = cfg.get_string("drop", "trailing");
  if (drop == "trailing") return base_code(DropSide::trailing);
  if (drop == "leading") return base_code(DropSide::leading);
  throw std::invalid_argument("code_from_config: drop must be 'trailing' or 'leading'");
}

int periodic_autocorrelation(const CodeSequence& code, size_t lag) {
  const size_t L = code.length();
  if (lag >= L) {
    throw std::out_of_range("periodic_autocorrelation: lag " + std::to_string(lag) +
                            " out of range for length " + std::to_string(L));
  }
  const auto& bits = code.bits();
  int acc = 0;
  for (size_t i = 0; i < L; ++i) {
    int a = bits[i] ? 1 : -1;
    int b = bits[(i + lag) % L] ? 1 : -1;
    acc += a * b;
  }
  return acc;
}

OffPeakRange off_peak_autocorrelation(const CodeSequence& code) {
  OffPeakRange r{std::numeric_limits<int>::min(), std::numeric_limits<int>::max()};
  for (size_t lag = 1; lag < code.length(); ++lag) {
    int v = periodic_autocorrelation(code, lag);
    r.max_value = std::max(r.max_value, v);
    r.min_value = std::min(r.min_value, v);
  }
  return r;
}

StimulusSchedule target_codes(const CodeSequence& code, size_t n_targets) {
  const size_t L = code.length();
  if (n_targets < 1 || n_targets > L) {
    throw std::invalid_argument("target_codes: n_targets " + std::to_string(n_targets) +
                                " must lie in [1, " + std::to_string(L) + "]");
  }
  StimulusSchedule sched;
  sched.n_targets = n_targets;
  sched.trial_duration_s = code.trial_duration_s();
  const size_t step = L / n_targets;
  sched.target_lags.reserve(n_targets);
  for (size_t k = 0; k < n_targets; ++k) sched.target_lags.push_back(k * step);
  sched.bit_onsets_s.reserve(L);
  for (size_t i = 0; i < L; ++i) {
    sched.bit_onsets_s.push_back(static_cast<double>(i) / code.bit_rate_hz());
  }
  return sched;
}

std::vector<double> code_waveform(const CodeSequence& code, size_t lag, double fs_hz,
                                  double duration_s) {
  if (!(fs_hz > 0.0)) throw std::invalid_argument("code_waveform: fs_hz must be positive");
  const double trials = duration_s / code.trial_duration_s();
  const double whole = std::round(trials);
  if (!(duration_s > 0.0) || std::abs(trials - whole) > 1e-9 || whole < 1.0) {
    throw std::invalid_argument("code_waveform: duration must be a positive multiple of " +
                                std::to_string(code.trial_duration_s()) + " s");
  }
  const size_t L = code.length();
  const size_t n = static_cast<size_t>(std::llround(duration_s * fs_hz));
  const auto& bits = code.bits();
  std::vector<double> wave(n);
  for (size_t m = 0; m < n; ++m) {
    size_t bit = static_cast<size_t>(std::floor(static_cast<double>(m) * code.bit_rate_hz() / fs_hz));
    wave[m] = bits[(bit + lag) % L] ? 1.0 : -1.0;
  }
  return wave;
}

}  // namespace vbmi::code
