#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace vbmi::dsp {

// One second-order section, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2;
  double a1, a2;

  bool stable() const;  // both poles strictly inside the unit circle
};

struct FilterSpec {
  std::vector<Biquad> sections;
  std::string description;
  double fs_hz{0.0};

  bool stable() const;
};

// Butterworth bandpass with `half_order` prototype poles (2*half_order poles
// total) via the analog prototype and bilinear transform. Unity gain at the
// geometric band center.
std::vector<Biquad> butterworth_bandpass(int half_order, double f_lo_hz, double f_hi_hz,
                                         double fs_hz);

// Constrained-Q notch (Audio-EQ-cookbook form) with its zero exactly on the
// unit circle at f0.
Biquad rbj_notch(double f0_hz, double q, double fs_hz);

// The SDK preprocessing cascade: 4th-order Butterworth bandpass 1-100 Hz plus
// a 50 Hz notch with Q = 30. Requires fs > 200.
FilterSpec design_filters(double fs_hz = 250.0);

// Complex frequency response of the cascade at f_hz.
std::complex<double> filter_response(const FilterSpec& spec, double f_hz);
double magnitude_db(const FilterSpec& spec, double f_hz);

// Causal streaming state (direct form II transposed), one state per channel
// per section. Feeding a signal in any chunking gives bit-identical output to
// one-shot processing.
class FilterState {
 public:
  FilterState(FilterSpec spec, int channels);

  const FilterSpec& spec() const { return spec_; }
  int channels() const { return channels_; }

  // In-place: block is channels x samples.
  void process(Eigen::Ref<Eigen::MatrixXd> block);

  // Convenience for single-channel data.
  std::vector<double> process_copy(const std::vector<double>& x);

  void reset();

 private:
  FilterSpec spec_;
  int channels_;
  // state[(channel * sections + section)] = {s1, s2}
  std::vector<std::array<double, 2>> state_;
};

}  // namespace vbmi::dsp
