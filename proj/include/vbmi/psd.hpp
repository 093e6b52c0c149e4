#pragma once

#include <span>
#include <vector>

namespace vbmi::dsp {

struct WelchOptions {
  double segment_s{1.0};
  double overlap{0.5};  // fraction of a segment, in [0,1)
};

struct PsdEstimate {
  std::vector<double> freqs_hz;
  std::vector<double> power;  // one-sided density, V^2/Hz
  double df_hz{0.0};
  int n_segments{0};
};

// Hann-windowed averaged periodogram, one-sided, density-scaled so that
// sum(power) * df approximates the signal variance.
PsdEstimate welch_psd(std::span<const double> signal, double fs_hz, WelchOptions opt = {});

// Integrated power over bins whose center lies in [f_lo, f_hi].
double band_power(const PsdEstimate& psd, double f_lo_hz, double f_hi_hz);

// PSD ratio output/input in the bin containing 50 Hz: the mains-suppression
// figure. Throws std::domain_error when the input has no power there.
double c_anti(std::span<const double> input, std::span<const double> output, double fs_hz);

struct NoiseMetrics {
  double v_pp;
  double v_rms;  // after mean removal
};

NoiseMetrics noise_metrics(std::span<const double> signal);

}  // namespace vbmi::dsp
