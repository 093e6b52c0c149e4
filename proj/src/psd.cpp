#include "vbmi/psd.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "vbmi/fft.hpp"

namespace vbmi::dsp {

namespace {

std::vector<double> hann_window(size_t n) {
  std::vector<double> w(n, 1.0);
  if (n <= 1) return w;
  const double pi = std::acos(-1.0);
  for (size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return w;
}

}  // namespace

PsdEstimate welch_psd(std::span<const double> signal, double fs_hz, WelchOptions opt) {
  if (!(fs_hz > 0.0)) throw std::invalid_argument("welch_psd: fs must be > 0");
  if (!(opt.overlap >= 0.0 && opt.overlap < 1.0)) {
    throw std::invalid_argument("welch_psd: overlap must be in [0,1)");
  }
  size_t nperseg = static_cast<size_t>(std::llround(opt.segment_s * fs_hz));
  if (nperseg < 8) nperseg = 8;
  if (signal.size() < nperseg) {
    throw std::length_error("welch_psd: signal shorter than one segment (" +
                            std::to_string(nperseg) + " samples)");
  }
  const size_t noverlap = static_cast<size_t>(std::floor(static_cast<double>(nperseg) * opt.overlap));
  const size_t hop = nperseg > noverlap ? nperseg - noverlap : 1;
  const size_t nfft = next_power_of_two(nperseg);
  const size_t nfreq = nfft / 2 + 1;

  const std::vector<double> window = hann_window(nperseg);
  double u = 0.0;  // window power normalization
  for (double wi : window) u += wi * wi;

  std::vector<double> acc(nfreq, 0.0);
  int n_segments = 0;
  std::vector<std::complex<double>> buf(nfft);
  for (size_t start = 0; start + nperseg <= signal.size(); start += hop) {
    double mean = 0.0;
    for (size_t i = 0; i < nperseg; ++i) mean += signal[start + i];
    mean /= static_cast<double>(nperseg);

    for (size_t i = 0; i < nperseg; ++i) {
      buf[i] = {(signal[start + i] - mean) * window[i], 0.0};
    }
    std::fill(buf.begin() + static_cast<long>(nperseg), buf.end(), std::complex<double>{});
    fft_inplace(buf, false);

    const double scale = 1.0 / (fs_hz * u);
    for (size_t k = 0; k < nfreq; ++k) {
      double p = std::norm(buf[k]) * scale;
      if (k != 0 && k != nfft / 2) p *= 2.0;  // fold the negative frequencies
      acc[k] += p;
    }
    ++n_segments;
  }

  PsdEstimate out;
  out.df_hz = fs_hz / static_cast<double>(nfft);
  out.n_segments = n_segments;
  out.freqs_hz.resize(nfreq);
  out.power.resize(nfreq);
  for (size_t k = 0; k < nfreq; ++k) {
    out.freqs_hz[k] = static_cast<double>(k) * out.df_hz;
    out.power[k] = acc[k] / n_segments;
  }
  return out;
}

double band_power(const PsdEstimate& psd, double f_lo_hz, double f_hi_hz) {
  double acc = 0.0;
  for (size_t k = 0; k < psd.freqs_hz.size(); ++k) {
    if (psd.freqs_hz[k] >= f_lo_hz && psd.freqs_hz[k] <= f_hi_hz) {
      acc += psd.power[k] * psd.df_hz;
    }
  }
  return acc;
}

double c_anti(std::span<const double> input, std::span<const double> output, double fs_hz) {
  if (input.size() != output.size()) {
    throw std::invalid_argument("c_anti: signals must have equal length");
  }
  if (static_cast<double>(input.size()) < 2.0 * fs_hz) {
    throw std::length_error("c_anti: signals must cover at least 2 s");
  }
  PsdEstimate pin = welch_psd(input, fs_hz);
  PsdEstimate pout = welch_psd(output, fs_hz);
  size_t bin = static_cast<size_t>(std::llround(50.0 / pin.df_hz));
  if (bin >= pin.power.size()) throw std::domain_error("c_anti: 50 Hz above Nyquist");
  if (pin.power[bin] <= 0.0) {
    throw std::domain_error("c_anti: input has no power in the 50 Hz bin");
  }
  return pout.power[bin] / pin.power[bin];
}

NoiseMetrics noise_metrics(std::span<const double> signal) {
  if (signal.empty()) throw std::invalid_argument("noise_metrics: empty signal");
  // shifted two-pass variance: conditioning is immune to a large DC offset,
  // and a constant signal comes out exactly zero
  const double base = signal[0];
  double lo = signal[0], hi = signal[0], mean = 0.0;
  for (double v : signal) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v - base;
  }
  mean /= static_cast<double>(signal.size());
  double ss = 0.0;
  for (double v : signal) ss += (v - base - mean) * (v - base - mean);
  return {hi - lo, std::sqrt(ss / static_cast<double>(signal.size()))};
}

}  // namespace vbmi::dsp
