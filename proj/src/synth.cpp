#include "vbmi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "vbmi/fft.hpp"
#include "vbmi/hashes.hpp"
#include "vbmi/montage.hpp"
#include "vbmi/psd.hpp"

namespace vbmi::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// independent replayable stream per (subject seed, purpose tag, window index)
enum : std::uint64_t {
  kTagTrial = 1,
  kTagGap = 2,
  kTagAux = 3,      // reference/bias instrument floor
  kTagSnrRef = 4,   // reference noise window for the session-wide scale
  kTagDrift = 5,
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(tag)) ^ splitmix64(index + 1));
}

// zero-mean 1/f noise, unit rms, length n
std::vector<double> pink_noise(std::mt19937_64& rng, std::size_t n) {
  const std::size_t m = dsp::next_power_of_two(std::max<std::size_t>(n, 8));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::complex<double>> spec(m, {0.0, 0.0});
  for (std::size_t k = 1; k <= m / 2; ++k) {
    const double amp = 1.0 / std::sqrt(static_cast<double>(k));
    const double re = gauss(rng);
    const double im = (k == m / 2) ? 0.0 : gauss(rng);
    spec[k] = std::complex<double>(re * amp, im * amp);
    if (k != m / 2) spec[m - k] = std::conj(spec[k]);
  }
  dsp::fft_inplace(spec, true);
  std::vector<double> out(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = spec[i].real();
    ss += out[i] * out[i];
  }
  const double rms = std::sqrt(ss / static_cast<double>(n));
  if (rms > 0.0) {
    for (double& v : out) v /= rms;
  }
  return out;
}

// unit-rms sinusoid; phase_sample fixes the absolute time of the first sample
std::vector<double> tone(double f_hz, double fs_hz, std::size_t n, double phase_rad,
                         std::uint64_t phase_sample) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(phase_sample + i) / fs_hz;
    out[i] = std::numbers::sqrt2 * std::sin(2.0 * kPi * f_hz * t + phase_rad);
  }
  return out;
}

double in_band_power(const Eigen::MatrixXd& m, double fs_hz) {
  double acc = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.row(r).begin(), m.row(r).end());
    acc += dsp::band_power(dsp::welch_psd(row, fs_hz), 1.0, 100.0);
  }
  return acc / static_cast<double>(m.rows());
}

// the three-component mix before SNR scaling; 7 x n
Eigen::MatrixXd raw_noise(const SubjectModel& model, std::mt19937_64& rng, std::size_t n,
                          double fs_hz, std::uint64_t start_sample) {
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(kAcqChannels, static_cast<Eigen::Index>(n));
  const auto& mix = model.noise_mix;
  if (mix.pink != 0.0) {
    for (int c = 0; c < kAcqChannels; ++c) {
      const auto p = pink_noise(rng, n);
      for (std::size_t i = 0; i < n; ++i) noise(c, static_cast<Eigen::Index>(i)) += mix.pink * p[i];
    }
  }
  if (mix.alpha != 0.0) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const auto a = tone(10.0, fs_hz, n, phase(rng), start_sample);
    for (int c = 0; c < kAcqChannels; ++c) {
      for (std::size_t i = 0; i < n; ++i) noise(c, static_cast<Eigen::Index>(i)) += mix.alpha * a[i];
    }
  }
  if (mix.mains != 0.0) {
    const auto m50 = tone(50.0, fs_hz, n, 0.0, start_sample);
    for (int c = 0; c < kAcqChannels; ++c) {
      for (std::size_t i = 0; i < n; ++i) noise(c, static_cast<Eigen::Index>(i)) += mix.mains * m50[i];
    }
  }
  return noise;
}

void add_floor(const SubjectModel& model, std::mt19937_64& rng, Eigen::MatrixXd& block) {
  if (model.floor_uvrms <= 0.0) return;
  std::normal_distribution<double> gauss(0.0, model.floor_uvrms * 1e-6);
  for (Eigen::Index c = 0; c < block.rows(); ++c) {
    for (Eigen::Index i = 0; i < block.cols(); ++i) block(c, i) += gauss(rng);
  }
}

}  // namespace

void SubjectModel::validate() const {
  if (kernel.empty()) throw std::invalid_argument("SubjectModel: kernel is empty");
  for (double k : kernel) {
    if (!std::isfinite(k)) throw std::invalid_argument("SubjectModel: kernel has non-finite taps");
  }
  if (mixing.size() != kAcqChannels) {
    throw std::invalid_argument("SubjectModel: mixing must have " + std::to_string(kAcqChannels) +
                                " entries");
  }
  if (mixing.cwiseAbs().maxCoeff() == 0.0) {
    throw std::invalid_argument("SubjectModel: mixing must have a nonzero entry");
  }
  if (impedances_kohm.size() != kAcqChannels + 2) {
    throw std::invalid_argument("SubjectModel: need impedances for all " +
                                std::to_string(kAcqChannels + 2) + " stream channels");
  }
  for (double z : impedances_kohm) {
    if (!(z > 0.0)) throw std::invalid_argument("SubjectModel: impedances must be > 0");
  }
  if (!(impedance_drift >= 0.0 && impedance_drift < 1.0)) {
    throw std::invalid_argument("SubjectModel: impedance_drift must lie in [0,1)");
  }
  if (floor_uvrms < 0.0) throw std::invalid_argument("SubjectModel: floor must be >= 0");
  if (noise_mix.pink < 0.0 || noise_mix.alpha < 0.0 || noise_mix.mains < 0.0) {
    throw std::invalid_argument("SubjectModel: noise weights must be >= 0");
  }
}

std::vector<double> vep_kernel(double fs_hz, double peak_volt) {
  // gamma-shaped positive lobe peaking near 100 ms minus a slower, shallower
  // lobe producing the undershoot
  const int n = 63;
  std::vector<double> k(n);
  const double k1 = 9.0, th1 = 0.0125;  // peak at (k1-1)*th1 = 100 ms
  const double k2 = 20.0, th2 = 0.008;  // undershoot centered near 170 ms
  auto gamma_pulse = [](double t, double shape, double scale) {
    if (t <= 0.0) return 0.0;
    // unit peak at t = (shape-1)*scale
    return std::pow(t / ((shape - 1.0) * scale), shape - 1.0) *
           std::exp((shape - 1.0) - t / scale);
  };
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs_hz;
    k[static_cast<std::size_t>(i)] = gamma_pulse(t, k1, th1) - 0.6 * gamma_pulse(t, k2, th2);
    peak = std::max(peak, std::abs(k[static_cast<std::size_t>(i)]));
  }
  for (double& v : k) v *= peak_volt / peak;
  return k;
}

SubjectModel default_subject(std::uint64_t seed) {
  SubjectModel m;
  m.kernel = vep_kernel();
  m.mixing = Eigen::VectorXd(kAcqChannels);
  m.mixing << 0.7, 0.9, 1.0, 0.9, 0.8, 1.0, 0.8;
  m.snr_db = 0.0;
  m.impedances_kohm.assign(kAcqChannels + 2, 20.0);
  m.rng_seed = seed;
  return m;
}

SubjectModel subject_from_config(const Config& cfg) {
  SubjectModel m = default_subject(static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
  m.snr_db = cfg.get_double("snr_db", m.snr_db);
  m.noise_mix.pink = cfg.get_double("noise_pink", m.noise_mix.pink);
  m.noise_mix.alpha = cfg.get_double("noise_alpha", m.noise_mix.alpha);
  m.noise_mix.mains = cfg.get_double("noise_mains", m.noise_mix.mains);
  m.impedance_drift = cfg.get_double("impedance_drift", m.impedance_drift);
  m.floor_uvrms = cfg.get_double("floor_uvrms", m.floor_uvrms);
  if (cfg.has("kernel_peak_uv")) {
    m.kernel = vep_kernel(250.0, cfg.get_double("kernel_peak_uv", 5.0) * 1e-6);
  }
  if (cfg.has("mixing")) {
    const auto w = cfg.get_doubles("mixing");
    if (w.size() != kAcqChannels) {
      throw std::invalid_argument("subject_from_config: mixing needs 7 entries");
    }
    for (int c = 0; c < kAcqChannels; ++c) m.mixing(c) = w[static_cast<std::size_t>(c)];
  }
  if (cfg.has("impedances_kohm")) {
    const auto z = cfg.get_doubles("impedances_kohm");
    if (z.size() != kAcqChannels + 2) {
      throw std::invalid_argument("subject_from_config: impedances_kohm needs 9 entries");
    }
    m.impedances_kohm = z;
  }
  m.validate();
  return m;
}

Eigen::MatrixXd clean_response(const SubjectModel& subject, const code::CodeSequence& code,
                               std::size_t lag, double fs_hz, double duration_s) {
  subject.validate();
  const auto w = code::code_waveform(code, lag, fs_hz, duration_s);
  const std::size_t period = code.trial_samples(fs_hz);
  if (subject.kernel.size() > period) {
    throw std::invalid_argument("clean_response: kernel longer than one trial period");
  }
  // circular convolution over one trial period, then the tiling is implied by
  // the waveform's periodicity
  std::vector<double> s(w.size());
  for (std::size_t m = 0; m < w.size(); ++m) {
    const std::size_t base = (m / period) * period;  // trial-local circularity
    const std::size_t local = m % period;
    double acc = 0.0;
    for (std::size_t j = 0; j < subject.kernel.size(); ++j) {
      const std::size_t idx = base + (local + period - (j % period)) % period;
      acc += subject.kernel[j] * w[idx];
    }
    s[m] = acc;
  }
  Eigen::MatrixXd out(kAcqChannels, static_cast<Eigen::Index>(s.size()));
  for (int c = 0; c < kAcqChannels; ++c) {
    for (std::size_t m = 0; m < s.size(); ++m) {
      out(c, static_cast<Eigen::Index>(m)) = subject.mixing(c) * s[m];
    }
  }
  return out;
}

Subject::Subject(SubjectModel model, code::CodeSequence code, double fs_hz)
    : model_(std::move(model)),
      code_(std::move(code)),
      fs_hz_(fs_hz),
      drift_state_(static_cast<std::size_t>(kAcqChannels) + 2, 0.0),
      drift_rng_(stream_seed(model_.rng_seed, kTagDrift, 0)) {
  model_.validate();
  if (!(fs_hz_ > 0.0)) throw std::invalid_argument("Subject: fs must be > 0");
}

Eigen::MatrixXd Subject::generate_trial(std::size_t target_lag) {
  return generate_trial_at(target_lag, next_ordinal_++, 0);
}

Eigen::MatrixXd Subject::generate_trial_at(std::size_t target_lag, std::uint64_t ordinal,
                                           std::uint64_t start_sample) const {
  const double trial_s = code_.trial_duration_s();
  Eigen::MatrixXd out = clean_response(model_, code_, target_lag, fs_hz_, trial_s);
  const auto n = static_cast<std::size_t>(out.cols());

  std::mt19937_64 rng(stream_seed(model_.rng_seed, kTagTrial, ordinal));
  if (!model_.noise_mix.all_zero()) {
    Eigen::MatrixXd noise = raw_noise(model_, rng, n, fs_hz_, start_sample);
    const double p_clean = in_band_power(out, fs_hz_);
    const double p_noise = in_band_power(noise, fs_hz_);
    if (p_clean > 0.0 && p_noise > 0.0) {
      const double scale =
          std::sqrt(p_clean / (p_noise * std::pow(10.0, model_.snr_db / 10.0)));
      out += scale * noise;
    }
  }
  add_floor(model_, rng, out);
  return out;
}

Eigen::MatrixXd Subject::render_session(const std::vector<TrialSlot>& slots,
                                        std::uint64_t total_samples) const {
  const std::size_t period = code_.trial_samples(fs_hz_);
  auto ordered = slots;
  std::sort(ordered.begin(), ordered.end(),
            [](const TrialSlot& a, const TrialSlot& b) { return a.onset_sample < b.onset_sample; });
  std::uint64_t cursor = 0;
  for (const auto& slot : ordered) {
    if (slot.onset_sample < cursor) {
      throw std::invalid_argument("render_session: overlapping trial slots");
    }
    if (slot.onset_sample + period > total_samples) {
      throw std::invalid_argument("render_session: trial extends past the session end");
    }
    cursor = slot.onset_sample + period;
  }

  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(kAcqChannels + 2, static_cast<Eigen::Index>(total_samples));

  // session-wide noise scale for the stretches between trials, anchored to the
  // same SNR definition through a reference noise window
  double gap_scale = 0.0;
  if (!model_.noise_mix.all_zero()) {
    std::mt19937_64 ref_rng(stream_seed(model_.rng_seed, kTagSnrRef, 0));
    const Eigen::MatrixXd ref_noise = raw_noise(model_, ref_rng, period, fs_hz_, 0);
    const Eigen::MatrixXd ref_clean =
        clean_response(model_, code_, 0, fs_hz_, code_.trial_duration_s());
    const double p_clean = in_band_power(ref_clean, fs_hz_);
    const double p_noise = in_band_power(ref_noise, fs_hz_);
    if (p_clean > 0.0 && p_noise > 0.0) {
      gap_scale = std::sqrt(p_clean / (p_noise * std::pow(10.0, model_.snr_db / 10.0)));
    }
  }

  // acquisition rows: trials at their slots, noise elsewhere
  std::uint64_t pos = 0;
  std::size_t slot_idx = 0;
  std::uint64_t gap_idx = 0;
  while (pos < total_samples) {
    if (slot_idx < ordered.size() && pos == ordered[slot_idx].onset_sample) {
      const auto& slot = ordered[slot_idx];
      out.block(0, static_cast<Eigen::Index>(pos), kAcqChannels,
                static_cast<Eigen::Index>(period)) =
          generate_trial_at(slot.lag, slot_idx, slot.onset_sample);
      pos += period;
      ++slot_idx;
      continue;
    }
    const std::uint64_t gap_end =
        slot_idx < ordered.size() ? ordered[slot_idx].onset_sample : total_samples;
    const auto n = static_cast<std::size_t>(gap_end - pos);
    if (n > 0) {
      std::mt19937_64 rng(stream_seed(model_.rng_seed, kTagGap, gap_idx++));
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(kAcqChannels, static_cast<Eigen::Index>(n));
      if (gap_scale > 0.0) block = gap_scale * raw_noise(model_, rng, n, fs_hz_, pos);
      add_floor(model_, rng, block);
      out.block(0, static_cast<Eigen::Index>(pos), kAcqChannels, static_cast<Eigen::Index>(n)) =
          block;
    }
    pos = gap_end;
  }

  // reference and bias rows carry only the instrument floor
  if (model_.floor_uvrms > 0.0) {
    std::mt19937_64 rng(stream_seed(model_.rng_seed, kTagAux, 0));
    std::normal_distribution<double> gauss(0.0, model_.floor_uvrms * 1e-6);
    for (int c = kAcqChannels; c < kAcqChannels + 2; ++c) {
      for (std::uint64_t i = 0; i < total_samples; ++i) {
        out(c, static_cast<Eigen::Index>(i)) = gauss(rng);
      }
    }
  }
  return out;
}

double Subject::impedance_of(std::size_t stream_channel) {
  if (stream_channel >= model_.impedances_kohm.size()) {
    throw std::out_of_range("impedance_of: channel " + std::to_string(stream_channel) +
                            " is off the montage");
  }
  const double base = model_.impedances_kohm[stream_channel];
  if (model_.impedance_drift <= 0.0) return base;
  std::normal_distribution<double> step(0.0, 0.08);
  double u = drift_state_[stream_channel] + step(drift_rng_);
  // reflect back into [-1, 1] so the walk stays inside the configured band
  while (u > 1.0 || u < -1.0) {
    if (u > 1.0) u = 2.0 - u;
    if (u < -1.0) u = -2.0 - u;
  }
  drift_state_[stream_channel] = u;
  return base * (1.0 + model_.impedance_drift * u);
}

}  // namespace vbmi::synth
