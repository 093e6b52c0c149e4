#include "vbmi/filters.hpp"

#include <cmath>
#include <stdexcept>

namespace vbmi::dsp {

namespace {

using cplx = std::complex<double>;

Biquad biquad_from_conjugate_pole(cplx pole) {
  // denominator (1 - p z^-1)(1 - conj(p) z^-1); numerator (1 - z^-1)(1 + z^-1)
  return Biquad{1.0, 0.0, -1.0, -2.0 * pole.real(), std::norm(pole)};
}

Biquad biquad_from_real_poles(double r1, double r2) {
  return Biquad{1.0, 0.0, -1.0, -(r1 + r2), r1 * r2};
}

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

}  // namespace

bool Biquad::stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }

bool FilterSpec::stable() const {
  for (const auto& s : sections) {
    if (!s.stable()) return false;
  }
  return true;
}

std::vector<Biquad> butterworth_bandpass(int half_order, double f_lo_hz, double f_hi_hz,
                                         double fs_hz) {
  if (half_order < 1) throw std::invalid_argument("butterworth_bandpass: order must be >= 1");
  if (!(0.0 < f_lo_hz && f_lo_hz < f_hi_hz && f_hi_hz < fs_hz / 2.0)) {
    throw std::invalid_argument("butterworth_bandpass: need 0 < f_lo < f_hi < fs/2");
  }
  const double pi = std::acos(-1.0);
  // prewarped analog band edges
  const double w_lo = 2.0 * fs_hz * std::tan(pi * f_lo_hz / fs_hz);
  const double w_hi = 2.0 * fs_hz * std::tan(pi * f_hi_hz / fs_hz);
  const double w0_sq = w_lo * w_hi;
  const double bw = w_hi - w_lo;

  std::vector<Biquad> sections;
  const int n = half_order;
  for (int k = 0; k < (n + 1) / 2; ++k) {
    const double theta = pi * (2.0 * k + 1.0 + n) / (2.0 * n);
    const cplx proto(std::cos(theta), std::sin(theta));
    const bool is_real_pole = (n % 2 == 1) && (k == (n - 1) / 2);

    const cplx bp = bw * proto;
    const cplx root = std::sqrt(bp * bp - 4.0 * w0_sq);
    const cplx s_plus = (bp + root) / 2.0;
    const cplx s_minus = (bp - root) / 2.0;

    if (is_real_pole) {
      // both branches belong to the same section
      const cplx z1 = bilinear(s_plus, fs_hz);
      const cplx z2 = bilinear(s_minus, fs_hz);
      if (std::abs(z1.imag()) > 1e-12) {
        sections.push_back(biquad_from_conjugate_pole(z1));
      } else {
        sections.push_back(biquad_from_real_poles(z1.real(), z2.real()));
      }
    } else {
      sections.push_back(biquad_from_conjugate_pole(bilinear(s_plus, fs_hz)));
      sections.push_back(biquad_from_conjugate_pole(bilinear(s_minus, fs_hz)));
    }
  }

  // unity gain at the geometric band center
  FilterSpec tmp{sections, "", fs_hz};
  const double f_ref = std::sqrt(f_lo_hz * f_hi_hz);
  const double g = std::abs(filter_response(tmp, f_ref));
  if (!(g > 0.0)) throw std::runtime_error("butterworth_bandpass: degenerate design");
  sections[0].b0 /= g;
  sections[0].b1 /= g;
  sections[0].b2 /= g;
  return sections;
}

Biquad rbj_notch(double f0_hz, double q, double fs_hz) {
  if (!(f0_hz > 0.0 && f0_hz < fs_hz / 2.0)) {
    throw std::invalid_argument("rbj_notch: f0 must lie below Nyquist");
  }
  if (!(q > 0.0)) throw std::invalid_argument("rbj_notch: q must be > 0");
  const double pi = std::acos(-1.0);
  const double w0 = 2.0 * pi * f0_hz / fs_hz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return Biquad{1.0 / a0, -2.0 * std::cos(w0) / a0, 1.0 / a0, -2.0 * std::cos(w0) / a0,
                (1.0 - alpha) / a0};
}

FilterSpec design_filters(double fs_hz) {
  if (!(fs_hz > 200.0)) {
    throw std::invalid_argument("design_filters: fs must exceed 200 Hz for a 1-100 Hz band");
  }
  FilterSpec spec;
  spec.fs_hz = fs_hz;
  spec.sections = butterworth_bandpass(2, 1.0, 100.0, fs_hz);
  spec.sections.push_back(rbj_notch(50.0, 30.0, fs_hz));
  spec.description = "butterworth bandpass 1-100 Hz (order 4) + 50 Hz notch (Q=30)";
  if (!spec.stable()) throw std::runtime_error("design_filters: unstable cascade");
  return spec;
}

std::complex<double> filter_response(const FilterSpec& spec, double f_hz) {
  const double pi = std::acos(-1.0);
  const cplx z_inv = std::exp(cplx(0.0, -2.0 * pi * f_hz / spec.fs_hz));
  cplx h(1.0, 0.0);
  for (const auto& s : spec.sections) {
    const cplx num = s.b0 + s.b1 * z_inv + s.b2 * z_inv * z_inv;
    const cplx den = 1.0 + s.a1 * z_inv + s.a2 * z_inv * z_inv;
    h *= num / den;
  }
  return h;
}

double magnitude_db(const FilterSpec& spec, double f_hz) {
  double mag = std::abs(filter_response(spec, f_hz));
  return 20.0 * std::log10(std::max(mag, 1e-300));
}

FilterState::FilterState(FilterSpec spec, int channels)
    : spec_(std::move(spec)), channels_(channels) {
  if (channels_ < 1) throw std::invalid_argument("FilterState: need at least one channel");
  state_.assign(static_cast<size_t>(channels_) * spec_.sections.size(), {0.0, 0.0});
}

void FilterState::process(Eigen::Ref<Eigen::MatrixXd> block) {
  if (block.rows() != channels_) {
    throw std::invalid_argument("FilterState: block has " + std::to_string(block.rows()) +
                                " channels, state has " + std::to_string(channels_));
  }
  const size_t n_sections = spec_.sections.size();
  for (int c = 0; c < channels_; ++c) {
    for (size_t s = 0; s < n_sections; ++s) {
      const Biquad& q = spec_.sections[s];
      auto& st = state_[static_cast<size_t>(c) * n_sections + s];
      for (Eigen::Index i = 0; i < block.cols(); ++i) {
        const double x = block(c, i);
        const double y = q.b0 * x + st[0];
        st[0] = q.b1 * x - q.a1 * y + st[1];
        st[1] = q.b2 * x - q.a2 * y;
        block(c, i) = y;
      }
    }
  }
}

std::vector<double> FilterState::process_copy(const std::vector<double>& x) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(x.size()));
  for (size_t i = 0; i < x.size(); ++i) m(0, i) = x[i];
  process(m);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = m(0, i);
  return out;
}

void FilterState::reset() {
  std::fill(state_.begin(), state_.end(), std::array<double, 2>{0.0, 0.0});
}

}  // namespace vbmi::dsp
