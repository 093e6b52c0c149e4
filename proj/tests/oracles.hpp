#pragma once

// Independent reference implementations the production code is tested
// against. Deliberately written in the most literal way possible (bitwise
// CRCs, O(n^2) transforms) so they share no code or structure with src/.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace oracles {

// bit-at-a-time CRC-16/CCITT-FALSE
inline std::uint16_t crc16_reference(std::span<const std::uint8_t> data) {
  std::uint32_t crc = 0xFFFF;
  for (std::uint8_t b : data) {
    crc ^= static_cast<std::uint32_t>(b) << 8;
    for (int i = 0; i < 8; ++i) {
      crc = (crc & 0x8000) ? ((crc << 1) ^ 0x1021) : (crc << 1);
      crc &= 0xFFFF;
    }
  }
  return static_cast<std::uint16_t>(crc);
}

// bit-at-a-time reflected CRC-32 (zlib polynomial)
inline std::uint32_t crc32_reference(std::span<const std::uint8_t> data) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : data) {
    crc ^= b;
    for (int i = 0; i < 8; ++i) {
      crc = (crc & 1) ? ((crc >> 1) ^ 0xEDB88320u) : (crc >> 1);
    }
  }
  return ~crc;
}

// O(L^2) periodic autocorrelation of a binary code under the +/-1 mapping
inline int autocorr_reference(const std::vector<std::uint8_t>& bits, std::size_t lag) {
  const std::size_t L = bits.size();
  int acc = 0;
  for (std::size_t i = 0; i < L; ++i) {
    const int a = bits[i] ? 1 : -1;
    const int b = bits[(i + lag) % L] ? 1 : -1;
    acc += a * b;
  }
  return acc;
}

// O(n^2) DFT for validating the radix-2 FFT
inline std::vector<std::complex<double>> dft_reference(
    const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  const double pi = 3.14159265358979323846;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * pi * static_cast<double>(k * t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// direct-convolution filtering of one channel through a biquad cascade,
// expanding each section to its impulse response first
inline std::vector<double> iir_direct_reference(const std::vector<std::vector<double>>& b,
                                                const std::vector<std::vector<double>>& a,
                                                const std::vector<double>& x) {
  std::vector<double> y = x;
  for (std::size_t s = 0; s < b.size(); ++s) {
    std::vector<double> out(y.size(), 0.0);
    for (std::size_t n = 0; n < y.size(); ++n) {
      double acc = 0.0;
      for (std::size_t k = 0; k < b[s].size(); ++k) {
        if (n >= k) acc += b[s][k] * y[n - k];
      }
      for (std::size_t k = 1; k < a[s].size(); ++k) {
        if (n >= k) acc -= a[s][k] * out[n - k];
      }
      out[n] = acc;
    }
    y = out;
  }
  return y;
}

// ---- generalized eigenproblem oracle for 2x2 and 3x3 symmetric-definite
// pairs, via characteristic-polynomial roots and null-space vectors; shares
// no machinery with the library's Cholesky-whitened path ----

inline double det_small(const Eigen::MatrixXd& m) {
  if (m.rows() == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

// descending real roots of det(S - lambda*Q) for n in {2,3}
inline std::vector<double> geneig_values_reference(const Eigen::MatrixXd& s,
                                                   const Eigen::MatrixXd& q) {
  const int n = static_cast<int>(s.rows());
  // fit the degree-n characteristic polynomial through n+1 integer nodes
  std::vector<double> nodes(static_cast<std::size_t>(n) + 1);
  std::vector<double> vals(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i] = static_cast<double>(i);
    vals[i] = det_small(s - nodes[i] * q);
  }
  // Vandermonde solve by Gaussian elimination
  const std::size_t m = nodes.size();
  std::vector<std::vector<double>> aug(m, std::vector<double>(m + 1));
  for (std::size_t r = 0; r < m; ++r) {
    double p = 1.0;
    for (std::size_t c = 0; c < m; ++c) {
      aug[r][c] = p;
      p *= nodes[r];
    }
    aug[r][m] = vals[r];
  }
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    }
    std::swap(aug[col], aug[piv]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col || aug[col][col] == 0.0) continue;
      const double f = aug[r][col] / aug[col][col];
      for (std::size_t c = col; c <= m; ++c) aug[r][c] -= f * aug[col][c];
    }
  }
  std::vector<double> coef(m);  // coef[i] multiplies lambda^i
  for (std::size_t i = 0; i < m; ++i) coef[i] = aug[i][m] / aug[i][i];

  std::vector<double> roots;
  if (n == 2) {
    const double a = coef[2], b = coef[1], c = coef[0];
    const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
    roots = {(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)};
  } else {
    // normalized cubic x^3 + a2 x^2 + a1 x + a0, all roots real for a
    // symmetric-definite pencil; trigonometric form
    const double a2 = coef[2] / coef[3];
    const double a1 = coef[1] / coef[3];
    const double a0 = coef[0] / coef[3];
    const double p = a1 - a2 * a2 / 3.0;
    const double qq = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    const double r = std::sqrt(std::max(1e-300, -p / 3.0));
    double arg = qq / (2.0 * r * r * r);
    arg = std::clamp(arg, -1.0, 1.0);
    const double phi = std::acos(-arg);
    for (int k = 0; k < 3; ++k) {
      roots.push_back(2.0 * r * std::cos((phi + 2.0 * std::numbers::pi * k) / 3.0) - a2 / 3.0);
    }
  }
  // Newton polish on the fitted polynomial
  for (double& root : roots) {
    for (int it = 0; it < 40; ++it) {
      double f = 0.0, df = 0.0;
      for (std::size_t i = m; i-- > 0;) {
        if (i > 0) df = df * root + static_cast<double>(i) * coef[i];
        f = f * root + coef[i];
      }
      if (df == 0.0) break;
      const double step = f / df;
      root -= step;
      if (std::abs(step) < 1e-14 * (1.0 + std::abs(root))) break;
    }
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  return roots;
}

// unit eigenvector for one eigenvalue, as the null space of S - lambda*Q,
// found from row cross products (3x3) or row orthogonals (2x2)
inline Eigen::VectorXd geneig_vector_reference(const Eigen::MatrixXd& s,
                                               const Eigen::MatrixXd& q, double lambda) {
  const Eigen::MatrixXd m = s - lambda * q;
  Eigen::VectorXd v;
  if (m.rows() == 2) {
    const Eigen::Vector2d r0 = m.row(0), r1 = m.row(1);
    const Eigen::Vector2d cand0(-r0(1), r0(0)), cand1(-r1(1), r1(0));
    v = r0.norm() >= r1.norm() ? cand0 : cand1;
  } else {
    const Eigen::Vector3d r0 = m.row(0), r1 = m.row(1), r2 = m.row(2);
    const Eigen::Vector3d c01 = r0.cross(r1), c02 = r0.cross(r2), c12 = r1.cross(r2);
    v = c01;
    if (c02.norm() > v.norm()) v = c02;
    if (c12.norm() > v.norm()) v = c12;
  }
  return v / v.norm();
}

}  // namespace oracles
