#include "vbmi/matrixio.hpp"

#include <stdexcept>

#include "vbmi/binio.hpp"

namespace vbmi::io {

namespace {

void put_matrix_body(std::string& buf, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(buf, m(r, c));
  }
}

Eigen::MatrixXd read_matrix_body(Cursor& cur, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = cur.f64();
  }
  return m;
}

}  // namespace

void write_matrix(const std::string& path, const Eigen::MatrixXd& m, double fs_hz) {
  std::string buf;
  buf.reserve(24 + static_cast<std::size_t>(m.size()) * 8);
  put_u64(buf, static_cast<std::uint64_t>(m.rows()));
  put_u64(buf, static_cast<std::uint64_t>(m.cols()));
  put_f64(buf, fs_hz);
  put_matrix_body(buf, m);
  write_file(path, buf);
}

MatrixFile read_matrix(const std::string& path) {
  const std::string raw = read_file(path);
  Cursor cur(raw);
  const auto rows = cur.u64();
  const auto cols = cur.u64();
  MatrixFile out;
  out.fs_hz = cur.f64();
  if (rows == 0 || cols == 0) throw std::runtime_error("read_matrix: empty matrix in " + path);
  if (cur.remaining() != rows * cols * 8) {
    throw std::runtime_error("read_matrix: " + path + " body size mismatch");
  }
  out.data = read_matrix_body(cur, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  return out;
}

void write_epochs(const std::string& path, const std::vector<dsp::Epoch>& epochs, double fs_hz) {
  if (epochs.empty()) throw std::invalid_argument("write_epochs: no epochs");
  const auto channels = epochs.front().data.rows();
  const auto samples = epochs.front().data.cols();
  std::string buf;
  put_u32(buf, static_cast<std::uint32_t>(epochs.size()));
  put_u32(buf, static_cast<std::uint32_t>(channels));
  put_u32(buf, static_cast<std::uint32_t>(samples));
  put_f64(buf, fs_hz);
  for (const auto& e : epochs) {
    if (e.data.rows() != channels || e.data.cols() != samples) {
      throw std::invalid_argument("write_epochs: inconsistent epoch shapes");
    }
    put_u32(buf, static_cast<std::uint32_t>(e.target_label));
    put_u64(buf, e.onset_sample);
    put_matrix_body(buf, e.data);
  }
  write_file(path, buf);
}

EpochFile read_epochs(const std::string& path) {
  const std::string raw = read_file(path);
  Cursor cur(raw);
  const auto n = cur.u32();
  const auto channels = static_cast<Eigen::Index>(cur.u32());
  const auto samples = static_cast<Eigen::Index>(cur.u32());
  EpochFile out;
  out.fs_hz = cur.f64();
  out.epochs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    dsp::Epoch e;
    e.target_label = static_cast<std::int32_t>(cur.u32());
    e.onset_sample = cur.u64();
    e.data = read_matrix_body(cur, channels, samples);
    e.trial_ordinal = static_cast<int>(i);
    e.mean_removed = true;
    out.epochs.push_back(std::move(e));
  }
  if (!cur.done()) throw std::runtime_error("read_epochs: trailing bytes in " + path);
  return out;
}

}  // namespace vbmi::io
