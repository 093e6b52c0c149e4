#include "vbmi/serialize.hpp"

#include <span>
#include <stdexcept>

#include "vbmi/binio.hpp"
#include "vbmi/hashes.hpp"

namespace vbmi::backend {

namespace {

constexpr std::string_view kMagic = "VBMI";

void put_matrix(std::string& buf, const Eigen::MatrixXd& m) {
  io::put_u32(buf, static_cast<std::uint32_t>(m.rows()));
  io::put_u32(buf, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) io::put_f64(buf, m(r, c));
  }
}

Eigen::MatrixXd get_matrix(io::Cursor& cur) {
  const std::uint32_t rows = cur.u32();
  const std::uint32_t cols = cur.u32();
  if (rows == 0 || cols == 0 || static_cast<std::uint64_t>(rows) * cols > (1u << 28)) {
    throw std::runtime_error("template blob: implausible matrix shape " + std::to_string(rows) +
                             "x" + std::to_string(cols));
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = cur.f64();
  }
  return m;
}

void put_header(std::string& buf, Algo algo, const decode::ModelMeta& meta,
                std::uint32_t delays, std::uint32_t components, double gamma) {
  buf.append(kMagic);
  io::put_u16(buf, kTemplateFormatVersion);
  io::put_u8(buf, static_cast<std::uint8_t>(algo));
  io::put_f64(buf, meta.fs_hz);
  io::put_u32(buf, meta.epoch_samples);
  io::put_u32(buf, static_cast<std::uint32_t>(meta.class_lags.size()));
  io::put_u32(buf, delays);
  io::put_u32(buf, components);
  io::put_u32(buf, meta.montage_hash);
  io::put_u32(buf, meta.code_hash);
  for (const auto lag : meta.class_lags) io::put_u32(buf, lag);
  io::put_f64(buf, gamma);
}

void seal(std::string& buf) {
  io::put_u32(buf, crc32({reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()}));
}

struct Header {
  Algo algo;
  decode::ModelMeta meta;
  std::uint32_t delays;
  std::uint32_t components;
  double gamma;
};

// validates envelope (magic, version, crc) and returns a cursor positioned at
// the first matrix
Header open_blob(std::string_view bytes, io::Cursor& cur) {
  constexpr std::size_t kMinSize = 4 + 2 + 1 + 8 + 5 * 4 + 4 + 8 + 4;
  if (bytes.size() < kMinSize) {
    throw std::runtime_error("template blob: truncated (" + std::to_string(bytes.size()) +
                             " bytes)");
  }
  if (bytes.substr(0, 4) != kMagic) {
    throw std::runtime_error("template blob: bad magic");
  }
  const std::uint32_t stored_crc =
      static_cast<std::uint8_t>(bytes[bytes.size() - 4]) |
      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 3])) << 8) |
      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 2])) << 16) |
      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 1])) << 24);
  const std::uint32_t actual = crc32(
      {reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size() - 4});
  if (stored_crc != actual) {
    throw std::runtime_error("template blob: checksum mismatch");
  }
  cur.skip(4);
  const std::uint16_t version = cur.u16();
  if (version != kTemplateFormatVersion) {
    throw std::runtime_error("template blob: unsupported format version " +
                             std::to_string(version));
  }
  Header h;
  const std::uint8_t algo = cur.u8();
  if (algo != static_cast<std::uint8_t>(Algo::trca) &&
      algo != static_cast<std::uint8_t>(Algo::tdca)) {
    throw std::runtime_error("template blob: unknown algorithm id " + std::to_string(algo));
  }
  h.algo = static_cast<Algo>(algo);
  h.meta.fs_hz = cur.f64();
  h.meta.epoch_samples = cur.u32();
  const std::uint32_t n_classes = cur.u32();
  h.delays = cur.u32();
  h.components = cur.u32();
  h.meta.montage_hash = cur.u32();
  h.meta.code_hash = cur.u32();
  if (n_classes == 0 || n_classes > 4096) {
    throw std::runtime_error("template blob: implausible class count " +
                             std::to_string(n_classes));
  }
  h.meta.class_lags.resize(n_classes);
  for (auto& lag : h.meta.class_lags) lag = cur.u32();
  h.gamma = cur.f64();
  return h;
}

}  // namespace

std::string_view algo_name(Algo a) {
  return a == Algo::trca ? "trca" : "tdca";
}

Algo algo_from_name(std::string_view name) {
  if (name == "trca") return Algo::trca;
  if (name == "tdca") return Algo::tdca;
  throw std::invalid_argument("algo_from_name: unknown algorithm '" + std::string(name) + "'");
}

std::string serialize_model(const decode::TrcaModel& model) {
  std::string buf;
  put_header(buf, Algo::trca, model.meta, 0, 0, 0.0);
  put_matrix(buf, model.filters);
  for (const auto& t : model.templates) put_matrix(buf, t);
  seal(buf);
  return buf;
}

std::string serialize_model(const decode::TdcaModel& model) {
  std::string buf;
  put_header(buf, Algo::tdca, model.meta, static_cast<std::uint32_t>(model.n_delays),
             static_cast<std::uint32_t>(model.n_components), model.gamma);
  put_matrix(buf, model.filters);
  for (const auto& p : model.projections) put_matrix(buf, p);
  for (const auto& t : model.templates) put_matrix(buf, t);
  seal(buf);
  return buf;
}

Algo peek_algo(std::string_view bytes) {
  io::Cursor cur(bytes);
  return open_blob(bytes, cur).algo;
}

decode::TrcaModel deserialize_trca(std::string_view bytes) {
  io::Cursor cur(bytes);
  const Header h = open_blob(bytes, cur);
  if (h.algo != Algo::trca) {
    throw std::runtime_error("template blob: expected a TRCA model, found " +
                             std::string(algo_name(h.algo)));
  }
  try {
    decode::TrcaModel model;
    model.meta = h.meta;
    model.filters = get_matrix(cur);
    const std::size_t n_classes = h.meta.class_lags.size();
    model.templates.reserve(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k) model.templates.push_back(get_matrix(cur));
    if (cur.remaining() != 4) {
      throw std::runtime_error("template blob: trailing bytes after the last matrix");
    }
    return model;
  } catch (const std::out_of_range&) {
    throw std::runtime_error("template blob: truncated matrix data");
  }
}

decode::TdcaModel deserialize_tdca(std::string_view bytes) {
  io::Cursor cur(bytes);
  const Header h = open_blob(bytes, cur);
  if (h.algo != Algo::tdca) {
    throw std::runtime_error("template blob: expected a TDCA model, found " +
                             std::string(algo_name(h.algo)));
  }
  try {
    decode::TdcaModel model;
    model.meta = h.meta;
    model.n_delays = static_cast<int>(h.delays);
    model.n_components = static_cast<int>(h.components);
    model.gamma = h.gamma;
    model.filters = get_matrix(cur);
    const std::size_t n_classes = h.meta.class_lags.size();
    model.projections.reserve(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k) model.projections.push_back(get_matrix(cur));
    model.templates.reserve(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k) model.templates.push_back(get_matrix(cur));
    if (cur.remaining() != 4) {
      throw std::runtime_error("template blob: trailing bytes after the last matrix");
    }
    return model;
  } catch (const std::out_of_range&) {
    throw std::runtime_error("template blob: truncated matrix data");
  }
}

}  // namespace vbmi::backend
