#pragma once

#include <string>
#include <string_view>

#include "vbmi/decoder.hpp"

namespace vbmi::backend {

enum class Algo : std::uint8_t { trca = 1, tdca = 2 };

std::string_view algo_name(Algo a);
Algo algo_from_name(std::string_view name);  // throws std::invalid_argument

// Binary template container:
//   "VBMI" | format version u16 | algo u8 |
//   fs f64 | T u32 | K u32 | delays u32 | components u32 |
//   montage hash u32 | code hash u32 | class lags K*u32 | gamma f64 |
//   matrices {rows u32, cols u32, row-major f64...} | crc32 u32
// all integers and floats little-endian; the crc covers every preceding byte.
inline constexpr std::uint16_t kTemplateFormatVersion = 1;

std::string serialize_model(const decode::TrcaModel& model);
std::string serialize_model(const decode::TdcaModel& model);

// Algo id of a serialized blob after magic/version/crc validation.
Algo peek_algo(std::string_view bytes);

// Both throw std::runtime_error on bad magic, unsupported version, checksum
// mismatch, truncation, or an algo id that does not match the requested type;
// no partially-populated model escapes.
decode::TrcaModel deserialize_trca(std::string_view bytes);
decode::TdcaModel deserialize_tdca(std::string_view bytes);

}  // namespace vbmi::backend
