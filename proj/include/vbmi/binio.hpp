#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace vbmi::io {

// little-endian appenders used by the wire and file formats
void put_u8(std::string& buf, std::uint8_t v);
void put_u16(std::string& buf, std::uint16_t v);
void put_u32(std::string& buf, std::uint32_t v);
void put_u64(std::string& buf, std::uint64_t v);
void put_f64(std::string& buf, double v);

// bounds-checked little-endian reader; throws std::out_of_range on underrun
class Cursor {
 public:
  explicit Cursor(std::string_view buf) : buf_(buf) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void bytes(void* dst, std::size_t n);
  void skip(std::size_t n);

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;

  void need(std::size_t n) const;
};

// whole-file helpers
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace vbmi::io
