#include "vbmi/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vbmi::io {

void put_u8(std::string& buf, std::uint8_t v) { buf.push_back(static_cast<char>(v)); }

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

void Cursor::need(std::size_t n) const {
  if (pos_ + n > buf_.size()) {
    throw std::out_of_range("Cursor: read of " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + " exceeds buffer of " +
                            std::to_string(buf_.size()));
  }
}

std::uint8_t Cursor::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint16_t Cursor::u16() {
  need(2);
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
  pos_ += 2;
  return v;
}

std::uint32_t Cursor::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t Cursor::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

double Cursor::f64() { return std::bit_cast<double>(u64()); }

void Cursor::bytes(void* dst, std::size_t n) {
  need(n);
  std::memcpy(dst, buf_.data() + pos_, n);
  pos_ += n;
}

void Cursor::skip(std::size_t n) {
  need(n);
  pos_ += n;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_file: cannot open " + path);
  std::string out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw std::runtime_error("read_file: read failed for " + path);
  return out;
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_file: cannot open " + path);
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw std::runtime_error("write_file: write failed for " + path);
}

}  // namespace vbmi::io
