#include "vbmi/store.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <span>
#include <sstream>

#include "vbmi/binio.hpp"
#include "vbmi/hashes.hpp"

namespace fs = std::filesystem;

namespace vbmi::backend {

namespace {

constexpr std::string_view kRecordMagic = "VTPR";
constexpr std::uint16_t kRecordFormat = 1;

bool valid_user_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (const char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string encode_record(const TemplateRecord& r) {
  std::string buf;
  buf.append(kRecordMagic);
  io::put_u16(buf, kRecordFormat);
  io::put_u16(buf, static_cast<std::uint16_t>(r.user_id.size()));
  buf.append(r.user_id);
  io::put_u8(buf, static_cast<std::uint8_t>(r.algo));
  io::put_u64(buf, static_cast<std::uint64_t>(r.created_at_unix));
  io::put_f64(buf, r.fs_hz);
  io::put_u32(buf, r.epoch_samples);
  io::put_u32(buf, r.montage_hash);
  io::put_u32(buf, r.code_hash);
  io::put_u32(buf, r.content_hash);
  io::put_u64(buf, r.payload.size());
  buf.append(r.payload);
  io::put_u32(buf, crc32(as_bytes(buf)));
  return buf;
}

TemplateRecord decode_record(std::string_view bytes, const std::string& path) {
  const auto fail = [&path](const std::string& why) -> std::runtime_error {
    return std::runtime_error("template store: " + path + ": " + why);
  };
  if (bytes.size() < 4 + 2 + 2 + 1 + 8 + 8 + 4 * 4 + 8 + 4) throw fail("truncated record");
  const std::uint32_t stored =
      static_cast<std::uint8_t>(bytes[bytes.size() - 4]) |
      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 3])) << 8) |
      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 2])) << 16) |
      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[bytes.size() - 1])) << 24);
  if (stored != crc32(as_bytes(bytes.substr(0, bytes.size() - 4)))) {
    throw fail("record checksum mismatch");
  }
  io::Cursor cur(bytes);
  cur.skip(4);
  if (bytes.substr(0, 4) != kRecordMagic) throw fail("bad record magic");
  if (cur.u16() != kRecordFormat) throw fail("unsupported record format");
  TemplateRecord r;
  const std::uint16_t name_len = cur.u16();
  r.user_id.resize(name_len);
  cur.bytes(r.user_id.data(), name_len);
  r.algo = static_cast<Algo>(cur.u8());
  r.created_at_unix = static_cast<std::int64_t>(cur.u64());
  r.fs_hz = cur.f64();
  r.epoch_samples = cur.u32();
  r.montage_hash = cur.u32();
  r.code_hash = cur.u32();
  r.content_hash = cur.u32();
  const std::uint64_t payload_len = cur.u64();
  if (payload_len != cur.remaining() - 4) throw fail("payload length disagrees with file size");
  r.payload.resize(payload_len);
  cur.bytes(r.payload.data(), payload_len);
  if (crc32(as_bytes(r.payload)) != r.content_hash) {
    throw fail("payload fails its content hash");
  }
  return r;
}

void atomic_write(const fs::path& target, std::string_view contents) {
  const fs::path tmp = target.string() + ".tmp";
  io::write_file(tmp.string(), contents);
  fs::rename(tmp, target);
}

}  // namespace

TemplateStore::TemplateStore(std::string root_dir) : root_(std::move(root_dir)) {
  if (root_.empty()) throw std::invalid_argument("TemplateStore: empty root directory");
  fs::create_directories(root_);
}

TemplateStore::UserState& TemplateStore::user_state(const std::string& user_id) {
  {
    std::shared_lock lock(mutex_);
    const auto it = users_.find(user_id);
    if (it != users_.end() && it->second->loaded) return *it->second;
  }
  std::unique_lock lock(mutex_);
  auto& slot = users_[user_id];
  if (!slot) slot = std::make_unique<UserState>();
  if (!slot->loaded) {
    load_index_locked(user_id, *slot);
    slot->loaded = true;
  }
  return *slot;
}

void TemplateStore::load_index_locked(const std::string& user_id, UserState& state) {
  const fs::path index = fs::path(root_) / user_id / "index.tsv";
  if (!fs::exists(index)) return;
  std::istringstream in(io::read_file(index.string()));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("template store: malformed index line for user " + user_id);
    }
    state.files[std::stoull(line.substr(0, tab))] = line.substr(tab + 1);
  }
}

void TemplateStore::write_index(const std::string& user_id, const UserState& state) {
  std::string text;
  for (const auto& [version, file] : state.files) {
    text += std::to_string(version);
    text += '\t';
    text += file;
    text += '\n';
  }
  atomic_write(fs::path(root_) / user_id / "index.tsv", text);
}

std::uint64_t TemplateStore::put(TemplateRecord record) {
  if (!valid_user_id(record.user_id)) {
    throw std::invalid_argument("template store: invalid user id '" + record.user_id + "'");
  }
  if (record.payload.empty()) {
    throw std::invalid_argument("template store: empty payload");
  }
  if (crc32(as_bytes(record.payload)) != record.content_hash) {
    throw std::invalid_argument("template store: payload does not match its declared checksum");
  }
  // the envelope parse proves the meta block exists and is well-formed
  const Algo payload_algo = peek_algo(record.payload);
  if (payload_algo != record.algo) {
    throw AlgoMismatchError("template store: declared algo " +
                            std::string(algo_name(record.algo)) + " but payload carries " +
                            std::string(algo_name(payload_algo)));
  }
  {
    // meta summary mirrors the payload header
    io::Cursor cur(record.payload);
    cur.skip(4 + 2 + 1);
    record.fs_hz = cur.f64();
    record.epoch_samples = cur.u32();
  }

  UserState& state = user_state(record.user_id);
  std::lock_guard write_guard(state.write_mutex);

  std::uint64_t version = 1;
  {
    std::shared_lock lock(mutex_);
    if (!state.files.empty()) version = state.files.rbegin()->first + 1;
  }
  char name[64];
  std::snprintf(name, sizeof(name), "v%06" PRIu64 "-%08x.tpl", version, record.content_hash);

  const fs::path dir = fs::path(root_) / record.user_id;
  fs::create_directories(dir);
  auto stored = std::make_shared<const TemplateRecord>(std::move(record));
  // blob first, index second: a crash in between leaves an orphan blob and an
  // intact previous index, never a dangling pointer
  atomic_write(dir / name, encode_record(*stored));

  std::unique_lock lock(mutex_);
  state.files[version] = name;
  write_index(stored->user_id, state);
  state.cache[version] = std::move(stored);
  return version;
}

Fetched TemplateStore::fetch(const std::string& user_id, std::optional<std::uint64_t> version) {
  if (!valid_user_id(user_id)) {
    throw std::invalid_argument("template store: invalid user id '" + user_id + "'");
  }
  UserState& state = user_state(user_id);

  std::uint64_t wanted = 0;
  std::string file;
  {
    std::shared_lock lock(mutex_);
    if (state.files.empty()) {
      throw NotFoundError("template store: no templates for user " + user_id);
    }
    wanted = version.value_or(state.files.rbegin()->first);
    const auto it = state.files.find(wanted);
    if (it == state.files.end()) {
      throw NotFoundError("template store: user " + user_id + " has no version " +
                          std::to_string(wanted));
    }
    const auto hit = state.cache.find(wanted);
    if (hit != state.cache.end()) {
      return {hit->second, wanted, true};
    }
    file = it->second;
  }

  // cold read outside any lock; blobs are immutable
  const fs::path path = fs::path(root_) / user_id / file;
  auto record = std::make_shared<const TemplateRecord>(
      decode_record(io::read_file(path.string()), path.string()));

  std::unique_lock lock(mutex_);
  state.cache[wanted] = record;
  return {std::move(record), wanted, false};
}

std::vector<std::uint64_t> TemplateStore::versions(const std::string& user_id) {
  if (!valid_user_id(user_id)) return {};
  UserState& state = user_state(user_id);
  std::shared_lock lock(mutex_);
  std::vector<std::uint64_t> out;
  out.reserve(state.files.size());
  for (const auto& [v, _] : state.files) out.push_back(v);
  return out;
}

}  // namespace vbmi::backend
