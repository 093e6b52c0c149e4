#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbmi/serialize.hpp"

namespace vbmi::backend {

// One stored template: the serialized model plus the identity and meta
// summary the service reports without opening the payload.
struct TemplateRecord {
  std::string user_id;
  Algo algo{Algo::trca};
  std::int64_t created_at_unix{0};
  double fs_hz{0.0};
  std::uint32_t epoch_samples{0};
  std::uint32_t montage_hash{0};
  std::uint32_t code_hash{0};
  std::string payload;
  std::uint32_t content_hash{0};  // crc32 of payload
};

struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// declared algo disagrees with the payload's algo id
struct AlgoMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Fetched {
  std::shared_ptr<const TemplateRecord> record;
  std::uint64_t version{0};
  bool from_cache{false};
};

// Append-only per-user template storage under one root directory: every
// version is a separate blob file written via temp-file + atomic rename, an
// index file names the live versions, and served records are cached in
// process. Blobs are immutable once written.
class TemplateStore {
 public:
  explicit TemplateStore(std::string root_dir);

  // Validates the payload checksum and envelope, then persists durably.
  // Returns the new version id: strictly increasing and gapless per user.
  // Throws std::invalid_argument (bad user id / checksum mismatch / empty
  // payload) or AlgoMismatchError.
  std::uint64_t put(TemplateRecord record);

  // nullopt version means latest. Cold reads verify checksums before the
  // record enters the cache; corrupted files throw and are never served.
  Fetched fetch(const std::string& user_id, std::optional<std::uint64_t> version = {});

  // live version ids for a user, ascending; empty when the user is unknown
  std::vector<std::uint64_t> versions(const std::string& user_id);

  const std::string& root() const { return root_; }

 private:
  struct UserState {
    std::mutex write_mutex;                      // serializes puts per user
    std::map<std::uint64_t, std::string> files;  // version -> blob filename
    std::map<std::uint64_t, std::shared_ptr<const TemplateRecord>> cache;
    bool loaded{false};
  };

  UserState& user_state(const std::string& user_id);
  void load_index_locked(const std::string& user_id, UserState& state);
  void write_index(const std::string& user_id, const UserState& state);

  std::string root_;
  std::shared_mutex mutex_;  // guards users_ and the per-user maps
  std::map<std::string, std::unique_ptr<UserState>> users_;
};

}  // namespace vbmi::backend
