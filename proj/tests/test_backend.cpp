#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vbmi/codebook.hpp"
#include "vbmi/decoder.hpp"
#include "vbmi/hashes.hpp"
#include "vbmi/montage.hpp"
#include "vbmi/serialize.hpp"
#include "vbmi/service.hpp"
#include "vbmi/store.hpp"
#include "vbmi/synth.hpp"

// keep httplib last: its platform includes clash with Eigen's internals
#include "httplib.h"

using namespace vbmi;
namespace fs = std::filesystem;

namespace {

constexpr double kFs = 250.0;

struct TrainedPair {
  decode::TrcaModel trca;
  decode::TdcaModel tdca;
  Eigen::MatrixXd probe;
};

// small but real models shared by the serialization and service tests
const TrainedPair& trained_models() {
  static const TrainedPair pair = [] {
    const auto code = code::base_code();
    const auto lags = code::target_codes(code, 4).target_lags;
    auto cfg = synth::default_subject(111);
    cfg.snr_db = 5.0;
    synth::Subject subject(cfg, code, kFs);
    std::vector<dsp::Epoch> epochs;
    for (int rep = 0; rep < 3; ++rep) {
      for (std::size_t k = 0; k < lags.size(); ++k) {
        dsp::Epoch e;
        e.data = subject.generate_trial(lags[k]);
        const Eigen::VectorXd means = e.data.rowwise().mean();
        e.data.colwise() -= means;
        e.target_label = static_cast<int>(k);
        epochs.push_back(std::move(e));
      }
    }
    decode::ModelMeta meta;
    meta.fs_hz = kFs;
    meta.montage_hash = montage_hash();
    meta.code_hash = code.hash();
    meta.class_lags.assign(lags.begin(), lags.end());
    TrainedPair out;
    out.trca = decode::trca_train(epochs, meta);
    out.tdca = decode::tdca_train(epochs, decode::code_references(code, lags, kFs), meta);
    out.probe = epochs.front().data;
    return out;
  }();
  return pair;
}

std::uint32_t payload_hash(const std::string& payload) {
  return crc32({reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()});
}

// rewrite the trailing crc after deliberately editing blob bytes
void reseal(std::string& blob) {
  const std::uint32_t crc = oracles::crc32_reference(
      {reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size() - 4});
  for (int i = 0; i < 4; ++i) {
    blob[blob.size() - 4 + static_cast<std::size_t>(i)] =
        static_cast<char>((crc >> (8 * i)) & 0xFF);
  }
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / (tag + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

backend::TemplateRecord make_record(const std::string& user, backend::Algo algo,
                                    std::string payload) {
  backend::TemplateRecord r;
  r.user_id = user;
  r.algo = algo;
  r.created_at_unix = 1700000000;
  r.content_hash = payload_hash(payload);
  r.payload = std::move(payload);
  return r;
}

}  // namespace

TEST_SUITE("backend") {

TEST_CASE("payload checksums agree with the reference crc32") {
  const std::vector<std::uint8_t> bytes = {0x01, 0x02, 0x03, 0x04};
  CHECK(crc32(bytes) == 0xB63CFBCD);
  CHECK(oracles::crc32_reference(bytes) == 0xB63CFBCD);
  const std::string check = "123456789";
  const auto span =
      std::span<const std::uint8_t>{reinterpret_cast<const std::uint8_t*>(check.data()),
                                    check.size()};
  CHECK(crc32(span) == 0xCBF43926);
  CHECK(oracles::crc32_reference(span) == 0xCBF43926);
}

TEST_CASE("serialized models reproduce their scores exactly") {
  const auto& models = trained_models();

  const std::string trca_blob = backend::serialize_model(models.trca);
  const auto trca_back = backend::deserialize_trca(trca_blob);
  const auto s0 = decode::trca_score(models.trca, models.probe);
  const auto s1 = decode::trca_score(trca_back, models.probe);
  CHECK((s0.scores.array() == s1.scores.array()).all());
  CHECK(s0.decision == s1.decision);

  const std::string tdca_blob = backend::serialize_model(models.tdca);
  const auto tdca_back = backend::deserialize_tdca(tdca_blob);
  const auto t0 = decode::tdca_score(models.tdca, models.probe);
  const auto t1 = decode::tdca_score(tdca_back, models.probe);
  CHECK((t0.scores.array() == t1.scores.array()).all());
  CHECK(t0.decision == t1.decision);

  // meta block survives the trip
  CHECK(trca_back.meta.fs_hz == models.trca.meta.fs_hz);
  CHECK(trca_back.meta.epoch_samples == models.trca.meta.epoch_samples);
  CHECK(trca_back.meta.montage_hash == models.trca.meta.montage_hash);
  CHECK(trca_back.meta.code_hash == models.trca.meta.code_hash);
  CHECK(trca_back.meta.class_lags == models.trca.meta.class_lags);
  CHECK(tdca_back.n_delays == models.tdca.n_delays);
  CHECK(tdca_back.n_components == models.tdca.n_components);
  CHECK(tdca_back.gamma == models.tdca.gamma);
  CHECK(tdca_back.projections.size() == models.tdca.projections.size());

  CHECK(backend::peek_algo(trca_blob) == backend::Algo::trca);
  CHECK(backend::peek_algo(tdca_blob) == backend::Algo::tdca);
}

TEST_CASE("malformed template blobs are rejected whole") {
  const std::string blob = backend::serialize_model(trained_models().trca);

  SUBCASE("bad magic") {
    std::string bad = blob;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(backend::deserialize_trca(bad), doctest::Contains("magic"),
                         std::runtime_error);
  }
  SUBCASE("future format version") {
    std::string bad = blob;
    bad[4] = static_cast<char>(backend::kTemplateFormatVersion + 1);
    reseal(bad);
    CHECK_THROWS_WITH_AS(backend::deserialize_trca(bad), doctest::Contains("version"),
                         std::runtime_error);
  }
  SUBCASE("unknown algorithm id") {
    std::string bad = blob;
    bad[6] = 9;
    reseal(bad);
    CHECK_THROWS_WITH_AS(backend::deserialize_trca(bad), doctest::Contains("algorithm"),
                         std::runtime_error);
  }
  SUBCASE("flipped payload byte") {
    std::string bad = blob;
    bad[blob.size() / 2] = static_cast<char>(bad[blob.size() / 2] ^ 0x40);
    CHECK_THROWS_WITH_AS(backend::deserialize_trca(bad), doctest::Contains("checksum"),
                         std::runtime_error);
  }
  SUBCASE("truncation at every kind of boundary") {
    for (const std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{10},
                                   blob.size() / 2, blob.size() - 5, blob.size() - 1}) {
      CHECK_THROWS_AS(backend::deserialize_trca(blob.substr(0, keep)), std::runtime_error);
    }
  }
  SUBCASE("algo type confusion") {
    CHECK_THROWS_WITH_AS(backend::deserialize_tdca(blob), doctest::Contains("TDCA"),
                         std::runtime_error);
    const std::string tdca_blob = backend::serialize_model(trained_models().tdca);
    CHECK_THROWS_WITH_AS(backend::deserialize_trca(tdca_blob), doctest::Contains("TRCA"),
                         std::runtime_error);
  }
}

TEST_CASE("store round-trips records with gapless increasing versions") {
  TempDir dir("vbmi_store_");
  backend::TemplateStore store(dir.path.string());
  const std::string blob = backend::serialize_model(trained_models().trca);

  const auto v1 = store.put(make_record("alice", backend::Algo::trca, blob));
  const auto v2 = store.put(make_record("alice", backend::Algo::trca, blob));
  CHECK(v1 == 1);
  CHECK(v2 == 2);
  CHECK(store.versions("alice") == std::vector<std::uint64_t>{1, 2});

  const auto latest = store.fetch("alice");
  CHECK(latest.version == 2);
  CHECK(latest.record->payload == blob);
  CHECK(latest.record->content_hash == payload_hash(blob));
  CHECK(latest.record->fs_hz == kFs);
  CHECK(latest.record->epoch_samples == 280);

  const auto first = store.fetch("alice", 1);
  CHECK(first.version == 1);
  CHECK(first.record->payload == blob);

  // independent user counts from 1
  CHECK(store.put(make_record("bob", backend::Algo::trca, blob)) == 1);

  // no stray temp files after the writes
  for (const auto& entry : fs::recursive_directory_iterator(dir.path)) {
    CHECK(entry.path().extension() != ".tmp");
  }
}

TEST_CASE("store rejects bad puts before anything is written") {
  TempDir dir("vbmi_store_rej_");
  backend::TemplateStore store(dir.path.string());
  const std::string blob = backend::serialize_model(trained_models().trca);

  auto bad_hash = make_record("alice", backend::Algo::trca, blob);
  bad_hash.content_hash ^= 1;
  CHECK_THROWS_AS(store.put(std::move(bad_hash)), std::invalid_argument);

  CHECK_THROWS_AS(store.put(make_record("alice", backend::Algo::tdca, blob)),
                  backend::AlgoMismatchError);

  CHECK_THROWS_AS(store.put(make_record("", backend::Algo::trca, blob)), std::invalid_argument);
  CHECK_THROWS_AS(store.put(make_record("../etc", backend::Algo::trca, blob)),
                  std::invalid_argument);
  CHECK_THROWS_AS(store.put(make_record("a b", backend::Algo::trca, blob)),
                  std::invalid_argument);
  auto empty = make_record("alice", backend::Algo::trca, "");
  CHECK_THROWS_AS(store.put(std::move(empty)), std::invalid_argument);

  auto scrambled = make_record("alice", backend::Algo::trca, blob);
  scrambled.payload[10] = static_cast<char>(scrambled.payload[10] ^ 0x08);
  scrambled.content_hash = payload_hash(scrambled.payload);  // hash valid, envelope broken
  CHECK_THROWS_AS(store.put(std::move(scrambled)), std::runtime_error);

  CHECK_THROWS_AS(store.fetch("alice"), backend::NotFoundError);
  CHECK(store.versions("alice").empty());
}

TEST_CASE("store survives restarts and reports cache state honestly") {
  TempDir dir("vbmi_store_cache_");
  const std::string blob = backend::serialize_model(trained_models().trca);
  {
    backend::TemplateStore writer(dir.path.string());
    CHECK(writer.put(make_record("carol", backend::Algo::trca, blob)) == 1);
    CHECK(writer.put(make_record("carol", backend::Algo::trca, blob)) == 2);
    // the writing store serves its own puts from cache
    CHECK(writer.fetch("carol").from_cache);
  }

  backend::TemplateStore reader(dir.path.string());
  const auto cold = reader.fetch("carol");
  CHECK_FALSE(cold.from_cache);
  CHECK(cold.version == 2);
  const auto warm = reader.fetch("carol");
  CHECK(warm.from_cache);
  CHECK(warm.record->payload == cold.record->payload);
  CHECK(warm.record->payload == blob);

  // version numbering continues after a restart
  CHECK(reader.put(make_record("carol", backend::Algo::trca, blob)) == 3);

  CHECK_THROWS_AS(reader.fetch("carol", 9), backend::NotFoundError);
  CHECK_THROWS_AS(reader.fetch("mallory"), backend::NotFoundError);
}

TEST_CASE("corrupted blobs on disk are reported, never served") {
  TempDir dir("vbmi_store_corrupt_");
  const std::string blob = backend::serialize_model(trained_models().trca);
  {
    backend::TemplateStore writer(dir.path.string());
    writer.put(make_record("dave", backend::Algo::trca, blob));
  }
  // flip one byte in the stored blob
  fs::path victim;
  for (const auto& entry : fs::directory_iterator(dir.path / "dave")) {
    if (entry.path().extension() == ".tpl") victim = entry.path();
  }
  REQUIRE_FALSE(victim.empty());
  {
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    char c;
    f.seekg(40);
    f.get(c);
    f.seekp(40);
    f.put(static_cast<char>(c ^ 0x01));
  }
  backend::TemplateStore reader(dir.path.string());
  CHECK_THROWS_WITH_AS(reader.fetch("dave"), doctest::Contains("checksum"), std::runtime_error);
}

TEST_CASE("auth table scopes tokens to users") {
  Config cfg;
  cfg.set("tok-alice", "alice");
  cfg.set("tok-team", "alice, bob");
  cfg.set("tok-admin", "*");
  const auto auth = backend::AuthTable::from_config(cfg);
  CHECK(auth.allows("tok-alice", "alice"));
  CHECK_FALSE(auth.allows("tok-alice", "bob"));
  CHECK(auth.allows("tok-team", "bob"));
  CHECK(auth.allows("tok-admin", "weird-user"));
  CHECK_FALSE(auth.allows("unknown", "alice"));
  CHECK_FALSE(auth.allows("", "alice"));
}

TEST_CASE("template service speaks the wire contract") {
  TempDir dir("vbmi_service_");
  backend::TemplateStore store(dir.path.string());
  backend::AuthTable auth;
  auth.add("tok-alice", {"alice"});
  auth.add("tok-admin", {"*"});
  backend::TemplateService service(store, auth);

  httplib::Server server;
  service.attach(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&server] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const std::string blob = backend::serialize_model(trained_models().trca);
  const std::string hash_hex = [&blob] {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", payload_hash(blob));
    return std::string(buf);
  }();
  const httplib::Headers alice_put = {{"Authorization", "Bearer tok-alice"},
                                      {"X-Algo", "trca"},
                                      {"X-Content-Hash", hash_hex}};

  SUBCASE("authentication gates every route") {
    auto res = client.Put("/v1/users/alice/templates", {}, blob, "application/octet-stream");
    REQUIRE(res);
    CHECK(res->status == 401);
    res = client.Put("/v1/users/alice/templates",
                     {{"Authorization", "Bearer wrong"},
                      {"X-Algo", "trca"},
                      {"X-Content-Hash", hash_hex}},
                     blob, "application/octet-stream");
    CHECK(res->status == 401);
    // a valid token cannot act for another user
    res = client.Put("/v1/users/bob/templates", alice_put, blob, "application/octet-stream");
    CHECK(res->status == 401);
    auto get = client.Get("/v1/users/alice/templates/latest");
    CHECK(get->status == 401);
  }

  SUBCASE("put then get round-trips bytes and versions") {
    auto res = client.Put("/v1/users/alice/templates", alice_put, blob,
                          "application/octet-stream");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "{\"version\":1}");
    res = client.Put("/v1/users/alice/templates", alice_put, blob, "application/octet-stream");
    CHECK(res->body == "{\"version\":2}");

    const httplib::Headers bearer = {{"Authorization", "Bearer tok-alice"}};
    auto got = client.Get("/v1/users/alice/templates/latest", bearer);
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(got->body == blob);
    CHECK(got->get_header_value("X-Version") == "2");
    CHECK(got->get_header_value("X-Algo") == "trca");
    CHECK(got->get_header_value("X-Content-Hash") == hash_hex);

    auto v1 = client.Get("/v1/users/alice/templates/1", bearer);
    CHECK(v1->status == 200);
    CHECK(v1->body == blob);
    CHECK(v1->get_header_value("X-Version") == "1");

    // admin token reads the same bytes
    auto admin = client.Get("/v1/users/alice/templates/latest",
                            {{"Authorization", "Bearer tok-admin"}});
    CHECK(admin->status == 200);
    CHECK(admin->body == blob);
  }

  SUBCASE("cache transparency across service instances") {
    auto res = client.Put("/v1/users/alice/templates", alice_put, blob,
                          "application/octet-stream");
    REQUIRE(res->status == 200);

    // a second service over the same directory starts cold
    backend::TemplateStore second_store(dir.path.string());
    backend::TemplateService second_service(second_store, auth);
    httplib::Server second_server;
    second_service.attach(second_server);
    const int second_port = second_server.bind_to_any_port("127.0.0.1");
    std::thread second_listener([&second_server] { second_server.listen_after_bind(); });
    second_server.wait_until_ready();
    httplib::Client second_client("127.0.0.1", second_port);

    const httplib::Headers bearer = {{"Authorization", "Bearer tok-alice"}};
    auto cold = second_client.Get("/v1/users/alice/templates/latest", bearer);
    REQUIRE(cold);
    CHECK(cold->status == 200);
    CHECK(cold->get_header_value("X-Cache") == "miss");
    auto warm = second_client.Get("/v1/users/alice/templates/latest", bearer);
    CHECK(warm->get_header_value("X-Cache") == "hit");
    CHECK(warm->body == cold->body);
    CHECK(warm->body == blob);

    second_server.stop();
    second_listener.join();
  }

  SUBCASE("puts are rejected with precise status codes") {
    // flipped declared hash
    auto res = client.Put("/v1/users/alice/templates",
                          {{"Authorization", "Bearer tok-alice"},
                           {"X-Algo", "trca"},
                           {"X-Content-Hash", "deadbeef"}},
                          blob, "application/octet-stream");
    REQUIRE(res);
    CHECK(res->status == 400);
    // declared algo disagrees with the payload
    res = client.Put("/v1/users/alice/templates",
                     {{"Authorization", "Bearer tok-alice"},
                      {"X-Algo", "tdca"},
                      {"X-Content-Hash", hash_hex}},
                     blob, "application/octet-stream");
    CHECK(res->status == 409);
    // missing headers
    res = client.Put("/v1/users/alice/templates", {{"Authorization", "Bearer tok-alice"}}, blob,
                     "application/octet-stream");
    CHECK(res->status == 400);
    // garbage payload
    const std::string garbage = "not a template";
    char gbuf[16];
    std::snprintf(gbuf, sizeof(gbuf), "%08x",
                  crc32({reinterpret_cast<const std::uint8_t*>(garbage.data()), garbage.size()}));
    res = client.Put("/v1/users/alice/templates",
                     {{"Authorization", "Bearer tok-alice"},
                      {"X-Algo", "trca"},
                      {"X-Content-Hash", gbuf}},
                     garbage, "application/octet-stream");
    CHECK(res->status == 400);
    // nothing got stored along the way
    CHECK(store.versions("alice").empty());
  }

  SUBCASE("missing resources are 404") {
    const httplib::Headers bearer = {{"Authorization", "Bearer tok-admin"}};
    auto res = client.Get("/v1/users/nobody/templates/latest", bearer);
    REQUIRE(res);
    CHECK(res->status == 404);
    client.Put("/v1/users/alice/templates", alice_put, blob, "application/octet-stream");
    res = client.Get("/v1/users/alice/templates/7", bearer);
    CHECK(res->status == 404);
  }

  server.stop();
  listener.join();
}

}  // TEST_SUITE
