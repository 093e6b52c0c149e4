#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "doctest.h"
#include "vbmi/client.hpp"
#include "vbmi/device_server.hpp"
#include "vbmi/packet.hpp"
#include "vbmi/queue.hpp"
#include "vbmi/transport.hpp"
#include "vbmi/wear.hpp"

using namespace vbmi;
using proto::Packet;

namespace {

// deterministic low-amplitude multichannel test signal, volts
Eigen::MatrixXd ramp_signal(int total_samples, double amp_volt = 20e-6) {
  Eigen::MatrixXd m(proto::kStreamChannels, total_samples);
  for (int c = 0; c < proto::kStreamChannels; ++c) {
    for (int s = 0; s < total_samples; ++s) {
      m(c, s) = amp_volt * std::sin(2.0 * std::numbers::pi * (s + 7.0 * c) / 50.0);
    }
  }
  return m;
}

proto::DeviceSource make_source(int total_samples) {
  proto::DeviceSource src;
  src.samples_volt = ramp_signal(total_samples);
  src.impedance_kohm.fill(20.0);
  return src;
}

Packet make_packet(std::uint16_t seq, std::uint32_t sample_index, int n = 10) {
  Packet p;
  p.seq = seq;
  p.sample_index = sample_index;
  p.n_samples = static_cast<std::uint8_t>(n);
  p.payload.assign(static_cast<std::size_t>(n) * proto::kStreamChannels, 1);
  return p;
}

struct RunningServer {
  proto::DeviceServer server;
  RunningServer(proto::DeviceSettings settings, proto::DeviceSource source)
      : server(std::move(settings), std::move(source)) {
    server.start();
  }
  ~RunningServer() { server.stop(); }
};

}  // namespace

TEST_SUITE("stream") {

TEST_CASE("raw code scaling hits the datasheet value exactly") {
  // 4.5 / (24 * 2^23) is a dyadic rational: 1.5 * 2^-26
  CHECK(proto::raw_to_volts(1, 4.5, 24) == 1.5 * std::pow(2.0, -26));
  CHECK(proto::raw_to_volts(1, 4.5, 24) == doctest::Approx(2.235174e-8).epsilon(1e-6));
  CHECK(proto::raw_to_volts(0, 4.5, 24) == 0.0);
  CHECK(proto::volts_to_raw(0.0, 4.5, 24) == 0);
  // saturation at the rails
  CHECK(proto::volts_to_raw(1.0, 4.5, 24) == proto::kRawMax);
  CHECK(proto::volts_to_raw(-1.0, 4.5, 24) == proto::kRawMin);
  // round trip within half an LSB
  const double lsb = proto::raw_to_volts(1, 4.5, 24);
  for (const double v : {1e-6, -3.3e-6, 8.7e-5, 0.0, 2.0e-3}) {
    CHECK(std::abs(proto::raw_to_volts(proto::volts_to_raw(v, 4.5, 24), 4.5, 24) - v) <=
          lsb / 2);
  }
}

TEST_CASE("chunk assembler tracks order, scaling and loss") {
  proto::ChunkAssembler asm_(4.5, 24);

  SUBCASE("lossless run of 25 packets yields 250 samples and no gaps") {
    for (std::uint16_t i = 0; i < 25; ++i) {
      const auto chunk = asm_.on_packet(make_packet(i, i * 10u));
      REQUIRE(chunk.has_value());
      CHECK(chunk->sample_index == i * 10u);
      CHECK(chunk->values_volt.rows() == 9);
      CHECK(chunk->values_volt.cols() == 10);
      // raw code 1 scales to v_ref/(gain*2^23)
      CHECK(chunk->values_volt(0, 0) == 1.5 * std::pow(2.0, -26));
    }
    CHECK(asm_.samples_delivered() == 250);
    CHECK(asm_.gaps().empty());
    CHECK_FALSE(asm_.ended());
  }

  SUBCASE("a dropped packet becomes one gap record of its sample count") {
    (void)asm_.on_packet(make_packet(0, 0));
    (void)asm_.on_packet(make_packet(1, 10));
    // seq 2 covering samples [20,30) never arrives
    (void)asm_.on_packet(make_packet(3, 30));
    REQUIRE(asm_.gaps().size() == 1);
    CHECK(asm_.gaps()[0].expected_index == 20);
    CHECK(asm_.gaps()[0].missing_samples == 10);
    (void)asm_.on_packet(make_packet(4, 40));
    CHECK(asm_.gaps().size() == 1);  // stream is clean again
  }

  SUBCASE("end marker closes the stream") {
    Packet marker;
    marker.n_samples = 0;
    CHECK_FALSE(asm_.on_packet(marker).has_value());
    CHECK(asm_.ended());
  }

  SUBCASE("rewinding sample indices are rejected") {
    (void)asm_.on_packet(make_packet(0, 100));
    CHECK_THROWS_AS((void)asm_.on_packet(make_packet(1, 50)), std::runtime_error);
  }
}

TEST_CASE("bounded queue blocks producers at capacity and drains after close") {
  net::BoundedQueue<int> q(2);
  CHECK(q.push(1));
  CHECK(q.push(2));

  std::atomic<bool> third_pushed{false};
  std::thread producer([&] {
    q.push(3);  // must block until a pop makes room
    third_pushed.store(true);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  CHECK_FALSE(third_pushed.load());
  CHECK(q.pop().value() == 1);
  producer.join();
  CHECK(third_pushed.load());

  q.close();
  CHECK_FALSE(q.push(4));
  CHECK(q.pop().value() == 2);
  CHECK(q.pop().value() == 3);
  CHECK_FALSE(q.pop().has_value());
}

TEST_CASE("device answers the idle command set") {
  RunningServer rig({.pace = 100.0}, make_source(500));
  proto::ClientSession session("127.0.0.1", rig.server.port());
  session.connect();
  CHECK(session.command("INFO") == "OK channels=9 fs=250 vref=4.500 gain=24 spp=10");
  const std::string imp = session.command("IMPEDANCE");
  CHECK(imp.substr(0, 2) == "OK");
  CHECK(imp == "OK 20.0 20.0 20.0 20.0 20.0 20.0 20.0 20.0 20.0");
  CHECK(session.command("SELFDESTRUCT").substr(0, 3) == "ERR");
  CHECK(session.command("INFO").substr(0, 2) == "OK");  // still alive after an error
}

TEST_CASE("stream delivers the recording in order and in volts") {
  const int total = 1000;
  const auto source = make_source(total);
  RunningServer rig({.pace = 200.0}, source);
  proto::ClientSession session("127.0.0.1", rig.server.port());
  session.connect();
  session.start_stream();

  Eigen::MatrixXd received(proto::kStreamChannels, total);
  std::uint32_t expect = 0;
  long got = 0;
  while (auto chunk = session.next_chunk()) {
    CHECK(chunk->sample_index == expect);  // strictly increasing, no holes
    received.middleCols(chunk->sample_index, chunk->values_volt.cols()) = chunk->values_volt;
    expect += static_cast<std::uint32_t>(chunk->values_volt.cols());
    got += chunk->values_volt.cols();
  }
  session.stop_stream();

  CHECK(got == total);
  CHECK(session.gaps().empty());
  CHECK(session.corrupt_packets() == 0);
  // quantization is the only distortion allowed
  const double lsb = proto::raw_to_volts(1, 4.5, 24);
  CHECK((received - source.samples_volt).cwiseAbs().maxCoeff() <= lsb / 2 + 1e-15);

  bool saw_end = false;
  for (const auto& ev : session.events()) {
    if (ev.kind == proto::SessionEvent::Kind::stream_ended) saw_end = true;
  }
  CHECK(saw_end);
}

TEST_CASE("stop halts the stream midway and the session can restart") {
  RunningServer rig({.pace = 50.0}, make_source(250 * 60));
  proto::ClientSession session("127.0.0.1", rig.server.port());
  session.connect();
  session.start_stream();
  auto first = session.next_chunk();
  REQUIRE(first.has_value());
  session.stop_stream();
  CHECK_FALSE(session.streaming());

  // second run on the same connection picks up where the stream left off
  session.start_stream();
  auto resumed = session.next_chunk();
  REQUIRE(resumed.has_value());
  CHECK(resumed->sample_index > first->sample_index);
  CHECK(session.gaps().empty());  // continuation, not loss
  session.stop_stream();
}

TEST_CASE("connect applies bounded exponential backoff before giving up") {
  // pick a port with nothing behind it
  std::uint16_t dead_port;
  {
    net::TcpListener probe("127.0.0.1", 0);
    dead_port = probe.port();
  }
  proto::ClientSettings settings;
  settings.backoff_initial_ms = 20;
  settings.backoff_max_ms = 40;
  settings.connect_attempts = 4;
  proto::ClientSession session("127.0.0.1", dead_port, settings);

  const auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(session.connect(), net::SocketError);
  const auto elapsed =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  CHECK(elapsed >= 20 + 40 + 40);  // three waits between four attempts, capped

  int retries = 0;
  for (const auto& ev : session.events()) {
    if (ev.kind == proto::SessionEvent::Kind::retrying) ++retries;
  }
  CHECK(retries == 3);

  // a server appearing later is reachable through the same session
  RunningServer rig({.pace = 100.0}, make_source(500));
  proto::ClientSession second("127.0.0.1", rig.server.port(), settings);
  second.connect();
  CHECK(second.command("INFO").substr(0, 2) == "OK");
}

TEST_CASE("accelerated pacing compresses wall time by the pace factor") {
  const int total = 2800;  // 11.2 s of signal
  RunningServer rig({.pace = 100.0}, make_source(total));
  proto::ClientSession session("127.0.0.1", rig.server.port());
  session.connect();

  const auto t0 = std::chrono::steady_clock::now();
  session.start_stream();
  long got = 0;
  while (auto chunk = session.next_chunk()) got += chunk->values_volt.cols();
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  session.stop_stream();

  CHECK(got == total);
  // nominal 0.112 s; generous band for scheduler jitter
  CHECK(elapsed >= 0.112 * 0.5);
  CHECK(elapsed <= 0.112 * 2.5);
}

TEST_CASE("lead-off electrodes surface in packet status and wear state") {
  auto source = make_source(500);
  source.impedance_kohm[5] = 80.0;  // OZ: over the 50 kOhm gate
  source.impedance_kohm[8] = 120.0;
  RunningServer rig({.pace = 200.0}, source);
  proto::ClientSession session("127.0.0.1", rig.server.port());
  session.connect();
  CHECK(session.command("IMPEDANCE") == "OK 20.0 20.0 20.0 20.0 20.0 80.0 20.0 20.0 120.0");

  session.start_stream();
  std::vector<proto::SampleChunk> window;
  while (auto chunk = session.next_chunk()) window.push_back(std::move(*chunk));
  session.stop_stream();

  const auto states = proto::wear_state(window);
  for (std::size_t c = 0; c < states.size(); ++c) {
    const bool should_be_poor = (c == 5 || c == 8);
    CHECK((states[c] == proto::WearState::poor) == should_be_poor);
  }
}

TEST_CASE("wear heuristics catch rails, flatlines and lead-off fractions") {
  // 30 chunks x 10 samples; every channel swings peak-to-peak `amp`
  const auto make_window = [](double amp, std::uint16_t status, int leadoff_chunks) {
    std::vector<proto::SampleChunk> window;
    for (int i = 0; i < 30; ++i) {
      proto::SampleChunk chunk;
      chunk.sample_index = static_cast<std::uint32_t>(i * 10);
      chunk.status = i < leadoff_chunks ? status : std::uint16_t{0};
      chunk.values_volt.resize(proto::kStreamChannels, 10);
      for (int c = 0; c < proto::kStreamChannels; ++c) {
        for (int s = 0; s < 10; ++s) {
          chunk.values_volt(c, s) = 0.5 * amp * std::sin(0.7 * (i * 10 + s) + 0.3 * c);
        }
      }
      window.push_back(std::move(chunk));
    }
    return window;
  };

  SUBCASE("clean low-amplitude signal is good everywhere") {
    const auto states = proto::wear_state(make_window(20e-6, 0, 0));
    for (const auto s : states) CHECK(s == proto::WearState::good);
  }
  SUBCASE("peak-to-peak beyond 500 uV is poor") {
    const auto states = proto::wear_state(make_window(1.2e-3, 0, 0));
    for (const auto s : states) CHECK(s == proto::WearState::poor);
  }
  SUBCASE("exactly constant channel is poor") {
    auto window = make_window(20e-6, 0, 0);
    for (auto& chunk : window) chunk.values_volt.row(3).setConstant(1e-6);
    const auto states = proto::wear_state(window);
    CHECK(states[3] == proto::WearState::poor);
    CHECK(states[2] == proto::WearState::good);
  }
  SUBCASE("lead-off fraction gate sits at 10 percent") {
    // 3 of 30 chunks = exactly 10% -> poor
    auto states = proto::wear_state(make_window(20e-6, 1u << 4, 3));
    CHECK(states[4] == proto::WearState::poor);
    CHECK(states[5] == proto::WearState::good);
    // 2 of 30 < 10% -> good
    states = proto::wear_state(make_window(20e-6, 1u << 4, 2));
    CHECK(states[4] == proto::WearState::good);
  }
  SUBCASE("short windows are rejected") {
    auto window = make_window(20e-6, 0, 0);
    window.resize(24);  // 240 samples < 1 s
    CHECK_THROWS_AS(proto::wear_state(window), std::invalid_argument);
  }
}

}  // TEST_SUITE
