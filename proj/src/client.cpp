#include "vbmi/client.hpp"

#include <algorithm>
#include <stdexcept>

namespace vbmi::proto {

ChunkAssembler::ChunkAssembler(double v_ref, int gain)
    : volts_per_code_(v_ref / (gain * 8388608.0)) {
  if (!(v_ref > 0.0) || gain < 1) {
    throw std::invalid_argument("ChunkAssembler: bad scale constants");
  }
}

std::optional<SampleChunk> ChunkAssembler::on_packet(const Packet& p) {
  if (p.n_samples == 0) {
    ended_ = true;
    return std::nullopt;
  }
  if (expected_index_ && p.sample_index != *expected_index_) {
    if (p.sample_index < *expected_index_) {
      throw std::runtime_error("ChunkAssembler: sample_index went backwards");
    }
    gaps_.push_back({*expected_index_, p.sample_index - *expected_index_});
  }
  expected_index_ = p.sample_index + p.n_samples;

  SampleChunk chunk;
  chunk.sample_index = p.sample_index;
  chunk.status = p.status;
  chunk.recv_time = std::chrono::steady_clock::now();
  chunk.values_volt.resize(kStreamChannels, p.n_samples);
  for (int s = 0; s < p.n_samples; ++s) {
    for (int c = 0; c < kStreamChannels; ++c) {
      chunk.values_volt(c, s) =
          p.payload[static_cast<std::size_t>(s) * kStreamChannels + c] * volts_per_code_;
    }
  }
  samples_delivered_ += p.n_samples;
  return chunk;
}

ClientSession::ClientSession(std::string host, std::uint16_t port, ClientSettings settings)
    : host_(std::move(host)),
      port_(port),
      settings_(settings),
      queue_(std::make_unique<net::BoundedQueue<SampleChunk>>(settings.queue_capacity)),
      assembler_(settings.v_ref_volt, settings.gain) {}

ClientSession::~ClientSession() {
  queue_->close();
  if (pump_.joinable()) {
    socket_.shutdown_both();
    pump_.join();
  }
}

void ClientSession::add_event(SessionEvent::Kind kind, std::string detail) {
  std::lock_guard lock(state_mutex_);
  events_.push_back({kind, std::move(detail)});
}

void ClientSession::connect() {
  if (pump_.joinable()) throw std::logic_error("ClientSession::connect: stream active");
  int delay_ms = settings_.backoff_initial_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      socket_ = net::TcpSocket::connect(host_, port_);
      // a fresh connection is a fresh acquisition run: sample numbering and
      // loss accounting start over
      {
        std::lock_guard lock(state_mutex_);
        assembler_ = ChunkAssembler(settings_.v_ref_volt, settings_.gain);
        parser_ = PacketParser();
      }
      queue_ = std::make_unique<net::BoundedQueue<SampleChunk>>(settings_.queue_capacity);
      line_buf_.clear();
      add_event(SessionEvent::Kind::connected,
                host_ + ":" + std::to_string(port_) + " attempt " + std::to_string(attempt));
      return;
    } catch (const net::SocketError& err) {
      if (attempt >= settings_.connect_attempts) {
        add_event(SessionEvent::Kind::disconnected, err.what());
        throw;
      }
      add_event(SessionEvent::Kind::retrying,
                "attempt " + std::to_string(attempt) + " in " + std::to_string(delay_ms) + "ms");
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms = std::min(delay_ms * 2, settings_.backoff_max_ms);
    }
  }
}

std::string ClientSession::read_line() {
  for (;;) {
    const std::size_t eol = line_buf_.find('\n');
    if (eol != std::string::npos) {
      std::string line = line_buf_.substr(0, eol);
      line_buf_.erase(0, eol + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    std::uint8_t buf[512];
    const std::size_t n = socket_.read_some(buf);
    if (n == 0) throw net::SocketError("ClientSession::read_line: connection closed");
    line_buf_.append(reinterpret_cast<const char*>(buf), n);
  }
}

std::string ClientSession::command(const std::string& line) {
  if (!socket_.valid()) throw net::SocketError("ClientSession::command: not connected");
  if (streaming()) {
    throw std::logic_error("ClientSession::command: stream active, stop it first");
  }
  socket_.write_text(line + "\n");
  return read_line();
}

void ClientSession::start_stream() {
  if (pump_.joinable()) {
    throw std::logic_error("ClientSession::start_stream: stream already active");
  }
  const std::string reply = command("START");
  if (reply != "OK") throw std::runtime_error("ClientSession::start_stream: " + reply);
  // the reply read may have pulled the first stream bytes along with the
  // text line; hand them to the packet parser before the pump takes over
  if (!line_buf_.empty()) {
    std::lock_guard lock(state_mutex_);
    parser_.feed({reinterpret_cast<const std::uint8_t*>(line_buf_.data()), line_buf_.size()});
    line_buf_.clear();
  }
  if (queue_->closed()) {  // restart within the same connection
    queue_ = std::make_unique<net::BoundedQueue<SampleChunk>>(settings_.queue_capacity);
  }
  pump_done_.store(false);
  pump_ = std::thread([this] { pump_loop(); });
}

// deliver every packet the parser holds; true once the end marker was seen
bool ClientSession::drain_parser() {
  std::vector<Packet> batch;
  {
    std::lock_guard lock(state_mutex_);
    while (auto packet = parser_.next()) batch.push_back(std::move(*packet));
  }
  for (const Packet& packet : batch) {
    std::optional<SampleChunk> chunk;
    {
      std::lock_guard lock(state_mutex_);
      const std::size_t gaps_before = assembler_.gaps().size();
      chunk = assembler_.on_packet(packet);
      if (assembler_.gaps().size() > gaps_before) {
        const auto& gap = assembler_.gaps().back();
        events_.push_back({SessionEvent::Kind::gap,
                           std::to_string(gap.missing_samples) + " samples at " +
                               std::to_string(gap.expected_index)});
      }
    }
    if (!chunk) {
      add_event(SessionEvent::Kind::stream_ended, "end marker");
      return true;
    }
    // push() fails only once stop_stream has closed the queue; keep going
    // so the end marker is still seen
    queue_->push(std::move(*chunk));
  }
  return false;
}

void ClientSession::pump_loop() {
  std::uint8_t buf[4096];
  try {
    bool done = drain_parser();  // packets fed before the pump started
    while (!done) {
      const std::size_t n = socket_.read_some(buf);
      if (n == 0) {
        add_event(SessionEvent::Kind::disconnected, "connection lost mid-stream");
        break;
      }
      {
        std::lock_guard lock(state_mutex_);
        parser_.feed({buf, n});
      }
      done = drain_parser();
    }
  } catch (const net::SocketError& err) {
    add_event(SessionEvent::Kind::disconnected, err.what());
  }
  pump_done_.store(true);
  queue_->close();
}

void ClientSession::stop_stream() {
  if (!pump_.joinable()) return;
  queue_->close();
  if (!pump_done_.load()) socket_.write_text("STOP\n");
  pump_.join();
  pump_ = std::thread();
}

std::vector<GapRecord> ClientSession::gaps() const {
  std::lock_guard lock(state_mutex_);
  return assembler_.gaps();
}

std::vector<SessionEvent> ClientSession::events() const {
  std::lock_guard lock(state_mutex_);
  return events_;
}

std::uint64_t ClientSession::corrupt_packets() const {
  std::lock_guard lock(state_mutex_);
  return parser_.corrupt_packets();
}

}  // namespace vbmi::proto
