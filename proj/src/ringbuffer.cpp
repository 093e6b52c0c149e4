#include "vbmi/ringbuffer.hpp"

#include <stdexcept>
#include <string>

namespace vbmi::dsp {

RingBuffer::RingBuffer(int channels, std::int64_t capacity_samples)
    : channels_(channels), capacity_(capacity_samples) {
  if (channels_ < 1) throw std::invalid_argument("RingBuffer: need at least one channel");
  if (capacity_ < 1) throw std::invalid_argument("RingBuffer: capacity must be positive");
  data_ = Eigen::MatrixXd::Zero(channels_, capacity_);
}

std::uint64_t RingBuffer::oldest_index() const {
  const auto cap = static_cast<std::uint64_t>(capacity_);
  return write_index_ > cap ? write_index_ - cap : 0;
}

std::uint64_t RingBuffer::samples_evicted() const {
  const auto cap = static_cast<std::uint64_t>(capacity_);
  return write_index_ > cap ? write_index_ - cap : 0;
}

void RingBuffer::push(const Eigen::Ref<const Eigen::MatrixXd>& chunk) {
  if (chunk.rows() != channels_) {
    throw std::invalid_argument("RingBuffer::push: chunk has " + std::to_string(chunk.rows()) +
                                " channels, buffer has " + std::to_string(channels_));
  }
  for (Eigen::Index i = 0; i < chunk.cols(); ++i) {
    const auto slot = static_cast<Eigen::Index>(write_index_ % static_cast<std::uint64_t>(capacity_));
    data_.col(slot) = chunk.col(i);
    ++write_index_;
  }
  prune_gaps();
}

void RingBuffer::mark_gap(std::uint64_t missing_samples) {
  if (missing_samples == 0) return;
  gaps_.emplace_back(write_index_, write_index_ + missing_samples);
  write_index_ += missing_samples;
  ++gaps_recorded_;
  samples_lost_ += missing_samples;
  prune_gaps();
}

void RingBuffer::prune_gaps() {
  const std::uint64_t oldest = oldest_index();
  std::erase_if(gaps_, [oldest](const auto& g) { return g.second <= oldest; });
}

bool RingBuffer::contains(std::uint64_t a, std::uint64_t b) const {
  return a >= oldest_index() && a <= b && b <= write_index_;
}

bool RingBuffer::overlaps_gap(std::uint64_t a, std::uint64_t b) const {
  for (const auto& g : gaps_) {
    if (g.first < b && a < g.second) return true;
  }
  return false;
}

Eigen::MatrixXd RingBuffer::read(std::uint64_t a, std::uint64_t b) const {
  if (!contains(a, b)) {
    throw std::out_of_range("RingBuffer::read: [" + std::to_string(a) + ", " + std::to_string(b) +
                            ") outside window [" + std::to_string(oldest_index()) + ", " +
                            std::to_string(write_index_) + ")");
  }
  if (overlaps_gap(a, b)) {
    throw std::runtime_error("RingBuffer::read: requested range crosses a loss gap");
  }
  Eigen::MatrixXd out(channels_, static_cast<Eigen::Index>(b - a));
  for (std::uint64_t i = a; i < b; ++i) {
    const auto slot = static_cast<Eigen::Index>(i % static_cast<std::uint64_t>(capacity_));
    out.col(static_cast<Eigen::Index>(i - a)) = data_.col(slot);
  }
  return out;
}

}  // namespace vbmi::dsp
