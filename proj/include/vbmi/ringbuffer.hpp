#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace vbmi::dsp {

// Absolute-indexed sample ring: column j of the backing store holds the sample
// whose absolute index is congruent to j modulo the capacity. The window
// [write_index - capacity, write_index) is readable; anything older has been
// overwritten and is refused, never silently served. Loss gaps (samples the
// transport never delivered) advance the index without data and taint any
// read that touches them. Single producer, single consumer.
class RingBuffer {
 public:
  explicit RingBuffer(int channels = 7, std::int64_t capacity_samples = 7500);

  int channels() const { return channels_; }
  std::int64_t capacity() const { return capacity_; }

  // absolute index of the next sample to be written
  std::uint64_t write_index() const { return write_index_; }
  // oldest absolute index still readable
  std::uint64_t oldest_index() const;
  // samples that have rolled out of the window
  std::uint64_t samples_evicted() const;

  void push(const Eigen::Ref<const Eigen::MatrixXd>& chunk);
  // advance past samples lost in transport, recording [old, old+missing) as a gap
  void mark_gap(std::uint64_t missing_samples);

  bool contains(std::uint64_t a, std::uint64_t b) const;
  bool overlaps_gap(std::uint64_t a, std::uint64_t b) const;
  // channels x (b-a) copy of [a, b); throws std::out_of_range outside the
  // window and std::runtime_error across a gap
  Eigen::MatrixXd read(std::uint64_t a, std::uint64_t b) const;

  std::uint64_t gaps_recorded() const { return gaps_recorded_; }
  std::uint64_t samples_lost() const { return samples_lost_; }

 private:
  int channels_;
  std::int64_t capacity_;
  Eigen::MatrixXd data_;
  std::uint64_t write_index_ = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> gaps_;  // [start, end)
  std::uint64_t gaps_recorded_ = 0;
  std::uint64_t samples_lost_ = 0;

  void prune_gaps();
};

}  // namespace vbmi::dsp
