#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "vbmi/ringbuffer.hpp"

namespace vbmi::dsp {

// samples per trial at fs = 250: 1.12 s of stimulation
inline constexpr int kEpochSamples = 280;

enum class epoch_status {
  ok,
  not_ready,  // window extends past the data written so far
  gap,        // window overlaps a transport loss gap; epoch must be discarded
  evicted,    // window has rolled out of the ring buffer
};

const char* to_string(epoch_status s);

struct Epoch {
  Eigen::MatrixXd data;  // channels x samples, volts
  std::uint64_t onset_sample = 0;
  int target_label = -1;  // -1 = unlabeled
  int trial_ordinal = 0;
  bool mean_removed = false;
};

struct EpochResult {
  epoch_status status = epoch_status::not_ready;
  Epoch epoch;
  bool ok() const { return status == epoch_status::ok; }
};

// Pull [onset, onset + n_samples) out of the buffer and remove each channel's
// mean. Statuses instead of exceptions: not-ready and gap are expected flow
// during live sessions (callers retry or skip the trial).
EpochResult extract_epoch(const RingBuffer& buffer, std::uint64_t onset_sample,
                          int n_samples = kEpochSamples, int target_label = -1,
                          int trial_ordinal = 0);

}  // namespace vbmi::dsp
