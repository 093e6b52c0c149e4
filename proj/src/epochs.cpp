#include "vbmi/epochs.hpp"

#include <stdexcept>

namespace vbmi::dsp {

const char* to_string(epoch_status s) {
  switch (s) {
    case epoch_status::ok: return "ok";
    case epoch_status::not_ready: return "not_ready";
    case epoch_status::gap: return "gap";
    case epoch_status::evicted: return "evicted";
  }
  return "unknown";
}

EpochResult extract_epoch(const RingBuffer& buffer, std::uint64_t onset_sample, int n_samples,
                          int target_label, int trial_ordinal) {
  if (n_samples < 1) throw std::invalid_argument("extract_epoch: n_samples must be positive");
  const std::uint64_t end = onset_sample + static_cast<std::uint64_t>(n_samples);

  EpochResult res;
  if (end > buffer.write_index()) {
    res.status = epoch_status::not_ready;
    return res;
  }
  if (onset_sample < buffer.oldest_index()) {
    res.status = epoch_status::evicted;
    return res;
  }
  if (buffer.overlaps_gap(onset_sample, end)) {
    res.status = epoch_status::gap;
    return res;
  }

  res.status = epoch_status::ok;
  res.epoch.data = buffer.read(onset_sample, end);
  // shift each row by its first sample before removing the mean so constant
  // channels land on exact zero
  const Eigen::VectorXd base = res.epoch.data.col(0);
  res.epoch.data.colwise() -= base;
  const Eigen::VectorXd row_means = res.epoch.data.rowwise().mean();
  res.epoch.data.colwise() -= row_means;
  res.epoch.onset_sample = onset_sample;
  res.epoch.target_label = target_label;
  res.epoch.trial_ordinal = trial_ordinal;
  res.epoch.mean_removed = true;
  return res;
}

}  // namespace vbmi::dsp
