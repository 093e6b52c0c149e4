#include "vbmi/wear.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace vbmi::proto {

namespace {
constexpr double kRailPeakToPeakVolt = 500e-6;
constexpr double kLeadOffFraction = 0.10;
constexpr long kMinWindowSamples = 250;
}  // namespace

std::array<WearState, kStreamChannels> wear_state(const std::vector<SampleChunk>& window) {
  long total_samples = 0;
  for (const auto& chunk : window) total_samples += chunk.values_volt.cols();
  if (total_samples < kMinWindowSamples) {
    throw std::invalid_argument("wear_state: window has " + std::to_string(total_samples) +
                                " samples, need >= " + std::to_string(kMinWindowSamples));
  }

  std::array<long, kStreamChannels> leadoff_packets{};
  std::array<double, kStreamChannels> lo;
  std::array<double, kStreamChannels> hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());

  for (const auto& chunk : window) {
    if (chunk.values_volt.rows() != kStreamChannels) {
      throw std::invalid_argument("wear_state: chunk does not carry 9 channels");
    }
    for (int c = 0; c < kStreamChannels; ++c) {
      if (chunk.status & (1u << c)) ++leadoff_packets[static_cast<std::size_t>(c)];
      lo[static_cast<std::size_t>(c)] =
          std::min(lo[static_cast<std::size_t>(c)], chunk.values_volt.row(c).minCoeff());
      hi[static_cast<std::size_t>(c)] =
          std::max(hi[static_cast<std::size_t>(c)], chunk.values_volt.row(c).maxCoeff());
    }
  }

  std::array<WearState, kStreamChannels> states;
  const auto n_packets = static_cast<double>(window.size());
  for (std::size_t c = 0; c < kStreamChannels; ++c) {
    const bool lead_off = static_cast<double>(leadoff_packets[c]) / n_packets >= kLeadOffFraction;
    const bool railed = (hi[c] - lo[c]) > kRailPeakToPeakVolt;
    const bool flat = hi[c] == lo[c];
    states[c] = (lead_off || railed || flat) ? WearState::poor : WearState::good;
  }
  return states;
}

}  // namespace vbmi::proto
