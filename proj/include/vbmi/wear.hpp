#pragma once

#include <array>
#include <vector>

#include "vbmi/client.hpp"
#include "vbmi/packet.hpp"

namespace vbmi::proto {

enum class WearState { good, poor };

// Per-channel contact check over >= 1 s of stream (>= 250 samples; throws
// std::invalid_argument on shorter windows). A channel is poor when its
// lead-off bit is set in at least 10% of the packets, its peak-to-peak swing
// exceeds the 500 uV rail heuristic, or it is exactly constant (disconnected
// input); otherwise good.
std::array<WearState, kStreamChannels> wear_state(const std::vector<SampleChunk>& window);

}  // namespace vbmi::proto
