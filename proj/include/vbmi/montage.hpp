#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace vbmi {

// Parieto-occipital acquisition montage; reference at Cz, bias drive at AFz.
// Stream channel order is acquisition 0-6, then reference, then bias.
inline constexpr int kAcqChannels = 7;
inline constexpr std::array<std::string_view, 7> kMontage = {"PO5", "PO3", "POZ", "PO4",
                                                             "O1",  "OZ",  "O2"};
inline constexpr std::string_view kReferenceName = "CZ";
inline constexpr std::string_view kBiasName = "AFZ";

// Fingerprint carried in model metadata so templates trained on one montage
// are refused on another.
std::uint32_t montage_hash();

}  // namespace vbmi
