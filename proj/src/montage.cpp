#include "vbmi/montage.hpp"

#include <string>

#include "vbmi/hashes.hpp"

namespace vbmi {

std::uint32_t montage_hash() {
  std::string joined;
  for (auto name : kMontage) {
    joined += name;
    joined += ',';
  }
  joined += kReferenceName;
  joined += ',';
  joined += kBiasName;
  return fnv1a32(joined);
}

}  // namespace vbmi
