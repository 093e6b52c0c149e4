#include "vbmi/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vbmi::metrics {

double dti_seconds(int n_trials) {
  if (n_trials < 1) throw std::invalid_argument("dti_seconds: need at least one trial");
  return n_trials * kTrialSeconds;
}

double itr_bits_per_min(int n_targets, double p, double t_selection_s) {
  if (n_targets < 2) throw std::invalid_argument("itr_bits_per_min: need at least 2 targets");
  if (!(t_selection_s > 0.0)) {
    throw std::invalid_argument("itr_bits_per_min: selection time must be positive");
  }
  if (p > 1.0 || std::isnan(p)) {
    throw std::invalid_argument("itr_bits_per_min: accuracy above 1");
  }
  const double chance = 1.0 / n_targets;
  if (p == chance) return 0.0;  // exact zero, not the formula's rounding dust
  if (p < chance) {
    throw std::domain_error("itr_bits_per_min: accuracy " + std::to_string(p) +
                            " below chance level " + std::to_string(chance));
  }
  double bits = std::log2(static_cast<double>(n_targets));
  if (p > 0.0) bits += p * std::log2(p);
  if (p < 1.0) bits += (1.0 - p) * std::log2((1.0 - p) / (n_targets - 1));
  return bits * 60.0 / t_selection_s;
}

}  // namespace vbmi::metrics
