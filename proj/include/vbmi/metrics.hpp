#pragma once

namespace vbmi::metrics {

// one stimulation cycle: 28 bits at 25 Hz
inline constexpr double kTrialSeconds = 1.12;

// Selection time for an n-trial decision. Gaze-shift and inter-trial gaps are
// deliberately excluded: the published 2.24 s figure is exactly two cycles.
double dti_seconds(int n_trials);

// Wolpaw information transfer rate in bits/min for an n_targets selection
// with accuracy p decided every t_selection_s seconds. p terms at 0 and 1
// take the 0*log0 = 0 limit. Throws std::invalid_argument for n < 2, p > 1
// or t <= 0, and std::domain_error for p below chance (p < 1/n).
double itr_bits_per_min(int n_targets, double p, double t_selection_s);

}  // namespace vbmi::metrics
