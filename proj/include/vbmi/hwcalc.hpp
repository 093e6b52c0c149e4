#pragma once

#include <optional>
#include <span>
#include <string>

#include "vbmi/config.hpp"

namespace vbmi::hw {

struct ZBreakdown {
  double z_s_ohm;   // skin
  double z_se_ohm;  // skin-electrode contact
  double z_e_ohm;   // electrode
};

// Analog front-end budget: source/input impedances, ADC reference and
// resolution, amplifier gain. All impedances in ohms, voltages in volts.
struct HwBudget {
  double z_in_ohm{1e12};
  double z_source_ohm{1e6};
  std::optional<ZBreakdown> z_breakdown;
  double v_ref_volt{4.5};
  int adc_bits{24};
  double gain{1.0};

  void validate() const;  // throws std::invalid_argument
};

// Voltage-divider output: v_brain * z_in / (z_in + z_source).
double v_out(double v_brain_volt, const HwBudget& budget);

// Fraction of the signal dropped across the source impedance, in [0,1).
double loss_ratio(const HwBudget& budget);

// Smallest ADC step: v_ref / 2^adc_bits.
double lsb(const HwBudget& budget);

// Smallest input-referred signal the chain resolves:
// lsb / (gain * (1 - loss_ratio)).
double v_min(const HwBudget& budget);

HwBudget budget_from_config(const Config& cfg);

// Per-gain table of loss, LSB and V_min for the CLI.
std::string budget_table(const HwBudget& budget, std::span<const double> gains);

// PGA settings of the front-end ADC.
inline constexpr double kGainSettings[] = {1, 2, 4, 6, 8, 12, 24};

}  // namespace vbmi::hw
