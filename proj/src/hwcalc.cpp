#include "vbmi/hwcalc.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vbmi::hw {

void HwBudget::validate() const {
  if (!(z_in_ohm > 0.0)) throw std::invalid_argument("HwBudget: z_in must be > 0");
  if (!(z_source_ohm > 0.0)) throw std::invalid_argument("HwBudget: z_source must be > 0");
  if (z_breakdown) {
    const auto& z = *z_breakdown;
    if (!(z.z_s_ohm > 0.0) || !(z.z_se_ohm > 0.0) || !(z.z_e_ohm > 0.0)) {
      throw std::invalid_argument("HwBudget: impedance breakdown terms must be > 0");
    }
    double sum = z.z_s_ohm + z.z_se_ohm + z.z_e_ohm;
    if (std::abs(sum - z_source_ohm) > 1e-9 * std::max(sum, z_source_ohm)) {
      throw std::invalid_argument("HwBudget: z_source must equal z_s + z_se + z_e");
    }
  }
  if (adc_bits < 1 || adc_bits > 32) throw std::invalid_argument("HwBudget: adc_bits must be in [1,32]");
  if (!(gain >= 1.0)) throw std::invalid_argument("HwBudget: gain must be >= 1");
  if (!(v_ref_volt > 0.0)) throw std::invalid_argument("HwBudget: v_ref must be > 0");
}

double v_out(double v_brain_volt, const HwBudget& budget) {
  budget.validate();
  return v_brain_volt * budget.z_in_ohm / (budget.z_in_ohm + budget.z_source_ohm);
}

double loss_ratio(const HwBudget& budget) {
  budget.validate();
  return budget.z_source_ohm / (budget.z_in_ohm + budget.z_source_ohm);
}

double lsb(const HwBudget& budget) {
  budget.validate();
  return budget.v_ref_volt / std::exp2(budget.adc_bits);
}

double v_min(const HwBudget& budget) {
  budget.validate();
  return lsb(budget) / (budget.gain * (1.0 - loss_ratio(budget)));
}

HwBudget budget_from_config(const Config& cfg) {
  HwBudget b;
  b.z_in_ohm = cfg.get_double("z_in_ohm", b.z_in_ohm);
  b.z_source_ohm = cfg.get_double("z_source_ohm", b.z_source_ohm);
  if (cfg.has("z_s_ohm") || cfg.has("z_se_ohm") || cfg.has("z_e_ohm")) {
    ZBreakdown z{cfg.get_double("z_s_ohm", 0.0), cfg.get_double("z_se_ohm", 0.0),
                 cfg.get_double("z_e_ohm", 0.0)};
    b.z_breakdown = z;
    b.z_source_ohm = z.z_s_ohm + z.z_se_ohm + z.z_e_ohm;
  }
  b.v_ref_volt = cfg.get_double("v_ref_volt", b.v_ref_volt);
  b.adc_bits = static_cast<int>(cfg.get_int("adc_bits", b.adc_bits));
  b.gain = cfg.get_double("gain", b.gain);
  b.validate();
  return b;
}

std::string budget_table(const HwBudget& budget, std::span<const double> gains) {
  std::string out;
  char line[160];
  double loss = loss_ratio(budget);
  std::snprintf(line, sizeof line,
                "z_source = %.4g ohm, z_in = %.4g ohm, v_ref = %.4g V, adc = %d bit\n",
                budget.z_source_ohm, budget.z_in_ohm, budget.v_ref_volt, budget.adc_bits);
  out += line;
  std::snprintf(line, sizeof line, "loss ratio = %.6g (%.6g%% attenuation)\n", loss, loss * 100.0);
  out += line;
  std::snprintf(line, sizeof line, "%6s  %14s  %14s\n", "gain", "LSB [V]", "V_min [V]");
  out += line;
  for (double g : gains) {
    HwBudget b = budget;
    b.gain = g;
    std::snprintf(line, sizeof line, "%6g  %14.6e  %14.6e\n", g, lsb(b), v_min(b));
    out += line;
  }
  return out;
}

}  // namespace vbmi::hw
