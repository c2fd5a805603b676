#include "elmsim/budget.hpp"

#include "elmsim/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <ostream>

namespace elmsim {

void BudgetInputs::validate() const {
  if (inputs < 1 || hidden < 1) throw UsageError("budget: D and L must be positive");
  if (outputs < 2) throw UsageError("budget: need at least two output classes");
  if (!(f_class_hz > 0.0 && f_bio_hz > 0.0 && f_deco_hz > 0.0)) throw UsageError("budget: rates must be positive");
  if (!(p_analog_w >= 0.0 && p_digital_chip_w >= 0.0 && e_mac_digital_j >= 0.0)) {
    throw UsageError("budget: powers and energies must be non-negative");
  }
  if (address_bits < 1 || channel_count < 1 || raw_channels < 1 || raw_bits < 1 || !(raw_sample_rate_hz > 0.0)) {
    throw UsageError("budget: telemetry parameters must be positive");
  }
}

int bits_for_classes(int classes) {
  int bits = 0;
  while ((1LL << bits) < classes) ++bits;
  return bits < 1 ? 1 : bits;
}

EnergyFigures energy_report(const BudgetInputs& in) {
  in.validate();
  const double d = in.inputs, l = in.hidden, c = in.outputs;
  EnergyFigures e;
  e.e_per_classify_stage1_j = (in.p_analog_w + in.p_digital_chip_w) / in.f_class_hz;
  e.e_per_mac_stage1_j = e.e_per_classify_stage1_j / (d * l);
  e.e_per_classify_stage2_j = c * l * in.e_mac_digital_j;
  e.e_per_classify_total_j = e.e_per_classify_stage1_j + e.e_per_classify_stage2_j;
  e.e_per_mac_combined_j = e.e_per_classify_total_j / (d * l + c * l);
  return e;
}

DataRates datarate_report(const BudgetInputs& in) {
  in.validate();
  DataRates r;
  r.r_raw_bps = in.raw_channels * in.raw_sample_rate_hz * in.raw_bits;
  r.r_conv_bps = static_cast<double>(in.address_bits) * in.channel_count * in.f_bio_hz;
  r.r_prop_test_bps = in.f_deco_hz * bits_for_classes(in.outputs);
  return r;
}

BudgetReport budget_report(const BudgetInputs& in) { return {energy_report(in), datarate_report(in)}; }

void write_budget_table(std::ostream& out, const BudgetReport& r) {
  char buf[128];
  auto line = [&](const char* name, double v, const char* unit) {
    std::snprintf(buf, sizeof buf, "%-34s %12.4f %s\n", name, v, unit);
    out << buf;
  };
  line("stage-1 energy per MAC", r.energy.e_per_mac_stage1_j * 1e12, "pJ/MAC");
  line("stage-1 energy per classification", r.energy.e_per_classify_stage1_j * 1e9, "nJ");
  line("stage-2 energy per classification", r.energy.e_per_classify_stage2_j * 1e9, "nJ");
  line("total energy per classification", r.energy.e_per_classify_total_j * 1e9, "nJ");
  line("combined energy per MAC", r.energy.e_per_mac_combined_j * 1e12, "pJ/MAC");
  line("raw data rate", r.rates.r_raw_bps / 1e6, "Mbps");
  line("spike-sorted data rate", r.rates.r_conv_bps / 1e3, "kbps");
  line("decoded data rate", r.rates.r_prop_test_bps, "bps");
}

void write_budget_json(std::ostream& out, const BudgetReport& r) {
  nlohmann::json j;
  j["e_per_mac_stage1_j"] = r.energy.e_per_mac_stage1_j;
  j["e_per_classify_stage1_j"] = r.energy.e_per_classify_stage1_j;
  j["e_per_classify_stage2_j"] = r.energy.e_per_classify_stage2_j;
  j["e_per_classify_total_j"] = r.energy.e_per_classify_total_j;
  j["e_per_mac_combined_j"] = r.energy.e_per_mac_combined_j;
  j["r_raw_bps"] = r.rates.r_raw_bps;
  j["r_conv_bps"] = r.rates.r_conv_bps;
  j["r_prop_test_bps"] = r.rates.r_prop_test_bps;
  out << j.dump(2) << '\n';
}

}  // namespace elmsim
