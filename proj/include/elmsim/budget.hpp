#pragma once

#include <iosfwd>

namespace elmsim {

/// Operating point for the energy and telemetry arithmetic. SI units.
struct BudgetInputs {
  int inputs = 40;    // D
  int hidden = 60;    // L
  int outputs = 12;   // C
  double f_class_hz = 50.0;
  double p_analog_w = 360e-9;
  double p_digital_chip_w = 54e-9;
  double e_mac_digital_j = 11e-12;
  double f_bio_hz = 100.0;
  double f_deco_hz = 50.0;
  int address_bits = 8;
  int channel_count = 256;
  int raw_channels = 100;
  double raw_sample_rate_hz = 20e3;
  int raw_bits = 10;

  void validate() const;
};

struct EnergyFigures {
  double e_per_classify_stage1_j = 0.0;
  double e_per_mac_stage1_j = 0.0;
  double e_per_classify_stage2_j = 0.0;
  double e_per_classify_total_j = 0.0;
  double e_per_mac_combined_j = 0.0;
};

struct DataRates {
  double r_raw_bps = 0.0;
  double r_conv_bps = 0.0;
  double r_prop_test_bps = 0.0;
};

struct BudgetReport {
  EnergyFigures energy;
  DataRates rates;
};

/// Stage 1 (chip) energy amortizes the fixed chip power over D*L analog
/// MACs per classification; stage 2 adds C*L digital MACs.
EnergyFigures energy_report(const BudgetInputs& in);

DataRates datarate_report(const BudgetInputs& in);

BudgetReport budget_report(const BudgetInputs& in);

/// ceil(log2(classes)), at least 1.
int bits_for_classes(int classes);

void write_budget_table(std::ostream& out, const BudgetReport& report);
void write_budget_json(std::ostream& out, const BudgetReport& report);

}  // namespace elmsim
