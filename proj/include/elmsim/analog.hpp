#pragma once

#include "elmsim/rng.hpp"
#include "elmsim/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace elmsim {

inline constexpr int kDacCodes = 64;

/// Electrical parameters of the multiplier/neuron fabric. Units are in the
/// field names. Defaults follow the characterized chip where it was measured.
struct AnalogParams {
  int i_ref_na = 8;  // DAC reference current, 6-bit programmable
  double c_f_ff = 100.0;
  double dvdd_v = 0.6;
  double u_t_mv = 26.0;
  double sigma_vt_mv = 16.5;
  double mu_vt_mv = 0.0;
  double t_cnt_ms = 10.0;
  double classification_period_ms = 20.0;
  int counter_bits = 14;
  int fmax_sel = 7;
  double jitter_rel = 0.0005;
  double mirror_snr_db = 43.0;
  double bias_na = 0.0;  // leak current b_i, same for every neuron
  double alpha_supply = 1.0;
  double dnl_lsb = 3.0;  // max |DNL| of the drawn DAC tables; 0 disables
  bool full_cco = false;  // use the two-phase period with reset current
  double i_rst_na = 1000.0;

  // Documentation only; they set the mirror SNR and oscillation range.
  static constexpr double kMirrorCapFF = 400.0;
  static constexpr double kIntegrationCapFF = 400.0;

  void validate() const;

  /// Counter stop value selected by `fmax_sel`: 2^(7+sel), capped to the
  /// counter range 2^bits - 1.
  int stop_value() const;

  /// Counts per nA of input current in the linear (Eq. 6) regime.
  double counts_per_na() const;

  friend bool operator==(const AnalogParams&, const AnalogParams&) = default;
};

/// One frozen fabrication outcome. Weight matrices are hidden x input
/// (`weights(i, j)` mirrors input row j into neuron i).
class ChipInstance {
 public:
  ChipInstance(std::uint64_t seed, AnalogParams params, MatrixXd delta_vt_mv, MatrixXd dnl_lsb);

  std::uint64_t seed() const { return seed_; }
  const AnalogParams& params() const { return params_; }
  int inputs() const { return static_cast<int>(delta_vt_.cols()); }
  int hidden() const { return static_cast<int>(delta_vt_.rows()); }

  const MatrixXd& delta_vt_mv() const { return delta_vt_; }
  const MatrixXd& weights() const { return weights_; }
  /// Per-step DNL, inputs x 64; column 0 is zero.
  const MatrixXd& dnl_lsb() const { return dnl_; }
  /// Output level of every code in LSB, inputs x 64; level(0) = 0.
  const MatrixXd& dac_levels() const { return levels_; }
  const std::vector<bool>& active() const { return active_; }

  /// Same mismatch, different programmable settings (stop value, supply,
  /// reference current, noise levels). Weights are recomputed if U_T changes.
  ChipInstance reprogrammed(const AnalogParams& params) const;

  /// Copy with inactive neurons physically removed: their counters read 0.
  ChipInstance with_active(std::vector<bool> active) const;

  /// Same seed, same mismatch tables; the active mask is not compared.
  bool same_fabric(const ChipInstance& other) const;

 private:
  std::uint64_t seed_;
  AnalogParams params_;
  MatrixXd delta_vt_;
  MatrixXd weights_;
  MatrixXd dnl_;
  MatrixXd levels_;
  std::vector<bool> active_;
};

struct HiddenVector {
  VectorXi counts;
  std::optional<VectorXd> normalized;
};

/// Draws threshold mismatch i.i.d. normal(mu_vt, sigma_vt) and one DNL table
/// per input row. Deterministic in `seed`.
ChipInstance build_chip(std::uint64_t seed, const AnalogParams& params, int inputs, int hidden);

/// DNL steps for one DAC: uniform draws with the mean removed (end-point
/// exact) and rescaled so that max |DNL| equals `bound_lsb`.
VectorXd draw_dnl_table(Engine& rng, double bound_lsb);

double dac_convert(int code, int channel, const ChipInstance& chip);

VectorXd mirror_multiply(const Eigen::Ref<const VectorXd>& i_dac_na, const ChipInstance& chip);
VectorXd mirror_multiply(const Eigen::Ref<const VectorXd>& i_dac_na, const ChipInstance& chip,
                         Engine& noise);

/// Oscillation frequency in Hz for an input current in nA, before the supply factor.
double cco_frequency(double i_in_na, const AnalogParams& params);

int cco_count(double i_in_na, const AnalogParams& params);
int cco_count(double i_in_na, const AnalogParams& params, Engine& noise);

HiddenVector hidden_layer(const Eigen::Ref<const VectorXi>& codes, const ChipInstance& chip);
HiddenVector hidden_layer(const Eigen::Ref<const VectorXi>& codes, const ChipInstance& chip,
                          Engine& noise);

/// h_norm,j = h_j / (sum(h) / sum(x)). Throws DegenerateInputError when
/// either sum is zero.
VectorXd normalize_hidden(const Eigen::Ref<const VectorXd>& h, const Eigen::Ref<const VectorXi>& x);

/// Counts for every tick of a code matrix (ticks x inputs -> ticks x hidden).
MatrixXi hidden_responses(const CodeMatrix& codes, const ChipInstance& chip, Engine* noise);

/// Probes each input row alone with `probe_code` and returns the hidden x
/// inputs count map divided by its median.
MatrixXd mismatch_map(const ChipInstance& chip, int probe_code);

void save_chip(const ChipInstance& chip, const std::filesystem::path& path);
ChipInstance load_chip(const std::filesystem::path& path);

/// `neuron,row,value` table.
void write_matrix_csv(std::ostream& out, const MatrixXd& map);

}  // namespace elmsim
