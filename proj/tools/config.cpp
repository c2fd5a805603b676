#include "config.hpp"

#include "elmsim/errors.hpp"
#include "elmsim/rng.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

namespace elmsim::cli {

namespace {

// Seeds derived from the master seed when left at `auto`.
const char* const kDerivedSeeds[] = {"gen.seed", "chip.seed", "noise.seed", "split.seed"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    throw UsageError("config: " + key + " = '" + text + "' is not a valid number");
  }
  return v;
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"seed", "1", "master seed; every `auto` seed below is derived from it"},
      {"gen.seed", "auto", "synthetic spike generator"},
      {"chip.seed", "auto", "chip fabrication draw (mismatch, DAC DNL)"},
      {"noise.seed", "auto", "mirror noise and CCO jitter streams"},
      {"split.seed", "auto", "train/test split"},

      {"synth.neurons", "40", "synthetic channels q"},
      {"synth.classes", "12", "movement classes M"},
      {"synth.baseline_hz", "10", "untuned firing rate"},
      {"synth.peak_hz", "100", "rate of a neuron at its preferred class"},
      {"synth.tuning_width", "3", "circular class distance at which tuning vanishes"},
      {"synth.ramp_start_ms", "-150", "ramp start relative to onset"},
      {"synth.ramp_peak_ms", "-50", "ramp reaches the tuned peak"},
      {"synth.decay_start_ms", "100", "tuned peak starts decaying"},
      {"synth.decay_end_ms", "200", "back to baseline"},
      {"synth.onset_ms", "1000", "movement onset from trial start"},
      {"synth.duration_ms", "2000", "trial length"},
      {"synth.trials_per_class", "30", ""},

      {"frontend.channels", "30", "input channels n fed to the chip (first n of the dataset)"},
      {"frontend.taps", "1", "TDBDI taps p per channel; D = n * p"},
      {"frontend.sdl", "0", "delay select for delayed rows (0..4 -> 1..5 ticks)"},
      {"frontend.tick_us", "20000", "sub-window length t_s"},

      {"chip.hidden", "60", "hidden neurons L"},
      {"chip.probe_code", "32", "input code used by the mismatch map dump"},
      {"analog.i_ref_na", "8", "DAC full-scale reference, 1..63 nA"},
      {"analog.c_f_ff", "100", "CCO feedback capacitance"},
      {"analog.dvdd_v", "0.6", "digital supply"},
      {"analog.u_t_mv", "26", "thermal voltage"},
      {"analog.sigma_vt_mv", "16.5", "threshold mismatch std"},
      {"analog.mu_vt_mv", "0", "threshold mismatch mean"},
      {"analog.t_cnt_ms", "10", "counting window"},
      {"analog.classification_period_ms", "20", ""},
      {"analog.counter_bits", "14", ""},
      {"analog.fmax_sel", "7", "counter stop value 2^(7+sel), capped at the counter range"},
      {"analog.jitter_rel", "0.0005", "CCO relative jitter std"},
      {"analog.mirror_snr_db", "43", "mirror output SNR"},
      {"analog.bias_na", "0", "neuron leak current"},
      {"analog.alpha_supply", "1", "supply scaling of the oscillation frequency"},
      {"analog.dnl_lsb", "3", "max |DNL| of the input DACs"},
      {"analog.full_cco", "false", "two-phase CCO period with reset current"},
      {"analog.i_rst_na", "1000", "reset current of the two-phase model"},

      {"features.noise", "true", "mirror noise and CCO jitter on"},
      {"features.normalize", "false", "hidden-layer normalization h * sum(x) / sum(h)"},

      {"trapezoid.t0_ms", "800", "onset membership starts rising"},
      {"trapezoid.t1_ms", "900", "membership reaches 1"},
      {"trapezoid.t2_ms", "1100", "membership starts falling"},
      {"trapezoid.t3_ms", "1200", "membership back to 0"},
      {"trapezoid.reference_onset_ms", "1000", "onset the breakpoints are anchored to"},

      {"train.method", "T1", "T1 (least squares) or T2 (L1 pruning)"},
      {"train.ridge", "0", "T1 ridge; 0 gives the min-norm solution"},
      {"train.policy", "unambiguous", "unambiguous | every_tick"},
      {"train.l1_lambda", "", "T2 absolute penalty; empty uses train.target_sparsity"},
      {"train.target_sparsity", "0.5", "T2 max fraction of hidden neurons kept"},
      {"train.refit", "true", "T2 least-squares refit on the surviving neurons"},
      {"train.scale_columns", "true", "T2 penalizes unit-norm hidden columns"},
      {"train.max_iter", "0", "T2 homotopy iteration cap; 0 picks one from the size"},

      {"split.test_fraction", "0.25", "held-out fraction per class"},
      {"eval.split", "test", "test | train | all"},
      {"eval.prune", "true", "switch off neurons outside the model support"},

      {"decoder.theta", "0.5", "onset threshold"},
      {"decoder.lambda", "6", "highs needed in the tracking window"},
      {"decoder.tau", "10", "tracking window in ticks"},
      {"decoder.refractory_ms", "140", ""},
      {"decoder.tolerance_ms", "150", "onset detection window half-width for scoring"},

      {"stream.trial", "", "trial id; empty picks the first trial of eval.split"},

      {"roc.theta_min", "-0.25", ""},
      {"roc.theta_max", "1.25", ""},
      {"roc.points", "20", ""},

      {"sweep.hidden", "10,20,40,60", "L grid"},
      {"sweep.channels", "30", "n grid"},
      {"sweep.taps", "1", "p grid"},
      {"sweep.methods", "T1", "method grid (T1,T2)"},
      {"sweep.seeds", "5", "chip seeds per grid point, derived from chip.seed"},
      {"sweep.threads", "0", "worker threads; 0 uses the hardware count"},

      {"budget.inputs", "40", "D"},
      {"budget.hidden", "60", "L"},
      {"budget.outputs", "12", "C"},
      {"budget.f_class_hz", "50", ""},
      {"budget.p_analog_w", "3.6e-07", ""},
      {"budget.p_digital_chip_w", "5.4e-08", ""},
      {"budget.e_mac_digital_j", "1.1e-11", ""},
      {"budget.f_bio_hz", "100", ""},
      {"budget.f_deco_hz", "50", ""},
      {"budget.address_bits", "8", ""},
      {"budget.channel_count", "256", ""},
      {"budget.raw_channels", "100", ""},
      {"budget.raw_sample_rate_hz", "20000", ""},
      {"budget.raw_bits", "10", ""},
      {"budget.format", "table", "table | json"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const KeySpec& k : config_keys()) values_[k.key] = k.fallback;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("config: unknown key '" + key + "'");
  it->second = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path.string());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config: " + path.string() + ":" + std::to_string(n) + ": expected key = value");
    }
    try {
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::resolve() {
  const std::uint64_t master = get_u64("seed");
  for (const char* key : kDerivedSeeds) {
    if (values_[key] == "auto") values_[key] = std::to_string(derive_seed(master, {fnv1a(key)}));
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("config: unknown key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  if (get(key) == "auto") throw UsageError("config: " + key + " is unresolved");
  return parse_number<std::uint64_t>(key, get(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config: " + key + " = '" + v + "' is not a boolean");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw UsageError("config: " + key + " is an empty list");
  return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& s : get_list(key)) out.push_back(parse_number<int>(key, s));
  return out;
}

void RunConfig::echo(std::ostream& out, const std::string& prefix) const {
  for (const auto& [k, v] : values_) out << prefix << k << " = " << v << '\n';
}

SynthParams RunConfig::synth() const {
  SynthParams p;
  p.neurons = get_int("synth.neurons");
  p.classes = get_int("synth.classes");
  p.baseline_rate_hz = get_double("synth.baseline_hz");
  p.peak_rate_hz = get_double("synth.peak_hz");
  p.tuning_width = get_double("synth.tuning_width");
  p.ramp_start_ms = get_double("synth.ramp_start_ms");
  p.ramp_peak_ms = get_double("synth.ramp_peak_ms");
  p.decay_start_ms = get_double("synth.decay_start_ms");
  p.decay_end_ms = get_double("synth.decay_end_ms");
  p.onset_ms = get_double("synth.onset_ms");
  p.trial_duration_ms = get_double("synth.duration_ms");
  p.trials_per_class = get_int("synth.trials_per_class");
  p.seed = get_u64("gen.seed");
  p.validate();
  return p;
}

AnalogParams RunConfig::analog() const {
  AnalogParams p;
  p.i_ref_na = get_int("analog.i_ref_na");
  p.c_f_ff = get_double("analog.c_f_ff");
  p.dvdd_v = get_double("analog.dvdd_v");
  p.u_t_mv = get_double("analog.u_t_mv");
  p.sigma_vt_mv = get_double("analog.sigma_vt_mv");
  p.mu_vt_mv = get_double("analog.mu_vt_mv");
  p.t_cnt_ms = get_double("analog.t_cnt_ms");
  p.classification_period_ms = get_double("analog.classification_period_ms");
  p.counter_bits = get_int("analog.counter_bits");
  p.fmax_sel = get_int("analog.fmax_sel");
  p.jitter_rel = get_double("analog.jitter_rel");
  p.mirror_snr_db = get_double("analog.mirror_snr_db");
  p.bias_na = get_double("analog.bias_na");
  p.alpha_supply = get_double("analog.alpha_supply");
  p.dnl_lsb = get_double("analog.dnl_lsb");
  p.full_cco = get_bool("analog.full_cco");
  p.i_rst_na = get_double("analog.i_rst_na");
  p.validate();
  return p;
}

FrontendConfig RunConfig::frontend() const {
  const int taps = get_int("frontend.taps");
  if (taps < 1) throw UsageError("config: frontend.taps must be >= 1");
  FrontendConfig f = FrontendConfig::tdbdi(get_int("frontend.channels"), taps, get_int("frontend.sdl"));
  f.tick_us = get_int("frontend.tick_us");
  f.validate();
  return f;
}

DecoderParams RunConfig::decoder() const {
  DecoderParams d;
  d.theta = get_double("decoder.theta");
  d.lambda = get_int("decoder.lambda");
  d.tau = get_int("decoder.tau");
  d.refractory_ms = get_double("decoder.refractory_ms");
  d.tolerance_ms = get_double("decoder.tolerance_ms");
  d.validate();
  return d;
}

TrapezoidParams RunConfig::trapezoid() const {
  TrapezoidParams t;
  t.t0_ms = get_double("trapezoid.t0_ms");
  t.t1_ms = get_double("trapezoid.t1_ms");
  t.t2_ms = get_double("trapezoid.t2_ms");
  t.t3_ms = get_double("trapezoid.t3_ms");
  t.reference_onset_ms = get_double("trapezoid.reference_onset_ms");
  t.validate();
  return t;
}

FeatureOptions RunConfig::features() const {
  FeatureOptions f;
  f.noise = get_bool("features.noise");
  f.normalize = get_bool("features.normalize");
  f.noise_seed = get_u64("noise.seed");
  return f;
}

SamplePolicy RunConfig::policy() const {
  const std::string& p = get("train.policy");
  if (p == "unambiguous") return SamplePolicy::kUnambiguous;
  if (p == "every_tick") return SamplePolicy::kEveryTick;
  throw UsageError("config: train.policy must be unambiguous or every_tick");
}

T2Options RunConfig::t2() const {
  T2Options o;
  if (has_value("train.l1_lambda")) {
    o.l1_lambda = get_double("train.l1_lambda");
  } else {
    o.target_sparsity = get_double("train.target_sparsity");
  }
  o.refit = get_bool("train.refit");
  o.scale_columns = get_bool("train.scale_columns");
  o.max_iter = get_int("train.max_iter");
  return o;
}

BudgetInputs RunConfig::budget() const {
  BudgetInputs b;
  b.inputs = get_int("budget.inputs");
  b.hidden = get_int("budget.hidden");
  b.outputs = get_int("budget.outputs");
  b.f_class_hz = get_double("budget.f_class_hz");
  b.p_analog_w = get_double("budget.p_analog_w");
  b.p_digital_chip_w = get_double("budget.p_digital_chip_w");
  b.e_mac_digital_j = get_double("budget.e_mac_digital_j");
  b.f_bio_hz = get_double("budget.f_bio_hz");
  b.f_deco_hz = get_double("budget.f_deco_hz");
  b.address_bits = get_int("budget.address_bits");
  b.channel_count = get_int("budget.channel_count");
  b.raw_channels = get_int("budget.raw_channels");
  b.raw_sample_rate_hz = get_double("budget.raw_sample_rate_hz");
  b.raw_bits = get_int("budget.raw_bits");
  b.validate();
  return b;
}

}  // namespace elmsim::cli
