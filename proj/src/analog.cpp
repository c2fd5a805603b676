#include "elmsim/analog.hpp"

#include "elmsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

namespace elmsim {
namespace {

constexpr std::uint64_t kVtStream = 0x7674;    // "vt"
constexpr std::uint64_t kDnlStream = 0x646e6c;  // "dnl"

MatrixXd weights_from(const MatrixXd& delta_vt, double u_t_mv) {
  return (delta_vt.array() / u_t_mv).exp().matrix();
}

MatrixXd levels_from(const MatrixXd& dnl) {
  MatrixXd levels = MatrixXd::Zero(dnl.rows(), kDacCodes);
  for (Eigen::Index j = 0; j < dnl.rows(); ++j) {
    double raw = 0.0;
    for (int k = 1; k < kDacCodes; ++k) {
      raw += 1.0 + dnl(j, k);
      levels(j, k) = std::max(0.0, raw);
    }
  }
  return levels;
}

double sample_gauss(Engine& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void AnalogParams::validate() const {
  auto fail = [](const std::string& m) { throw UsageError("analog params: " + m); };
  if (i_ref_na < 1 || i_ref_na > 63) fail("i_ref_na must be in [1,63]");
  if (!(c_f_ff > 0.0)) fail("c_f_ff must be > 0");
  if (!(dvdd_v > 0.0)) fail("dvdd_v must be > 0");
  if (!(u_t_mv > 0.0)) fail("u_t_mv must be > 0");
  if (!(sigma_vt_mv >= 0.0)) fail("sigma_vt_mv must be >= 0");
  if (!(t_cnt_ms > 0.0 && t_cnt_ms < classification_period_ms)) {
    fail("t_cnt_ms must be positive and shorter than the classification period");
  }
  if (counter_bits < 1 || counter_bits > 24) fail("counter_bits must be in [1,24]");
  if (fmax_sel < 0 || fmax_sel > 7) fail("fmax_sel is a 3-bit value");
  if (!(jitter_rel >= 0.0)) fail("jitter_rel must be >= 0");
  if (!(bias_na >= 0.0)) fail("bias_na must be >= 0");
  if (!(alpha_supply > 0.0)) fail("alpha_supply must be > 0");
  if (!(dnl_lsb >= 0.0)) fail("dnl_lsb must be >= 0");
  if (full_cco && !(i_rst_na > 0.0)) fail("i_rst_na must be > 0");
}

int AnalogParams::stop_value() const {
  const long long cap = (1LL << counter_bits) - 1;
  return static_cast<int>(std::min(1LL << (7 + fmax_sel), cap));
}

double AnalogParams::counts_per_na() const {
  return 1e-9 * (t_cnt_ms * 1e-3) / (c_f_ff * 1e-15 * dvdd_v);
}

ChipInstance::ChipInstance(std::uint64_t seed, AnalogParams params, MatrixXd delta_vt_mv,
                           MatrixXd dnl_lsb)
    : seed_(seed),
      params_(params),
      delta_vt_(std::move(delta_vt_mv)),
      dnl_(std::move(dnl_lsb)) {
  params_.validate();
  if (dnl_.rows() != delta_vt_.cols() || dnl_.cols() != kDacCodes) {
    throw UsageError("chip: DNL table must be inputs x 64");
  }
  weights_ = weights_from(delta_vt_, params_.u_t_mv);
  levels_ = levels_from(dnl_);
  active_.assign(static_cast<std::size_t>(delta_vt_.rows()), true);
}

ChipInstance ChipInstance::reprogrammed(const AnalogParams& params) const {
  ChipInstance copy(seed_, params, delta_vt_, dnl_);
  copy.active_ = active_;
  return copy;
}

ChipInstance ChipInstance::with_active(std::vector<bool> active) const {
  if (active.size() != active_.size()) throw UsageError("chip: active mask has wrong length");
  ChipInstance copy = *this;
  copy.active_ = std::move(active);
  return copy;
}

bool ChipInstance::same_fabric(const ChipInstance& other) const {
  return seed_ == other.seed_ && delta_vt_ == other.delta_vt_ && dnl_ == other.dnl_;
}

VectorXd draw_dnl_table(Engine& rng, double bound_lsb) {
  VectorXd dnl = VectorXd::Zero(kDacCodes);
  if (bound_lsb <= 0.0) return dnl;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 1; k < kDacCodes; ++k) dnl[k] = u(rng);
  auto steps = dnl.tail(kDacCodes - 1);
  steps.array() -= steps.mean();
  const double peak = steps.cwiseAbs().maxCoeff();
  if (peak > 0.0) steps *= bound_lsb / peak;
  return dnl;
}

ChipInstance build_chip(std::uint64_t seed, const AnalogParams& params, int inputs, int hidden) {
  params.validate();
  if (inputs < 1 || inputs > 128 || hidden < 1 || hidden > 128) {
    throw UsageError("chip: dimensions " + std::to_string(inputs) + "x" + std::to_string(hidden) +
                     " exceed the 128x128 array");
  }
  MatrixXd delta_vt(hidden, inputs);
  Engine vt_rng = make_engine(seed, {kVtStream});
  std::normal_distribution<double> vt(params.mu_vt_mv, params.sigma_vt_mv);
  for (int i = 0; i < hidden; ++i) {
    for (int j = 0; j < inputs; ++j) delta_vt(i, j) = params.sigma_vt_mv > 0.0 ? vt(vt_rng) : params.mu_vt_mv;
  }
  MatrixXd dnl(inputs, kDacCodes);
  for (int j = 0; j < inputs; ++j) {
    Engine rng = make_engine(seed, {kDnlStream, static_cast<std::uint64_t>(j)});
    dnl.row(j) = draw_dnl_table(rng, params.dnl_lsb).transpose();
  }
  return ChipInstance(seed, params, std::move(delta_vt), std::move(dnl));
}

double dac_convert(int code, int channel, const ChipInstance& chip) {
  if (code < 0 || code >= kDacCodes) throw UsageError("dac: code out of range");
  return chip.params().i_ref_na * chip.dac_levels()(channel, code) / kDacCodes;
}

VectorXd mirror_multiply(const Eigen::Ref<const VectorXd>& i_dac_na, const ChipInstance& chip) {
  if (i_dac_na.size() != chip.inputs()) throw UsageError("mirror: input length does not match chip");
  VectorXd out = chip.weights() * i_dac_na;
  out.array() += chip.params().bias_na;
  return out;
}

VectorXd mirror_multiply(const Eigen::Ref<const VectorXd>& i_dac_na, const ChipInstance& chip,
                         Engine& noise) {
  VectorXd out = mirror_multiply(i_dac_na, chip);
  const double rel = std::pow(10.0, -chip.params().mirror_snr_db / 20.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = std::max(0.0, out[i] + rel * out[i] * sample_gauss(noise));
  }
  return out;
}

double cco_frequency(double i_in_na, const AnalogParams& p) {
  if (i_in_na <= 0.0) return 0.0;
  const double cv = p.c_f_ff * 1e-15 * p.dvdd_v;
  const double i_in = i_in_na * 1e-9;
  if (!p.full_cco) return i_in / cv;
  const double i_rst = p.i_rst_na * 1e-9;
  if (i_in >= i_rst) return 0.0;
  return 1.0 / (cv / i_in + cv / (i_rst - i_in));
}

namespace {
int finish_count(double cycles, const AnalogParams& p) {
  if (!(cycles > 0.0)) return 0;
  const double stop = p.stop_value();
  return static_cast<int>(std::min(stop, std::floor(cycles)));
}
}  // namespace

int cco_count(double i_in_na, const AnalogParams& p) {
  return finish_count(p.alpha_supply * cco_frequency(i_in_na, p) * p.t_cnt_ms * 1e-3, p);
}

int cco_count(double i_in_na, const AnalogParams& p, Engine& noise) {
  const double jitter = 1.0 + p.jitter_rel * sample_gauss(noise);
  return finish_count(p.alpha_supply * cco_frequency(i_in_na, p) * p.t_cnt_ms * 1e-3 * jitter, p);
}

namespace {
VectorXd dac_currents(const Eigen::Ref<const VectorXi>& codes, const ChipInstance& chip) {
  if (codes.size() != chip.inputs()) throw UsageError("hidden layer: input length does not match chip");
  VectorXd i_dac(codes.size());
  for (Eigen::Index j = 0; j < codes.size(); ++j) {
    i_dac[j] = dac_convert(codes[j], static_cast<int>(j), chip);
  }
  return i_dac;
}

HiddenVector hidden_impl(const Eigen::Ref<const VectorXi>& codes, const ChipInstance& chip,
                         Engine* noise) {
  const VectorXd i_dac = dac_currents(codes, chip);
  const VectorXd i_in = noise ? mirror_multiply(i_dac, chip, *noise) : mirror_multiply(i_dac, chip);
  HiddenVector h;
  h.counts.resize(chip.hidden());
  for (int i = 0; i < chip.hidden(); ++i) {
    const int c = noise ? cco_count(i_in[i], chip.params(), *noise) : cco_count(i_in[i], chip.params());
    h.counts[i] = chip.active()[static_cast<std::size_t>(i)] ? c : 0;
  }
  return h;
}
}  // namespace

HiddenVector hidden_layer(const Eigen::Ref<const VectorXi>& codes, const ChipInstance& chip) {
  return hidden_impl(codes, chip, nullptr);
}

HiddenVector hidden_layer(const Eigen::Ref<const VectorXi>& codes, const ChipInstance& chip,
                          Engine& noise) {
  return hidden_impl(codes, chip, &noise);
}

VectorXd normalize_hidden(const Eigen::Ref<const VectorXd>& h, const Eigen::Ref<const VectorXi>& x) {
  const double sum_h = h.sum();
  const double sum_x = x.cast<double>().sum();
  if (sum_h <= 0.0 || sum_x <= 0.0) {
    throw DegenerateInputError("normalize_hidden: sum of hidden outputs and inputs must be positive");
  }
  return h / (sum_h / sum_x);
}

MatrixXi hidden_responses(const CodeMatrix& codes, const ChipInstance& chip, Engine* noise) {
  MatrixXi out(codes.rows(), chip.hidden());
  for (Eigen::Index k = 0; k < codes.rows(); ++k) {
    const VectorXi x = codes.row(k).transpose();
    out.row(k) = hidden_impl(x, chip, noise).counts.transpose();
  }
  return out;
}

MatrixXd mismatch_map(const ChipInstance& chip, int probe_code) {
  if (probe_code < 1 || probe_code >= kDacCodes) throw UsageError("mismatch map: probe code must be in [1,63]");
  MatrixXd map(chip.hidden(), chip.inputs());
  VectorXi x = VectorXi::Zero(chip.inputs());
  for (int j = 0; j < chip.inputs(); ++j) {
    x[j] = probe_code;
    map.col(j) = hidden_layer(x, chip).counts.cast<double>();
    x[j] = 0;
  }
  std::vector<double> values(map.data(), map.data() + map.size());
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double median = *mid;
  if (values.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(values.begin(), mid));
  }
  if (median <= 0.0) throw DegenerateInputError("mismatch map: median count is zero");
  return map / median;
}

void save_chip(const ChipInstance& chip, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot write");
  const AnalogParams& p = chip.params();
  out << "elmsim-chip 1\n";
  out << "seed " << chip.seed() << '\n';
  out << "inputs " << chip.inputs() << '\n';
  out << "hidden " << chip.hidden() << '\n';
  out << "i_ref_na " << p.i_ref_na << '\n';
  out << "c_f_ff " << fmt(p.c_f_ff) << '\n';
  out << "dvdd_v " << fmt(p.dvdd_v) << '\n';
  out << "u_t_mv " << fmt(p.u_t_mv) << '\n';
  out << "sigma_vt_mv " << fmt(p.sigma_vt_mv) << '\n';
  out << "mu_vt_mv " << fmt(p.mu_vt_mv) << '\n';
  out << "t_cnt_ms " << fmt(p.t_cnt_ms) << '\n';
  out << "classification_period_ms " << fmt(p.classification_period_ms) << '\n';
  out << "counter_bits " << p.counter_bits << '\n';
  out << "fmax_sel " << p.fmax_sel << '\n';
  out << "jitter_rel " << fmt(p.jitter_rel) << '\n';
  out << "mirror_snr_db " << fmt(p.mirror_snr_db) << '\n';
  out << "bias_na " << fmt(p.bias_na) << '\n';
  out << "alpha_supply " << fmt(p.alpha_supply) << '\n';
  out << "dnl_lsb " << fmt(p.dnl_lsb) << '\n';
  out << "full_cco " << (p.full_cco ? 1 : 0) << '\n';
  out << "i_rst_na " << fmt(p.i_rst_na) << '\n';
  out << "delta_vt_mv\n";
  for (Eigen::Index i = 0; i < chip.delta_vt_mv().rows(); ++i) {
    for (Eigen::Index j = 0; j < chip.delta_vt_mv().cols(); ++j) {
      out << (j ? "," : "") << fmt(chip.delta_vt_mv()(i, j));
    }
    out << '\n';
  }
  out << "dnl_lsb_table\n";
  for (Eigen::Index j = 0; j < chip.dnl_lsb().rows(); ++j) {
    for (Eigen::Index k = 0; k < chip.dnl_lsb().cols(); ++k) {
      out << (k ? "," : "") << fmt(chip.dnl_lsb()(j, k));
    }
    out << '\n';
  }
  out << "end\n";
}

ChipInstance load_chip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot open");
  int line_no = 0;
  std::string line;
  auto next = [&]() {
    if (!std::getline(in, line)) {
      throw DataError(DataErrorKind::kMalformedRow, path.string(), line_no, "unexpected end of file");
    }
    ++line_no;
    return line;
  };
  auto bad = [&](const std::string& what) {
    return DataError(DataErrorKind::kMalformedRow, path.string(), line_no, what);
  };
  if (next() != "elmsim-chip 1") throw bad("unsupported chip file version");

  std::uint64_t seed = 0;
  int inputs = 0, hidden = 0;
  AnalogParams p;
  while (next() != "delta_vt_mv") {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    bool ok = true;
    if (key == "seed") ok = static_cast<bool>(ss >> seed);
    else if (key == "inputs") ok = static_cast<bool>(ss >> inputs);
    else if (key == "hidden") ok = static_cast<bool>(ss >> hidden);
    else if (key == "i_ref_na") ok = static_cast<bool>(ss >> p.i_ref_na);
    else if (key == "c_f_ff") ok = static_cast<bool>(ss >> p.c_f_ff);
    else if (key == "dvdd_v") ok = static_cast<bool>(ss >> p.dvdd_v);
    else if (key == "u_t_mv") ok = static_cast<bool>(ss >> p.u_t_mv);
    else if (key == "sigma_vt_mv") ok = static_cast<bool>(ss >> p.sigma_vt_mv);
    else if (key == "mu_vt_mv") ok = static_cast<bool>(ss >> p.mu_vt_mv);
    else if (key == "t_cnt_ms") ok = static_cast<bool>(ss >> p.t_cnt_ms);
    else if (key == "classification_period_ms") ok = static_cast<bool>(ss >> p.classification_period_ms);
    else if (key == "counter_bits") ok = static_cast<bool>(ss >> p.counter_bits);
    else if (key == "fmax_sel") ok = static_cast<bool>(ss >> p.fmax_sel);
    else if (key == "jitter_rel") ok = static_cast<bool>(ss >> p.jitter_rel);
    else if (key == "mirror_snr_db") ok = static_cast<bool>(ss >> p.mirror_snr_db);
    else if (key == "bias_na") ok = static_cast<bool>(ss >> p.bias_na);
    else if (key == "alpha_supply") ok = static_cast<bool>(ss >> p.alpha_supply);
    else if (key == "dnl_lsb") ok = static_cast<bool>(ss >> p.dnl_lsb);
    else if (key == "full_cco") { int v = 0; ok = static_cast<bool>(ss >> v); p.full_cco = v != 0; }
    else if (key == "i_rst_na") ok = static_cast<bool>(ss >> p.i_rst_na);
    else throw bad("unknown key '" + key + "'");
    if (!ok) throw bad("bad value for '" + key + "'");
  }
  if (inputs < 1 || hidden < 1) throw bad("missing dimensions");

  auto read_row = [&](Eigen::Index cols) {
    next();
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) throw bad("bad number '" + cell + "'");
      vals.push_back(v);
      pos = comma + 1;
    }
    if (static_cast<Eigen::Index>(vals.size()) != cols) throw bad("wrong column count");
    return vals;
  };
  MatrixXd dvt(hidden, inputs);
  for (int i = 0; i < hidden; ++i) {
    const auto row = read_row(inputs);
    for (int j = 0; j < inputs; ++j) dvt(i, j) = row[static_cast<std::size_t>(j)];
  }
  if (next() != "dnl_lsb_table") throw bad("expected dnl_lsb_table");
  MatrixXd dnl(inputs, kDacCodes);
  for (int j = 0; j < inputs; ++j) {
    const auto row = read_row(kDacCodes);
    for (int k = 0; k < kDacCodes; ++k) dnl(j, k) = row[static_cast<std::size_t>(k)];
  }
  if (next() != "end") throw bad("expected end");
  try {
    return ChipInstance(seed, p, std::move(dvt), std::move(dnl));
  } catch (const UsageError& e) {
    throw bad(e.what());
  }
}

void write_matrix_csv(std::ostream& out, const MatrixXd& map) {
  out << "neuron,row,value\n";
  for (Eigen::Index i = 0; i < map.rows(); ++i) {
    for (Eigen::Index j = 0; j < map.cols(); ++j) out << i << ',' << j << ',' << fmt(map(i, j)) << '\n';
  }
}

}  // namespace elmsim
