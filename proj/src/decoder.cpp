#include "elmsim/decoder.hpp"

#include "elmsim/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace elmsim {

using nlohmann::json;

void DecoderParams::validate() const {
  if (tau < 1) throw UsageError("decoder: tau must be >= 1");
  if (lambda < 1 || lambda > tau) throw UsageError("decoder: need 1 <= lambda <= tau");
  if (!(refractory_ms >= 0.0)) throw UsageError("decoder: refractory period must be >= 0");
  if (!(tolerance_ms >= 0.0)) throw UsageError("decoder: tolerance must be >= 0");
}

int argmax_label(const Eigen::Ref<const VectorXd>& o) {
  if (o.size() == 0) throw UsageError("argmax of an empty output vector");
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < o.size(); ++k) {
    if (o[k] > o[best]) best = k;
  }
  return static_cast<int>(best) + 1;
}

TypeDecision classify_type(const Eigen::Ref<const VectorXd>& h, const MatrixXd& beta) {
  if (h.size() != beta.rows()) throw UsageError("classify_type: h does not match beta");
  if (beta.cols() < 2) throw UsageError("classify_type: beta needs at least one class and the onset column");
  TypeDecision d;
  d.outputs = beta.transpose() * h;
  d.label = argmax_label(d.outputs.head(beta.cols() - 1));
  return d;
}

int onset_primary(double onset_output, double theta) { return onset_output > theta ? 1 : 0; }

int refractory_ticks(double refractory_ms, Microseconds tick_us) {
  return static_cast<int>(std::llround(refractory_ms * 1000.0 / static_cast<double>(tick_us)));
}

OnsetTracker::OnsetTracker(int lambda, int tau, int refractory)
    : lambda_(lambda), tau_(tau), refractory_(refractory), ring_(static_cast<std::size_t>(std::max(tau, 1)), 0) {
  if (tau < 1 || lambda < 1 || lambda > tau) throw UsageError("tracker: need 1 <= lambda <= tau");
  if (refractory < 0) throw UsageError("tracker: refractory must be >= 0");
}

int OnsetTracker::step(int g) {
  const std::uint8_t bit = g ? 1 : 0;
  count_ += bit - ring_[static_cast<std::size_t>(pos_)];
  ring_[static_cast<std::size_t>(pos_)] = bit;
  pos_ = (pos_ + 1) % tau_;
  const int track = (count_ >= lambda_ && tick_ >= refractory_until_) ? 1 : 0;
  detection_ = track == 1 && prev_track_ == 0;
  if (detection_) refractory_until_ = tick_ + refractory_;
  prev_track_ = track;
  ++tick_;
  return track;
}

DecoderRuntime::DecoderRuntime(const DecoderModel& model, Microseconds tick_us)
    : model_(&model),
      tick_us_(tick_us),
      tracker_(model.decoder.lambda, model.decoder.tau, refractory_ticks(model.decoder.refractory_ms, tick_us)) {
  model.decoder.validate();
}

DecodeOutput DecoderRuntime::step(const Eigen::Ref<const VectorXd>& h) {
  const TypeDecision type = classify_type(h, model_->weights.beta);
  DecodeOutput out;
  out.tick = tick_;
  out.time_ms = tick_time_ms(tick_, tick_us_);
  out.outputs = type.outputs;
  out.s = type.label;
  out.g = onset_primary(type.outputs[type.outputs.size() - 1], model_->decoder.theta);
  out.g_track = tracker_.step(out.g);
  out.detection = tracker_.detection();
  out.f = out.g_track * out.s;
  ++tick_;
  return out;
}

std::vector<DecodeOutput> decode_features(const MatrixXd& features, const DecoderModel& model,
                                          Microseconds tick_us) {
  DecoderRuntime runtime(model, tick_us);
  std::vector<DecodeOutput> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index k = 0; k < features.rows(); ++k) out.push_back(runtime.step(features.row(k).transpose()));
  return out;
}

ChipInstance deployed_chip(const ChipInstance& chip, const DecoderModel& model, bool prune) {
  if (chip.hidden() != model.hidden()) {
    throw UsageError("model has " + std::to_string(model.hidden()) + " hidden neurons but the chip has " +
                     std::to_string(chip.hidden()));
  }
  AnalogParams p = chip.params();
  p.fmax_sel = model.fmax_sel;
  ChipInstance out = chip.reprogrammed(p);
  if (prune) out = out.with_active(model.weights.support);
  return out;
}

std::vector<DecodeOutput> decode_stream(const Trial& trial, int channel_count, const ChipInstance& chip,
                                        const DecoderModel& model, const FeatureOptions& options) {
  FeatureOptions opts = options;
  opts.normalize = model.normalize;
  const TrialFeatures f = trial_features(trial, channel_count, deployed_chip(chip, model), model.frontend, opts);
  return decode_features(f.features, model, model.frontend.tick_us);
}

void write_stream_csv(std::ostream& out, const std::vector<DecodeOutput>& stream, int classes) {
  out << "tick_ms";
  for (int k = 1; k <= classes + 1; ++k) out << ",o_" << k;
  out << ",s,G,G_track,F\n";
  char buf[40];
  for (const DecodeOutput& d : stream) {
    std::snprintf(buf, sizeof buf, "%.17g", d.time_ms);
    out << buf;
    for (Eigen::Index k = 0; k < d.outputs.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", d.outputs[k]);
      out << ',' << buf;
    }
    out << ',' << d.s << ',' << d.g << ',' << d.g_track << ',' << d.f << '\n';
  }
}

EvalReport score_trials(const SpikeDataset& dataset, const std::vector<std::vector<DecodeOutput>>& streams,
                        const DecoderModel& model) {
  if (dataset.trials.empty()) throw UsageError("evaluate: test set is empty");
  if (streams.size() != dataset.trials.size()) throw UsageError("evaluate: one stream per trial required");
  const int M = dataset.class_count;
  EvalReport rep;
  rep.trials = static_cast<int>(dataset.trials.size());
  rep.confusion = MatrixXi::Zero(M, M);
  int correct = 0, detected = 0;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const Trial& trial = dataset.trials[i];
    const double onset_ms = static_cast<double>(trial.onset_us) / 1000.0;
    std::vector<int> votes(static_cast<std::size_t>(M), 0);
    int plateau = 0;
    for (const DecodeOutput& d : streams[i]) {
      if (trial_membership(d.time_ms, onset_ms, model.trapezoid) == 1.0 && d.s >= 1 && d.s <= M) {
        ++votes[static_cast<std::size_t>(d.s - 1)];
        ++plateau;
      }
    }
    if (plateau == 0) {
      for (const DecodeOutput& d : streams[i]) {
        if (d.s >= 1 && d.s <= M) ++votes[static_cast<std::size_t>(d.s - 1)];
      }
    }
    const int predicted =
        static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin()) + 1;
    ++rep.confusion(trial.label - 1, predicted - 1);
    if (predicted == trial.label) ++correct;

    bool hit = false;
    for (const DecodeOutput& d : streams[i]) {
      if (!d.detection) continue;
      if (std::abs(d.time_ms - onset_ms) <= model.decoder.tolerance_ms) {
        if (!hit) rep.latencies_ms.push_back(d.time_ms - onset_ms);
        hit = true;
      } else {
        ++rep.false_positives;
      }
    }
    if (hit) ++detected;
  }
  rep.type_accuracy = static_cast<double>(correct) / rep.trials;
  rep.onset_tpr = static_cast<double>(detected) / rep.trials;
  rep.fp_per_trial = static_cast<double>(rep.false_positives) / rep.trials;
  rep.metadata["type_scoring"] = "per-trial majority vote over the onset plateau";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", model.decoder.tolerance_ms);
  rep.metadata["onset_window_ms"] = buf;
  return rep;
}

EvalReport evaluate(const SpikeDataset& dataset, const DecoderModel& model, const ChipInstance& chip,
                    const FeatureOptions& options) {
  if (dataset.trials.empty()) throw UsageError("evaluate: test set is empty");
  std::vector<std::vector<DecodeOutput>> streams;
  streams.reserve(dataset.trials.size());
  for (const Trial& t : dataset.trials) streams.push_back(decode_stream(t, dataset.channel_count, chip, model, options));
  return score_trials(dataset, streams, model);
}

void write_eval_json(std::ostream& out, const EvalReport& r) {
  json j;
  j["trials"] = r.trials;
  j["type_accuracy"] = r.type_accuracy;
  json conf = json::array();
  for (Eigen::Index a = 0; a < r.confusion.rows(); ++a) {
    json row = json::array();
    for (Eigen::Index b = 0; b < r.confusion.cols(); ++b) row.push_back(r.confusion(a, b));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  j["onset_tpr"] = r.onset_tpr;
  j["false_positives"] = r.false_positives;
  j["fp_per_trial"] = r.fp_per_trial;
  j["latencies_ms"] = r.latencies_ms;
  j["metadata"] = r.metadata;
  out << j.dump(2) << '\n';
}

OnsetTraces onset_traces(const SpikeDataset& dataset, const DecoderModel& model, const ChipInstance& chip,
                         const FeatureOptions& options) {
  OnsetTraces tr;
  tr.tick_us = model.frontend.tick_us;
  FeatureOptions opts = options;
  opts.normalize = model.normalize;
  const ChipInstance deployed = deployed_chip(chip, model);
  const VectorXd onset_weights = model.weights.beta.col(model.weights.beta.cols() - 1);
  for (const Trial& t : dataset.trials) {
    const TrialFeatures f = trial_features(t, dataset.channel_count, deployed, model.frontend, opts);
    tr.outputs.push_back(f.features * onset_weights);
    tr.onset_ms.push_back(static_cast<double>(t.onset_us) / 1000.0);
  }
  return tr;
}

std::vector<RocPoint> roc_from_traces(const OnsetTraces& traces, std::vector<double> thetas,
                                      const DecoderParams& params) {
  if (thetas.empty()) throw UsageError("roc: threshold grid is empty");
  if (traces.outputs.empty()) throw UsageError("roc: no trials");
  params.validate();
  std::sort(thetas.begin(), thetas.end());
  const int refr = refractory_ticks(params.refractory_ms, traces.tick_us);
  std::vector<RocPoint> points;
  for (double theta : thetas) {
    int detected = 0, fps = 0;
    for (std::size_t i = 0; i < traces.outputs.size(); ++i) {
      OnsetTracker tracker(params.lambda, params.tau, refr);
      bool hit = false;
      const VectorXd& o = traces.outputs[i];
      for (Eigen::Index k = 0; k < o.size(); ++k) {
        tracker.step(onset_primary(o[k], theta));
        if (!tracker.detection()) continue;
        const double t = tick_time_ms(static_cast<int>(k), traces.tick_us);
        if (std::abs(t - traces.onset_ms[i]) <= params.tolerance_ms) {
          hit = true;
        } else {
          ++fps;
        }
      }
      if (hit) ++detected;
    }
    const double n = static_cast<double>(traces.outputs.size());
    points.push_back({theta, detected / n, fps / n});
  }
  return points;
}

std::vector<RocPoint> roc_sweep(const SpikeDataset& dataset, const DecoderModel& model,
                                const ChipInstance& chip, const FeatureOptions& options,
                                std::vector<double> thetas) {
  return roc_from_traces(onset_traces(dataset, model, chip, options), std::move(thetas), model.decoder);
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& points) {
  out << "theta,tpr,fp_per_trial\n";
  char buf[96];
  for (const RocPoint& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.theta, p.tpr, p.fp_per_trial);
    out << buf;
  }
}

// ---- model file ----

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd vector_from_json(const json& a) {
  VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

void save_model(const DecoderModel& m, const std::filesystem::path& path) {
  json j;
  j["format"] = "elmsim-model";
  j["version"] = 1;
  j["classes"] = m.classes();
  j["hidden"] = m.hidden();
  j["beta"] = matrix_to_json(m.weights.beta);
  j["support"] = m.weights.support;
  j["decoder"] = {{"theta", m.decoder.theta},
                  {"lambda", m.decoder.lambda},
                  {"tau", m.decoder.tau},
                  {"refractory_ms", m.decoder.refractory_ms},
                  {"tolerance_ms", m.decoder.tolerance_ms}};
  json rows = json::array();
  for (const RowConfig& r : m.frontend.rows) {
    rows.push_back({{"delayed", r.delayed}, {"sdl", r.sdl}, {"channel", r.channel}});
  }
  j["frontend"] = {{"tick_us", m.frontend.tick_us}, {"rows", rows}};
  j["trapezoid"] = {{"t0_ms", m.trapezoid.t0_ms},
                    {"t1_ms", m.trapezoid.t1_ms},
                    {"t2_ms", m.trapezoid.t2_ms},
                    {"t3_ms", m.trapezoid.t3_ms},
                    {"reference_onset_ms", m.trapezoid.reference_onset_ms}};
  j["normalize"] = m.normalize;
  j["fmax_sel"] = m.fmax_sel;
  j["chip_seed"] = m.chip_seed;
  j["channel_count"] = m.channel_count;
  j["hyperparameters"] = m.hyperparameters;
  const TrainingReport& r = m.weights.report;
  j["report"] = {{"method", r.method},
                 {"residuals", vector_to_json(r.residuals)},
                 {"support_size", r.support_size},
                 {"sparsity", r.sparsity},
                 {"iterations", r.iterations},
                 {"lambdas", vector_to_json(r.lambdas)},
                 {"degenerate", r.degenerate}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot write");
  out << j.dump(2) << '\n';
}

DecoderModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot open");
  try {
    const json j = json::parse(in);
    if (j.at("format") != "elmsim-model" || j.at("version") != 1) {
      throw DataError(DataErrorKind::kMalformedRow, path.string(), 0, "unsupported model format");
    }
    DecoderModel m;
    const int L = j.at("hidden").get<int>();
    const int C = j.at("classes").get<int>() + 1;
    const json& beta = j.at("beta");
    if (static_cast<int>(beta.size()) != L) throw DataError(DataErrorKind::kMalformedRow, path.string(), 0, "beta row count");
    m.weights.beta.resize(L, C);
    for (int i = 0; i < L; ++i) {
      if (static_cast<int>(beta[static_cast<std::size_t>(i)].size()) != C) {
        throw DataError(DataErrorKind::kMalformedRow, path.string(), 0, "beta column count");
      }
      for (int c = 0; c < C; ++c) m.weights.beta(i, c) = beta[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
    }
    m.weights.support = j.at("support").get<std::vector<bool>>();
    const json& d = j.at("decoder");
    m.decoder = {d.at("theta").get<double>(), d.at("lambda").get<int>(), d.at("tau").get<int>(),
                 d.at("refractory_ms").get<double>(), d.at("tolerance_ms").get<double>()};
    m.frontend.tick_us = j.at("frontend").at("tick_us").get<Microseconds>();
    for (const json& r : j.at("frontend").at("rows")) {
      m.frontend.rows.push_back({r.at("delayed").get<bool>(), r.at("sdl").get<int>(), r.at("channel").get<int>()});
    }
    const json& t = j.at("trapezoid");
    m.trapezoid = {t.at("t0_ms").get<double>(), t.at("t1_ms").get<double>(), t.at("t2_ms").get<double>(),
                   t.at("t3_ms").get<double>(), t.at("reference_onset_ms").get<double>()};
    m.normalize = j.at("normalize").get<bool>();
    m.fmax_sel = j.at("fmax_sel").get<int>();
    m.chip_seed = j.at("chip_seed").get<std::uint64_t>();
    m.channel_count = j.at("channel_count").get<int>();
    m.hyperparameters = j.at("hyperparameters").get<std::map<std::string, std::string>>();
    const json& r = j.at("report");
    m.weights.report.method = r.at("method").get<std::string>();
    m.weights.report.residuals = vector_from_json(r.at("residuals"));
    m.weights.report.support_size = r.at("support_size").get<int>();
    m.weights.report.sparsity = r.at("sparsity").get<double>();
    m.weights.report.iterations = r.at("iterations").get<int>();
    m.weights.report.lambdas = vector_from_json(r.at("lambdas"));
    m.weights.report.degenerate = r.at("degenerate").get<bool>();
    m.decoder.validate();
    return m;
  } catch (const json::exception& e) {
    throw DataError(DataErrorKind::kMalformedRow, path.string(), 0, e.what());
  }
}

}  // namespace elmsim
