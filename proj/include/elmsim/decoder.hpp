#pragma once

#include "elmsim/analog.hpp"
#include "elmsim/frontend.hpp"
#include "elmsim/spikeio.hpp"
#include "elmsim/training.hpp"
#include "elmsim/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace elmsim {

struct DecoderParams {
  double theta = 0.5;
  int lambda = 6;
  int tau = 10;                // ticks
  double refractory_ms = 140.0;
  double tolerance_ms = 150.0;  // onset scoring window half-width

  void validate() const;

  friend bool operator==(const DecoderParams&, const DecoderParams&) = default;
};

/// Everything needed to run the decoder on a chip: trained output weights,
/// post-processing thresholds and the frontend/analog settings it was
/// trained with.
struct DecoderModel {
  OutputWeights weights;
  DecoderParams decoder;
  FrontendConfig frontend;
  TrapezoidParams trapezoid;
  bool normalize = false;
  int fmax_sel = 7;
  std::uint64_t chip_seed = 0;
  int channel_count = 0;
  std::map<std::string, std::string> hyperparameters;

  int classes() const { return static_cast<int>(weights.beta.cols()) - 1; }
  int hidden() const { return static_cast<int>(weights.beta.rows()); }
};

void save_model(const DecoderModel& model, const std::filesystem::path& path);
DecoderModel load_model(const std::filesystem::path& path);

/// `chip` with the model's stop value programmed; with `prune`, neurons
/// outside the model's support are switched off.
ChipInstance deployed_chip(const ChipInstance& chip, const DecoderModel& model, bool prune = false);

/// Lowest index wins ties. Returns a 1-based label.
int argmax_label(const Eigen::Ref<const VectorXd>& outputs);

struct TypeDecision {
  VectorXd outputs;  // all M+1 outputs, beta' h
  int label = 1;     // argmax over the first M
};

TypeDecision classify_type(const Eigen::Ref<const VectorXd>& h, const MatrixXd& beta);

/// G = 1 iff the onset output strictly exceeds theta.
int onset_primary(double onset_output, double theta);

int refractory_ticks(double refractory_ms, Microseconds tick_us);

/// Debounce of the primary onset bit. G_track is high when at least
/// `lambda` of the last `tau` G bits are high and the refractory period has
/// elapsed. A rising edge of G_track is a detection and blocks G_track for
/// the next `refractory` ticks.
class OnsetTracker {
 public:
  OnsetTracker(int lambda, int tau, int refractory);

  int step(int g);
  bool detection() const { return detection_; }
  std::int64_t tick() const { return tick_; }
  int window_count() const { return count_; }

 private:
  int lambda_;
  int tau_;
  int refractory_;
  std::vector<std::uint8_t> ring_;
  int pos_ = 0;
  int count_ = 0;
  std::int64_t tick_ = 0;
  std::int64_t refractory_until_ = 0;
  int prev_track_ = 0;
  bool detection_ = false;
};

struct DecodeOutput {
  int tick = 0;
  double time_ms = 0.0;
  VectorXd outputs;
  int s = 1;
  int g = 0;
  int g_track = 0;
  int f = 0;
  bool detection = false;
};

class DecoderRuntime {
 public:
  DecoderRuntime(const DecoderModel& model, Microseconds tick_us);

  DecodeOutput step(const Eigen::Ref<const VectorXd>& h);

 private:
  const DecoderModel* model_;
  Microseconds tick_us_;
  OnsetTracker tracker_;
  int tick_ = 0;
};

/// Post-processing over precomputed hidden features (ticks x L).
std::vector<DecodeOutput> decode_features(const MatrixXd& features, const DecoderModel& model,
                                          Microseconds tick_us);

/// Full per-tick pipeline for one trial. `chip` should already be deployed.
std::vector<DecodeOutput> decode_stream(const Trial& trial, int channel_count, const ChipInstance& chip,
                                        const DecoderModel& model, const FeatureOptions& options);

/// `tick_ms,o_1..o_{M+1},s,G,G_track,F`
void write_stream_csv(std::ostream& out, const std::vector<DecodeOutput>& stream, int classes);

struct EvalReport {
  int trials = 0;
  double type_accuracy = 0.0;
  MatrixXi confusion;  // true x predicted
  double onset_tpr = 0.0;
  int false_positives = 0;
  double fp_per_trial = 0.0;
  std::vector<double> latencies_ms;
  std::map<std::string, std::string> metadata;
};

/// Scores decoded streams. Type is the majority label over the ticks where
/// the onset membership is 1 (ties to the lowest label). A trial counts as
/// detected when a detection lands within +-tolerance of its onset; every
/// other detection is a false positive.
EvalReport score_trials(const SpikeDataset& dataset, const std::vector<std::vector<DecodeOutput>>& streams,
                        const DecoderModel& model);

EvalReport evaluate(const SpikeDataset& dataset, const DecoderModel& model, const ChipInstance& chip,
                    const FeatureOptions& options);

void write_eval_json(std::ostream& out, const EvalReport& report);

struct RocPoint {
  double theta = 0.0;
  double tpr = 0.0;
  double fp_per_trial = 0.0;
};

/// Onset-output traces, one per trial, for threshold sweeps.
struct OnsetTraces {
  std::vector<VectorXd> outputs;
  std::vector<double> onset_ms;
  Microseconds tick_us = 20'000;
};

OnsetTraces onset_traces(const SpikeDataset& dataset, const DecoderModel& model, const ChipInstance& chip,
                         const FeatureOptions& options);

/// One point per theta, sorted by theta.
std::vector<RocPoint> roc_from_traces(const OnsetTraces& traces, std::vector<double> thetas,
                                      const DecoderParams& params);

std::vector<RocPoint> roc_sweep(const SpikeDataset& dataset, const DecoderModel& model,
                                const ChipInstance& chip, const FeatureOptions& options,
                                std::vector<double> thetas);

/// `theta,tpr,fp_per_trial`
void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& points);

}  // namespace elmsim
