#pragma once

#include "elmsim/analog.hpp"
#include "elmsim/frontend.hpp"
#include "elmsim/spikeio.hpp"
#include "elmsim/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace elmsim {

/// Onset membership breakpoints in ms from trial start, anchored to a trial
/// whose onset is at `reference_onset_ms`. Trials with another onset are
/// shifted accordingly.
struct TrapezoidParams {
  double t0_ms = 800.0;
  double t1_ms = 900.0;
  double t2_ms = 1100.0;
  double t3_ms = 1200.0;
  double reference_onset_ms = 1000.0;

  void validate() const;

  friend bool operator==(const TrapezoidParams&, const TrapezoidParams&) = default;
};

double trapezoid(double t_ms, const TrapezoidParams& params);

/// Membership at `t_ms` for a trial whose onset is at `onset_ms`.
double trial_membership(double t_ms, double onset_ms, const TrapezoidParams& params);

enum class SamplePolicy {
  kEveryTick,    // every tick trains every output
  kUnambiguous,  // classifier rows only where membership is exactly 0 or 1
};

struct SampleMeta {
  std::string trial_id;
  int tick = 0;
};

struct HiddenMatrix {
  MatrixXd H;  // samples x hidden
  std::vector<SampleMeta> meta;
};

struct TargetSet {
  MatrixXd type;              // samples x M one-hot
  VectorXd onset;             // samples, trapezoid membership
  std::vector<bool> type_rows;  // rows that train the classifier columns

  /// [type | onset], samples x (M+1).
  MatrixXd combined() const;
  /// 0/1 row weights per output column, samples x (M+1).
  MatrixXd column_weights() const;
};

/// Hidden-layer features of one trial.
struct TrialFeatures {
  CodeMatrix codes;   // ticks x D
  MatrixXi counts;    // ticks x L
  MatrixXd features;  // counts, or normalized counts
};

struct FeatureOptions {
  bool noise = true;
  bool normalize = false;
  std::uint64_t noise_seed = 0;
};

/// Frontend -> DAC -> mirrors -> CCO for every tick of `trial`. Noise draws
/// come from a stream keyed on (noise_seed, trial id), so results do not
/// depend on which other trials are processed or in what order. With
/// normalization on, ticks whose input or output sum is zero yield zeros.
TrialFeatures trial_features(const Trial& trial, int channel_count, const ChipInstance& chip,
                             const FrontendConfig& frontend, const FeatureOptions& options);

/// Time in ms from trial start at which tick `k`'s features are available.
double tick_time_ms(int k, Microseconds tick_us);

struct CollectOptions {
  FeatureOptions features;
  SamplePolicy policy = SamplePolicy::kUnambiguous;
  TrapezoidParams trapezoid;
};

std::pair<HiddenMatrix, TargetSet> collect_H(const SpikeDataset& dataset, const ChipInstance& chip,
                                             const FrontendConfig& frontend,
                                             const CollectOptions& options);

struct TrainingReport {
  std::string method;
  VectorXd residuals;  // weighted residual norm per output column
  int support_size = 0;
  double sparsity = 0.0;  // fraction of hidden neurons pruned
  int iterations = 0;
  VectorXd lambdas;  // T2: penalty applied per column
  bool degenerate = false;
};

/// beta is hidden x (M+1); `support[i]` is false for neurons whose row of
/// beta is entirely zero.
struct OutputWeights {
  MatrixXd beta;
  std::vector<bool> support;
  TrainingReport report;
};

/// Min-norm least squares (ridge == 0) or ridge regression, column by
/// column. `weights` (samples x cols, 0/1 or non-negative) selects the rows
/// each column is fitted on; empty means all rows.
OutputWeights train_T1(const MatrixXd& H, const MatrixXd& T, double ridge,
                       const MatrixXd& weights = {});

struct T2Options {
  std::optional<double> l1_lambda;        // absolute penalty, every column
  std::optional<double> target_sparsity;  // max fraction of neurons kept
  bool refit = true;
  bool scale_columns = true;  // penalize unit-norm columns
  int max_iter = 0;
};

/// Per-column L1-penalized least squares by LARS homotopy. A neuron is
/// pruned only when its coefficients vanish in every column. With a target
/// sparsity, a common fraction of each column's null threshold is bisected
/// so the surviving neurons number at most target * L.
OutputWeights train_T2(const MatrixXd& H, const MatrixXd& T, const T2Options& options,
                       const MatrixXd& weights = {});

}  // namespace elmsim
