#pragma once

#include "elmsim/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace elmsim {

struct SpikeEvent {
  Microseconds time_us = 0;
  int channel = 0;

  friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

struct Trial {
  std::string id;
  int label = 1;  // 1-based movement class
  Microseconds onset_us = 1'000'000;
  Microseconds duration_us = 2'000'000;
  std::vector<SpikeEvent> events;  // sorted by time

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct SpikeDataset {
  std::vector<Trial> trials;
  int channel_count = 128;
  int class_count = 12;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const SpikeDataset&, const SpikeDataset&) = default;
};

/// Tuned inhomogeneous-Poisson population used in place of recorded M1 units.
///
/// Neuron `i` prefers class `(i mod M) + 1`. Its rate is `baseline_rate_hz`
/// until `ramp_start_ms` (relative to onset), rises linearly to the tuned peak
/// at `ramp_peak_ms`, holds until `decay_start_ms` and falls linearly back to
/// baseline at `decay_end_ms` (all relative to onset; a decay start past the
/// trial end keeps the peak to the end). The tuned peak is
/// `baseline + (peak - baseline) * a(d)` with `d` the circular class distance
/// and `a(d) = (1 + cos(pi d / tuning_width)) / 2` for `d < tuning_width`,
/// zero beyond.
struct SynthParams {
  int neurons = 40;
  int classes = 12;
  double baseline_rate_hz = 10.0;
  double peak_rate_hz = 100.0;
  double tuning_width = 3.0;
  double ramp_start_ms = -150.0;
  double ramp_peak_ms = -50.0;
  double decay_start_ms = 100.0;
  double decay_end_ms = 200.0;
  double onset_ms = 1000.0;
  double trial_duration_ms = 2000.0;
  int trials_per_class = 30;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ParseOptions {
  // Used when the dataset carries no `meta.txt` entry for them.
  int channel_count = 128;
  int class_count = 12;
};

/// Reads `manifest.csv`, `events/<trial_id>.csv` and, when present,
/// `meta.txt` (flat `key = value`). Throws DataError naming file and line.
SpikeDataset parse_dataset(const std::filesystem::path& root, const ParseOptions& options = {});

/// Writes the canonical form read by parse_dataset. The target directory is
/// created if needed; existing files are overwritten.
void write_dataset(const SpikeDataset& dataset, const std::filesystem::path& root);

/// Checks every dataset invariant; throws DataError on the first violation.
void validate_dataset(const SpikeDataset& dataset);

SpikeDataset gen_synthetic(const SynthParams& params);

/// Programmed firing rate (Hz) of `neuron` at `t_ms` from trial start in a
/// trial of class `label`.
double synthetic_rate(const SynthParams& params, int neuron, int label, double t_ms);

/// Stratified split. Each class contributes `round(test_fraction * n_class)`
/// trials (at least one when it has two or more) to the test set.
struct DatasetSplit {
  SpikeDataset train;
  SpikeDataset test;
};
DatasetSplit split_dataset(const SpikeDataset& dataset, double test_fraction, std::uint64_t seed);

}  // namespace elmsim
