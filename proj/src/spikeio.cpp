#include "elmsim/spikeio.hpp"

#include "elmsim/errors.hpp"
#include "elmsim/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string_view>

namespace fs = std::filesystem;

namespace elmsim {
namespace {

constexpr const char* kManifestHeader = "trial_id,label,onset_us,duration_us";
constexpr const char* kEventsHeader = "time_us,channel";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void read_meta(const fs::path& path, SpikeDataset& ds) {
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw DataError(DataErrorKind::kMalformedRow, path.string(), static_cast<int>(i + 1),
                      "expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "channel_count" || key == "class_count") {
      int v = 0;
      if (!parse_int(value, v) || v <= 0) {
        throw DataError(DataErrorKind::kMalformedRow, path.string(), static_cast<int>(i + 1),
                        key + " must be a positive integer");
      }
      (key == "channel_count" ? ds.channel_count : ds.class_count) = v;
    } else {
      ds.metadata[key] = value;
    }
  }
}

void check_header(const std::vector<std::string>& lines, const fs::path& path, const char* header) {
  if (lines.empty() || lines.front() != header) {
    throw DataError(DataErrorKind::kMalformedRow, path.string(), 1,
                    std::string("expected header '") + header + "'");
  }
}

}  // namespace

void SynthParams::validate() const {
  auto fail = [](const std::string& m) { throw UsageError("synthetic params: " + m); };
  if (neurons < 1 || neurons > 128) fail("neurons must be in [1,128]");
  if (classes < 1) fail("classes must be >= 1");
  if (!(baseline_rate_hz >= 0.0)) fail("baseline_rate_hz must be >= 0");
  if (!(peak_rate_hz >= baseline_rate_hz)) fail("peak_rate_hz must be >= baseline_rate_hz");
  if (!(tuning_width > 0.0)) fail("tuning_width must be > 0");
  if (!(ramp_peak_ms >= ramp_start_ms)) fail("ramp_peak_ms must be >= ramp_start_ms");
  if (!(decay_start_ms >= ramp_peak_ms)) fail("decay_start_ms must be >= ramp_peak_ms");
  if (!(decay_end_ms >= decay_start_ms)) fail("decay_end_ms must be >= decay_start_ms");
  if (!(trial_duration_ms > 0.0)) fail("trial_duration_ms must be > 0");
  if (onset_ms < 0.0 || onset_ms > trial_duration_ms) fail("onset_ms must lie within the trial");
  if (trials_per_class < 1) fail("trials_per_class must be >= 1");
}

void validate_dataset(const SpikeDataset& ds) {
  for (const Trial& trial : ds.trials) {
    const std::string where = "trial " + trial.id;
    if (trial.label < 1 || trial.label > ds.class_count) {
      throw DataError(DataErrorKind::kLabelOutOfRange, where, 0,
                      "label " + std::to_string(trial.label));
    }
    if (trial.onset_us < 0 || trial.onset_us > trial.duration_us) {
      throw DataError(DataErrorKind::kOnsetOutOfRange, where, 0, "onset outside [0, duration]");
    }
    Microseconds prev = 0;
    for (std::size_t i = 0; i < trial.events.size(); ++i) {
      const SpikeEvent& e = trial.events[i];
      const int line = static_cast<int>(i + 2);
      if (e.time_us < 0) throw DataError(DataErrorKind::kNegativeTimestamp, where, line, "");
      if (e.time_us < prev) throw DataError(DataErrorKind::kUnsortedTimestamps, where, line, "");
      if (e.channel < 0 || e.channel >= ds.channel_count) {
        throw DataError(DataErrorKind::kChannelOutOfRange, where, line,
                        "channel " + std::to_string(e.channel));
      }
      prev = e.time_us;
    }
  }
}

SpikeDataset parse_dataset(const fs::path& root, const ParseOptions& options) {
  SpikeDataset ds;
  ds.channel_count = options.channel_count;
  ds.class_count = options.class_count;

  const fs::path manifest = root / "manifest.csv";
  if (!fs::is_regular_file(manifest)) {
    throw DataError(DataErrorKind::kMissingManifest, manifest.string(), 0, "");
  }
  if (fs::is_regular_file(root / "meta.txt")) read_meta(root / "meta.txt", ds);

  const auto rows = read_lines(manifest);
  if (!rows.empty()) check_header(rows, manifest, kManifestHeader);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const int line = static_cast<int>(r + 1);
    if (rows[r].empty()) continue;
    auto cells = split_commas(rows[r]);
    Trial trial;
    if (cells.size() != 4 || cells[0].empty() || !parse_int(cells[1], trial.label) ||
        !parse_int(cells[2], trial.onset_us) || !parse_int(cells[3], trial.duration_us)) {
      throw DataError(DataErrorKind::kMalformedRow, manifest.string(), line,
                      "expected trial_id,label,onset_us,duration_us");
    }
    trial.id = std::string(cells[0]);
    if (trial.label < 1 || trial.label > ds.class_count) {
      throw DataError(DataErrorKind::kLabelOutOfRange, manifest.string(), line,
                      "label " + std::to_string(trial.label) + " not in [1," +
                          std::to_string(ds.class_count) + "]");
    }
    if (trial.onset_us < 0 || trial.onset_us > trial.duration_us) {
      throw DataError(DataErrorKind::kOnsetOutOfRange, manifest.string(), line,
                      "onset outside [0, duration]");
    }

    const fs::path events = root / "events" / (trial.id + ".csv");
    if (!fs::is_regular_file(events)) {
      throw DataError(DataErrorKind::kMissingEventFile, events.string(), 0, "");
    }
    const auto ev_rows = read_lines(events);
    check_header(ev_rows, events, kEventsHeader);
    Microseconds prev = 0;
    for (std::size_t k = 1; k < ev_rows.size(); ++k) {
      const int ev_line = static_cast<int>(k + 1);
      if (ev_rows[k].empty()) continue;
      auto ev = split_commas(ev_rows[k]);
      SpikeEvent e;
      if (ev.size() != 2 || !parse_int(ev[0], e.time_us) || !parse_int(ev[1], e.channel)) {
        throw DataError(DataErrorKind::kMalformedRow, events.string(), ev_line,
                        "expected time_us,channel");
      }
      if (e.time_us < 0) {
        throw DataError(DataErrorKind::kNegativeTimestamp, events.string(), ev_line,
                        std::string(ev[0]));
      }
      if (e.time_us < prev) {
        throw DataError(DataErrorKind::kUnsortedTimestamps, events.string(), ev_line,
                        std::to_string(e.time_us) + " after " + std::to_string(prev));
      }
      if (e.channel < 0 || e.channel >= ds.channel_count) {
        throw DataError(DataErrorKind::kChannelOutOfRange, events.string(), ev_line,
                        "channel " + std::to_string(e.channel) + " not in [0," +
                            std::to_string(ds.channel_count) + ")");
      }
      prev = e.time_us;
      trial.events.push_back(e);
    }
    ds.trials.push_back(std::move(trial));
  }
  return ds;
}

void write_dataset(const SpikeDataset& ds, const fs::path& root) {
  fs::create_directories(root / "events");
  auto open = [](const fs::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataErrorKind::kIo, p.string(), 0, "cannot write");
    return out;
  };
  {
    auto meta = open(root / "meta.txt");
    meta << "channel_count = " << ds.channel_count << '\n';
    meta << "class_count = " << ds.class_count << '\n';
    for (const auto& [k, v] : ds.metadata) meta << k << " = " << v << '\n';
  }
  auto manifest = open(root / "manifest.csv");
  manifest << kManifestHeader << '\n';
  for (const Trial& t : ds.trials) {
    manifest << t.id << ',' << t.label << ',' << t.onset_us << ',' << t.duration_us << '\n';
    auto ev = open(root / "events" / (t.id + ".csv"));
    ev << kEventsHeader << '\n';
    for (const SpikeEvent& e : t.events) ev << e.time_us << ',' << e.channel << '\n';
  }
}

double synthetic_rate(const SynthParams& p, int neuron, int label, double t_ms) {
  const int preferred = neuron % p.classes + 1;
  const int raw = std::abs(label - preferred);
  const double d = std::min(raw, p.classes - raw);
  const double tuning =
      d < p.tuning_width ? 0.5 * (1.0 + std::cos(std::numbers::pi * d / p.tuning_width)) : 0.0;
  const double rel = t_ms - p.onset_ms;
  double ramp;
  if (rel < p.ramp_start_ms) {
    ramp = 0.0;
  } else if (rel < p.ramp_peak_ms) {
    ramp = (rel - p.ramp_start_ms) / (p.ramp_peak_ms - p.ramp_start_ms);
  } else if (rel < p.decay_start_ms) {
    ramp = 1.0;
  } else if (rel < p.decay_end_ms) {
    ramp = (p.decay_end_ms - rel) / (p.decay_end_ms - p.decay_start_ms);
  } else {
    ramp = 0.0;
  }
  return p.baseline_rate_hz + (p.peak_rate_hz - p.baseline_rate_hz) * tuning * ramp;
}

SpikeDataset gen_synthetic(const SynthParams& p) {
  p.validate();
  SpikeDataset ds;
  ds.channel_count = p.neurons;
  ds.class_count = p.classes;
  ds.metadata = {
      {"generator", "tuned_poisson"},
      {"seed", std::to_string(p.seed)},
      {"baseline_rate_hz", format_double(p.baseline_rate_hz)},
      {"peak_rate_hz", format_double(p.peak_rate_hz)},
      {"tuning_width", format_double(p.tuning_width)},
      {"ramp_start_ms", format_double(p.ramp_start_ms)},
      {"ramp_peak_ms", format_double(p.ramp_peak_ms)},
      {"decay_start_ms", format_double(p.decay_start_ms)},
      {"decay_end_ms", format_double(p.decay_end_ms)},
      {"trials_per_class", std::to_string(p.trials_per_class)},
  };

  const double duration_s = p.trial_duration_ms / 1000.0;
  const auto duration_us = static_cast<Microseconds>(std::llround(p.trial_duration_ms * 1000.0));
  const auto onset_us = static_cast<Microseconds>(std::llround(p.onset_ms * 1000.0));
  const int total = p.trials_per_class * p.classes;
  ds.trials.reserve(total);

  for (int k = 0; k < total; ++k) {
    Trial trial;
    char id[32];
    std::snprintf(id, sizeof id, "t%04d", k);
    trial.id = id;
    trial.label = k % p.classes + 1;
    trial.onset_us = onset_us;
    trial.duration_us = duration_us;

    for (int n = 0; n < p.neurons; ++n) {
      // Thinning against the neuron's maximum rate in this trial.
      const double peak_t = std::clamp(p.onset_ms + p.ramp_peak_ms, 0.0, p.trial_duration_ms);
      const double rate_max = std::max(p.baseline_rate_hz, synthetic_rate(p, n, trial.label, peak_t));
      if (rate_max <= 0.0) continue;
      Engine eng = make_engine(p.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(n)});
      std::exponential_distribution<double> gap(rate_max);
      std::uniform_real_distribution<double> accept(0.0, 1.0);
      double t = 0.0;
      while (true) {
        t += gap(eng);
        if (t >= duration_s) break;
        const double r = synthetic_rate(p, n, trial.label, t * 1000.0);
        if (accept(eng) * rate_max < r) {
          const auto us = static_cast<Microseconds>(std::floor(t * 1e6));
          trial.events.push_back({std::min(us, duration_us - 1), n});
        }
      }
    }
    std::sort(trial.events.begin(), trial.events.end(), [](const SpikeEvent& a, const SpikeEvent& b) {
      return a.time_us != b.time_us ? a.time_us < b.time_us : a.channel < b.channel;
    });
    ds.trials.push_back(std::move(trial));
  }
  return ds;
}

DatasetSplit split_dataset(const SpikeDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw UsageError("test_fraction must be in [0,1)");
  }
  DatasetSplit split;
  split.train.channel_count = split.test.channel_count = ds.channel_count;
  split.train.class_count = split.test.class_count = ds.class_count;
  split.train.metadata = split.test.metadata = ds.metadata;

  std::vector<bool> is_test(ds.trials.size(), false);
  for (int c = 1; c <= ds.class_count; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
      if (ds.trials[i].label == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    Engine eng = make_engine(seed, {0x5b11u, static_cast<std::uint64_t>(c)});
    // Fisher-Yates with an explicit engine keeps the permutation portable.
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[eng() % i]);
    }
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    if (test_fraction > 0.0 && n_test == 0 && idx.size() >= 2) n_test = 1;
    for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = true;
  }
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    (is_test[i] ? split.test : split.train).trials.push_back(ds.trials[i]);
  }
  return split;
}

}  // namespace elmsim
