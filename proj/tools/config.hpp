#pragma once

#include "elmsim/analog.hpp"
#include "elmsim/budget.hpp"
#include "elmsim/decoder.hpp"
#include "elmsim/frontend.hpp"
#include "elmsim/spikeio.hpp"
#include "elmsim/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace elmsim::cli {

struct KeySpec {
  const char* key;
  const char* fallback;
  const char* doc;
};

/// Every accepted configuration key with its default and a one-line note.
const std::vector<KeySpec>& config_keys();

/// Flat `key = value` configuration. Seeds set to `auto` are derived from
/// the master `seed` by resolve().
class RunConfig {
 public:
  RunConfig();

  /// Throws UsageError for unknown keys.
  void set(const std::string& key, const std::string& value);
  /// `key=value`
  void set_assignment(const std::string& assignment);
  void load_file(const std::filesystem::path& path);

  /// Replaces every `auto` seed with one derived from the master seed.
  void resolve();

  const std::string& get(const std::string& key) const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// One `<prefix>key = value` line per key, sorted by key.
  void echo(std::ostream& out, const std::string& prefix) const;

  SynthParams synth() const;
  AnalogParams analog() const;
  FrontendConfig frontend() const;
  DecoderParams decoder() const;
  TrapezoidParams trapezoid() const;
  FeatureOptions features() const;
  SamplePolicy policy() const;
  T2Options t2() const;
  BudgetInputs budget() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace elmsim::cli
