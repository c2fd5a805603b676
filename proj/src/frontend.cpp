#include "elmsim/frontend.hpp"

#include "elmsim/errors.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace elmsim {

FrontendConfig FrontendConfig::direct(int n) { return tdbdi(n, 1); }

FrontendConfig FrontendConfig::tdbdi(int n, int taps, int sdl) {
  if (n < 1 || taps < 1 || n * taps > kMaxRows) {
    throw UsageError("frontend: need 1 <= n*taps <= 128 (n=" + std::to_string(n) +
                     ", taps=" + std::to_string(taps) + ")");
  }
  FrontendConfig cfg;
  for (int c = 0; c < n; ++c) {
    cfg.rows.push_back({false, 0, c});
    for (int j = 1; j < taps; ++j) cfg.rows.push_back({true, sdl, 0});
  }
  return cfg;
}

void FrontendConfig::validate(int channel_count) const {
  if (tick_us <= 0) throw UsageError("frontend: tick length must be positive");
  if (rows.empty() || rows.size() > static_cast<std::size_t>(kMaxRows)) {
    throw UsageError("frontend: row count must be in [1,128]");
  }
  if (rows.front().delayed) throw UsageError("frontend: row 0 cannot take a delayed input");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const RowConfig& row = rows[r];
    if (row.delayed) {
      sdl_to_delay(row.sdl);
    } else if (row.channel < 0 || row.channel >= channel_count) {
      throw UsageError("frontend: row " + std::to_string(r) + " reads channel " +
                       std::to_string(row.channel) + ", outside [0," +
                       std::to_string(channel_count) + ")");
    }
  }
}

int sdl_to_delay(int sdl) {
  if (sdl < 0 || sdl > 4) {
    throw UsageError("frontend: SDL code " + std::to_string(sdl) + " does not select a delay");
  }
  return sdl + 1;
}

std::uint8_t subwindow_accumulate(int spikes) {
  return static_cast<std::uint8_t>(std::clamp(spikes, 0, kSubwindowMax));
}

std::uint8_t window_update(RowState& row, std::uint8_t d_new) {
  row.sum += d_new - row.history[kWindowSubcount - 1];
  std::copy_backward(row.history.begin(), row.history.end() - 1, row.history.end());
  row.history[0] = d_new;
  row.q = static_cast<std::uint8_t>(std::clamp(row.sum, 0, kWindowMax));
  return row.q;
}

std::vector<std::uint8_t> tdbdi_route(const FrontendState& state, const FrontendConfig& config,
                                      std::span<const int> channel_spikes) {
  if (!config.rows.empty() && config.rows.front().delayed) {
    throw UsageError("frontend: row 0 cannot take a delayed input");
  }
  std::vector<std::uint8_t> d(config.rows.size());
  for (std::size_t r = 0; r < config.rows.size(); ++r) {
    const RowConfig& row = config.rows[r];
    if (row.delayed) {
      d[r] = state.rows[r - 1].history[sdl_to_delay(row.sdl) - 1];
    } else {
      d[r] = subwindow_accumulate(channel_spikes[row.channel]);
    }
  }
  return d;
}

Frontend::Frontend(FrontendConfig config) : config_(std::move(config)) {
  config_.validate();
  reset();
}

void Frontend::reset() {
  state_.rows.assign(config_.rows.size(), RowState{});
  state_.tick = 0;
}

void Frontend::restore(FrontendState state) {
  if (state.rows.size() != config_.rows.size()) {
    throw UsageError("frontend: checkpoint row count does not match configuration");
  }
  state_ = std::move(state);
}

VectorXi Frontend::step(std::span<const int> channel_spikes) {
  const auto routed = tdbdi_route(state_, config_, channel_spikes);
  VectorXi codes(config_.dimension());
  for (std::size_t r = 0; r < routed.size(); ++r) {
    codes[static_cast<Eigen::Index>(r)] = window_update(state_.rows[r], routed[r]);
  }
  ++state_.tick;
  return codes;
}

CodeMatrix bin_spikes(const Trial& trial, Microseconds tick_us, int channel_count) {
  const auto ticks = static_cast<Eigen::Index>(trial.duration_us / tick_us);
  CodeMatrix counts = CodeMatrix::Zero(ticks, channel_count);
  for (const SpikeEvent& e : trial.events) {
    const Microseconds k = e.time_us / tick_us;
    if (k < ticks && e.channel < channel_count) ++counts(k, e.channel);
  }
  return counts;
}

CodeMatrix run_frontend(const Trial& trial, const FrontendConfig& config, int channel_count) {
  config.validate(channel_count);
  const CodeMatrix counts = bin_spikes(trial, config.tick_us, channel_count);
  Frontend fe(config);
  CodeMatrix codes(counts.rows(), config.dimension());
  for (Eigen::Index k = 0; k < counts.rows(); ++k) {
    codes.row(k) = fe.step(std::span<const int>(counts.row(k).data(), counts.cols())).transpose();
  }
  return codes;
}

void write_trace_csv(std::ostream& out, const CodeMatrix& codes) {
  out << "tick,row,code\n";
  for (Eigen::Index k = 0; k < codes.rows(); ++k) {
    for (Eigen::Index r = 0; r < codes.cols(); ++r) out << k << ',' << r << ',' << codes(k, r) << '\n';
  }
}

}  // namespace elmsim
