#pragma once

#include "elmsim/spikeio.hpp"
#include "elmsim/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace elmsim {

inline constexpr int kWindowSubcount = 5;
inline constexpr int kSubwindowMax = 15;  // 4-bit sub-window counter
inline constexpr int kWindowMax = 63;     // 6-bit window output
inline constexpr int kMaxRows = 128;

/// Row input selection. An external row (`delayed == false`) counts spikes of
/// input `channel`. A delayed row takes the previous row's sub-window count
/// from `sdl_to_delay(sdl)` ticks ago.
struct RowConfig {
  bool delayed = false;
  int sdl = 0;      // 3-bit delay select
  int channel = 0;  // external rows only

  friend bool operator==(const RowConfig&, const RowConfig&) = default;
};

struct FrontendConfig {
  Microseconds tick_us = 20'000;
  std::vector<RowConfig> rows;

  /// One external row per channel 0..n-1.
  static FrontendConfig direct(int n);

  /// `taps` rows per channel: the channel itself followed by `taps - 1`
  /// chained delayed rows, giving [r_1(t_k), r_1(t_k-1), ..., r_2(t_k), ...].
  static FrontendConfig tdbdi(int n, int taps, int sdl = 0);

  int dimension() const { return static_cast<int>(rows.size()); }

  /// Throws UsageError. `channel_count` bounds the external channel indices.
  void validate(int channel_count = kMaxRows) const;

  friend bool operator==(const FrontendConfig&, const FrontendConfig&) = default;
};

/// SDL<2:0> -> delay in sub-windows. Codes 0..4 map to 1..5; 5..7 are invalid.
int sdl_to_delay(int sdl);

struct RowState {
  std::array<std::uint8_t, kWindowSubcount> history{};  // D_{n-1} .. D_{n-5}
  int sum = 0;                                          // running window sum
  std::uint8_t q = 0;

  friend bool operator==(const RowState&, const RowState&) = default;
};

struct FrontendState {
  std::vector<RowState> rows;
  std::int64_t tick = 0;

  friend bool operator==(const FrontendState&, const FrontendState&) = default;
};

/// Saturating 4-bit sub-window count.
std::uint8_t subwindow_accumulate(int spikes);

/// Q_n = Q_{n-1} + D_n - D_{n-5} on the row's running sum; the 6-bit output
/// saturates at 63 so that it always equals min(63, sum of last 5 D).
std::uint8_t window_update(RowState& row, std::uint8_t d_new);

/// Sub-window input of every row for the coming tick. Reads only pre-tick
/// state, so row order does not matter.
std::vector<std::uint8_t> tdbdi_route(const FrontendState& state, const FrontendConfig& config,
                                      std::span<const int> channel_spikes);

class Frontend {
 public:
  explicit Frontend(FrontendConfig config);

  const FrontendConfig& config() const { return config_; }
  const FrontendState& state() const { return state_; }
  void restore(FrontendState state);
  void reset();

  /// Advances one tick given per-channel spike counts for that sub-window
  /// and returns the window codes of every row.
  VectorXi step(std::span<const int> channel_spikes);

 private:
  FrontendConfig config_;
  FrontendState state_;
};

/// Per-tick spike counts, ticks x channels. Sub-windows are half-open
/// [k*tick, (k+1)*tick); events past the last whole tick are dropped.
CodeMatrix bin_spikes(const Trial& trial, Microseconds tick_us, int channel_count);

/// Window codes for a whole trial, ticks x rows.
CodeMatrix run_frontend(const Trial& trial, const FrontendConfig& config, int channel_count);

/// `tick,row,code` trace.
void write_trace_csv(std::ostream& out, const CodeMatrix& codes);

}  // namespace elmsim
