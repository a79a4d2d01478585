#pragma once
// Raw streams -> aligned, resampled, windowed channel stacks.

#include <complex>
#include <cstdint>
#include <vector>

#include "merit/core/matrix.hpp"
#include "merit/synthgen.hpp"

namespace merit::prep {

struct RangeProfile {
  // [n_chirps][n_rx][n_bins], one-sided spectrum.
  std::vector<std::complex<double>> bins;
  std::size_t n_chirps = 0, n_rx = 0, n_bins = 0;
  double bin_resolution_m = 0.0;
  double fs = 0.0;  // slow-time rate

  const std::complex<double>& at(std::size_t chirp, std::size_t rx, std::size_t bin) const {
    return bins[(chirp * n_rx + rx) * n_bins + bin];
  }
  std::complex<double>& at(std::size_t chirp, std::size_t rx, std::size_t bin) {
    return bins[(chirp * n_rx + rx) * n_bins + bin];
  }
};

struct PhaseChannels {
  std::vector<std::vector<double>> phase;  // [n_chan][n_slow], unwrapped radians
  double fs = 0.0;
  std::size_t target_bin = 0;
  std::vector<std::size_t> flagged;  // slow-time indices with near-zero magnitude
};

struct SegmentPair {
  Matrix x;                    // [n_channels x t], standardized
  std::int64_t y = 0;          // segment index (auxiliary variable)
  std::vector<double> target;  // ECG window, min-max scaled to [0,1]
  int scenario = 0;
  int session = 0;
  std::vector<int> zero_variance_channels;  // left as zeros, warning recorded
};

RangeProfile range_fft(const synth::RadarCube& cube);

// Bin with maximum mean magnitude over chirps and antennas inside
// [lo_m, hi_m]; ties break toward the lower index.
std::size_t select_target_bin(const RangeProfile& profile, double lo_m, double hi_m);

// Phase of `bin` per antenna along slow time, arctangent + 1-D unwrap.
// Near-zero-magnitude samples are flagged and linearly interpolated.
PhaseChannels extract_phase(const RangeProfile& profile, std::size_t bin);

// Phase of `n_bins` consecutive bins of a single antenna (Idx input mode).
PhaseChannels extract_phase_bins(const RangeProfile& profile, std::size_t rx,
                                 std::size_t first_bin, std::size_t n_bins);

// 1-D unwrap: add +-2*pi wherever the successive difference exceeds pi.
std::vector<double> unwrap(const std::vector<double>& wrapped);

// Anti-alias lowpass + polyphase resample. fs_in >= fs_out; integer-valued
// rates required. Output length = round(len * fs_out / fs_in).
std::vector<double> resample(const std::vector<double>& x, double fs_in, double fs_out);

struct SegmentationResult {
  std::vector<SegmentPair> segments;
  std::size_t n_warnings = 0;  // zero-variance channels encountered
};

// All streams already at the common rate. channels: [n_chan][n], ecg: [n].
SegmentationResult segment_and_standardize(const std::vector<std::vector<double>>& channels,
                                           const std::vector<double>& ecg,
                                           std::size_t window_t, std::size_t stride,
                                           int scenario, int session,
                                           std::int64_t first_index);

}  // namespace merit::prep
