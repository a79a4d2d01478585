#include "merit/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "merit/core/fft.hpp"

namespace merit::prep {

namespace {
constexpr double kPi = std::numbers::pi;
}

RangeProfile range_fft(const synth::RadarCube& cube) {
  const std::size_t n_adc = cube.cfg.n_adc;
  if (n_adc < 8) throw std::invalid_argument("range_fft: n_adc too small");
  for (double v : cube.if_i)
    if (!std::isfinite(v)) throw std::invalid_argument("range_fft: non-finite input");
  for (double v : cube.if_q)
    if (!std::isfinite(v)) throw std::invalid_argument("range_fft: non-finite input");

  RangeProfile p;
  p.n_chirps = cube.n_chirps;
  p.n_rx = cube.cfg.n_rx;
  p.n_bins = n_adc / 2;
  p.bin_resolution_m = cube.cfg.range_resolution_m();
  p.fs = cube.cfg.chirp_rate_hz;
  p.bins.resize(p.n_chirps * p.n_rx * p.n_bins);

  // Symmetric Hann (denominator n-1). Symmetry about (n-1)/2 matters: the
  // IF chirps are fast-time referenced to the chirp center, and only a
  // window symmetric about that point keeps the windowed DFT's factor real,
  // so the extracted bin phase is exactly 4*pi*range/lambda plus a
  // range-independent per-bin constant.
  std::vector<double> window(n_adc);
  for (std::size_t k = 0; k < n_adc; ++k)
    window[k] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k) /
                                     static_cast<double>(n_adc - 1));
  std::vector<std::complex<double>> buf(n_adc);
  for (std::size_t m = 0; m < p.n_chirps; ++m) {
    for (std::size_t a = 0; a < p.n_rx; ++a) {
      const double* pi_ = cube.if_i.data() + cube.idx(m, a, 0);
      const double* pq_ = cube.if_q.data() + cube.idx(m, a, 0);
      for (std::size_t k = 0; k < n_adc; ++k)
        buf[k] = std::complex<double>(pi_[k] * window[k], pq_[k] * window[k]);
      fft_inplace(buf);
      for (std::size_t b = 0; b < p.n_bins; ++b) p.at(m, a, b) = buf[b];
    }
  }
  return p;
}

std::size_t select_target_bin(const RangeProfile& profile, double lo_m, double hi_m) {
  auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(lo_m / profile.bin_resolution_m)));
  auto hi = static_cast<std::size_t>(std::floor(hi_m / profile.bin_resolution_m));
  hi = std::min(hi, profile.n_bins - 1);
  if (lo > hi) throw std::invalid_argument("select_target_bin: empty search window");

  std::size_t best = lo;
  double best_mag = -1.0;
  for (std::size_t b = lo; b <= hi; ++b) {
    double mag = 0.0;
    for (std::size_t m = 0; m < profile.n_chirps; ++m)
      for (std::size_t a = 0; a < profile.n_rx; ++a) mag += std::abs(profile.at(m, a, b));
    if (mag > best_mag) {  // strict: ties keep the lower index
      best_mag = mag;
      best = b;
    }
  }
  return best;
}

std::vector<double> unwrap(const std::vector<double>& wrapped) {
  std::vector<double> out(wrapped.size());
  double offset = 0.0;
  for (std::size_t i = 0; i < wrapped.size(); ++i) {
    if (i > 0) {
      double diff = wrapped[i] - wrapped[i - 1];
      if (diff > kPi) offset -= 2.0 * kPi;
      else if (diff < -kPi) offset += 2.0 * kPi;
    }
    out[i] = wrapped[i] + offset;
  }
  return out;
}

namespace {

// Shared by Ant and Idx extraction: phase of one (rx, bin) series.
void extract_one(const RangeProfile& profile, std::size_t rx, std::size_t bin,
                 std::vector<double>& out, std::vector<std::size_t>& flagged) {
  const std::size_t n = profile.n_chirps;
  std::vector<double> wrapped(n, 0.0);
  std::vector<bool> bad(n, false);
  // Magnitude floor: 1e-9 of the series peak.
  double peak = 0.0;
  for (std::size_t m = 0; m < n; ++m) peak = std::max(peak, std::abs(profile.at(m, rx, bin)));
  double floor_mag = 1e-9 * peak;
  for (std::size_t m = 0; m < n; ++m) {
    std::complex<double> v = profile.at(m, rx, bin);
    if (std::abs(v) <= floor_mag) {
      bad[m] = true;
      flagged.push_back(m);
      wrapped[m] = 0.0;
    } else {
      wrapped[m] = std::arg(v);
    }
  }
  out = unwrap(wrapped);
  // Linear interpolation across flagged samples (after unwrap).
  std::size_t i = 0;
  while (i < n) {
    if (!bad[i]) { ++i; continue; }
    std::size_t j = i;
    while (j < n && bad[j]) ++j;
    double left = (i > 0) ? out[i - 1] : (j < n ? out[j] : 0.0);
    double right = (j < n) ? out[j] : left;
    for (std::size_t k = i; k < j; ++k) {
      double frac = static_cast<double>(k - i + 1) / static_cast<double>(j - i + 1);
      out[k] = left + frac * (right - left);
    }
    i = j;
  }
}

}  // namespace

PhaseChannels extract_phase(const RangeProfile& profile, std::size_t bin) {
  if (bin >= profile.n_bins) throw std::invalid_argument("extract_phase: bin out of range");
  PhaseChannels pc;
  pc.fs = profile.fs;
  pc.target_bin = bin;
  pc.phase.resize(profile.n_rx);
  for (std::size_t a = 0; a < profile.n_rx; ++a)
    extract_one(profile, a, bin, pc.phase[a], pc.flagged);
  return pc;
}

PhaseChannels extract_phase_bins(const RangeProfile& profile, std::size_t rx,
                                 std::size_t first_bin, std::size_t n_bins) {
  if (rx >= profile.n_rx || first_bin + n_bins > profile.n_bins)
    throw std::invalid_argument("extract_phase_bins: out of range");
  PhaseChannels pc;
  pc.fs = profile.fs;
  pc.target_bin = first_bin;
  pc.phase.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b)
    extract_one(profile, rx, first_bin + b, pc.phase[b], pc.flagged);
  return pc;
}

std::vector<double> resample(const std::vector<double>& x, double fs_in, double fs_out) {
  if (fs_out <= 0.0 || fs_in < fs_out)
    throw std::invalid_argument("resample: requires fs_in >= fs_out > 0");
  auto fi = static_cast<long long>(std::llround(fs_in));
  auto fo = static_cast<long long>(std::llround(fs_out));
  if (std::abs(fs_in - static_cast<double>(fi)) > 1e-9 || std::abs(fs_out - static_cast<double>(fo)) > 1e-9)
    throw std::invalid_argument("resample: integer-valued rates required");
  long long g = std::gcd(fi, fo);
  long long up = fo / g, down = fi / g;

  const std::size_t n_in = x.size();
  const std::size_t n_out = static_cast<std::size_t>(std::llround(
      static_cast<double>(n_in) * fs_out / fs_in));
  if (n_in == 0) return {};
  if (up == 1 && down == 1) return x;

  // Hann-windowed sinc lowpass on the upsampled grid; cutoff 0.45*fs_out
  // leaves 5 Hz signals untouched and puts ~25+ Hz well into the stopband.
  const double fs_up = fs_in * static_cast<double>(up);
  const double fc = 0.45 * fs_out;
  const double trans = 0.2 * fs_out;
  auto half = static_cast<long long>(std::ceil(3.1 * fs_up / trans));
  const long long taps = 2 * half + 1;

  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (long long i = 0; i < taps; ++i) {
    double t = static_cast<double>(i - half);
    double sinc = (t == 0.0) ? 2.0 * fc / fs_up
                             : std::sin(2.0 * kPi * fc * t / fs_up) / (kPi * t);
    double w = 0.5 + 0.5 * std::cos(kPi * t / static_cast<double>(half + 1));
    h[static_cast<std::size_t>(i)] = sinc * w;
    sum += sinc * w;
  }
  for (double& v : h) v /= sum;  // exact unit DC gain

  // Polyphase evaluation with edge replication (keeps constants constant).
  auto sample_in = [&](long long idx_up) -> double {
    // value of the zero-stuffed upsampled sequence is nonzero only at
    // multiples of `up`; callers pass those directly as input indices.
    if (idx_up < 0) return x.front();
    if (idx_up >= static_cast<long long>(n_in)) return x.back();
    return x[static_cast<std::size_t>(idx_up)];
  };

  std::vector<double> out(n_out, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    // Output sample j sits at upsampled index j*down.
    long long center = static_cast<long long>(j) * down;
    double acc = 0.0;
    // Only every `up`-th upsampled sample is nonzero (input sample k at k*up).
    long long lo_up = center - half;
    long long k0 = static_cast<long long>(std::floor(static_cast<double>(lo_up) / static_cast<double>(up)));
    for (long long k = k0;; ++k) {
      long long pos = k * up;               // upsampled index of input sample k
      long long tap = pos - (center - half);  // filter tap index
      if (tap < 0) continue;
      if (tap >= taps) break;
      acc += h[static_cast<std::size_t>(tap)] * sample_in(k);
    }
    out[j] = acc * static_cast<double>(up);
  }
  return out;
}

SegmentationResult segment_and_standardize(const std::vector<std::vector<double>>& channels,
                                           const std::vector<double>& ecg,
                                           std::size_t window_t, std::size_t stride,
                                           int scenario, int session,
                                           std::int64_t first_index) {
  if (channels.empty()) throw std::invalid_argument("segment: no channels");
  std::size_t n = channels[0].size();
  for (const auto& c : channels)
    n = std::min(n, c.size());
  n = std::min(n, ecg.size());
  if (window_t == 0 || stride == 0) throw std::invalid_argument("segment: zero window/stride");
  if (window_t > n) throw std::invalid_argument("segment: window longer than stream");

  SegmentationResult res;
  const std::size_t n_seg = (n - window_t) / stride + 1;
  const std::size_t n_chan = channels.size();
  for (std::size_t s = 0; s < n_seg; ++s) {
    std::size_t start = s * stride;
    SegmentPair seg;
    seg.y = first_index + static_cast<std::int64_t>(s);
    seg.scenario = scenario;
    seg.session = session;
    seg.x = Matrix(n_chan, window_t);
    for (std::size_t c = 0; c < n_chan; ++c) {
      const double* src = channels[c].data() + start;
      double mean = kern::sum(src, window_t) / static_cast<double>(window_t);
      double var = 0.0;
      for (std::size_t k = 0; k < window_t; ++k) var += (src[k] - mean) * (src[k] - mean);
      var /= static_cast<double>(window_t);
      if (var <= 0.0) {
        seg.zero_variance_channels.push_back(static_cast<int>(c));
        ++res.n_warnings;
        continue;  // channel left as zeros
      }
      double inv_sd = 1.0 / std::sqrt(var);
      for (std::size_t k = 0; k < window_t; ++k) seg.x(c, k) = (src[k] - mean) * inv_sd;
    }
    seg.target.resize(window_t);
    double lo = ecg[start], hi = ecg[start];
    for (std::size_t k = 0; k < window_t; ++k) {
      lo = std::min(lo, ecg[start + k]);
      hi = std::max(hi, ecg[start + k]);
    }
    double span = hi - lo;
    for (std::size_t k = 0; k < window_t; ++k)
      seg.target[k] = span > 0.0 ? (ecg[start + k] - lo) / span : 0.0;
    res.segments.push_back(std::move(seg));
  }
  return res;
}

}  // namespace merit::prep
