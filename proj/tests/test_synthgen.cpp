#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "merit/core/fft.hpp"
#include "merit/preprocess.hpp"
#include "merit/synthgen.hpp"

using namespace merit;
using namespace merit::synth;
namespace fs = std::filesystem;

namespace {
constexpr double kPi = 3.14159265358979323846;

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / double(v.size()));
}

double variance(const std::vector<double>& v) {
  double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size());
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t n = std::min(a.size(), b.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) ma += a[i], mb += b[i];
  ma /= double(n), mb /= double(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}
}  // namespace

TEST_CASE("gen_latent beat schedule") {
  GenConfig cfg;
  CHECK(gen_latent(0.0, 60, 0, 1).beat_times.empty());

  LatentSource l = gen_latent(10.0, 60.0, 0.0, 1);
  REQUIRE(l.beat_times.size() == 10);
  for (std::size_t i = 0; i < l.beat_times.size(); ++i)
    CHECK(l.beat_times[i] == doctest::Approx(double(i)).epsilon(1e-9));

  // Counting oracle: 72 +- 3 bpm over 60 s stays within [66, 78] beats.
  LatentSource l2 = gen_latent(60.0, 72.0, 3.0, 7);
  CHECK(l2.beat_times.size() >= 66);
  CHECK(l2.beat_times.size() <= 78);
  CHECK(std::is_sorted(l2.beat_times.begin(), l2.beat_times.end()));
}

TEST_CASE("render_ecg waveform shape") {
  LatentSource empty;
  empty.duration_s = 2.0;
  ECGWaveform w0 = render_ecg(empty, 250.0);
  for (double v : w0.samples) CHECK(v == 0.0);

  // Single beat at t=1 s: global argmax (the R bump) within 20 ms of t=1.
  LatentSource one;
  one.duration_s = 2.0;
  one.beat_times = {1.0};
  one.beat_shapes = {default_morphology()};
  ECGWaveform w1 = render_ecg(one, 250.0);
  std::size_t arg = std::max_element(w1.samples.begin(), w1.samples.end()) - w1.samples.begin();
  CHECK(std::abs(double(arg) / 250.0 - 1.0) <= 0.020);

  // Two beats 1 s apart: two local maxima above half max, fs samples apart.
  LatentSource two;
  two.duration_s = 3.0;
  two.beat_times = {1.0, 2.0};
  two.beat_shapes = {default_morphology(), default_morphology()};
  ECGWaveform w2 = render_ecg(two, 250.0);
  double thr = 0.5 * *std::max_element(w2.samples.begin(), w2.samples.end());
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < w2.samples.size(); ++i)
    if (w2.samples[i] > thr && w2.samples[i] >= w2.samples[i - 1] &&
        w2.samples[i] > w2.samples[i + 1])
      peaks.push_back(i);
  REQUIRE(peaks.size() == 2);
  CHECK(std::abs(double(peaks[1] - peaks[0]) - 250.0) <= 1.0);
}

TEST_CASE("render_vibration lags the ECG by the transit delay and is bounded") {
  GenConfig cfg;
  LatentSource empty;
  empty.duration_s = 1.0;
  VibrationTrace v0 = render_vibration(empty, 200.0, cfg);
  for (double d : v0.displacement) CHECK(d == 0.0);

  LatentSource one;
  one.duration_s = 2.0;
  one.beat_times = {0.8};
  one.beat_shapes = {default_morphology()};
  VibrationTrace v1 = render_vibration(one, 200.0, cfg);
  // |displacement| peak trails the beat by roughly the transit delay.
  std::size_t arg = 0;
  for (std::size_t i = 0; i < v1.displacement.size(); ++i)
    if (std::abs(v1.displacement[i]) > std::abs(v1.displacement[arg])) arg = i;
  double lag = double(arg) / 200.0 - 0.8;
  CHECK(lag > 0.5 * cfg.transit_delay_s);
  CHECK(lag < 2.5 * cfg.transit_delay_s);
  for (double d : v1.displacement) CHECK(std::abs(d) <= cfg.vib_amp_m * 1.0001);
}

TEST_CASE("add_motion_noise scenario ordering and identities") {
  GenConfig cfg;
  LatentSource l = gen_latent(20.0, 72.0, 2.0, 3);
  VibrationTrace vib = render_vibration(l, 200.0, cfg);

  GenConfig quiet = cfg;
  quiet.noise_scale = 0.0;
  VibrationTrace same = add_motion_noise(vib, Scenario::kStillness, 5, quiet);
  for (std::size_t i = 0; i < vib.displacement.size(); ++i)
    CHECK(same.displacement[i] == vib.displacement[i]);

  auto resid = [&](Scenario s) {
    VibrationTrace noisy = add_motion_noise(vib, s, 5, cfg);
    std::vector<double> r(vib.displacement.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = noisy.displacement[i] - vib.displacement[i];
    return rms(r);
  };
  // Both motion scenarios displace far more than stillness; typing and
  // flipping are deliberately comparable in amplitude (they differ in
  // spectral content, not scale).
  double r_still = resid(Scenario::kStillness);
  double r_typing = resid(Scenario::kTyping);
  double r_flip = resid(Scenario::kFlipping);
  CHECK(r_flip > 50.0 * r_still);
  CHECK(r_typing > 50.0 * r_still);

  VibrationTrace n1 = add_motion_noise(vib, Scenario::kTyping, 9, cfg);
  VibrationTrace n2 = add_motion_noise(vib, Scenario::kTyping, 9, cfg);
  for (std::size_t i = 0; i < n1.displacement.size(); ++i)
    CHECK(n1.displacement[i] == n2.displacement[i]);
}

TEST_CASE("simulate_imu second-difference physics") {
  std::array<double, 3> mix{0.455, 0.570, 0.684};

  VibrationTrace zero;
  zero.fs = 200.0;
  zero.displacement.assign(400, 0.0);
  ImuRecord i0 = simulate_imu(zero, mix, 200.0, 0.0, 0.0, 1);
  for (const auto& ax : i0.accel)
    for (double v : ax) CHECK(v == 0.0);

  // Constant-velocity ramp: second difference of a line is ~0.
  VibrationTrace ramp = zero;
  for (std::size_t i = 0; i < ramp.displacement.size(); ++i)
    ramp.displacement[i] = 1e-3 * double(i);
  ImuRecord ir = simulate_imu(ramp, mix, 200.0, 0.0, 0.0, 1);
  for (const auto& ax : ir.accel)
    for (double v : ax) CHECK(std::abs(v) < 1e-9);

  // Sinusoid A sin(2 pi f t): per-axis acceleration amplitude ~ mix_i*A*(2 pi f)^2.
  double A = 1e-3, f = 4.0, fs = 200.0;
  VibrationTrace sine = zero;
  sine.displacement.resize(2000);
  for (std::size_t i = 0; i < sine.displacement.size(); ++i)
    sine.displacement[i] = A * std::sin(2.0 * kPi * f * double(i) / fs);
  ImuRecord is = simulate_imu(sine, mix, fs, 0.0, 0.0, 1);
  for (int ax = 0; ax < 3; ++ax) {
    double peak = 0.0;
    // skip the edge samples, which the central difference leaves at zero
    for (std::size_t i = 2; i + 2 < is.accel[ax].size(); ++i)
      peak = std::max(peak, std::abs(is.accel[ax][i]));
    double expect = mix[ax] * A * std::pow(2.0 * kPi * f, 2);
    CHECK(peak == doctest::Approx(expect).epsilon(0.02));
  }
}

TEST_CASE("simulate_radar range bin and phase law") {
  RadarConfig rc;
  rc.noise_std = 0.0;
  rc.chirp_rate_hz = 200.0;

  // Static target at 0.055 m, resolution c/2B ~ 27.3 mm -> peak at bin 2.
  VibrationTrace still;
  still.fs = 200.0;
  still.displacement.assign(64, 0.0);
  RadarCube cube = simulate_radar(still, 0.055, rc, 1);
  prep::RangeProfile prof = prep::range_fft(cube);
  std::size_t peak = 0;
  double best = -1.0;
  for (std::size_t kbin = 0; kbin < prof.n_bins; ++kbin) {
    double mag = std::abs(prof.at(0, 0, kbin));
    if (mag > best) best = mag, peak = kbin;
  }
  CHECK(peak == 2);

  // Noiseless static target: slow-time phase constant to 1e-9.
  prep::PhaseChannels ph0 = prep::extract_phase(prof, 2);
  for (const auto& chan : ph0.phase)
    for (double v : chan) CHECK(std::abs(v - chan[0]) < 1e-9);

  // Displacement step of 0.5 mm at lambda ~ 5 mm: phase step 4 pi d / lambda.
  VibrationTrace step = still;
  for (std::size_t i = 32; i < step.displacement.size(); ++i)
    step.displacement[i] = 0.5e-3;
  RadarCube cube2 = simulate_radar(step, 0.055, rc, 1);
  prep::PhaseChannels ph = prep::extract_phase(prep::range_fft(cube2), 2);
  double lambda = rc.wavelength_m();
  double expect = 4.0 * kPi * 0.5e-3 / lambda;
  for (const auto& chan : ph.phase)
    CHECK(chan[40] - chan[10] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("gen_session end-to-end invariants") {
  GenConfig cfg;
  cfg.radar.noise_std = 0.0;
  cfg.imu_noise_std = 0.0;

  SessionRecording s = gen_session(Scenario::kStillness, 10.0, 11, cfg);
  prep::RangeProfile prof = prep::range_fft(s.radar);
  std::size_t bin = prep::select_target_bin(prof, 0.03, 0.09);
  prep::PhaseChannels ph = prep::extract_phase(prof, bin);
  // Noiseless still phase tracks the pre-noise displacement.
  CHECK(pearson(ph.phase[0], s.vib_noisy.displacement) >= 0.95);

  SessionRecording s2 = gen_session(Scenario::kStillness, 10.0, 11, cfg);
  CHECK(s.radar.if_i == s2.radar.if_i);
  CHECK(s.radar.if_q == s2.radar.if_q);
  CHECK(s.ecg.samples == s2.ecg.samples);
  CHECK(s.imu.accel[0] == s2.imu.accel[0]);

  GenConfig noisy;  // default noise levels
  SessionRecording still = gen_session(Scenario::kStillness, 10.0, 11, noisy);
  SessionRecording flip = gen_session(Scenario::kFlipping, 10.0, 11, noisy);
  CHECK(variance(flip.imu.accel[0]) >= 10.0 * variance(still.imu.accel[0]));
}

TEST_CASE("session save/load round trip is bit exact") {
  GenConfig cfg;
  SessionRecording s = gen_session(Scenario::kTyping, 5.0, 21, cfg);
  std::string dir = (fs::temp_directory_path() / "merit_session_test").string();
  fs::remove_all(dir);
  save_session(s, dir);
  SessionRecording r = load_session(dir);
  CHECK(r.scenario == s.scenario);
  CHECK(r.radar.if_i == s.radar.if_i);
  CHECK(r.radar.if_q == s.radar.if_q);
  CHECK(r.imu.accel == s.imu.accel);
  CHECK(r.ecg.samples == s.ecg.samples);
  CHECK(r.vib_clean.displacement == s.vib_clean.displacement);
  CHECK(r.latent.beat_times == s.latent.beat_times);
  fs::remove_all(dir);
}
