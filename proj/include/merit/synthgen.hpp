#pragma once
// Synthetic paired (radar, IMU, ECG) session generator. A single latent
// cardiac driver produces the ECG ground truth and the wrist-vessel
// displacement; scenario-specific motion noise is added on top; radar and
// IMU observe the displacement through their respective physics.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace merit::synth {

constexpr double kSpeedOfLight = 299792458.0;

enum class Scenario { kStillness = 0, kTyping = 1, kFlipping = 2 };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

// One Gaussian bump of the PQRST template: amplitude (mV), center offset
// from the beat time (s), width (s).
struct Wave {
  double amp_mv;
  double center_s;
  double width_s;
};

using Morphology = std::array<Wave, 5>;  // P, Q, R, S, T

Morphology default_morphology();

struct LatentSource {
  std::vector<double> beat_times;        // seconds, strictly increasing
  std::vector<Morphology> beat_shapes;   // one per beat
  double duration_s = 0.0;
  std::uint64_t seed = 0;
};

struct ECGWaveform {
  std::vector<double> samples;  // millivolts
  double fs = 0.0;
};

struct VibrationTrace {
  std::vector<double> displacement;  // meters
  double fs = 0.0;
};

struct ImuRecord {
  std::array<std::vector<double>, 3> accel;  // m/s^2 per axis
  double fs = 0.0;
};

struct RadarConfig {
  std::size_t n_adc = 64;
  std::size_t n_rx = 3;
  double bandwidth_hz = 5.5e9;
  double carrier_hz = 60e9;
  double chirp_rate_hz = 200.0;  // one chirp per slow-time sample
  double amplitude = 1.0;
  double noise_std = 1.7;        // receiver noise std (per I/Q component)
  std::array<double, 3> antenna_phase_offsets = {0.0, 0.7, 1.4};  // radians
  // Geometric projection of gross arm motion onto each antenna's line of
  // sight. Distinct values make the three phases a genuine mixture of the
  // cardiac and motion components.
  std::array<double, 3> antenna_motion_gains = {0.7, 1.0, 1.3};

  double wavelength_m() const { return kSpeedOfLight / carrier_hz; }
  double range_resolution_m() const { return kSpeedOfLight / (2.0 * bandwidth_hz); }
  double max_range_m() const { return static_cast<double>(n_adc / 2) * range_resolution_m(); }
};

// Complex baseband IF samples, one chirp per slow-time step.
struct RadarCube {
  std::vector<double> if_i;  // [n_chirps * n_rx * n_adc]
  std::vector<double> if_q;
  std::size_t n_chirps = 0;
  RadarConfig cfg;

  std::size_t idx(std::size_t chirp, std::size_t rx, std::size_t adc) const {
    return (chirp * cfg.n_rx + rx) * cfg.n_adc + adc;
  }
};

struct GenConfig {
  double fs_ecg = 250.0;
  double fs_vib = 200.0;   // master displacement rate; also radar chirp rate
  double fs_imu = 200.0;

  double hr_bpm_mean = 72.0;
  double hr_bpm_std = 3.0;
  double hr_bpm_min = 40.0;
  double hr_bpm_max = 180.0;
  double morph_jitter = 0.05;  // per-beat relative amplitude/width jitter

  double transit_delay_s = 0.150;  // R-peak to vibration-peak delay
  double vib_amp_m = 0.5e-3;       // peak displacement per beat
  double vib_freq_hz = 8.0;
  double vib_damping = 25.0;       // 1/s
  double vib_clamp_m = 2.0e-3;

  // scenario motion-noise displacement scales (meters)
  double noise_scale = 1.0;            // global multiplier; 0 disables
  double still_broadband_m = 0.2e-6;
  double typing_burst_m = 1.2e-4;
  double typing_rate_hz = 2.0;
  double flip_sweep_m = 0.7e-3;

  // IMU path
  std::array<double, 3> mount_axis_mix = {0.455, 0.570, 0.684};  // unit-norm
  double imu_axis_gain_jitter = 0.05;
  double imu_noise_std = 0.005;    // m/s^2 per axis
  double imu_motion_gain = 13.0;   // motion coupling relative to radar path

  double target_range_m = 0.055;
  RadarConfig radar;

  nlohmann::json to_json() const;
  static GenConfig from_json(const nlohmann::json& j);
};

struct SessionRecording {
  RadarCube radar;
  ImuRecord imu;
  ECGWaveform ecg;
  VibrationTrace vib_clean;   // pre-noise displacement (diagnostics/oracles)
  VibrationTrace vib_noisy;   // what the radar observed
  Scenario scenario = Scenario::kStillness;
  LatentSource latent;
  GenConfig meta;
  std::uint64_t seed = 0;
};

LatentSource gen_latent(double duration_s, double hr_bpm_mean, double hr_bpm_std,
                        std::uint64_t seed, const GenConfig& cfg = GenConfig{});

ECGWaveform render_ecg(const LatentSource& latent, double fs);

VibrationTrace render_vibration(const LatentSource& latent, double fs,
                                const GenConfig& cfg = GenConfig{});

VibrationTrace add_motion_noise(const VibrationTrace& vib, Scenario scenario,
                                std::uint64_t seed, const GenConfig& cfg = GenConfig{});

ImuRecord simulate_imu(const VibrationTrace& trace, const std::array<double, 3>& mount_axis_mix,
                       double fs_imu, double axis_gain_jitter, double noise_std,
                       std::uint64_t seed);

// `motion` (same rate/length as `trace`, may be empty) is extra displacement
// scaled per antenna by cfg.antenna_motion_gains before entering the range.
RadarCube simulate_radar(const VibrationTrace& trace, double target_range_m,
                         const RadarConfig& cfg, std::uint64_t seed,
                         const std::vector<double>& motion = {});

SessionRecording gen_session(Scenario scenario, double duration_s, std::uint64_t seed,
                             const GenConfig& cfg = GenConfig{});

// Session persistence: directory with arrays.bin + meta.json. Bit-exact.
void save_session(const SessionRecording& s, const std::string& dir);
SessionRecording load_session(const std::string& dir);

}  // namespace merit::synth
