#include "merit/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "merit/core/rng.hpp"

namespace merit::synth {

namespace {
constexpr double kPi = std::numbers::pi;

std::size_t sample_count(double duration_s, double fs) {
  return static_cast<std::size_t>(std::llround(duration_s * fs));
}

// Two-pass first-order lowpass (forward only); keeps broadband noise from
// acquiring unphysical energy at the differentiator's high end.
void lowpass_inplace(std::vector<double>& x, double cutoff_hz, double fs) {
  if (x.empty()) return;
  double alpha = 1.0 - std::exp(-2.0 * kPi * cutoff_hz / fs);
  for (int pass = 0; pass < 2; ++pass) {
    double state = x[0];
    for (double& v : x) {
      state += alpha * (v - state);
      v = state;
    }
  }
}

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}
}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kStillness: return "stillness";
    case Scenario::kTyping: return "typing";
    case Scenario::kFlipping: return "flipping";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "stillness") return Scenario::kStillness;
  if (s == "typing") return Scenario::kTyping;
  if (s == "flipping") return Scenario::kFlipping;
  throw std::invalid_argument("unknown scenario: " + s);
}

Morphology default_morphology() {
  return Morphology{{
      {0.15, -0.200, 0.025},   // P
      {-0.10, -0.035, 0.010},  // Q
      {1.00, 0.000, 0.012},    // R
      {-0.15, 0.035, 0.010},   // S
      {0.30, 0.220, 0.045},    // T
  }};
}

LatentSource gen_latent(double duration_s, double hr_bpm_mean, double hr_bpm_std,
                        std::uint64_t seed, const GenConfig& cfg) {
  if (duration_s < 0.0) throw std::invalid_argument("gen_latent: negative duration");
  if (hr_bpm_mean < 40.0 || hr_bpm_mean > 180.0)
    throw std::invalid_argument("gen_latent: hr mean outside [40, 180]");
  if (hr_bpm_std < 0.0) throw std::invalid_argument("gen_latent: negative hr std");

  LatentSource latent;
  latent.duration_s = duration_s;
  latent.seed = seed;
  Rng rng(seed);
  Rng morph_rng = rng.fork(1);

  double t = 0.0;
  while (t < duration_s) {
    latent.beat_times.push_back(t);
    Morphology m = default_morphology();
    for (Wave& w : m) {
      w.amp_mv *= 1.0 + cfg.morph_jitter * morph_rng.normal();
      w.width_s *= 1.0 + 0.5 * cfg.morph_jitter * morph_rng.normal();
    }
    latent.beat_shapes.push_back(m);
    double hr = std::clamp(hr_bpm_mean + hr_bpm_std * rng.normal(), cfg.hr_bpm_min, cfg.hr_bpm_max);
    t += 60.0 / hr;
  }
  return latent;
}

ECGWaveform render_ecg(const LatentSource& latent, double fs) {
  if (fs <= 0.0) throw std::invalid_argument("render_ecg: fs must be positive");
  ECGWaveform ecg;
  ecg.fs = fs;
  ecg.samples.assign(sample_count(latent.duration_s, fs), 0.0);
  const std::size_t n = ecg.samples.size();
  for (std::size_t b = 0; b < latent.beat_times.size(); ++b) {
    double bt = latent.beat_times[b];
    for (const Wave& w : latent.beat_shapes[b]) {
      double c = bt + w.center_s;
      double half = 5.0 * w.width_s;
      auto lo = static_cast<std::ptrdiff_t>(std::floor((c - half) * fs));
      auto hi = static_cast<std::ptrdiff_t>(std::ceil((c + half) * fs));
      for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, lo);
           k <= hi && k < static_cast<std::ptrdiff_t>(n); ++k) {
        double dt = static_cast<double>(k) / fs - c;
        ecg.samples[static_cast<std::size_t>(k)] +=
            w.amp_mv * std::exp(-0.5 * dt * dt / (w.width_s * w.width_s));
      }
    }
  }
  return ecg;
}

VibrationTrace render_vibration(const LatentSource& latent, double fs, const GenConfig& cfg) {
  if (fs <= 0.0) throw std::invalid_argument("render_vibration: fs must be positive");
  VibrationTrace vib;
  vib.fs = fs;
  vib.displacement.assign(sample_count(latent.duration_s, fs), 0.0);
  const std::size_t n = vib.displacement.size();

  const double omega = 2.0 * kPi * cfg.vib_freq_hz;
  const double damp = cfg.vib_damping;
  // Damped sine sin(w*tau)*exp(-d*tau) peaks at tau*; shift the onset so the
  // pulse maximum lands exactly transit_delay after the beat.
  const double tau_peak = std::atan(omega / damp) / omega;
  const double peak_val = std::sin(omega * tau_peak) * std::exp(-damp * tau_peak);
  const double amp = cfg.vib_amp_m / peak_val;
  const double tail_s = 9.2 / damp;  // exp(-9.2) ~ 1e-4

  for (double bt : latent.beat_times) {
    double onset = bt + cfg.transit_delay_s - tau_peak;
    auto lo = static_cast<std::ptrdiff_t>(std::ceil(onset * fs));
    auto hi = static_cast<std::ptrdiff_t>(std::floor((onset + tail_s) * fs));
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, lo);
         k <= hi && k < static_cast<std::ptrdiff_t>(n); ++k) {
      double tau = static_cast<double>(k) / fs - onset;
      vib.displacement[static_cast<std::size_t>(k)] +=
          amp * std::sin(omega * tau) * std::exp(-damp * tau);
    }
  }
  return vib;
}

VibrationTrace add_motion_noise(const VibrationTrace& vib, Scenario scenario,
                                std::uint64_t seed, const GenConfig& cfg) {
  VibrationTrace out = vib;
  if (cfg.noise_scale == 0.0 || vib.displacement.empty()) return out;

  const std::size_t n = vib.displacement.size();
  const double fs = vib.fs;
  Rng rng(seed ^ (static_cast<std::uint64_t>(scenario) * 0xa24baed4963ee407ULL));

  std::vector<double> noise(n, 0.0);
  // Broadband sensor floor, present in every scenario; band-limited so its
  // second derivative stays physical.
  double floor_std = cfg.still_broadband_m;
  for (double& v : noise) v = floor_std * rng.normal();
  lowpass_inplace(noise, 10.0, fs);
  // Lowpass eats variance; restore the configured floor RMS.
  double r = rms(noise);
  if (r > 0.0)
    for (double& v : noise) v *= floor_std / r;

  if (scenario == Scenario::kTyping) {
    // Continuous hand/arm drift while typing: slow narrowband wander, a few
    // times the keystroke amplitude.
    double phase = rng.uniform(0.0, 2.0 * kPi);
    double phase2 = rng.uniform(0.0, 2.0 * kPi);
    double wobble = rng.uniform(0.04, 0.10);
    for (std::size_t k = 0; k < n; ++k) {
      double tt = static_cast<double>(k) / fs;
      double f_inst = 1.2 + 0.8 * std::sin(2.0 * kPi * wobble * tt + phase2);
      phase += 2.0 * kPi * f_inst / fs;
      noise[k] += 5.0 * cfg.typing_burst_m * std::sin(phase);
    }
    // Quasi-periodic keystroke bursts: small, regular.
    double t = 0.2 + 0.2 * rng.uniform();
    while (t < static_cast<double>(n) / fs) {
      double f_burst = 4.5 + rng.uniform(-1.0, 1.0);
      double amp = cfg.typing_burst_m * (0.8 + 0.4 * rng.uniform());
      double sigma = 0.035;
      auto lo = static_cast<std::ptrdiff_t>((t - 4 * sigma) * fs);
      auto hi = static_cast<std::ptrdiff_t>((t + 4 * sigma) * fs);
      for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, lo);
           k <= hi && k < static_cast<std::ptrdiff_t>(n); ++k) {
        double dt = static_cast<double>(k) / fs - t;
        noise[static_cast<std::size_t>(k)] +=
            amp * std::exp(-0.5 * dt * dt / (sigma * sigma)) * std::sin(2.0 * kPi * f_burst * dt);
      }
      t += 1.0 / cfg.typing_rate_hz + 0.06 * rng.normal();
    }
  } else if (scenario == Scenario::kFlipping) {
    // Large jerky sweeps: instantaneous frequency wanders 1-6 Hz. Wrist
    // flips carry far more acceleration than keystrokes at equal amplitude.
    double phase1 = rng.uniform(0.0, 2.0 * kPi);
    double phase2 = rng.uniform(0.0, 2.0 * kPi);
    double wobble = rng.uniform(0.05, 0.12);
    for (std::size_t k = 0; k < n; ++k) {
      double t = static_cast<double>(k) / fs;
      double f_inst = 3.5 + 2.5 * std::sin(2.0 * kPi * wobble * t + phase2);
      phase1 += 2.0 * kPi * f_inst / fs;
      noise[k] += cfg.flip_sweep_m * std::sin(phase1) * (0.85 + 0.15 * std::sin(2.0 * kPi * 0.05 * t + phase2));
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    double v = vib.displacement[k] + cfg.noise_scale * noise[k];
    out.displacement[k] = std::clamp(v, -cfg.vib_clamp_m, cfg.vib_clamp_m);
  }
  return out;
}

ImuRecord simulate_imu(const VibrationTrace& trace, const std::array<double, 3>& mount_axis_mix,
                       double fs_imu, double axis_gain_jitter, double noise_std,
                       std::uint64_t seed) {
  if (fs_imu <= 0.0) throw std::invalid_argument("simulate_imu: fs_imu must be positive");

  // Resample displacement to the IMU clock (linear interpolation; exact
  // passthrough when the rates match).
  const std::size_t n_in = trace.displacement.size();
  std::size_t n = sample_count(static_cast<double>(n_in) / trace.fs, fs_imu);
  std::vector<double> d(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double pos = static_cast<double>(j) * trace.fs / fs_imu;
    auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= n_in) {
      d[j] = n_in ? trace.displacement[n_in - 1] : 0.0;
    } else {
      double frac = pos - static_cast<double>(i0);
      d[j] = (1.0 - frac) * trace.displacement[i0] + frac * trace.displacement[i0 + 1];
    }
  }

  // Central second difference.
  std::vector<double> acc(n, 0.0);
  double fs2 = fs_imu * fs_imu;
  for (std::size_t k = 1; k + 1 < n; ++k)
    acc[k] = (d[k - 1] - 2.0 * d[k] + d[k + 1]) * fs2;

  Rng rng(seed);
  ImuRecord imu;
  imu.fs = fs_imu;
  for (int ax = 0; ax < 3; ++ax) {
    double gain = mount_axis_mix[static_cast<std::size_t>(ax)] * (1.0 + axis_gain_jitter * rng.normal());
    auto& chan = imu.accel[static_cast<std::size_t>(ax)];
    chan.resize(n);
    for (std::size_t k = 0; k < n; ++k) chan[k] = gain * acc[k] + noise_std * rng.normal();
  }
  return imu;
}

RadarCube simulate_radar(const VibrationTrace& trace, double target_range_m,
                         const RadarConfig& cfg, std::uint64_t seed,
                         const std::vector<double>& motion) {
  if (target_range_m < 0.01 || target_range_m > cfg.max_range_m())
    throw std::invalid_argument("simulate_radar: target range out of bounds");
  if (std::abs(trace.fs - cfg.chirp_rate_hz) > 1e-9)
    throw std::invalid_argument("simulate_radar: displacement rate must equal chirp rate");
  if (!motion.empty() && motion.size() != trace.displacement.size())
    throw std::invalid_argument("simulate_radar: motion length must match displacement");

  const std::size_t n_chirps = trace.displacement.size();
  const std::size_t n_adc = cfg.n_adc;
  const double lambda = cfg.wavelength_m();

  RadarCube cube;
  cube.cfg = cfg;
  cube.n_chirps = n_chirps;
  cube.if_i.assign(n_chirps * cfg.n_rx * n_adc, 0.0);
  cube.if_q.assign(n_chirps * cfg.n_rx * n_adc, 0.0);

  Rng rng(seed);
  const double center = 0.5 * static_cast<double>(n_adc - 1);
  for (std::size_t m = 0; m < n_chirps; ++m) {
    for (std::size_t a = 0; a < cfg.n_rx; ++a) {
      // Stop-and-go: range frozen within a chirp. Gross motion projects onto
      // each antenna's line of sight with its own geometric gain.
      double range = target_range_m + trace.displacement[m];
      if (!motion.empty()) range += cfg.antenna_motion_gains[a % 3] * motion[m];
      double bin = 2.0 * range * cfg.bandwidth_hz / kSpeedOfLight;  // beat freq in bin units
      double phi0 = 4.0 * kPi * range / lambda + cfg.antenna_phase_offsets[a % 3];
      double* pi_ = cube.if_i.data() + cube.idx(m, a, 0);
      double* pq_ = cube.if_q.data() + cube.idx(m, a, 0);
      for (std::size_t k = 0; k < n_adc; ++k) {
        // Fast time referenced to chirp center so the extracted slow-time
        // phase carries exactly 4*pi*range/lambda.
        double ph = 2.0 * kPi * bin * (static_cast<double>(k) - center) / static_cast<double>(n_adc) + phi0;
        pi_[k] = cfg.amplitude * std::cos(ph);
        pq_[k] = cfg.amplitude * std::sin(ph);
      }
      if (cfg.noise_std > 0.0) {
        for (std::size_t k = 0; k < n_adc; ++k) {
          pi_[k] += cfg.noise_std * rng.normal();
          pq_[k] += cfg.noise_std * rng.normal();
        }
      }
    }
  }
  return cube;
}

SessionRecording gen_session(Scenario scenario, double duration_s, std::uint64_t seed,
                             const GenConfig& cfg) {
  SessionRecording s;
  s.scenario = scenario;
  s.seed = seed;
  s.meta = cfg;

  s.latent = gen_latent(duration_s, cfg.hr_bpm_mean, cfg.hr_bpm_std, seed, cfg);
  s.ecg = render_ecg(s.latent, cfg.fs_ecg);
  s.vib_clean = render_vibration(s.latent, cfg.fs_vib, cfg);
  s.vib_noisy = add_motion_noise(s.vib_clean, scenario, seed ^ 0x6d6f74696f6eULL, cfg);

  RadarConfig rc = cfg.radar;
  rc.chirp_rate_hz = cfg.fs_vib;
  std::vector<double> motion(s.vib_clean.displacement.size());
  for (std::size_t k = 0; k < motion.size(); ++k)
    motion[k] = s.vib_noisy.displacement[k] - s.vib_clean.displacement[k];
  s.radar = simulate_radar(s.vib_clean, cfg.target_range_m, rc, seed ^ 0x726164617220ULL, motion);

  // The IMU couples to arm motion more strongly than the radar path does.
  VibrationTrace imu_in = s.vib_clean;
  for (std::size_t k = 0; k < imu_in.displacement.size(); ++k) {
    double motion = s.vib_noisy.displacement[k] - s.vib_clean.displacement[k];
    imu_in.displacement[k] += cfg.imu_motion_gain * motion;
  }
  s.imu = simulate_imu(imu_in, cfg.mount_axis_mix, cfg.fs_imu, cfg.imu_axis_gain_jitter,
                       cfg.imu_noise_std, seed ^ 0x696d7520202020ULL);
  return s;
}

nlohmann::json GenConfig::to_json() const {
  return nlohmann::json{
      {"fs_ecg", fs_ecg},
      {"fs_vib", fs_vib},
      {"fs_imu", fs_imu},
      {"hr_bpm_mean", hr_bpm_mean},
      {"hr_bpm_std", hr_bpm_std},
      {"hr_bpm_min", hr_bpm_min},
      {"hr_bpm_max", hr_bpm_max},
      {"morph_jitter", morph_jitter},
      {"transit_delay_s", transit_delay_s},
      {"vib_amp_m", vib_amp_m},
      {"vib_freq_hz", vib_freq_hz},
      {"vib_damping", vib_damping},
      {"vib_clamp_m", vib_clamp_m},
      {"noise_scale", noise_scale},
      {"still_broadband_m", still_broadband_m},
      {"typing_burst_m", typing_burst_m},
      {"typing_rate_hz", typing_rate_hz},
      {"flip_sweep_m", flip_sweep_m},
      {"mount_axis_mix", mount_axis_mix},
      {"imu_axis_gain_jitter", imu_axis_gain_jitter},
      {"imu_noise_std", imu_noise_std},
      {"imu_motion_gain", imu_motion_gain},
      {"target_range_m", target_range_m},
      {"radar",
       {{"n_adc", radar.n_adc},
        {"n_rx", radar.n_rx},
        {"bandwidth_hz", radar.bandwidth_hz},
        {"carrier_hz", radar.carrier_hz},
        {"chirp_rate_hz", radar.chirp_rate_hz},
        {"amplitude", radar.amplitude},
        {"noise_std", radar.noise_std},
        {"antenna_phase_offsets", radar.antenna_phase_offsets},
        {"antenna_motion_gains", radar.antenna_motion_gains}}},
  };
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
  GenConfig c;
  c.fs_ecg = j.value("fs_ecg", c.fs_ecg);
  c.fs_vib = j.value("fs_vib", c.fs_vib);
  c.fs_imu = j.value("fs_imu", c.fs_imu);
  c.hr_bpm_mean = j.value("hr_bpm_mean", c.hr_bpm_mean);
  c.hr_bpm_std = j.value("hr_bpm_std", c.hr_bpm_std);
  c.hr_bpm_min = j.value("hr_bpm_min", c.hr_bpm_min);
  c.hr_bpm_max = j.value("hr_bpm_max", c.hr_bpm_max);
  c.morph_jitter = j.value("morph_jitter", c.morph_jitter);
  c.transit_delay_s = j.value("transit_delay_s", c.transit_delay_s);
  c.vib_amp_m = j.value("vib_amp_m", c.vib_amp_m);
  c.vib_freq_hz = j.value("vib_freq_hz", c.vib_freq_hz);
  c.vib_damping = j.value("vib_damping", c.vib_damping);
  c.vib_clamp_m = j.value("vib_clamp_m", c.vib_clamp_m);
  c.noise_scale = j.value("noise_scale", c.noise_scale);
  c.still_broadband_m = j.value("still_broadband_m", c.still_broadband_m);
  c.typing_burst_m = j.value("typing_burst_m", c.typing_burst_m);
  c.typing_rate_hz = j.value("typing_rate_hz", c.typing_rate_hz);
  c.flip_sweep_m = j.value("flip_sweep_m", c.flip_sweep_m);
  if (j.contains("mount_axis_mix")) c.mount_axis_mix = j["mount_axis_mix"].get<std::array<double, 3>>();
  c.imu_axis_gain_jitter = j.value("imu_axis_gain_jitter", c.imu_axis_gain_jitter);
  c.imu_noise_std = j.value("imu_noise_std", c.imu_noise_std);
  c.imu_motion_gain = j.value("imu_motion_gain", c.imu_motion_gain);
  c.target_range_m = j.value("target_range_m", c.target_range_m);
  if (j.contains("radar")) {
    const auto& r = j["radar"];
    c.radar.n_adc = r.value("n_adc", c.radar.n_adc);
    c.radar.n_rx = r.value("n_rx", c.radar.n_rx);
    c.radar.bandwidth_hz = r.value("bandwidth_hz", c.radar.bandwidth_hz);
    c.radar.carrier_hz = r.value("carrier_hz", c.radar.carrier_hz);
    c.radar.chirp_rate_hz = r.value("chirp_rate_hz", c.radar.chirp_rate_hz);
    c.radar.amplitude = r.value("amplitude", c.radar.amplitude);
    c.radar.noise_std = r.value("noise_std", c.radar.noise_std);
    if (r.contains("antenna_phase_offsets"))
      c.radar.antenna_phase_offsets = r["antenna_phase_offsets"].get<std::array<double, 3>>();
    if (r.contains("antenna_motion_gains"))
      c.radar.antenna_motion_gains = r["antenna_motion_gains"].get<std::array<double, 3>>();
  }
  return c;
}

}  // namespace merit::synth
