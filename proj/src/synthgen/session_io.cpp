#include <filesystem>

#include "merit/core/container.hpp"
#include "merit/synthgen.hpp"

namespace merit::synth {

void save_session(const SessionRecording& s, const std::string& dir) {
  std::filesystem::create_directories(dir);

  Archive a;
  a.put_f64("radar_i", {s.radar.n_chirps, s.radar.cfg.n_rx, s.radar.cfg.n_adc}, s.radar.if_i);
  a.put_f64("radar_q", {s.radar.n_chirps, s.radar.cfg.n_rx, s.radar.cfg.n_adc}, s.radar.if_q);
  std::vector<double> imu;
  std::size_t n_imu = s.imu.accel[0].size();
  imu.reserve(3 * n_imu);
  for (const auto& chan : s.imu.accel) imu.insert(imu.end(), chan.begin(), chan.end());
  a.put_f64("imu", {3, n_imu}, imu);
  a.put_f64("ecg", {s.ecg.samples.size()}, s.ecg.samples);
  a.put_f64("vib_clean", {s.vib_clean.displacement.size()}, s.vib_clean.displacement);
  a.put_f64("vib_noisy", {s.vib_noisy.displacement.size()}, s.vib_noisy.displacement);
  a.put_f64("beat_times", {s.latent.beat_times.size()}, s.latent.beat_times);
  a.save(dir + "/arrays.bin");

  nlohmann::json meta;
  meta["scenario"] = to_string(s.scenario);
  meta["seed"] = s.seed;
  meta["duration_s"] = s.latent.duration_s;
  meta["config"] = s.meta.to_json();
  atomic_write_text(dir + "/meta.json", meta.dump(2) + "\n");
}

SessionRecording load_session(const std::string& dir) {
  Archive a = Archive::load(dir + "/arrays.bin");
  nlohmann::json meta = nlohmann::json::parse(read_text(dir + "/meta.json"));

  SessionRecording s;
  s.scenario = scenario_from_string(meta["scenario"].get<std::string>());
  s.seed = meta["seed"].get<std::uint64_t>();
  s.meta = GenConfig::from_json(meta["config"]);

  const auto& rshape = a.shape("radar_i");
  s.radar.cfg = s.meta.radar;
  s.radar.cfg.chirp_rate_hz = s.meta.fs_vib;
  s.radar.n_chirps = rshape[0];
  s.radar.cfg.n_rx = rshape[1];
  s.radar.cfg.n_adc = rshape[2];
  s.radar.if_i = a.f64("radar_i");
  s.radar.if_q = a.f64("radar_q");

  const auto& imu = a.f64("imu");
  std::size_t n_imu = a.shape("imu")[1];
  s.imu.fs = s.meta.fs_imu;
  for (std::size_t ax = 0; ax < 3; ++ax)
    s.imu.accel[ax].assign(imu.begin() + static_cast<std::ptrdiff_t>(ax * n_imu),
                           imu.begin() + static_cast<std::ptrdiff_t>((ax + 1) * n_imu));

  s.ecg.samples = a.f64("ecg");
  s.ecg.fs = s.meta.fs_ecg;
  s.vib_clean.displacement = a.f64("vib_clean");
  s.vib_clean.fs = s.meta.fs_vib;
  s.vib_noisy.displacement = a.f64("vib_noisy");
  s.vib_noisy.fs = s.meta.fs_vib;
  s.latent.beat_times = a.f64("beat_times");
  s.latent.duration_s = meta["duration_s"].get<double>();
  s.latent.seed = s.seed;
  return s;
}

}  // namespace merit::synth
