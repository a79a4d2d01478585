#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "merit/core/container.hpp"
#include "merit/harness.hpp"

namespace fs = std::filesystem;

namespace merit::harness {
namespace {

const synth::Scenario kScenarios[3] = {synth::Scenario::kStillness, synth::Scenario::kTyping,
                                       synth::Scenario::kFlipping};

std::string session_dir(const std::string& root, synth::Scenario sc, std::size_t i) {
  return root + "/" + synth::to_string(sc) + "_" + std::to_string(i);
}

std::uint64_t session_seed(const ExperimentConfig& cfg, std::size_t scn, std::size_t i) {
  return cfg.seed ^ (0x9e3779b97f4a7c15ULL * (scn * 1000 + i + 1));
}

}  // namespace

std::string hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("hash_file: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return buf;
}

std::string cmd_generate(const ExperimentConfig& cfg, bool force) {
  const std::string root = cfg.dataset_dir();
  const std::string manifest_path = root + "/manifest.json";
  if (!force && fs::exists(manifest_path)) return root;

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cmd_generate: cannot create " + root + ": " + ec.message());

  nlohmann::json sessions = nlohmann::json::array();
  for (std::size_t scn = 0; scn < 3; ++scn) {
    for (std::size_t i = 0; i < cfg.n_sessions; ++i) {
      std::string dir = session_dir(root, kScenarios[scn], i);
      fs::create_directories(dir, ec);
      if (ec) throw std::runtime_error("cmd_generate: cannot create " + dir + ": " + ec.message());
      std::uint64_t seed = session_seed(cfg, scn, i);
      synth::SessionRecording rec =
          synth::gen_session(kScenarios[scn], cfg.duration_s, seed, cfg.gen);
      synth::save_session(rec, dir);
      sessions.push_back({{"dir", fs::path(dir).filename().string()},
                          {"scenario", synth::to_string(kScenarios[scn])},
                          {"seed", seed},
                          {"hash", hash_file(dir + "/arrays.bin")}});
    }
  }
  nlohmann::json manifest = {{"sessions", sessions},
                             {"n_sessions", cfg.n_sessions},
                             {"duration_s", cfg.duration_s},
                             {"seed", cfg.seed}};
  atomic_write_text(manifest_path, manifest.dump(2) + "\n");
  return root;
}

std::vector<SessionChannels> build_session_channels(const ExperimentConfig& cfg) {
  const std::string root = cfg.dataset_dir();
  const std::string manifest_path = root + "/manifest.json";
  if (!fs::exists(manifest_path))
    throw std::runtime_error("build_segments: dataset missing at " + root +
                             " (run generate first)");
  nlohmann::json manifest = nlohmann::json::parse(read_text(manifest_path));

  std::vector<SessionChannels> out;
  int session_id = 0;
  for (const auto& entry : manifest.at("sessions")) {
    std::string dir = root + "/" + entry.at("dir").get<std::string>();
    synth::SessionRecording rec = synth::load_session(dir);

    prep::RangeProfile profile = prep::range_fft(rec.radar);
    std::size_t bin = prep::select_target_bin(profile, cfg.range_lo_m, cfg.range_hi_m);
    prep::PhaseChannels ph;
    if (cfg.radar_mode == RadarMode::kAnt) {
      ph = prep::extract_phase(profile, bin);
    } else {
      std::size_t first = bin;
      if (first + 3 > profile.n_bins) first = profile.n_bins - 3;
      ph = prep::extract_phase_bins(profile, 0, first, 3);
    }

    SessionChannels sc;
    sc.scenario = static_cast<int>(rec.scenario);
    sc.session_id = session_id;
    for (const auto& c : ph.phase) sc.channels.push_back(prep::resample(c, ph.fs, cfg.fs_out));
    for (const auto& axis : rec.imu.accel)
      sc.channels.push_back(prep::resample(axis, rec.imu.fs, cfg.fs_out));
    sc.ecg = prep::resample(rec.ecg.samples, rec.ecg.fs, cfg.fs_out);

    std::size_t n = sc.ecg.size();
    for (const auto& c : sc.channels) n = std::min(n, c.size());
    for (auto& c : sc.channels) c.resize(n);
    sc.ecg.resize(n);
    out.push_back(std::move(sc));
    ++session_id;
  }
  return out;
}

SegmentDataset segments_from_sessions(const std::vector<SessionChannels>& sessions,
                                      const ExperimentConfig& cfg) {
  SegmentDataset ds;
  std::int64_t next_index = 0;
  for (const auto& sc : sessions) {
    prep::SegmentationResult seg = prep::segment_and_standardize(
        sc.channels, sc.ecg, cfg.window_t, cfg.stride, sc.scenario, sc.session_id, next_index);
    next_index += static_cast<std::int64_t>(seg.segments.size());
    ds.n_warnings += seg.n_warnings;
    for (auto& s : seg.segments) ds.segments.push_back(std::move(s));
  }
  ds.n_radar = 3;
  ds.n_imu = 3;
  return ds;
}

SegmentDataset build_segments(const ExperimentConfig& cfg) {
  return segments_from_sessions(build_session_channels(cfg), cfg);
}

std::map<int, int> session_roles(const std::vector<std::pair<int, int>>& sessions) {
  // Collect the distinct sessions of each scenario in first-seen order.
  std::map<int, std::vector<int>> sessions_by_scenario;
  for (const auto& [session, scenario] : sessions) {
    auto& v = sessions_by_scenario[scenario];
    if (std::find(v.begin(), v.end(), session) == v.end()) v.push_back(session);
  }

  std::map<int, int> role;  // session -> 0 train, 1 val, 2 test
  for (auto& [scenario, sess] : sessions_by_scenario) {
    std::size_t n = sess.size();
    std::size_t n_test = std::max<std::size_t>(1, n / 5);
    std::size_t n_val = std::max<std::size_t>(1, n / 5);
    if (n < n_test + n_val + 1)
      throw std::runtime_error("split_by_session: need at least 3 sessions per scenario");
    for (std::size_t i = 0; i < n; ++i)
      role[sess[i]] = (i < n - n_test - n_val) ? 0 : (i < n - n_test) ? 1 : 2;
  }
  return role;
}

Split split_by_session(const SegmentDataset& ds) {
  std::vector<std::pair<int, int>> sessions;
  for (const auto& s : ds.segments) sessions.emplace_back(s.session, s.scenario);
  std::map<int, int> role = session_roles(sessions);

  Split sp;
  for (std::size_t i = 0; i < ds.segments.size(); ++i) {
    switch (role.at(ds.segments[i].session)) {
      case 0: sp.train.push_back(i); break;
      case 1: sp.val.push_back(i); break;
      default: sp.test.push_back(i); break;
    }
  }
  return sp;
}

}  // namespace merit::harness
