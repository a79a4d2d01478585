#pragma once
// Experiment driver: configuration, dataset builds, runs, ablations,
// sweeps, and report emission.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "merit/fusion.hpp"
#include "merit/metrics.hpp"
#include "merit/preprocess.hpp"
#include "merit/synthgen.hpp"

namespace merit::harness {

enum class RadarMode { kAnt, kIdx };
std::string to_string(RadarMode m);
RadarMode radar_mode_from_string(const std::string& s);

struct ExperimentConfig {
  // dataset
  std::size_t n_sessions = 5;  // per scenario
  double duration_s = 120.0;
  std::uint64_t seed = 1;
  synth::GenConfig gen;

  // preprocessing
  std::size_t window_t = 200;
  std::size_t stride = 100;
  double fs_out = 50.0;
  double range_lo_m = 0.03, range_hi_m = 0.09;

  // Deep-ICA
  bool ica_enabled = false;
  RadarMode radar_mode = RadarMode::kAnt;
  std::size_t ica_steps = 1000;
  std::size_t ica_batch = 128;
  double ica_lr = 1e-3;

  fusion::FusionConfig fusion;

  std::string out_dir = "out";

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  // "key = value" lines, dotted keys, sorted; values are JSON literals.
  std::string to_kv() const;
  static ExperimentConfig from_kv(const std::string& text);

  std::string dataset_key() const;  // hash of dataset-determining fields
  std::string run_key() const;      // hash of everything but out_dir
  std::string dataset_dir() const;
  std::string run_dir() const;
  // Human-readable variant label, e.g. "both+ica-ant".
  std::string method_label() const;
};

std::uint64_t fnv1a(const void* data, std::size_t n);
std::string hash_file(const std::string& path);

struct SegmentDataset {
  std::vector<prep::SegmentPair> segments;
  std::size_t n_radar = 3, n_imu = 3;
  std::size_t n_warnings = 0;
};

// One session's aligned 50 Hz channel stack before windowing: 3 radar phase
// channels, then 3 IMU axes, plus the reference ECG.
struct SessionChannels {
  std::vector<std::vector<double>> channels;
  std::vector<double> ecg;
  int scenario = 0;
  int session_id = 0;
};

struct Split {
  std::vector<std::size_t> train, val, test;  // indices into segments
};

// Session-wise 3:1:1 role assignment inside each scenario (0 train, 1 val,
// 2 test); throws if any part of the split would be empty. Sessions are
// listed as (session_id, scenario) in first-seen order.
std::map<int, int> session_roles(const std::vector<std::pair<int, int>>& sessions);

// Session-wise 3:1:1 split inside each scenario; throws if any part of
// the split would be empty.
Split split_by_session(const SegmentDataset& ds);

struct RunRecord {
  std::string run_dir;
  std::string method;
  std::string config_kv;
  std::string dataset_hash;
  std::map<std::string, metrics::MetricsReport> reports;  // scenario -> report, plus "pooled"
};

// Generates n_sessions x 3 scenarios (idempotent unless force) and writes
// a manifest with per-session content hashes. Returns the dataset dir.
std::string cmd_generate(const ExperimentConfig& cfg, bool force = false);

// Loads the generated dataset and produces per-session aligned channel
// stacks at cfg.fs_out.
std::vector<SessionChannels> build_session_channels(const ExperimentConfig& cfg);

// Windows and standardizes session channels into segment pairs.
SegmentDataset segments_from_sessions(const std::vector<SessionChannels>& sessions,
                                      const ExperimentConfig& cfg);

// Preprocesses the generated dataset into windowed segment pairs.
SegmentDataset build_segments(const ExperimentConfig& cfg);

// Full pipeline: preprocess -> (optional Deep-ICA) -> fusion -> evaluation.
// Re-running a completed run is a no-op unless force.
RunRecord cmd_run(const ExperimentConfig& cfg, bool force = false);

struct AblateCell {
  fusion::Modality modality = fusion::Modality::kBoth;
  bool ica = false;
  RadarMode radar_mode = RadarMode::kAnt;
};
// Shared dataset and seeds across cells; partial failures leave completed
// cells intact. Writes a summary table next to the runs.
std::vector<RunRecord> cmd_ablate(const ExperimentConfig& cfg,
                                  const std::vector<AblateCell>& cells, bool force = false);

// param is "alpha" or "batch_size"; one run per value plus a curve plot
// and CSV under <out>/sweeps/<param>/.
std::vector<RunRecord> cmd_sweep(const ExperimentConfig& cfg, const std::string& param,
                                 const std::vector<double>& values, bool force = false);

// Tables (CSV + JSON, including labeled paper reference rows), per-run
// overlay plots, and a bar chart, written under report_dir. Missing run
// dirs are listed on stderr; the rest proceed.
void cmd_report(const std::vector<std::string>& run_dirs, const std::string& report_dir);

RunRecord load_run_record(const std::string& run_dir);

// Minimal SVG emitters used for report/sweep artifacts.
void write_curve_svg(const std::string& path, const std::string& x_label,
                     const std::string& y_label, const std::vector<double>& xs,
                     const std::vector<double>& ys);
void write_overlay_svg(const std::string& path, const std::vector<double>& truth,
                       const std::vector<double>& recon);
void write_bars_svg(const std::string& path, const std::vector<std::string>& labels,
                    const std::vector<double>& values, const std::string& y_label);

}  // namespace merit::harness
