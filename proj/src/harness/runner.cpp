#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "merit/core/container.hpp"
#include "merit/deepica.hpp"
#include "merit/harness.hpp"

namespace fs = std::filesystem;

namespace merit::harness {
namespace {

fusion::Batch make_batch(const SegmentDataset& ds, const std::vector<std::size_t>& idx,
                         std::size_t window_t) {
  const std::size_t nr = ds.n_radar, ni = ds.n_imu;
  fusion::Batch b;
  b.radar = Matrix(idx.size(), nr * window_t);
  b.imu = Matrix(idx.size(), ni * window_t);
  b.target = Matrix(idx.size(), window_t);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = ds.segments[idx[i]];
    for (std::size_t c = 0; c < nr; ++c)
      std::copy(s.x.row(c), s.x.row(c) + window_t, b.radar.row(i) + c * window_t);
    for (std::size_t c = 0; c < ni; ++c)
      std::copy(s.x.row(nr + c), s.x.row(nr + c) + window_t, b.imu.row(i) + c * window_t);
    std::copy(s.target.begin(), s.target.end(), b.target.row(i));
  }
  return b;
}

void restandardize_rows(Matrix& x) {
  for (std::size_t c = 0; c < x.rows; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) m += x(c, j);
    m /= static_cast<double>(x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) v += (x(c, j) - m) * (x(c, j) - m);
    v /= static_cast<double>(x.cols);
    double inv = (v > 0.0) ? 1.0 / std::sqrt(v) : 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) x(c, j) = (x(c, j) - m) * inv;
  }
}

// Trains the EBM on the radar channels of the train split and replaces
// every segment's radar rows with its re-standardized separated sources;
// IMU channels pass through untouched.
void run_ica_stage(const ExperimentConfig& cfg, SegmentDataset& ds, const Split& sp,
                   const std::string& run_dir) {
  const std::size_t d_x = ds.n_radar;
  std::int64_t max_y = 0;
  for (const auto& s : ds.segments) max_y = std::max(max_y, s.y);

  ica::EbmConfig ec;
  ec.d_x = d_x;
  ec.d_z = d_x;
  ec.d_y = static_cast<std::size_t>(max_y) + 1;
  Rng rng(cfg.seed ^ 0x696361ULL);
  ica::Ebm ebm(ec, rng);
  ica::Flow flow(d_x, ec.d_y, ec.flow_layers, ec.flow_hidden, rng);

  const std::size_t t = cfg.window_t;
  Matrix x(sp.train.size() * t, d_x);
  std::vector<std::int64_t> y(sp.train.size() * t);
  for (std::size_t i = 0; i < sp.train.size(); ++i) {
    const auto& s = ds.segments[sp.train[i]];
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t c = 0; c < d_x; ++c) x(i * t + j, c) = s.x(c, j);
      y[i * t + j] = s.y;
    }
  }

  ica::TrainConfig tc;
  tc.steps = cfg.ica_steps;
  tc.batch = cfg.ica_batch;
  tc.lr_ebm = cfg.ica_lr;
  tc.lr_flow = cfg.ica_lr;
  tc.seed = cfg.seed ^ 0x6963617472ULL;
  ica::TrainResult tr = ica::train_deepica(x, y, ebm, flow, tc);
  if (tr.diverged) throw std::runtime_error("deep-ica stage: training diverged");
  ica::save_checkpoint(run_dir + "/ica_checkpoint.bin", ebm, flow, tr);

  // Consensus channel order/sign over the whole train split so every
  // segment's separated channels keep the same semantics.
  Matrix concat(d_x, sp.train.size() * t);
  for (std::size_t i = 0; i < sp.train.size(); ++i) {
    const auto& s = ds.segments[sp.train[i]];
    for (std::size_t c = 0; c < d_x; ++c)
      std::copy(s.x.row(c), s.x.row(c) + t, concat.row(c) + i * t);
  }
  ica::SeparationResult consensus = ica::separate(concat, ebm, cfg.fs_out);

  for (auto& s : ds.segments) {
    Matrix radar(d_x, s.x.cols);
    for (std::size_t c = 0; c < d_x; ++c)
      std::copy(s.x.row(c), s.x.row(c) + s.x.cols, radar.row(c));
    ica::SeparationResult sep =
        ica::separate_ordered(radar, ebm, consensus.order, consensus.signs, consensus.unmix);
    restandardize_rows(sep.sources);
    for (std::size_t c = 0; c < d_x; ++c)
      std::copy(sep.sources.row(c), sep.sources.row(c) + s.x.cols, s.x.row(c));
  }
}

metrics::MetricsReport eval_rows(const Matrix& rec, const Matrix& tgt,
                                 const std::vector<std::size_t>& rows, double fs) {
  Matrix a(rows.size(), rec.cols), b(rows.size(), tgt.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rec.row(rows[i]), rec.row(rows[i]) + rec.cols, a.row(i));
    std::copy(tgt.row(rows[i]), tgt.row(rows[i]) + tgt.cols, b.row(i));
  }
  return metrics::evaluate(a, b, fs);
}

void write_metrics_json(const std::string& path,
                        const std::map<std::string, metrics::MetricsReport>& reports) {
  nlohmann::json j;
  for (const auto& [name, r] : reports) j[name] = r.to_json();
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace

RunRecord cmd_run(const ExperimentConfig& cfg, bool force) {
  const std::string run_dir = cfg.run_dir();
  if (!force && fs::exists(run_dir + "/metrics.json")) return load_run_record(run_dir);

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  nlohmann::json timings;
  std::string stage = "setup";
  try {
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + run_dir + ": " + ec.message());

    stage = "generate";
    cmd_generate(cfg);

    stage = "preprocess";
    SegmentDataset ds = build_segments(cfg);
    Split sp = split_by_session(ds);
    auto t1 = clock::now();
    timings["preprocess_s"] = std::chrono::duration<double>(t1 - t0).count();

    if (cfg.ica_enabled) {
      stage = "deep-ica";
      run_ica_stage(cfg, ds, sp, run_dir);
    }
    auto t2 = clock::now();
    timings["ica_s"] = std::chrono::duration<double>(t2 - t1).count();

    stage = "fusion";
    fusion::FusionConfig fc = cfg.fusion;
    fc.window_t = cfg.window_t;
    Rng rng(cfg.seed ^ fc.seed ^ 0x667573696f6eULL);
    fusion::Generator g(ds.n_radar, ds.n_imu, fc, rng);
    fusion::Discriminator d(ds.n_radar, ds.n_imu, fc, rng);
    fusion::Batch train_b = make_batch(ds, sp.train, cfg.window_t);
    fusion::Batch val_b = make_batch(ds, sp.val, cfg.window_t);
    fusion::TrainFusionResult fr = fusion::train_fusion(train_b, val_b, g, d, fc);
    if (fr.diverged) throw std::runtime_error("fusion training diverged");
    fusion::save_fusion_checkpoint(run_dir + "/fusion_checkpoint.bin", g, d, fc, fr);
    auto t3 = clock::now();
    timings["fusion_s"] = std::chrono::duration<double>(t3 - t2).count();

    stage = "evaluate";
    fusion::Batch test_b = make_batch(ds, sp.test, cfg.window_t);
    Matrix rec = g.forward(test_b.radar, test_b.imu, /*train=*/false);

    RunRecord record;
    record.run_dir = run_dir;
    record.method = cfg.method_label();
    record.config_kv = cfg.to_kv();
    record.dataset_hash = cfg.dataset_key();

    std::vector<std::size_t> all(rec.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    record.reports["pooled"] = eval_rows(rec, test_b.target, all, cfg.fs_out);
    for (int scn = 0; scn < 3; ++scn) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < sp.test.size(); ++i)
        if (ds.segments[sp.test[i]].scenario == scn) rows.push_back(i);
      if (rows.empty()) continue;
      record.reports[synth::to_string(static_cast<synth::Scenario>(scn))] =
          eval_rows(rec, test_b.target, rows, cfg.fs_out);
    }

    stage = "persist";
    Archive out;
    out.put_f64("recon", {rec.rows, rec.cols}, rec.d);
    out.put_f64("target", {test_b.target.rows, test_b.target.cols}, test_b.target.d);
    std::vector<std::int64_t> scn(sp.test.size());
    for (std::size_t i = 0; i < sp.test.size(); ++i) scn[i] = ds.segments[sp.test[i]].scenario;
    out.put_i64("scenario", {scn.size()}, scn);
    out.meta["fs"] = cfg.fs_out;
    out.save(run_dir + "/reconstructions.bin");

    atomic_write_text(run_dir + "/config.kv", record.config_kv);
    atomic_write_text(run_dir + "/method.txt", record.method + "\n");
    write_metrics_json(run_dir + "/metrics.json", record.reports);
    timings["total_s"] = std::chrono::duration<double>(clock::now() - t0).count();
    atomic_write_text(run_dir + "/timings.json", timings.dump(2) + "\n");
    return record;
  } catch (const std::exception& e) {
    throw std::runtime_error("cmd_run failed at stage '" + stage + "': " + e.what());
  }
}

RunRecord load_run_record(const std::string& run_dir) {
  if (!fs::exists(run_dir + "/metrics.json"))
    throw std::runtime_error("load_run_record: no metrics.json in " + run_dir);
  RunRecord r;
  r.run_dir = run_dir;
  r.config_kv = read_text(run_dir + "/config.kv");
  nlohmann::json j = nlohmann::json::parse(read_text(run_dir + "/metrics.json"));
  for (auto it = j.begin(); it != j.end(); ++it)
    r.reports[it.key()] = metrics::MetricsReport::from_json(it.value());
  std::string m = read_text(run_dir + "/method.txt");
  while (!m.empty() && (m.back() == '\n' || m.back() == '\r')) m.pop_back();
  r.method = m;
  r.dataset_hash = ExperimentConfig::from_kv(r.config_kv).dataset_key();
  return r;
}

std::vector<RunRecord> cmd_ablate(const ExperimentConfig& cfg,
                                  const std::vector<AblateCell>& cells, bool force) {
  cmd_generate(cfg);
  std::vector<RunRecord> records;
  std::string summary_csv = "method,scenario,CC,COS,RMSE,precision,recall,F1\n";
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& cell : cells) {
    ExperimentConfig c = cfg;
    c.fusion.modality = cell.modality;
    c.ica_enabled = cell.ica;
    c.radar_mode = cell.radar_mode;
    try {
      RunRecord r = cmd_run(c, force);
      for (const auto& [scenario, rep] : r.reports)
        summary_csv += rep.csv_row(r.method, scenario) + "\n";
      nlohmann::json jr;
      jr["method"] = r.method;
      jr["run_dir"] = r.run_dir;
      for (const auto& [scenario, rep] : r.reports) jr["reports"][scenario] = rep.to_json();
      summary.push_back(jr);
      records.push_back(std::move(r));
    } catch (const std::exception& e) {
      std::cerr << "ablate cell " << c.method_label() << " failed: " << e.what() << "\n";
    }
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir + "/ablate", ec);
  atomic_write_text(cfg.out_dir + "/ablate/summary.csv", summary_csv);
  atomic_write_text(cfg.out_dir + "/ablate/summary.json", summary.dump(2) + "\n");
  return records;
}

std::vector<RunRecord> cmd_sweep(const ExperimentConfig& cfg, const std::string& param,
                                 const std::vector<double>& values, bool force) {
  if (values.empty()) throw std::invalid_argument("cmd_sweep: values must be non-empty");
  if (param != "alpha" && param != "batch_size")
    throw std::invalid_argument("cmd_sweep: param must be alpha or batch_size");

  std::vector<RunRecord> records;
  std::string csv = param + ",CC,COS,RMSE,F1\n";
  std::vector<double> xs, ys;
  for (double v : values) {
    ExperimentConfig c = cfg;
    if (param == "alpha")
      c.fusion.alpha = v;
    else
      c.fusion.batch = static_cast<std::size_t>(v);
    RunRecord r = cmd_run(c, force);
    const auto& rep = r.reports.at("pooled");
    std::ostringstream row;
    row.precision(6);
    row << std::fixed << v << ',' << rep.cc << ',' << rep.cos << ',' << rep.rmse << ','
        << rep.rpeak.f1 << '\n';
    csv += row.str();
    xs.push_back(v);
    ys.push_back(rep.cc);
    records.push_back(std::move(r));
  }

  std::string dir = cfg.out_dir + "/sweeps/" + param;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cmd_sweep: cannot create " + dir);
  atomic_write_text(dir + "/sweep.csv", csv);
  write_curve_svg(dir + "/curve.svg", param, "pooled CC", xs, ys);
  return records;
}

}  // namespace merit::harness
