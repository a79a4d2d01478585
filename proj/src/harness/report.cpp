#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "merit/core/container.hpp"
#include "merit/harness.hpp"

namespace fs = std::filesystem;

namespace merit::harness {
namespace {

constexpr double kW = 640.0, kH = 360.0, kPad = 48.0;

std::string svg_open() {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys, double x_lo,
                     double x_hi, double y_lo, double y_hi, const std::string& color) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  double xr = (x_hi > x_lo) ? x_hi - x_lo : 1.0;
  double yr = (y_hi > y_lo) ? y_hi - y_lo : 1.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double px = kPad + (xs[i] - x_lo) / xr * (kW - 2 * kPad);
    double py = kH - kPad - (ys[i] - y_lo) / yr * (kH - 2 * kPad);
    os << px << ',' << py << ' ';
  }
  os << "\"/>\n";
  return os.str();
}

std::string text(double x, double y, const std::string& s, const std::string& anchor = "start") {
  std::ostringstream os;
  os << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"12\""
     << " text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  return os.str();
}

void minmax(const std::vector<double>& v, double& lo, double& hi) {
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
}

}  // namespace

void write_curve_svg(const std::string& path, const std::string& x_label,
                     const std::string& y_label, const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  double x_lo = xs.front(), x_hi = xs.front(), y_lo = ys.front(), y_hi = ys.front();
  minmax(xs, x_lo, x_hi);
  minmax(ys, y_lo, y_hi);
  std::string s = svg_open();
  s += polyline(xs, ys, x_lo, x_hi, y_lo, y_hi, "#1f77b4");
  s += text(kW / 2, kH - 12, x_label, "middle");
  s += text(12, kH / 2, y_label);
  s += "</svg>\n";
  atomic_write_text(path, s);
}

void write_overlay_svg(const std::string& path, const std::vector<double>& truth,
                       const std::vector<double>& recon) {
  std::vector<double> xs(truth.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  double y_lo = truth.front(), y_hi = truth.front();
  minmax(truth, y_lo, y_hi);
  minmax(recon, y_lo, y_hi);
  std::string s = svg_open();
  s += polyline(xs, truth, 0.0, xs.back(), y_lo, y_hi, "#2ca02c");
  s += polyline(xs, recon, 0.0, xs.back(), y_lo, y_hi, "#d62728");
  s += text(kPad, 20, "ground truth (green) vs reconstruction (red)");
  s += "</svg>\n";
  atomic_write_text(path, s);
}

void write_bars_svg(const std::string& path, const std::vector<std::string>& labels,
                    const std::vector<double>& values, const std::string& y_label) {
  double v_hi = 0.0;
  for (double v : values) v_hi = std::max(v_hi, v);
  if (v_hi <= 0.0) v_hi = 1.0;
  std::string s = svg_open();
  const double n = static_cast<double>(values.size());
  const double slot = (kW - 2 * kPad) / n;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double h = std::max(0.0, values[i]) / v_hi * (kH - 2 * kPad);
    double x = kPad + static_cast<double>(i) * slot + 0.15 * slot;
    std::ostringstream os;
    os << "<rect x=\"" << x << "\" y=\"" << kH - kPad - h << "\" width=\"" << 0.7 * slot
       << "\" height=\"" << h << "\" fill=\"#1f77b4\"/>\n";
    s += os.str();
    s += text(x + 0.35 * slot, kH - kPad + 14, labels[i], "middle");
  }
  s += text(12, kH / 2, y_label);
  s += "</svg>\n";
  atomic_write_text(path, s);
}

void cmd_report(const std::vector<std::string>& run_dirs, const std::string& report_dir) {
  std::error_code ec;
  fs::create_directories(report_dir, ec);
  if (ec) throw std::runtime_error("cmd_report: cannot create " + report_dir);

  std::vector<RunRecord> records;
  std::vector<std::string> missing;
  for (const auto& dir : run_dirs) {
    try {
      records.push_back(load_run_record(dir));
    } catch (const std::exception& e) {
      missing.push_back(dir);
      std::cerr << "report: skipping " << dir << ": " << e.what() << "\n";
    }
  }

  std::string csv = "method,scenario,CC,COS,RMSE,precision,recall,F1\n";
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : records) {
    for (const auto& [scenario, rep] : r.reports) {
      csv += rep.csv_row(r.method, scenario) + "\n";
      nlohmann::json row = rep.to_json();
      row["method"] = r.method;
      row["scenario"] = scenario;
      table.push_back(row);
    }
  }
  // Published reference values from a private human dataset; shown for
  // context only, never comparable to the synthetic runs above.
  const std::string ref = "paper reference (not reproducible)";
  csv += ref + " MERIT,pooled,0.8235,0.8446,0.0940,,,\n";
  csv += ref + " IMU-only,pooled,0.5269,,,,,\n";
  csv += ref + " Idx,pooled,0.7308,0.7615,0.1144,,,\n";
  csv += ref + " MERIT,stillness,,,,0.9414,0.9424,0.9419\n";
  table.push_back({{"method", ref + " MERIT"}, {"scenario", "pooled"},
                   {"cc", 0.8235}, {"cos", 0.8446}, {"rmse", 0.0940}});
  table.push_back({{"method", ref + " IMU-only"}, {"scenario", "pooled"}, {"cc", 0.5269}});
  table.push_back({{"method", ref + " Idx"}, {"scenario", "pooled"},
                   {"cc", 0.7308}, {"cos", 0.7615}, {"rmse", 0.1144}});
  table.push_back({{"method", ref + " MERIT"}, {"scenario", "stillness"},
                   {"precision", 0.9414}, {"recall", 0.9424}, {"f1", 0.9419}});
  if (!missing.empty()) {
    nlohmann::json j = missing;
    atomic_write_text(report_dir + "/missing_runs.json", j.dump(2) + "\n");
  }
  atomic_write_text(report_dir + "/tables.csv", csv);
  atomic_write_text(report_dir + "/tables.json", table.dump(2) + "\n");

  std::vector<std::string> labels;
  std::vector<double> ccs;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    labels.push_back(r.method);
    ccs.push_back(r.reports.at("pooled").cc);
    std::string rec_path = r.run_dir + "/reconstructions.bin";
    if (!fs::exists(rec_path)) continue;
    Archive ar = Archive::load(rec_path);
    const auto& shape = ar.shape("recon");
    if (shape.empty() || shape[0] == 0) continue;
    std::size_t t = shape[1];
    const auto& recon = ar.f64("recon");
    const auto& target = ar.f64("target");
    write_overlay_svg(report_dir + "/overlay_" + std::to_string(k) + "_" + r.method + ".svg",
                      {target.begin(), target.begin() + static_cast<std::ptrdiff_t>(t)},
                      {recon.begin(), recon.begin() + static_cast<std::ptrdiff_t>(t)});
  }
  if (!records.empty()) write_bars_svg(report_dir + "/cc_bars.svg", labels, ccs, "pooled CC");
}

}  // namespace merit::harness
