#pragma once
// Waveform similarity (CC, COS, RMSE) and R-peak alignment scoring.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "merit/core/matrix.hpp"
#include "json.hpp"

namespace merit::metrics {

// Thrown when a metric has no defined value (e.g. CC of two constants);
// callers must handle it explicitly rather than read a silent 0.
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RpeakScore {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  double cc = 0.0, cos = 0.0, rmse = 0.0;
  RpeakScore rpeak;
  std::size_t n_segments = 0;
  std::size_t n_undefined = 0;  // segments skipped for undefined CC/COS

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  // One CSV row: cc,cos,rmse,precision,recall,f1 under the given label.
  std::string csv_row(const std::string& method, const std::string& scenario) const;
};

double pearson_cc(const std::vector<double>& a, const std::vector<double>& b);
double cosine_sim(const std::vector<double>& a, const std::vector<double>& b);
double rmse(const std::vector<double>& a, const std::vector<double>& b);

// Local maxima above 0.6x the rolling 2 s maximum, with a 0.25*fs-sample
// refractory period. Indices strictly increasing.
std::vector<std::size_t> detect_rpeaks(const std::vector<double>& ecg, double fs);

// Maximum one-to-one matching with threshold 0.25*fs samples (exact,
// via the non-crossing dynamic program over the two sorted peak lists).
RpeakScore align_rpeaks(const std::vector<std::size_t>& pred,
                        const std::vector<std::size_t>& truth, double fs);

// CC/COS/RMSE averaged per segment; R-peak counts pooled before P/R/F1.
// Segments whose CC or COS is undefined are excluded and counted.
MetricsReport evaluate(const Matrix& reconstructions, const Matrix& targets, double fs);

}  // namespace merit::metrics
