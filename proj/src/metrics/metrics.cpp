#include <algorithm>
#include <cmath>
#include <sstream>

#include "merit/metrics.hpp"

namespace merit::metrics {

double pearson_cc(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson_cc: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("pearson_cc: need length >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 && sbb == 0.0) throw UndefinedMetricError("pearson_cc: both inputs constant");
  if (saa == 0.0 || sbb == 0.0) throw UndefinedMetricError("pearson_cc: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_sim: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw UndefinedMetricError("cosine_sim: zero vector");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rmse: length mismatch");
  if (a.empty()) throw std::invalid_argument("rmse: need length >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::vector<std::size_t> detect_rpeaks(const std::vector<double>& ecg, double fs) {
  if (fs <= 0.0) throw std::invalid_argument("detect_rpeaks: fs must be positive");
  const std::size_t n = ecg.size();
  std::vector<std::size_t> peaks;
  if (n < 3) return peaks;
  const std::size_t win = std::max<std::size_t>(1, static_cast<std::size_t>(2.0 * fs));
  const std::size_t refractory = static_cast<std::size_t>(0.25 * fs);

  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(ecg[i] > ecg[i - 1] && ecg[i] >= ecg[i + 1])) continue;
    std::size_t lo = (i >= win / 2) ? i - win / 2 : 0;
    std::size_t hi = std::min(n, lo + win);
    double mx = ecg[lo];
    for (std::size_t j = lo + 1; j < hi; ++j) mx = std::max(mx, ecg[j]);
    if (mx <= 0.0 || ecg[i] < 0.6 * mx) continue;
    if (!peaks.empty() && i - peaks.back() < refractory) {
      if (ecg[i] > ecg[peaks.back()]) peaks.back() = i;  // keep the taller peak
      continue;
    }
    peaks.push_back(i);
  }
  return peaks;
}

RpeakScore align_rpeaks(const std::vector<std::size_t>& pred,
                        const std::vector<std::size_t>& truth, double fs) {
  const double thresh = 0.25 * fs;
  // Maximum one-to-one matching. For points on a line with a uniform
  // threshold a non-crossing maximum matching always exists (any crossing
  // pair can be swapped without breaking feasibility), so an LCS-style DP
  // over the two sorted sequences is exact.
  const std::size_t np = pred.size(), nt = truth.size();
  std::vector<std::size_t> dp((np + 1) * (nt + 1), 0);
  auto cell = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return dp[i * (nt + 1) + j];
  };
  for (std::size_t i = np; i-- > 0;)
    for (std::size_t j = nt; j-- > 0;) {
      std::size_t best = std::max(cell(i + 1, j), cell(i, j + 1));
      double d = std::abs(static_cast<double>(pred[i]) - static_cast<double>(truth[j]));
      if (d <= thresh) best = std::max(best, cell(i + 1, j + 1) + 1);
      cell(i, j) = best;
    }
  RpeakScore s;
  s.tp = cell(0, 0);
  s.fp = np - s.tp;
  s.fn = nt - s.tp;
  s.precision = (s.tp + s.fp > 0) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
  s.recall = (s.tp + s.fn > 0) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
  s.f1 = (s.precision + s.recall > 0.0)
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

MetricsReport evaluate(const Matrix& reconstructions, const Matrix& targets, double fs) {
  if (reconstructions.rows != targets.rows || reconstructions.cols != targets.cols)
    throw std::invalid_argument("evaluate: shape mismatch");
  if (reconstructions.rows == 0) throw std::invalid_argument("evaluate: empty input");

  MetricsReport r;
  double sum_cc = 0.0, sum_cos = 0.0, sum_rmse = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < reconstructions.rows; ++i) {
    std::vector<double> a(reconstructions.row(i), reconstructions.row(i) + reconstructions.cols);
    std::vector<double> b(targets.row(i), targets.row(i) + targets.cols);
    double cc, cs;
    try {
      cc = pearson_cc(a, b);
      cs = cosine_sim(a, b);
    } catch (const UndefinedMetricError&) {
      ++r.n_undefined;
      continue;
    }
    sum_cc += cc;
    sum_cos += cs;
    sum_rmse += rmse(a, b);
    ++counted;

    std::vector<std::size_t> pt = detect_rpeaks(b, fs);
    std::vector<std::size_t> pp = detect_rpeaks(a, fs);
    RpeakScore s = align_rpeaks(pp, pt, fs);
    r.rpeak.tp += s.tp;
    r.rpeak.fp += s.fp;
    r.rpeak.fn += s.fn;
  }
  if (counted == 0) throw UndefinedMetricError("evaluate: all segments undefined");
  r.cc = sum_cc / static_cast<double>(counted);
  r.cos = sum_cos / static_cast<double>(counted);
  r.rmse = sum_rmse / static_cast<double>(counted);
  r.n_segments = counted;
  auto& p = r.rpeak;
  p.precision = (p.tp + p.fp > 0) ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp) : 0.0;
  p.recall = (p.tp + p.fn > 0) ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn) : 0.0;
  p.f1 = (p.precision + p.recall > 0.0)
             ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
             : 0.0;
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"cc", cc},
          {"cos", cos},
          {"rmse", rmse},
          {"rpeak",
           {{"tp", rpeak.tp},
            {"fp", rpeak.fp},
            {"fn", rpeak.fn},
            {"precision", rpeak.precision},
            {"recall", rpeak.recall},
            {"f1", rpeak.f1}}},
          {"n_segments", n_segments},
          {"n_undefined", n_undefined}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.cc = j.at("cc");
  r.cos = j.at("cos");
  r.rmse = j.at("rmse");
  const auto& p = j.at("rpeak");
  r.rpeak.tp = p.at("tp");
  r.rpeak.fp = p.at("fp");
  r.rpeak.fn = p.at("fn");
  r.rpeak.precision = p.at("precision");
  r.rpeak.recall = p.at("recall");
  r.rpeak.f1 = p.at("f1");
  r.n_segments = j.at("n_segments");
  r.n_undefined = j.at("n_undefined");
  return r;
}

std::string MetricsReport::csv_row(const std::string& method, const std::string& scenario) const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << method << ',' << scenario << ',' << cc << ',' << cos << ',' << rmse << ','
     << rpeak.precision << ',' << rpeak.recall << ',' << rpeak.f1;
  return os.str();
}

}  // namespace merit::metrics
