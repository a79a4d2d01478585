#include <cmath>
#include <stdexcept>

#include "merit/deepica.hpp"

namespace merit::ica {

Ebm::Ebm(const EbmConfig& cfg, Rng& rng)
    : cfg_(cfg), g_(cfg.d_z, cfg.d_y, "ebm.g"), log_norm_(1, cfg.d_y, "ebm.log_norm") {
  // f: three linear layers, BatchNorm after 1-2, LeakyReLU after 2-3.
  f_.emplace<nn::Linear>(cfg.d_x, cfg.hidden, rng);
  f_.emplace<nn::BatchNorm>(cfg.hidden);
  f_.emplace<nn::Linear>(cfg.hidden, cfg.hidden, rng);
  f_.emplace<nn::BatchNorm>(cfg.hidden);
  f_.emplace<nn::LeakyReLU>();
  f_.emplace<nn::Linear>(cfg.hidden, cfg.d_z, rng);
  f_.emplace<nn::LeakyReLU>();
  for (double& v : g_.w.d) v = 0.1 * rng.normal();
}

std::vector<nn::Param*> Ebm::params() {
  std::vector<nn::Param*> ps = f_.params();
  ps.push_back(&g_);
  ps.push_back(&log_norm_);
  return ps;
}

Matrix Ebm::feature_f(const Matrix& x, bool train) {
  if (x.cols != cfg_.d_x) throw std::invalid_argument("feature_f: dimension mismatch");
  for (double v : x.d)
    if (!std::isfinite(v)) throw std::invalid_argument("feature_f: non-finite input");
  return f_.forward(x, train);
}

std::vector<double> Ebm::feature_g(std::int64_t y) const {
  if (y < 0 || static_cast<std::size_t>(y) >= cfg_.d_y)
    throw std::invalid_argument("feature_g: index out of range");
  std::vector<double> col(cfg_.d_z);
  for (std::size_t i = 0; i < cfg_.d_z; ++i) col[i] = g_.w(i, static_cast<std::size_t>(y));
  return col;
}

double Ebm::energy(const std::vector<double>& x, std::int64_t y, bool train) {
  if (x.size() != cfg_.d_x) throw std::invalid_argument("energy: dimension mismatch");
  Matrix xm(1, cfg_.d_x);
  std::copy(x.begin(), x.end(), xm.row(0));
  Matrix f = feature_f(xm, train);
  std::vector<double> g = feature_g(y);
  return kern::dot(f.row(0), g.data(), cfg_.d_z);
}

std::vector<double> Ebm::log_density(const Matrix& x, const std::vector<std::int64_t>& y,
                                     bool train) {
  if (y.size() != x.rows) throw std::invalid_argument("log_density: y size mismatch");
  f_cache_ = feature_f(x, train);
  y_cache_ = y;
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto yi = y[i];
    if (yi < 0 || static_cast<std::size_t>(yi) >= cfg_.d_y)
      throw std::invalid_argument("log_density: y index out of range");
    double e = 0.0;
    for (std::size_t k = 0; k < cfg_.d_z; ++k)
      e += f_cache_(i, k) * g_.w(k, static_cast<std::size_t>(yi));
    out[i] = -e - log_norm_.w(0, static_cast<std::size_t>(yi));
  }
  return out;
}

void Ebm::backward(const std::vector<double>& glogp) {
  const std::size_t n = f_cache_.rows;
  if (glogp.size() != n) throw std::invalid_argument("ebm backward: bad grad size");
  Matrix gf(n, cfg_.d_z);
  for (std::size_t i = 0; i < n; ++i) {
    auto yi = static_cast<std::size_t>(y_cache_[i]);
    for (std::size_t k = 0; k < cfg_.d_z; ++k) {
      gf(i, k) = -glogp[i] * g_.w(k, yi);
      g_.g(k, yi) += -glogp[i] * f_cache_(i, k);
    }
    log_norm_.g(0, yi) += -glogp[i];
  }
  f_.backward(gf);
}

}  // namespace merit::ica
