#include <stdexcept>

#include "merit/fusion.hpp"

namespace merit::fusion {

Discriminator::Discriminator(std::size_t c_radar, std::size_t c_imu, const FusionConfig& cfg,
                             Rng& rng)
    : c_radar_(c_radar), c_imu_(c_imu), t_(cfg.window_t) {
  if (t_ % 8 != 0)
    throw std::invalid_argument("discriminator: window length must be divisible by 8");
  const std::size_t cin = c_radar + c_imu + 1, c1 = cfg.enc_c1, c2 = cfg.enc_c2;
  net_.emplace<nn::Conv1d>(cin, c1, 7, 2, 3, rng);
  net_.emplace<nn::LeakyReLU>(0.2);
  net_.emplace<nn::Conv1d>(c1, c2, 7, 2, 3, rng);
  net_.emplace<nn::LeakyReLU>(0.2);
  net_.emplace<nn::Conv1d>(c2, c2, 7, 2, 3, rng);
  net_.emplace<nn::LeakyReLU>(0.2);
  net_.emplace<nn::Linear>(c2 * (t_ / 8), 1, rng);
  net_.emplace<nn::Sigmoid>();
}

std::vector<double> Discriminator::forward(const Matrix& radar, const Matrix& imu,
                                           const Matrix& ecg, bool train) {
  if (radar.cols != c_radar_ * t_ || imu.cols != c_imu_ * t_ || ecg.cols != t_)
    throw std::invalid_argument("discriminator: window length mismatch");
  if (radar.rows != imu.rows || radar.rows != ecg.rows)
    throw std::invalid_argument("discriminator: batch size mismatch");
  const std::size_t n = radar.rows;

  // Stack condition channels and the candidate ECG (last channel).
  Matrix x(n, (c_radar_ + c_imu_ + 1) * t_);
  for (std::size_t i = 0; i < n; ++i) {
    double* r = x.row(i);
    std::copy(radar.row(i), radar.row(i) + c_radar_ * t_, r);
    std::copy(imu.row(i), imu.row(i) + c_imu_ * t_, r + c_radar_ * t_);
    std::copy(ecg.row(i), ecg.row(i) + t_, r + (c_radar_ + c_imu_) * t_);
  }
  Matrix p = net_.forward(x, train);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = p(i, 0);
  return out;
}

Matrix Discriminator::backward_ecg(const std::vector<double>& gp) {
  Matrix gy(gp.size(), 1);
  for (std::size_t i = 0; i < gp.size(); ++i) gy(i, 0) = gp[i];
  Matrix gx = net_.backward(gy);
  Matrix gecg(gp.size(), t_);
  const std::size_t off = (c_radar_ + c_imu_) * t_;
  for (std::size_t i = 0; i < gp.size(); ++i)
    std::copy(gx.row(i) + off, gx.row(i) + off + t_, gecg.row(i));
  return gecg;
}

std::vector<nn::Param*> Discriminator::params() { return net_.params(); }

}  // namespace merit::fusion
