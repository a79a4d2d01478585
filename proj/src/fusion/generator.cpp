#include <cmath>
#include <stdexcept>

#include "merit/fusion.hpp"

namespace merit::fusion {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::kBoth: return "both";
    case Modality::kRadarOnly: return "radar";
    case Modality::kImuOnly: return "imu";
  }
  throw std::logic_error("bad modality");
}

Modality modality_from_string(const std::string& s) {
  if (s == "both") return Modality::kBoth;
  if (s == "radar") return Modality::kRadarOnly;
  if (s == "imu") return Modality::kImuOnly;
  throw std::invalid_argument("unknown modality: " + s);
}

namespace {

// 3 strided conv blocks (kernel 7, stride 2) + 2 signal-attentive layers.
void build_encoder(nn::Sequential& enc, std::size_t cin, std::size_t c1, std::size_t c2,
                   std::size_t t, Rng& rng) {
  enc.emplace<nn::Conv1d>(cin, c1, 7, 2, 3, rng);
  enc.emplace<nn::BatchNorm>(c1);
  enc.emplace<nn::LeakyReLU>(0.2);
  enc.emplace<nn::Conv1d>(c1, c2, 7, 2, 3, rng);
  enc.emplace<nn::BatchNorm>(c2);
  enc.emplace<nn::LeakyReLU>(0.2);
  enc.emplace<nn::Conv1d>(c2, c2, 7, 2, 3, rng);
  enc.emplace<nn::BatchNorm>(c2);
  enc.emplace<nn::LeakyReLU>(0.2);
  enc.emplace<nn::SignalAttentiveLayer>(c2, t / 8, rng);
  enc.emplace<nn::SignalAttentiveLayer>(c2, t / 8, rng);
}

}  // namespace

Generator::Generator(std::size_t c_radar, std::size_t c_imu, const FusionConfig& cfg, Rng& rng)
    : c_radar_(c_radar),
      c_imu_(c_imu),
      t_(cfg.window_t),
      t_lat_(cfg.window_t / 8),
      c_lat_(2 * cfg.enc_c2),
      modality_(cfg.modality),
      dropout_rng_(rng.fork(0x64726f70)) {
  if (c_radar == 0 || c_imu == 0) throw std::invalid_argument("generator: empty modality");
  if (t_ % 8 != 0) throw std::invalid_argument("generator: window length must be divisible by 8");
  build_encoder(enc_radar_, c_radar, cfg.enc_c1, cfg.enc_c2, t_, rng);
  build_encoder(enc_imu_, c_imu, cfg.enc_c1, cfg.enc_c2, t_, rng);

  const std::size_t c1 = cfg.enc_c1, c2 = cfg.enc_c2;
  dec_.emplace<nn::Conv1d>(c_lat_, c2, 7, 1, 3, rng);
  dec_.emplace<nn::BatchNorm>(c2);
  dec_.emplace<nn::LeakyReLU>(0.2);
  dec_.emplace<nn::Upsample2>(c2);  // t/8 -> t/4
  dec_.emplace<nn::Conv1d>(c2, c1, 7, 1, 3, rng);
  dec_.emplace<nn::BatchNorm>(c1);
  dec_.emplace<nn::LeakyReLU>(0.2);
  dec_.emplace<nn::Upsample2>(c1);  // t/4 -> t/2
  dec_.emplace<nn::Conv1d>(c1, c1, 7, 1, 3, rng);
  dec_.emplace<nn::BatchNorm>(c1);
  dec_.emplace<nn::LeakyReLU>(0.2);
  dec_.emplace<nn::Upsample2>(c1);  // t/2 -> t
  dec_.emplace<nn::Dropout>(cfg.dropout, &dropout_rng_);
  dec_.emplace<nn::Conv1d>(c1, 1, 7, 1, 3, rng);
  dec_.emplace<nn::Sigmoid>();
}

Matrix Generator::forward(const Matrix& radar, const Matrix& imu, bool train) {
  if (radar.cols != c_radar_ * t_ || imu.cols != c_imu_ * t_)
    throw std::invalid_argument("generator: window length mismatch");
  if (radar.rows != imu.rows) throw std::invalid_argument("generator: batch size mismatch");
  const std::size_t n = radar.rows, half = c_lat_ / 2 * t_lat_;

  Matrix lat(n, c_lat_ * t_lat_);
  std::fill(lat.d.begin(), lat.d.end(), 0.0);
  if (modality_ != Modality::kImuOnly) {
    Matrix zr = enc_radar_.forward(radar, train);
    for (std::size_t i = 0; i < n; ++i) std::copy(zr.row(i), zr.row(i) + half, lat.row(i));
  }
  if (modality_ != Modality::kRadarOnly) {
    Matrix zi = enc_imu_.forward(imu, train);
    for (std::size_t i = 0; i < n; ++i) std::copy(zi.row(i), zi.row(i) + half, lat.row(i) + half);
  }
  return dec_.forward(lat, train);
}

void Generator::backward(const Matrix& gy) {
  Matrix glat = dec_.backward(gy);
  const std::size_t n = glat.rows, half = c_lat_ / 2 * t_lat_;
  if (modality_ != Modality::kImuOnly) {
    Matrix gr(n, half);
    for (std::size_t i = 0; i < n; ++i) std::copy(glat.row(i), glat.row(i) + half, gr.row(i));
    enc_radar_.backward(gr);
  }
  if (modality_ != Modality::kRadarOnly) {
    Matrix gi(n, half);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(glat.row(i) + half, glat.row(i) + 2 * half, gi.row(i));
    enc_imu_.backward(gi);
  }
}

std::vector<nn::Param*> Generator::params() {
  std::vector<nn::Param*> ps = enc_radar_.params();
  for (auto* p : enc_imu_.params()) ps.push_back(p);
  for (auto* p : dec_.params()) ps.push_back(p);
  return ps;
}

}  // namespace merit::fusion
