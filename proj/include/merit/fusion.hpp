#pragma once
// Conditional-GAN translator from (radar, IMU) channel windows to ECG
// windows: per-modality convolutional encoders with signal-attentive
// layers, latent concatenation, and a convolutional decoder, trained
// against a whole-window discriminator with L_cGAN + alpha * L_L1.

#include <cstdint>
#include <string>
#include <vector>

#include "merit/core/matrix.hpp"
#include "merit/core/rng.hpp"
#include "merit/nn/nn.hpp"

namespace merit::fusion {

enum class Modality { kBoth, kRadarOnly, kImuOnly };
std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct FusionConfig {
  double alpha = 9.0;      // L1 weight; must be >= 0
  std::size_t batch = 128;
  std::size_t window_t = 200;
  double dropout = 0.3;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  Modality modality = Modality::kBoth;
  std::size_t enc_c1 = 16, enc_c2 = 32;  // encoder widths
};

// Rows of all window matrices are segments; channel data is stored
// channel-major, so a radar row is [c_radar x t] flattened.
class Generator {
 public:
  Generator(std::size_t c_radar, std::size_t c_imu, const FusionConfig& cfg, Rng& rng);

  // [n x t] in (0,1). Dropout active only when train is true.
  Matrix forward(const Matrix& radar, const Matrix& imu, bool train);
  // gy is [n x t]; accumulates parameter grads from the cached forward.
  void backward(const Matrix& gy);

  std::vector<nn::Param*> params();
  std::size_t c_radar() const { return c_radar_; }
  std::size_t c_imu() const { return c_imu_; }
  std::size_t window_t() const { return t_; }
  Modality modality() const { return modality_; }

 private:
  std::size_t c_radar_, c_imu_, t_, t_lat_, c_lat_;
  Modality modality_;
  Rng dropout_rng_;
  nn::Sequential enc_radar_, enc_imu_, dec_;
};

class Discriminator {
 public:
  Discriminator(std::size_t c_radar, std::size_t c_imu, const FusionConfig& cfg, Rng& rng);

  // Conditional probability per row that the candidate ECG is real.
  // Output strictly in (0,1).
  std::vector<double> forward(const Matrix& radar, const Matrix& imu, const Matrix& ecg,
                              bool train);
  // Backward through the cached forward; returns d(sum gp_i * p_i)/d(ecg)
  // as [n x t] (condition-channel grads are discarded).
  Matrix backward_ecg(const std::vector<double>& gp);

  std::vector<nn::Param*> params();

 private:
  std::size_t c_radar_, c_imu_, t_;
  nn::Sequential net_;
};

struct Batch {
  Matrix radar;   // [n x c_radar*t]
  Matrix imu;     // [n x c_imu*t]
  Matrix target;  // [n x t], values in [0,1]
  std::size_t size() const { return target.rows; }
};

// L_cGAN = E[log D(real)] + E[log(1 - D(inputs, G(inputs)))], logs clamped
// to [eps, 1-eps] with eps = 1e-7.
double cgan_loss(const Batch& b, Generator& g, Discriminator& d, bool train = false);
// L_L1 = E over elements of |target - G(inputs)|.
double l1_loss(const Batch& b, Generator& g, bool train = false);
// L = L_cGAN + alpha * L_L1. When with_grads, accumulates dL/dparams into
// both G and D parameter grads (single cached forward per net).
double total_loss(const Batch& b, Generator& g, Discriminator& d, double alpha,
                  bool train = false, bool with_grads = false);

struct EpochLog {
  std::size_t epoch;
  double loss_d, loss_g, val_l1;
};

struct TrainFusionResult {
  std::vector<EpochLog> log;
  double best_val_l1 = 0.0;
  std::size_t best_epoch = 0;
  bool diverged = false;
};

// Alternating D/G updates; restores the best-validation-L1 generator.
// Caller is responsible for a session-disjoint train/val split.
TrainFusionResult train_fusion(const Batch& train_set, const Batch& val_set,
                               Generator& g, Discriminator& d, const FusionConfig& cfg);

void save_fusion_checkpoint(const std::string& path, Generator& g, Discriminator& d,
                            const FusionConfig& cfg, const TrainFusionResult& log);
void load_fusion_checkpoint(const std::string& path, Generator& g, Discriminator& d);

}  // namespace merit::fusion
