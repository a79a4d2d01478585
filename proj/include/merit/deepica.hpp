#pragma once
// Nonlinear ICA denoiser: conditional EBM trained against a conditional
// normalizing flow by flow contrastive estimation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "merit/core/matrix.hpp"
#include "merit/core/rng.hpp"
#include "merit/nn/nn.hpp"

namespace merit::ica {

// ------------------------------------------------------------------ Flow

// Invertible stack: per layer a diagonal affine map followed by an affine
// coupling whose scale/shift come from a small tanh MLP; conditioning on y
// is a learned additive shift applied after the stack. All pieces start at
// identity, so the initial density is standard normal for every y.
class Flow {
 public:
  Flow(std::size_t d, std::size_t d_y, std::size_t n_layers, std::size_t hidden, Rng& rng);

  // log q(x|y) per row; caches the inverse pass for backward().
  std::vector<double> log_density(const Matrix& x, const std::vector<std::int64_t>& y);
  // Accumulates d(sum_i glogq[i] * logq_i)/dparams into the param grads.
  void backward(const std::vector<double>& glogq);

  Matrix sample(const std::vector<std::int64_t>& y, Rng& rng);
  // Deterministic forward map z -> x (used by round-trip checks).
  Matrix transform(const Matrix& z, const std::vector<std::int64_t>& y);
  // Inverse map x -> z.
  Matrix inverse(const Matrix& x, const std::vector<std::int64_t>& y);

  std::vector<nn::Param*> params();
  std::size_t dim() const { return d_; }
  std::size_t dim_y() const { return d_y_; }

 private:
  struct CouplingLayer {
    nn::Param a, b;  // diagonal affine
    nn::Sequential mlp;
    std::size_t d_keep = 0, d_mod = 0;
    bool keep_front = true;
    // inverse-pass caches
    Matrix s, mp, h0;
  };

  std::size_t d_, d_y_;
  nn::Param mu_;  // [d_y x d] per-index shift
  std::vector<CouplingLayer> layers_;
  Matrix z_cache_;
  std::vector<std::int64_t> y_cache_;
};

// ------------------------------------------------------------------- EBM

struct EbmConfig {
  std::size_t d_x = 6;
  std::size_t d_y = 0;      // segment count; set when the dataset is known
  std::size_t d_z = 6;
  std::size_t hidden = 64;

  // flow (contrast model)
  std::size_t flow_layers = 4;
  std::size_t flow_hidden = 32;
};

class Ebm {
 public:
  Ebm(const EbmConfig& cfg, Rng& rng);

  // f_theta(x): rows of x are inputs of dimension d_x.
  Matrix feature_f(const Matrix& x, bool train);
  // g_theta(y): column y of the learnable d_z x d_y matrix.
  std::vector<double> feature_g(std::int64_t y) const;
  // E(x|y) = f(x)^T g(y) for a single row.
  double energy(const std::vector<double>& x, std::int64_t y, bool train = false);

  // log p_hat(x|y) = -f(x)^T g(y) - c_y  (c: learned per-y log-normalizer)
  std::vector<double> log_density(const Matrix& x, const std::vector<std::int64_t>& y, bool train);
  void backward(const std::vector<double>& glogp);

  std::vector<nn::Param*> params();
  const EbmConfig& config() const { return cfg_; }
  bool trained = false;

 private:
  EbmConfig cfg_;
  nn::Sequential f_;
  nn::Param g_;         // [d_z x d_y]
  nn::Param log_norm_;  // [1 x d_y]
  Matrix f_cache_;
  std::vector<std::int64_t> y_cache_;
};

// ------------------------------------------------------------------- FCE

struct FceGrads {
  std::vector<double> glogp_data, glogq_data, glogp_noise, glogq_noise;
};

// J = E_data[log p/(p+q)] + E_noise[log q/(p+q)]; maximized in theta,
// minimized in alpha. Throws on non-finite densities, naming the batch row.
double fce_objective(const Matrix& x_data, const std::vector<std::int64_t>& y_data,
                     const Matrix& x_noise, const std::vector<std::int64_t>& y_noise,
                     Ebm& ebm, Flow& flow, bool train_mode, FceGrads* grads = nullptr);

struct TrainConfig {
  std::size_t steps = 2000;          // EBM updates
  std::size_t batch = 128;
  std::size_t ebm_per_flow = 5;      // EBM:flow update ratio
  double lr_ebm = 1e-3;
  double lr_flow = 1e-3;
  double val_fraction = 0.1;
  std::size_t val_every = 50;
  std::uint64_t seed = 0;
};

struct TrainLogEntry {
  std::size_t step;
  double j;
  double j_val;  // NaN when not evaluated
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  double best_val_j = 0.0;
  bool diverged = false;
  std::size_t best_step = 0;
};

// Alternating FCE optimization over (X, y) samples. X rows are d_x vectors,
// y their segment indices. Restores the best-validation EBM parameters.
TrainResult train_deepica(const Matrix& x, const std::vector<std::int64_t>& y,
                          Ebm& ebm, Flow& flow, const TrainConfig& cfg);

struct SeparationResult {
  Matrix sources;  // [d_z x t]
  std::vector<double> reference_corr;  // ordering diagnostic per channel
  std::vector<std::size_t> order;      // component index emitted at each output row
  std::vector<double> signs;           // sign applied to each output row
  Matrix unmix;    // [d_z x (d_x + d_z)] linear map over standardized [input; feature] rows
};

// Separates the input into d_z components. The EBM feature map provides the
// learned (possibly nonlinear) straightening; the features are concatenated
// with the standardized input channels, reduced to d_z principal components
// and rotated by a deterministic FastICA pass, which resolves the linear
// indeterminacy the bilinear energy leaves behind. Output channels are then
// ordered by descending |correlation| with a 0.8-3 Hz bandpassed reference
// of the mean input and sign-aligned to it. Refuses untrained params.
SeparationResult separate(const Matrix& segment_x, Ebm& ebm, double fs);

// Same feature map but with a fixed unmixing transform and channel
// order/sign (e.g. the consensus computed once over the training split) so
// channel semantics stay consistent across segments.
SeparationResult separate_ordered(const Matrix& segment_x, Ebm& ebm,
                                  const std::vector<std::size_t>& order,
                                  const std::vector<double>& signs, const Matrix& unmix);

// Checkpointing (parameters + config + log).
void save_checkpoint(const std::string& path, Ebm& ebm, Flow& flow, const TrainResult& log);
void load_checkpoint(const std::string& path, Ebm& ebm, Flow& flow);

}  // namespace merit::ica
