#pragma once
// Small layer library with explicit forward/backward passes. Rows of every
// Matrix are samples; 1-D signal layers use channel-major flattening
// [c0 t0..t_{T-1}, c1 t0.., ...] within a row.

#include <memory>
#include <string>
#include <vector>

#include "merit/core/matrix.hpp"
#include "merit/core/rng.hpp"

namespace merit::nn {

struct Param {
  Matrix w;
  Matrix g;  // same shape as w
  std::string name;

  explicit Param(std::size_t r, std::size_t c, std::string n = "")
      : w(r, c), g(r, c), name(std::move(n)) {}
  void zero_grad() { std::fill(g.d.begin(), g.d.end(), 0.0); }
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& x, bool train) = 0;
  virtual Matrix backward(const Matrix& gy) = 0;
  virtual std::vector<Param*> params() { return {}; }
};

class Linear : public Layer {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng, double w_scale = -1.0);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;
  std::vector<Param*> params() override { return {&w_, &b_}; }

  Param w_;  // [in x out]
  Param b_;  // [1 x out]

 private:
  Matrix x_;
};

// Per-channel batch normalization. Columns are interpreted as `channels`
// groups of t consecutive entries; statistics pool over batch and t.
// channels == input width gives plain feature-wise BatchNorm1d.
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(std::size_t channels, double momentum = 0.1, double eps = 1e-5);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }

  Param gamma_, beta_;            // [1 x channels]
  std::vector<double> run_mean_;  // running statistics (eval mode)
  std::vector<double> run_var_;

 private:
  std::size_t channels_;
  double momentum_, eps_;
  Matrix xhat_;
  std::vector<double> inv_sd_;
  std::size_t t_ = 1;
  bool train_mode_ = true;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.01) : slope_(slope) {}
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;

 private:
  double slope_;
  Matrix x_;
};

class Sigmoid : public Layer {
 public:
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;

 private:
  Matrix y_;
};

class Tanh : public Layer {
 public:
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;

 private:
  Matrix y_;
};

class Dropout : public Layer {
 public:
  Dropout(double p, Rng* rng) : p_(p), rng_(rng) {}
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;

 private:
  double p_;
  Rng* rng_;
  Matrix mask_;
};

// 1-D convolution over channel-major rows, zero padding.
class Conv1d : public Layer {
 public:
  Conv1d(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
         std::size_t pad, Rng& rng);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;
  std::vector<Param*> params() override { return {&w_, &b_}; }

  std::size_t t_out(std::size_t t_in) const { return (t_in + 2 * pad_ - k_) / stride_ + 1; }

  Param w_;  // [cout x cin*k]
  Param b_;  // [1 x cout]

 private:
  std::size_t cin_, cout_, k_, stride_, pad_;
  Matrix cols_;  // cached im2col, [(n*t_out) x cin*k]
  std::size_t n_ = 0, tin_ = 0, tout_ = 0;
};

// Nearest-neighbour x2 upsampling along t.
class Upsample2 : public Layer {
 public:
  explicit Upsample2(std::size_t channels) : c_(channels) {}
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;

 private:
  std::size_t c_;
  std::size_t t_ = 0;
};

// Residual block: u = x + SelfAttention(LayerNorm(x)); out = u + act(u W + b).
// Input rows are channel-major [d x t]; attention runs over t tokens of
// dimension d.
class SignalAttentiveLayer : public Layer {
 public:
  SignalAttentiveLayer(std::size_t d, std::size_t t, Rng& rng);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;
  std::vector<Param*> params() override;

  Param ln_gamma_, ln_beta_;        // [1 x d]
  Param wq_, wk_, wv_, wo_;         // [d x d]; wo zero-init
  Param bo_;                        // [1 x d]
  Param w1_, b1_;                   // linear sublayer, zero-init
  double lrelu_slope_ = 0.01;

 private:
  std::size_t d_, t_;
  struct Cache {
    Matrix x;     // [t x d] input tokens
    Matrix xhat;  // layer-normed tokens
    std::vector<double> mean, inv_sd;
    Matrix q, k, v, attn;  // attn: softmax(QK^T/sqrt(d)) [t x t]
    Matrix av;             // attn * V
    Matrix u;              // first residual output
    Matrix lin_pre;        // u W1 + b1 (pre-activation)
  };
  std::vector<Cache> caches_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  template <class L, class... Args>
  L* emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& gy) override;
  std::vector<Param*> params() override;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

class Adam {
 public:
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();
  void zero_grad();
  double lr;

 private:
  std::vector<Param*> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

// Flat parameter (de)serialization for checkpoints.
std::vector<double> flatten_params(const std::vector<Param*>& ps);
void unflatten_params(const std::vector<double>& flat, const std::vector<Param*>& ps);

}  // namespace merit::nn
