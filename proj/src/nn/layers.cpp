#include <cmath>
#include <stdexcept>

#include "merit/nn/nn.hpp"

namespace merit::nn {

// ---------------------------------------------------------------- Linear

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, double w_scale)
    : w_(in, out, "linear.w"), b_(1, out, "linear.b") {
  double scale = w_scale > 0.0 ? w_scale : std::sqrt(2.0 / static_cast<double>(in));
  for (double& v : w_.w.d) v = scale * rng.normal();
}

Matrix Linear::forward(const Matrix& x, bool) {
  x_ = x;
  Matrix y;
  matmul(false, false, 1.0, x, w_.w, 0.0, y);
  for (std::size_t i = 0; i < y.rows; ++i)
    kern::vadd(y.row(i), b_.w.data(), y.row(i), y.cols);
  return y;
}

Matrix Linear::backward(const Matrix& gy) {
  matmul(true, false, 1.0, x_, gy, 1.0, w_.g);
  for (std::size_t i = 0; i < gy.rows; ++i)
    kern::vadd(b_.g.data(), gy.row(i), b_.g.data(), gy.cols);
  Matrix gx;
  matmul(false, true, 1.0, gy, w_.w, 0.0, gx);
  return gx;
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels, double momentum, double eps)
    : gamma_(1, channels, "bn.gamma"),
      beta_(1, channels, "bn.beta"),
      run_mean_(channels, 0.0),
      run_var_(channels, 1.0),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {
  for (double& v : gamma_.w.d) v = 1.0;
}

Matrix BatchNorm::forward(const Matrix& x, bool train) {
  if (x.cols % channels_ != 0) throw std::invalid_argument("batchnorm: width not divisible by channels");
  t_ = x.cols / channels_;
  const std::size_t n = x.rows;
  const double count = static_cast<double>(n * t_);

  xhat_ = Matrix(x.rows, x.cols);
  inv_sd_.assign(channels_, 0.0);
  Matrix y(x.rows, x.cols);
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean, var;
    if (train) {
      double s = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.row(i) + c * t_;
        s += kern::sum(p, t_);
        ss += kern::sumsq(p, t_);
      }
      mean = s / count;
      var = ss / count - mean * mean;
      if (var < 0.0) var = 0.0;
      run_mean_[c] = (1.0 - momentum_) * run_mean_[c] + momentum_ * mean;
      run_var_[c] = (1.0 - momentum_) * run_var_[c] + momentum_ * var;
    } else {
      mean = run_mean_[c];
      var = run_var_[c];
    }
    double isd = 1.0 / std::sqrt(var + eps_);
    inv_sd_[c] = isd;
    double g = gamma_.w(0, c), b = beta_.w(0, c);
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = x.row(i) + c * t_;
      double* xh = xhat_.row(i) + c * t_;
      double* py = y.row(i) + c * t_;
      for (std::size_t k = 0; k < t_; ++k) {
        xh[k] = (p[k] - mean) * isd;
        py[k] = g * xh[k] + b;
      }
    }
  }
  train_mode_ = train;
  return y;
}

Matrix BatchNorm::backward(const Matrix& gy) {
  const std::size_t n = gy.rows;
  const double count = static_cast<double>(n * t_);
  Matrix gx(gy.rows, gy.cols);
  for (std::size_t c = 0; c < channels_; ++c) {
    double g = gamma_.w(0, c);
    double sum_gy = 0.0, sum_gy_xh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* py = gy.row(i) + c * t_;
      const double* xh = xhat_.row(i) + c * t_;
      sum_gy += kern::sum(py, t_);
      sum_gy_xh += kern::dot(py, xh, t_);
    }
    gamma_.g(0, c) += sum_gy_xh;
    beta_.g(0, c) += sum_gy;
    double isd = inv_sd_[c];
    for (std::size_t i = 0; i < n; ++i) {
      const double* py = gy.row(i) + c * t_;
      const double* xh = xhat_.row(i) + c * t_;
      double* px = gx.row(i) + c * t_;
      if (train_mode_) {
        for (std::size_t k = 0; k < t_; ++k)
          px[k] = g * isd * (py[k] - sum_gy / count - xh[k] * sum_gy_xh / count);
      } else {
        for (std::size_t k = 0; k < t_; ++k) px[k] = g * isd * py[k];
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------ activations

Matrix LeakyReLU::forward(const Matrix& x, bool) {
  x_ = x;
  Matrix y = x;
  for (double& v : y.d)
    if (v < 0.0) v *= slope_;
  return y;
}

Matrix LeakyReLU::backward(const Matrix& gy) {
  Matrix gx = gy;
  for (std::size_t i = 0; i < gx.d.size(); ++i)
    if (x_.d[i] < 0.0) gx.d[i] *= slope_;
  return gx;
}

Matrix Sigmoid::forward(const Matrix& x, bool) {
  y_ = x;
  for (double& v : y_.d) v = 1.0 / (1.0 + std::exp(-v));
  return y_;
}

Matrix Sigmoid::backward(const Matrix& gy) {
  Matrix gx = gy;
  for (std::size_t i = 0; i < gx.d.size(); ++i) gx.d[i] *= y_.d[i] * (1.0 - y_.d[i]);
  return gx;
}

Matrix Tanh::forward(const Matrix& x, bool) {
  y_ = x;
  for (double& v : y_.d) v = std::tanh(v);
  return y_;
}

Matrix Tanh::backward(const Matrix& gy) {
  Matrix gx = gy;
  for (std::size_t i = 0; i < gx.d.size(); ++i) gx.d[i] *= 1.0 - y_.d[i] * y_.d[i];
  return gx;
}

Matrix Dropout::forward(const Matrix& x, bool train) {
  if (!train || p_ <= 0.0) {
    mask_ = Matrix();
    return x;
  }
  mask_ = Matrix(x.rows, x.cols);
  double keep = 1.0 - p_;
  for (double& v : mask_.d) v = (rng_->uniform() < keep) ? 1.0 / keep : 0.0;
  Matrix y(x.rows, x.cols);
  kern::vmul(x.data(), mask_.data(), y.data(), y.size());
  return y;
}

Matrix Dropout::backward(const Matrix& gy) {
  if (mask_.size() == 0) return gy;
  Matrix gx(gy.rows, gy.cols);
  kern::vmul(gy.data(), mask_.data(), gx.data(), gx.size());
  return gx;
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
               std::size_t pad, Rng& rng)
    : w_(cout, cin * k, "conv.w"),
      b_(1, cout, "conv.b"),
      cin_(cin),
      cout_(cout),
      k_(k),
      stride_(stride),
      pad_(pad) {
  double scale = std::sqrt(2.0 / static_cast<double>(cin * k));
  for (double& v : w_.w.d) v = scale * rng.normal();
}

Matrix Conv1d::forward(const Matrix& x, bool) {
  if (x.cols % cin_ != 0) throw std::invalid_argument("conv1d: width not divisible by cin");
  n_ = x.rows;
  tin_ = x.cols / cin_;
  tout_ = t_out(tin_);

  cols_ = Matrix(n_ * tout_, cin_ * k_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double* xr = x.row(i);
    for (std::size_t o = 0; o < tout_; ++o) {
      double* col = cols_.row(i * tout_ + o);
      std::ptrdiff_t start = static_cast<std::ptrdiff_t>(o * stride_) - static_cast<std::ptrdiff_t>(pad_);
      for (std::size_t c = 0; c < cin_; ++c) {
        const double* chan = xr + c * tin_;
        for (std::size_t kk = 0; kk < k_; ++kk) {
          std::ptrdiff_t pos = start + static_cast<std::ptrdiff_t>(kk);
          col[c * k_ + kk] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(tin_))
                                 ? chan[pos]
                                 : 0.0;
        }
      }
    }
  }

  // [(n*tout) x cout] = cols * W^T, then scatter to channel-major rows.
  Matrix prod;
  matmul(false, true, 1.0, cols_, w_.w, 0.0, prod);
  Matrix y(n_, cout_ * tout_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t o = 0; o < tout_; ++o) {
      const double* pr = prod.row(i * tout_ + o);
      for (std::size_t c = 0; c < cout_; ++c)
        y(i, c * tout_ + o) = pr[c] + b_.w(0, c);
    }
  return y;
}

Matrix Conv1d::backward(const Matrix& gy) {
  // Regroup gy into [(n*tout) x cout].
  Matrix gprod(n_ * tout_, cout_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t o = 0; o < tout_; ++o) {
      double* pr = gprod.row(i * tout_ + o);
      for (std::size_t c = 0; c < cout_; ++c) {
        double v = gy(i, c * tout_ + o);
        pr[c] = v;
        b_.g(0, c) += v;
      }
    }

  matmul(true, false, 1.0, gprod, cols_, 1.0, w_.g);

  Matrix gcols;
  matmul(false, false, 1.0, gprod, w_.w, 0.0, gcols);

  Matrix gx(n_, cin_ * tin_);
  for (std::size_t i = 0; i < n_; ++i) {
    double* xr = gx.row(i);
    for (std::size_t o = 0; o < tout_; ++o) {
      const double* col = gcols.row(i * tout_ + o);
      std::ptrdiff_t start = static_cast<std::ptrdiff_t>(o * stride_) - static_cast<std::ptrdiff_t>(pad_);
      for (std::size_t c = 0; c < cin_; ++c) {
        double* chan = xr + c * tin_;
        for (std::size_t kk = 0; kk < k_; ++kk) {
          std::ptrdiff_t pos = start + static_cast<std::ptrdiff_t>(kk);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(tin_))
            chan[pos] += col[c * k_ + kk];
        }
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------- Upsample2

Matrix Upsample2::forward(const Matrix& x, bool) {
  t_ = x.cols / c_;
  Matrix y(x.rows, x.cols * 2);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t c = 0; c < c_; ++c) {
      const double* src = x.row(i) + c * t_;
      double* dst = y.row(i) + c * 2 * t_;
      for (std::size_t k = 0; k < t_; ++k) {
        dst[2 * k] = src[k];
        dst[2 * k + 1] = src[k];
      }
    }
  return y;
}

Matrix Upsample2::backward(const Matrix& gy) {
  Matrix gx(gy.rows, gy.cols / 2);
  for (std::size_t i = 0; i < gy.rows; ++i)
    for (std::size_t c = 0; c < c_; ++c) {
      const double* src = gy.row(i) + c * 2 * t_;
      double* dst = gx.row(i) + c * t_;
      for (std::size_t k = 0; k < t_; ++k) dst[k] = src[2 * k] + src[2 * k + 1];
    }
  return gx;
}

// ------------------------------------------------------------ Sequential

Matrix Sequential::forward(const Matrix& x, bool train) {
  Matrix h = x;
  for (auto& l : layers_) h = l->forward(h, train);
  return h;
}

Matrix Sequential::backward(const Matrix& gy) {
  Matrix g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Param*> Sequential::params() {
  std::vector<Param*> out;
  for (auto& l : layers_)
    for (Param* p : l->params()) out.push_back(p);
  return out;
}

// ------------------------------------------------------------------ Adam

Adam::Adam(std::vector<Param*> params, double lr_, double beta1, double beta2, double eps)
    : lr(lr_), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Param* p : params_) {
    m_.emplace_back(p->w.size(), 0.0);
    v_.emplace_back(p->w.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Param* p = params_[pi];
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < p->w.size(); ++i) {
      double g = p->g.d[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p->w.d[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

std::vector<double> flatten_params(const std::vector<Param*>& ps) {
  std::vector<double> flat;
  for (const Param* p : ps) flat.insert(flat.end(), p->w.d.begin(), p->w.d.end());
  return flat;
}

void unflatten_params(const std::vector<double>& flat, const std::vector<Param*>& ps) {
  std::size_t off = 0;
  for (Param* p : ps) {
    if (off + p->w.size() > flat.size()) throw std::invalid_argument("unflatten: size mismatch");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + p->w.size()), p->w.d.begin());
    off += p->w.size();
  }
  if (off != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
}

}  // namespace merit::nn
