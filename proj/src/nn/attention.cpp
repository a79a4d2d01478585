#include <cmath>
#include <stdexcept>

#include "merit/nn/nn.hpp"

namespace merit::nn {

SignalAttentiveLayer::SignalAttentiveLayer(std::size_t d, std::size_t t, Rng& rng)
    : ln_gamma_(1, d, "sal.ln_gamma"),
      ln_beta_(1, d, "sal.ln_beta"),
      wq_(d, d, "sal.wq"),
      wk_(d, d, "sal.wk"),
      wv_(d, d, "sal.wv"),
      wo_(d, d, "sal.wo"),
      bo_(1, d, "sal.bo"),
      w1_(d, d, "sal.w1"),
      b1_(1, d, "sal.b1"),
      d_(d),
      t_(t) {
  for (double& v : ln_gamma_.w.d) v = 1.0;
  double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : wq_.w.d) v = scale * rng.normal();
  for (double& v : wk_.w.d) v = scale * rng.normal();
  for (double& v : wv_.w.d) v = scale * rng.normal();
  // wo and w1 start at zero: the block begins as an identity map.
}

std::vector<Param*> SignalAttentiveLayer::params() {
  return {&ln_gamma_, &ln_beta_, &wq_, &wk_, &wv_, &wo_, &bo_, &w1_, &b1_};
}

Matrix SignalAttentiveLayer::forward(const Matrix& x, bool) {
  if (x.cols != d_ * t_) throw std::invalid_argument("sal: bad input width");
  const std::size_t n = x.rows;
  const double eps = 1e-5;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_));
  caches_.assign(n, Cache{});
  Matrix out(n, x.cols);

  for (std::size_t s = 0; s < n; ++s) {
    Cache& c = caches_[s];
    // channel-major row -> [t x d] tokens
    c.x = Matrix(t_, d_);
    for (std::size_t ch = 0; ch < d_; ++ch)
      for (std::size_t tt = 0; tt < t_; ++tt) c.x(tt, ch) = x(s, ch * t_ + tt);

    // LayerNorm per token
    c.xhat = Matrix(t_, d_);
    c.mean.assign(t_, 0.0);
    c.inv_sd.assign(t_, 0.0);
    Matrix normed(t_, d_);
    for (std::size_t tt = 0; tt < t_; ++tt) {
      double m = kern::sum(c.x.row(tt), d_) / static_cast<double>(d_);
      double var = 0.0;
      for (std::size_t ch = 0; ch < d_; ++ch) var += (c.x(tt, ch) - m) * (c.x(tt, ch) - m);
      var /= static_cast<double>(d_);
      double isd = 1.0 / std::sqrt(var + eps);
      c.mean[tt] = m;
      c.inv_sd[tt] = isd;
      for (std::size_t ch = 0; ch < d_; ++ch) {
        c.xhat(tt, ch) = (c.x(tt, ch) - m) * isd;
        normed(tt, ch) = ln_gamma_.w(0, ch) * c.xhat(tt, ch) + ln_beta_.w(0, ch);
      }
    }

    matmul(false, false, 1.0, normed, wq_.w, 0.0, c.q);
    matmul(false, false, 1.0, normed, wk_.w, 0.0, c.k);
    matmul(false, false, 1.0, normed, wv_.w, 0.0, c.v);

    // scores + row softmax
    Matrix scores;
    matmul(false, true, inv_sqrt_d, c.q, c.k, 0.0, scores);
    c.attn = Matrix(t_, t_);
    for (std::size_t i = 0; i < t_; ++i) {
      double mx = scores(i, 0);
      for (std::size_t j = 1; j < t_; ++j) mx = std::max(mx, scores(i, j));
      double z = 0.0;
      for (std::size_t j = 0; j < t_; ++j) {
        c.attn(i, j) = std::exp(scores(i, j) - mx);
        z += c.attn(i, j);
      }
      for (std::size_t j = 0; j < t_; ++j) c.attn(i, j) /= z;
    }

    matmul(false, false, 1.0, c.attn, c.v, 0.0, c.av);
    Matrix attn_out;
    matmul(false, false, 1.0, c.av, wo_.w, 0.0, attn_out);
    c.u = Matrix(t_, d_);
    for (std::size_t i = 0; i < t_; ++i)
      for (std::size_t j = 0; j < d_; ++j)
        c.u(i, j) = c.x(i, j) + attn_out(i, j) + bo_.w(0, j);

    // linear sublayer with activation, second residual
    matmul(false, false, 1.0, c.u, w1_.w, 0.0, c.lin_pre);
    for (std::size_t i = 0; i < t_; ++i)
      for (std::size_t j = 0; j < d_; ++j) {
        double pre = c.lin_pre(i, j) + b1_.w(0, j);
        c.lin_pre(i, j) = pre;
        double act = pre >= 0.0 ? pre : lrelu_slope_ * pre;
        out(s, j * t_ + i) = c.u(i, j) + act;
      }
  }
  return out;
}

Matrix SignalAttentiveLayer::backward(const Matrix& gy) {
  const std::size_t n = gy.rows;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_));
  Matrix gx(n, gy.cols);

  for (std::size_t s = 0; s < n; ++s) {
    Cache& c = caches_[s];
    // gy row -> [t x d]
    Matrix go(t_, d_);
    for (std::size_t ch = 0; ch < d_; ++ch)
      for (std::size_t tt = 0; tt < t_; ++tt) go(tt, ch) = gy(s, ch * t_ + tt);

    // through second residual: out = u + lrelu(u W1 + b1)
    Matrix g_act = go;
    for (std::size_t i = 0; i < t_; ++i)
      for (std::size_t j = 0; j < d_; ++j)
        if (c.lin_pre(i, j) < 0.0) g_act(i, j) *= lrelu_slope_;
    matmul(true, false, 1.0, c.u, g_act, 1.0, w1_.g);
    for (std::size_t i = 0; i < t_; ++i)
      for (std::size_t j = 0; j < d_; ++j) b1_.g(0, j) += g_act(i, j);
    Matrix gu;
    matmul(false, true, 1.0, g_act, w1_.w, 0.0, gu);
    for (std::size_t i = 0; i < t_ * d_; ++i) gu.d[i] += go.d[i];

    // through first residual: u = x + (attn V) Wo + bo
    for (std::size_t i = 0; i < t_; ++i)
      for (std::size_t j = 0; j < d_; ++j) bo_.g(0, j) += gu(i, j);
    matmul(true, false, 1.0, c.av, gu, 1.0, wo_.g);
    Matrix g_av;
    matmul(false, true, 1.0, gu, wo_.w, 0.0, g_av);

    // through attn*V
    Matrix g_attn;
    matmul(false, true, 1.0, g_av, c.v, 0.0, g_attn);
    Matrix g_v;
    matmul(true, false, 1.0, c.attn, g_av, 0.0, g_v);

    // softmax backward (per row)
    Matrix g_scores(t_, t_);
    for (std::size_t i = 0; i < t_; ++i) {
      double dotp = kern::dot(g_attn.row(i), c.attn.row(i), t_);
      for (std::size_t j = 0; j < t_; ++j)
        g_scores(i, j) = c.attn(i, j) * (g_attn(i, j) - dotp);
    }

    // scores = inv_sqrt_d * Q K^T
    Matrix g_q;
    matmul(false, false, inv_sqrt_d, g_scores, c.k, 0.0, g_q);
    Matrix g_k;
    matmul(true, false, inv_sqrt_d, g_scores, c.q, 0.0, g_k);

    // back through the three projections into the normed tokens
    Matrix normed(t_, d_);
    for (std::size_t i = 0; i < t_; ++i)
      for (std::size_t j = 0; j < d_; ++j)
        normed(i, j) = ln_gamma_.w(0, j) * c.xhat(i, j) + ln_beta_.w(0, j);
    matmul(true, false, 1.0, normed, g_q, 1.0, wq_.g);
    matmul(true, false, 1.0, normed, g_k, 1.0, wk_.g);
    matmul(true, false, 1.0, normed, g_v, 1.0, wv_.g);
    Matrix g_normed;
    matmul(false, true, 1.0, g_q, wq_.w, 0.0, g_normed);
    matmul(false, true, 1.0, g_k, wk_.w, 1.0, g_normed);
    matmul(false, true, 1.0, g_v, wv_.w, 1.0, g_normed);

    // LayerNorm backward; add the residual path (gu flows straight to x).
    for (std::size_t i = 0; i < t_; ++i) {
      double sum_g = 0.0, sum_g_xh = 0.0;
      for (std::size_t j = 0; j < d_; ++j) {
        double gh = g_normed(i, j) * ln_gamma_.w(0, j);
        ln_gamma_.g(0, j) += g_normed(i, j) * c.xhat(i, j);
        ln_beta_.g(0, j) += g_normed(i, j);
        sum_g += gh;
        sum_g_xh += gh * c.xhat(i, j);
      }
      double inv_d = 1.0 / static_cast<double>(d_);
      for (std::size_t j = 0; j < d_; ++j) {
        double gh = g_normed(i, j) * ln_gamma_.w(0, j);
        double gxi = c.inv_sd[i] * (gh - inv_d * sum_g - c.xhat(i, j) * inv_d * sum_g_xh);
        gx(s, j * t_ + i) = gxi + gu(i, j);
      }
    }
  }
  return gx;
}

}  // namespace merit::nn
