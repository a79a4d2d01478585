#include <cmath>
#include <numbers>
#include <stdexcept>

#include "merit/deepica.hpp"

namespace merit::ica {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

Flow::Flow(std::size_t d, std::size_t d_y, std::size_t n_layers, std::size_t hidden, Rng& rng)
    : d_(d), d_y_(d_y), mu_(d_y, d, "flow.mu") {
  layers_.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    CouplingLayer cl{nn::Param(1, d, "flow.a"), nn::Param(1, d, "flow.b"), nn::Sequential{},
                     0, 0, (l % 2 == 0), {}, {}, {}};
    if (d >= 2) {
      cl.d_keep = d / 2;
      cl.d_mod = d - cl.d_keep;
      cl.mlp.emplace<nn::Linear>(cl.d_keep, hidden, rng);
      cl.mlp.emplace<nn::Tanh>();
      auto* out = cl.mlp.emplace<nn::Linear>(hidden, 2 * cl.d_mod, rng);
      // zero-init output layer: coupling starts as identity
      std::fill(out->w_.w.d.begin(), out->w_.w.d.end(), 0.0);
    }
    layers_.push_back(std::move(cl));
  }
}

std::vector<nn::Param*> Flow::params() {
  std::vector<nn::Param*> ps{&mu_};
  for (auto& l : layers_) {
    ps.push_back(&l.a);
    ps.push_back(&l.b);
    for (nn::Param* p : l.mlp.params()) ps.push_back(p);
  }
  return ps;
}

namespace {

// keep/mod views of a row
inline void split_cols(const Matrix& h, bool keep_front, std::size_t dk, std::size_t dm,
                       Matrix& k, Matrix& m) {
  k = Matrix(h.rows, dk);
  m = Matrix(h.rows, dm);
  for (std::size_t i = 0; i < h.rows; ++i) {
    const double* r = h.row(i);
    if (keep_front) {
      std::copy(r, r + dk, k.row(i));
      std::copy(r + dk, r + dk + dm, m.row(i));
    } else {
      std::copy(r, r + dm, m.row(i));
      std::copy(r + dm, r + dm + dk, k.row(i));
    }
  }
}

inline Matrix join_cols(const Matrix& k, const Matrix& m, bool keep_front) {
  Matrix h(k.rows, k.cols + m.cols);
  for (std::size_t i = 0; i < k.rows; ++i) {
    double* r = h.row(i);
    if (keep_front) {
      std::copy(k.row(i), k.row(i) + k.cols, r);
      std::copy(m.row(i), m.row(i) + m.cols, r + k.cols);
    } else {
      std::copy(m.row(i), m.row(i) + m.cols, r);
      std::copy(k.row(i), k.row(i) + k.cols, r + m.cols);
    }
  }
  return h;
}

}  // namespace

std::vector<double> Flow::log_density(const Matrix& x, const std::vector<std::int64_t>& y) {
  if (x.cols != d_) throw std::invalid_argument("flow: dimension mismatch");
  if (y.size() != x.rows) throw std::invalid_argument("flow: y size mismatch");
  const std::size_t n = x.rows;
  y_cache_ = y;

  std::vector<double> logdet(n, 0.0);
  Matrix h(n, d_);
  for (std::size_t i = 0; i < n; ++i) {
    auto yi = y[i];
    if (yi < 0 || static_cast<std::size_t>(yi) >= d_y_)
      throw std::invalid_argument("flow: y index out of range");
    for (std::size_t j = 0; j < d_; ++j) h(i, j) = x(i, j) - mu_.w(static_cast<std::size_t>(yi), j);
  }

  // inverse through layers L-1 .. 0
  for (std::size_t li = layers_.size(); li-- > 0;) {
    CouplingLayer& L = layers_[li];
    if (L.d_mod > 0) {
      Matrix k, m;
      split_cols(h, L.keep_front, L.d_keep, L.d_mod, k, m);
      Matrix raw = L.mlp.forward(k, false);
      L.s = Matrix(n, L.d_mod);
      L.mp = Matrix(n, L.d_mod);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < L.d_mod; ++j) {
          double s = std::tanh(raw(i, j));
          double tt = raw(i, L.d_mod + j);
          L.s(i, j) = s;
          L.mp(i, j) = (m(i, j) - tt) * std::exp(-s);
          logdet[i] -= s;
        }
      h = join_cols(k, L.mp, L.keep_front);
    }
    // diagonal affine inverse
    L.h0 = Matrix(n, d_);
    double asum = kern::sum(L.a.w.data(), d_);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d_; ++j)
        L.h0(i, j) = (h(i, j) - L.b.w(0, j)) * std::exp(-L.a.w(0, j));
      logdet[i] -= asum;
    }
    h = L.h0;
  }
  z_cache_ = h;

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = kern::sumsq(h.row(i), d_);
    out[i] = -0.5 * ss - 0.5 * static_cast<double>(d_) * kLog2Pi + logdet[i];
  }
  return out;
}

void Flow::backward(const std::vector<double>& glogq) {
  const std::size_t n = z_cache_.rows;
  if (glogq.size() != n) throw std::invalid_argument("flow backward: bad grad size");

  // seed: d logN(z)/dz = -z
  Matrix gh(n, d_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d_; ++j) gh(i, j) = -glogq[i] * z_cache_(i, j);

  // traverse layers 0 .. L-1 (reverse of the inverse pass)
  for (auto& L : layers_) {
    // diag affine inverse backward: h0 = (h1 - b) * exp(-a)
    Matrix gh1(n, d_);
    for (std::size_t j = 0; j < d_; ++j) {
      double ea = std::exp(-L.a.w(0, j));
      double ga = 0.0, gb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ga += -gh(i, j) * L.h0(i, j);
        gb += -gh(i, j) * ea;
        gh1(i, j) = gh(i, j) * ea;
      }
      L.a.g(0, j) += ga;
      L.b.g(0, j) += gb;
    }
    // logdet term: each sample contributes -sum(a)
    double gsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) gsum += glogq[i];
    for (std::size_t j = 0; j < d_; ++j) L.a.g(0, j) -= gsum;

    if (L.d_mod > 0) {
      Matrix gk, gmp;
      split_cols(gh1, L.keep_front, L.d_keep, L.d_mod, gk, gmp);
      Matrix graw(n, 2 * L.d_mod);
      Matrix gm(n, L.d_mod);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < L.d_mod; ++j) {
          double es = std::exp(-L.s(i, j));
          gm(i, j) = gmp(i, j) * es;
          double ds = -gmp(i, j) * L.mp(i, j) - glogq[i];
          graw(i, j) = ds * (1.0 - L.s(i, j) * L.s(i, j));  // tanh
          graw(i, L.d_mod + j) = -gm(i, j);
        }
      Matrix gk_mlp = L.mlp.backward(graw);
      for (std::size_t i = 0; i < n * L.d_keep; ++i) gk.d[i] += gk_mlp.d[i];
      gh = join_cols(gk, gm, L.keep_front);
    } else {
      gh = gh1;
    }
  }

  // shift: u = x - mu_y
  for (std::size_t i = 0; i < n; ++i) {
    auto yi = static_cast<std::size_t>(y_cache_[i]);
    for (std::size_t j = 0; j < d_; ++j) mu_.g(yi, j) -= gh(i, j);
  }
}

Matrix Flow::transform(const Matrix& z, const std::vector<std::int64_t>& y) {
  const std::size_t n = z.rows;
  Matrix h = z;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    CouplingLayer& L = layers_[li];
    // diag affine forward
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d_; ++j)
        h(i, j) = h(i, j) * std::exp(L.a.w(0, j)) + L.b.w(0, j);
    if (L.d_mod > 0) {
      Matrix k, m;
      split_cols(h, L.keep_front, L.d_keep, L.d_mod, k, m);
      Matrix raw = L.mlp.forward(k, false);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < L.d_mod; ++j) {
          double s = std::tanh(raw(i, j));
          double tt = raw(i, L.d_mod + j);
          m(i, j) = m(i, j) * std::exp(s) + tt;
        }
      h = join_cols(k, m, L.keep_front);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto yi = static_cast<std::size_t>(y[i]);
    for (std::size_t j = 0; j < d_; ++j) h(i, j) += mu_.w(yi, j);
  }
  return h;
}

Matrix Flow::inverse(const Matrix& x, const std::vector<std::int64_t>& y) {
  log_density(x, y);  // fills z_cache_
  return z_cache_;
}

Matrix Flow::sample(const std::vector<std::int64_t>& y, Rng& rng) {
  Matrix z(y.size(), d_);
  for (double& v : z.d) v = rng.normal();
  return transform(z, y);
}

}  // namespace merit::ica
