#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>

#include "merit/core/container.hpp"
#include "merit/deepica.hpp"

namespace merit::ica {
namespace {

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double fce_objective(const Matrix& x_data, const std::vector<std::int64_t>& y_data,
                     const Matrix& x_noise, const std::vector<std::int64_t>& y_noise,
                     Ebm& ebm, Flow& flow, bool train_mode, FceGrads* grads) {
  const std::size_t nd = x_data.rows, nn_ = x_noise.rows;
  if (nd == 0 || nn_ == 0) throw std::invalid_argument("fce_objective: empty batch");
  if (x_data.cols != x_noise.cols) throw std::invalid_argument("fce_objective: width mismatch");

  // One concatenated forward per model so the layer caches stay valid for
  // the single backward pass.
  Matrix x(nd + nn_, x_data.cols);
  std::copy(x_data.d.begin(), x_data.d.end(), x.d.begin());
  std::copy(x_noise.d.begin(), x_noise.d.end(), x.d.begin() + static_cast<std::ptrdiff_t>(nd * x.cols));
  std::vector<std::int64_t> y(y_data);
  y.insert(y.end(), y_noise.begin(), y_noise.end());

  std::vector<double> logp = ebm.log_density(x, y, train_mode);
  std::vector<double> logq = flow.log_density(x, y);
  for (std::size_t i = 0; i < logp.size(); ++i) {
    if (!std::isfinite(logp[i]))
      throw std::runtime_error("fce_objective: non-finite EBM density at batch row " +
                               std::to_string(i));
    if (!std::isfinite(logq[i]))
      throw std::runtime_error("fce_objective: non-finite flow density at batch row " +
                               std::to_string(i));
  }

  double j = 0.0;
  std::vector<double> glogp(nd + nn_, 0.0), glogq(nd + nn_, 0.0);
  for (std::size_t i = 0; i < nd; ++i) {
    double r = logp[i] - logq[i];
    j += -softplus(-r) / static_cast<double>(nd);
    glogp[i] = sigmoid(-r) / static_cast<double>(nd);
    glogq[i] = -glogp[i];
  }
  for (std::size_t i = nd; i < nd + nn_; ++i) {
    double r = logp[i] - logq[i];
    j += -softplus(r) / static_cast<double>(nn_);
    glogq[i] = sigmoid(r) / static_cast<double>(nn_);
    glogp[i] = -glogq[i];
  }

  if (grads != nullptr) {
    grads->glogp_data.assign(glogp.begin(), glogp.begin() + static_cast<std::ptrdiff_t>(nd));
    grads->glogp_noise.assign(glogp.begin() + static_cast<std::ptrdiff_t>(nd), glogp.end());
    grads->glogq_data.assign(glogq.begin(), glogq.begin() + static_cast<std::ptrdiff_t>(nd));
    grads->glogq_noise.assign(glogq.begin() + static_cast<std::ptrdiff_t>(nd), glogq.end());
    ebm.backward(glogp);
    flow.backward(glogq);
  }
  return j;
}

namespace {

void zero_all(std::vector<nn::Param*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

// Draws a data batch and a same-size flow noise batch for the given rows.
struct Batcher {
  const Matrix& x;
  const std::vector<std::int64_t>& y;
  const std::vector<std::size_t>& rows;

  void draw(std::size_t batch, Rng& rng, Flow& flow, Matrix& xb, std::vector<std::int64_t>& yb,
            Matrix& xn, std::vector<std::int64_t>& yn) const {
    xb = Matrix(batch, x.cols);
    yb.resize(batch);
    yn.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      std::size_t r = rows[static_cast<std::size_t>(
          rng.integer(0, static_cast<std::int64_t>(rows.size()) - 1))];
      std::copy(x.row(r), x.row(r) + x.cols, xb.row(i));
      yb[i] = y[r];
      yn[i] = y[rows[static_cast<std::size_t>(
          rng.integer(0, static_cast<std::int64_t>(rows.size()) - 1))]];
    }
    xn = flow.sample(yn, rng);
  }
};

}  // namespace

TrainResult train_deepica(const Matrix& x, const std::vector<std::int64_t>& y,
                          Ebm& ebm, Flow& flow, const TrainConfig& cfg) {
  if (x.rows != y.size()) throw std::invalid_argument("train_deepica: x/y size mismatch");
  if (x.rows < 4) throw std::invalid_argument("train_deepica: too few samples");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
      static_cast<double>(x.rows) * cfg.val_fraction));
  n_val = std::min(n_val, x.rows - 1);
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  auto ebm_ps = ebm.params();
  auto flow_ps = flow.params();
  nn::Adam opt_ebm(ebm_ps, cfg.lr_ebm);
  nn::Adam opt_flow(flow_ps, cfg.lr_flow);
  Batcher train_b{x, y, train_rows};
  Batcher val_b{x, y, val_rows};
  std::size_t batch = std::min(cfg.batch, train_rows.size());

  auto eval_val = [&](Rng r) {
    Matrix xb, xn;
    std::vector<std::int64_t> yb, yn;
    std::size_t vb = std::min(cfg.batch, val_rows.size());
    val_b.draw(std::max<std::size_t>(vb, 1), r, flow, xb, yb, xn, yn);
    return fce_objective(xb, yb, xn, yn, ebm, flow, /*train_mode=*/false);
  };

  TrainResult res;
  std::vector<double> best_theta = nn::flatten_params(ebm_ps);
  res.best_val_j = -std::numeric_limits<double>::infinity();
  Rng val_rng = rng.fork(0x76616c);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    Matrix xb, xn;
    std::vector<std::int64_t> yb, yn;
    train_b.draw(batch, rng, flow, xb, yb, xn, yn);

    // EBM ascent on J: Adam minimizes, so negate the theta grads.
    zero_all(ebm_ps);
    zero_all(flow_ps);
    FceGrads fg_theta;
    double j = fce_objective(xb, yb, xn, yn, ebm, flow, /*train_mode=*/true, &fg_theta);
    if (!std::isfinite(j)) {
      res.diverged = true;
      break;
    }
    for (auto* p : ebm_ps)
      for (double& g : p->g.d) g = -g;
    opt_ebm.step();

    if (step % cfg.ebm_per_flow == 0) {
      // Flow descent on J (fresh batch, fresh grads).
      train_b.draw(batch, rng, flow, xb, yb, xn, yn);
      zero_all(ebm_ps);
      zero_all(flow_ps);
      FceGrads fg;
      j = fce_objective(xb, yb, xn, yn, ebm, flow, /*train_mode=*/true, &fg);
      if (!std::isfinite(j)) {
        res.diverged = true;
        break;
      }
      opt_flow.step();
    }

    double j_val = std::numeric_limits<double>::quiet_NaN();
    if (step % cfg.val_every == 0 || step == cfg.steps) {
      j_val = eval_val(val_rng.fork(step));
      if (j_val > res.best_val_j) {
        res.best_val_j = j_val;
        res.best_step = step;
        best_theta = nn::flatten_params(ebm_ps);
      }
    }
    res.log.push_back({step, j, j_val});
  }

  nn::unflatten_params(best_theta, ebm_ps);
  if (!res.diverged) ebm.trained = true;
  return res;
}

namespace {

// Hann-windowed sinc bandpass, zero-phase via symmetric "same" convolution.
std::vector<double> bandpass(const std::vector<double>& x, double fs, double f_lo, double f_hi) {
  const std::size_t half = 32;
  const std::size_t n_taps = 2 * half + 1;
  auto lp = [&](double fc, std::size_t k) {
    double t = static_cast<double>(k) - static_cast<double>(half);
    double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(k) /
                                    static_cast<double>(n_taps - 1));
    double arg = 2.0 * fc / fs;
    double s = (t == 0.0) ? arg : arg * std::sin(M_PI * arg * t) / (M_PI * arg * t);
    return w * s;
  };
  std::vector<double> h(n_taps);
  for (std::size_t k = 0; k < n_taps; ++k) h[k] = lp(f_hi, k) - lp(f_lo, k);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_taps; ++k) {
      std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + static_cast<std::ptrdiff_t>(k) -
                         static_cast<std::ptrdiff_t>(half);
      if (j < 0) j = 0;
      if (j >= static_cast<std::ptrdiff_t>(x.size())) j = static_cast<std::ptrdiff_t>(x.size()) - 1;
      acc += h[k] * x[static_cast<std::size_t>(j)];
    }
    out[i] = acc;
  }
  return out;
}

// Jacobi eigendecomposition for small symmetric matrices (row-major d x d).
// Deterministic; used for whitening and symmetric orthogonalization.
void jacobi_eig(std::vector<double> a, std::size_t d, std::vector<double>& evec,
                std::vector<double>& eval) {
  evec.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) evec[i * d + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) off += a[i * d + j] * a[i * d + j];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        if (std::abs(a[p * d + q]) < 1e-18) continue;
        double theta = 0.5 * std::atan2(2.0 * a[p * d + q], a[q * d + q] - a[p * d + p]);
        double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t k = 0; k < d; ++k) {
          double akp = a[k * d + p], akq = a[k * d + q];
          a[k * d + p] = c * akp - s * akq;
          a[k * d + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          double apk = a[p * d + k], aqk = a[q * d + k];
          a[p * d + k] = c * apk - s * aqk;
          a[q * d + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          double vkp = evec[k * d + p], vkq = evec[k * d + q];
          evec[k * d + p] = c * vkp - s * vkq;
          evec[k * d + q] = s * vkp + c * vkq;
        }
      }
  }
  eval.resize(d);
  for (std::size_t i = 0; i < d; ++i) eval[i] = a[i * d + i];
}

// Standardized [input channels; feature channels] as a [t x (c + dz)] matrix.
Matrix build_z(const Matrix& segment_x, Ebm& ebm) {
  const std::size_t c = segment_x.rows, t = segment_x.cols;
  Matrix xt(t, c);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < c; ++j) xt(i, j) = segment_x(j, i);
  Matrix f = ebm.feature_f(xt, /*train=*/false);  // [t x d_z]
  const std::size_t dz = ebm.config().d_z, w = c + dz;
  Matrix z(t, w);
  for (std::size_t j = 0; j < w; ++j) {
    double mu = 0.0, var = 0.0;
    auto val = [&](std::size_t i) { return j < c ? xt(i, j) : f(i, j - c); };
    for (std::size_t i = 0; i < t; ++i) mu += val(i);
    mu /= static_cast<double>(t);
    for (std::size_t i = 0; i < t; ++i) var += (val(i) - mu) * (val(i) - mu);
    var /= static_cast<double>(t);
    double inv = var > 1e-18 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t i = 0; i < t; ++i) z(i, j) = (val(i) - mu) * inv;
  }
  return z;
}

// PCA to dz dimensions followed by a deterministic symmetric FastICA (tanh
// contrast, identity start). Returns the [dz x w] map from z columns to
// components.
Matrix compute_unmix(const Matrix& z, std::size_t dz) {
  const std::size_t n = z.rows, w = z.cols;
  std::vector<double> cov(w * w, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < w; ++a)
      for (std::size_t b = 0; b < w; ++b) cov[a * w + b] += z(i, a) * z(i, b);
  for (double& v : cov) v /= static_cast<double>(n);
  std::vector<double> evec, eval;
  jacobi_eig(cov, w, evec, eval);
  std::vector<std::size_t> idx(w);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return eval[a] > eval[b]; });

  // Whitened projection: rows are eigvec_k / sqrt(lambda_k) for the top dz.
  Matrix proj(dz, w);
  for (std::size_t k = 0; k < dz; ++k) {
    double inv = 1.0 / std::sqrt(std::max(eval[idx[k]], 1e-12));
    for (std::size_t b = 0; b < w; ++b) proj(k, b) = evec[b * w + idx[k]] * inv;
  }
  Matrix y(n, dz);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dz; ++k) {
      double s = 0.0;
      for (std::size_t b = 0; b < w; ++b) s += proj(k, b) * z(i, b);
      y(i, k) = s;
    }

  std::vector<double> W(dz * dz, 0.0);
  for (std::size_t i = 0; i < dz; ++i) W[i * dz + i] = 1.0;
  auto sym_orth = [&](std::vector<double>& m) {
    std::vector<double> wwt(dz * dz, 0.0);
    for (std::size_t a = 0; a < dz; ++a)
      for (std::size_t b = 0; b < dz; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < dz; ++k) s += m[a * dz + k] * m[b * dz + k];
        wwt[a * dz + b] = s;
      }
    std::vector<double> ev, el;
    jacobi_eig(wwt, dz, ev, el);
    std::vector<double> inv_sqrt(dz * dz, 0.0);
    for (std::size_t a = 0; a < dz; ++a)
      for (std::size_t b = 0; b < dz; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < dz; ++k)
          s += ev[a * dz + k] * ev[b * dz + k] / std::sqrt(std::max(el[k], 1e-12));
        inv_sqrt[a * dz + b] = s;
      }
    std::vector<double> out(dz * dz, 0.0);
    for (std::size_t a = 0; a < dz; ++a)
      for (std::size_t b = 0; b < dz; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < dz; ++k) s += inv_sqrt[a * dz + k] * m[k * dz + b];
        out[a * dz + b] = s;
      }
    m = out;
  };
  sym_orth(W);
  for (int it = 0; it < 300; ++it) {
    std::vector<double> Wn(dz * dz, 0.0);
    for (std::size_t c = 0; c < dz; ++c) {
      double beta = 0.0;
      std::vector<double> e1(dz, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double u = 0.0;
        for (std::size_t b = 0; b < dz; ++b) u += W[c * dz + b] * y(i, b);
        double th = std::tanh(u);
        for (std::size_t b = 0; b < dz; ++b) e1[b] += y(i, b) * th;
        beta += 1.0 - th * th;
      }
      for (std::size_t b = 0; b < dz; ++b)
        Wn[c * dz + b] = e1[b] / static_cast<double>(n) - beta / static_cast<double>(n) * W[c * dz + b];
    }
    sym_orth(Wn);
    double delta = 0.0;
    for (std::size_t c = 0; c < dz; ++c) {
      double dot = 0.0;
      for (std::size_t b = 0; b < dz; ++b) dot += Wn[c * dz + b] * W[c * dz + b];
      delta = std::max(delta, std::abs(std::abs(dot) - 1.0));
    }
    W = Wn;
    if (delta < 1e-10) break;
  }

  Matrix unmix(dz, w);
  for (std::size_t k = 0; k < dz; ++k)
    for (std::size_t b = 0; b < w; ++b) {
      double s = 0.0;
      for (std::size_t m = 0; m < dz; ++m) s += W[k * dz + m] * proj(m, b);
      unmix(k, b) = s;
    }
  return unmix;
}

// Components [dz x t] from the standardized z and a fixed unmixing map.
Matrix apply_unmix(const Matrix& z, const Matrix& unmix) {
  const std::size_t n = z.rows, dz = unmix.rows;
  Matrix comp(dz, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dz; ++k) {
      double s = 0.0;
      for (std::size_t b = 0; b < z.cols; ++b) s += unmix(k, b) * z(i, b);
      comp(k, i) = s;
    }
  return comp;
}

double corr(const double* a, const double* b, std::size_t n) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

SeparationResult separate(const Matrix& segment_x, Ebm& ebm, double fs) {
  if (!ebm.trained) throw std::logic_error("separate: EBM has not been trained");
  const std::size_t c = segment_x.rows, t = segment_x.cols;
  if (c != ebm.config().d_x) throw std::invalid_argument("separate: channel count mismatch");

  const std::size_t dz = ebm.config().d_z;
  Matrix z = build_z(segment_x, ebm);
  Matrix unmix = compute_unmix(z, dz);
  Matrix comp = apply_unmix(z, unmix);  // [dz x t]

  std::vector<double> mean_in(t, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < c; ++j) mean_in[i] += segment_x(j, i);
    mean_in[i] /= static_cast<double>(c);
  }
  std::vector<double> ref = bandpass(mean_in, fs, 0.8, 3.0);

  std::vector<std::vector<double>> src(dz, std::vector<double>(t));
  std::vector<double> r(dz);
  for (std::size_t k = 0; k < dz; ++k) {
    for (std::size_t i = 0; i < t; ++i) src[k][i] = comp(k, i);
    r[k] = corr(src[k].data(), ref.data(), t);
  }
  std::vector<std::size_t> ord(dz);
  std::iota(ord.begin(), ord.end(), std::size_t{0});
  std::stable_sort(ord.begin(), ord.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(r[a]) > std::abs(r[b]); });

  SeparationResult out;
  out.sources = Matrix(dz, t);
  out.reference_corr.resize(dz);
  out.order.resize(dz);
  out.signs.resize(dz);
  for (std::size_t k = 0; k < dz; ++k) {
    double sign = (r[ord[k]] < 0.0) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < t; ++i) out.sources(k, i) = sign * src[ord[k]][i];
    out.reference_corr[k] = sign * r[ord[k]];
    out.order[k] = ord[k];
    out.signs[k] = sign;
  }
  out.unmix = unmix;
  return out;
}

SeparationResult separate_ordered(const Matrix& segment_x, Ebm& ebm,
                                  const std::vector<std::size_t>& order,
                                  const std::vector<double>& signs, const Matrix& unmix) {
  if (!ebm.trained) throw std::logic_error("separate: EBM has not been trained");
  const std::size_t c = segment_x.rows, t = segment_x.cols;
  if (c != ebm.config().d_x) throw std::invalid_argument("separate: channel count mismatch");
  const std::size_t dz = ebm.config().d_z;
  if (order.size() != dz || signs.size() != dz)
    throw std::invalid_argument("separate: order/sign size must equal d_z");
  if (unmix.rows != dz || unmix.cols != c + dz)
    throw std::invalid_argument("separate: unmix must be d_z x (d_x + d_z)");

  Matrix z = build_z(segment_x, ebm);
  Matrix comp = apply_unmix(z, unmix);  // [dz x t]

  SeparationResult out;
  out.sources = Matrix(dz, t);
  out.reference_corr.assign(dz, 0.0);
  out.order = order;
  out.signs = signs;
  out.unmix = unmix;
  for (std::size_t k = 0; k < dz; ++k)
    for (std::size_t i = 0; i < t; ++i) out.sources(k, i) = signs[k] * comp(order[k], i);
  return out;
}

void save_checkpoint(const std::string& path, Ebm& ebm, Flow& flow, const TrainResult& log) {
  Archive ar;
  std::vector<double> theta = nn::flatten_params(ebm.params());
  ar.put_f64("ebm.theta", {theta.size()}, theta);
  std::vector<double> alpha = nn::flatten_params(flow.params());
  ar.put_f64("flow.alpha", {alpha.size()}, alpha);
  std::vector<double> steps, js, jvals;
  for (const auto& e : log.log) {
    steps.push_back(static_cast<double>(e.step));
    js.push_back(e.j);
    jvals.push_back(e.j_val);
  }
  ar.put_f64("log.step", {steps.size()}, steps);
  ar.put_f64("log.j", {js.size()}, js);
  ar.put_f64("log.j_val", {jvals.size()}, jvals);
  const auto& c = ebm.config();
  ar.meta["config"] = {{"d_x", c.d_x},     {"d_y", c.d_y},
                       {"d_z", c.d_z},     {"hidden", c.hidden},
                       {"flow_layers", c.flow_layers}, {"flow_hidden", c.flow_hidden}};
  ar.meta["trained"] = ebm.trained;
  ar.meta["best_val_j"] = log.best_val_j;
  ar.meta["best_step"] = log.best_step;
  ar.save(path);
}

void load_checkpoint(const std::string& path, Ebm& ebm, Flow& flow) {
  Archive ar = Archive::load(path);
  const auto& c = ar.meta.at("config");
  if (c.at("d_x").get<std::size_t>() != ebm.config().d_x ||
      c.at("d_y").get<std::size_t>() != ebm.config().d_y ||
      c.at("d_z").get<std::size_t>() != ebm.config().d_z ||
      c.at("hidden").get<std::size_t>() != ebm.config().hidden)
    throw std::runtime_error("load_checkpoint: configuration mismatch");
  auto eps = ebm.params();
  auto fps = flow.params();
  nn::unflatten_params(ar.f64("ebm.theta"), eps);
  nn::unflatten_params(ar.f64("flow.alpha"), fps);
  ebm.trained = ar.meta.value("trained", false);
}

}  // namespace merit::ica
