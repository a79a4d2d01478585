#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "merit/core/container.hpp"
#include "merit/fusion.hpp"

namespace merit::fusion {
namespace {

constexpr double kEps = 1e-7;

double clamped_log(double p) { return std::log(std::clamp(p, kEps, 1.0 - kEps)); }

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows, std::size_t lo,
                 std::size_t hi) {
  Matrix out(hi - lo, m.cols);
  for (std::size_t i = lo; i < hi; ++i)
    std::copy(m.row(rows[i]), m.row(rows[i]) + m.cols, out.row(i - lo));
  return out;
}

}  // namespace

double cgan_loss(const Batch& b, Generator& g, Discriminator& d, bool train) {
  if (b.size() == 0) throw std::invalid_argument("cgan_loss: empty batch");
  Matrix fake = g.forward(b.radar, b.imu, train);
  std::vector<double> p_real = d.forward(b.radar, b.imu, b.target, train);
  std::vector<double> p_fake = d.forward(b.radar, b.imu, fake, train);
  double l = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i)
    l += (clamped_log(p_real[i]) + clamped_log(1.0 - p_fake[i])) / static_cast<double>(b.size());
  return l;
}

double l1_loss(const Batch& b, Generator& g, bool train) {
  if (b.size() == 0) throw std::invalid_argument("l1_loss: empty batch");
  Matrix fake = g.forward(b.radar, b.imu, train);
  double l = 0.0;
  for (std::size_t i = 0; i < fake.d.size(); ++i) l += std::abs(b.target.d[i] - fake.d[i]);
  return l / static_cast<double>(fake.d.size());
}

double total_loss(const Batch& b, Generator& g, Discriminator& d, double alpha, bool train,
                  bool with_grads) {
  if (b.size() == 0) throw std::invalid_argument("total_loss: empty batch");
  if (alpha < 0.0) throw std::invalid_argument("total_loss: alpha must be >= 0");
  const std::size_t n = b.size(), t = b.target.cols;

  Matrix fake = g.forward(b.radar, b.imu, train);

  // One discriminator forward over [real; fake] so the cached activations
  // support a single backward covering both loss terms.
  Matrix radar2(2 * n, b.radar.cols), imu2(2 * n, b.imu.cols), ecg2(2 * n, t);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(b.radar.row(i), b.radar.row(i) + b.radar.cols, radar2.row(i));
    std::copy(b.radar.row(i), b.radar.row(i) + b.radar.cols, radar2.row(n + i));
    std::copy(b.imu.row(i), b.imu.row(i) + b.imu.cols, imu2.row(i));
    std::copy(b.imu.row(i), b.imu.row(i) + b.imu.cols, imu2.row(n + i));
    std::copy(b.target.row(i), b.target.row(i) + t, ecg2.row(i));
    std::copy(fake.row(i), fake.row(i) + t, ecg2.row(n + i));
  }
  std::vector<double> p = d.forward(radar2, imu2, ecg2, train);

  double l_cgan = 0.0, l_l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    l_cgan += (clamped_log(p[i]) + clamped_log(1.0 - p[n + i])) / static_cast<double>(n);
  for (std::size_t i = 0; i < fake.d.size(); ++i) l_l1 += std::abs(b.target.d[i] - fake.d[i]);
  l_l1 /= static_cast<double>(fake.d.size());
  double l = l_cgan + alpha * l_l1;

  if (with_grads) {
    std::vector<double> gp(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] > kEps && p[i] < 1.0 - kEps) gp[i] = 1.0 / (p[i] * static_cast<double>(n));
      if (p[n + i] > kEps && p[n + i] < 1.0 - kEps)
        gp[n + i] = -1.0 / ((1.0 - p[n + i]) * static_cast<double>(n));
    }
    Matrix gecg = d.backward_ecg(gp);
    Matrix gfake(n, t);
    const double inv_nt = 1.0 / static_cast<double>(fake.d.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        double diff = fake(i, j) - b.target(i, j);
        double sgn = (diff > 0.0) ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        gfake(i, j) = gecg(n + i, j) + alpha * sgn * inv_nt;
      }
    g.backward(gfake);
  }
  return l;
}

TrainFusionResult train_fusion(const Batch& train_set, const Batch& val_set, Generator& g,
                               Discriminator& d, const FusionConfig& cfg) {
  if (train_set.size() == 0 || val_set.size() == 0)
    throw std::invalid_argument("train_fusion: empty split");

  Rng rng(cfg.seed);
  auto g_ps = g.params();
  auto d_ps = d.params();
  nn::Adam opt_g(g_ps, cfg.lr_g);
  nn::Adam opt_d(d_ps, cfg.lr_d);

  auto zero_all = [&] {
    for (auto* p : g_ps) p->zero_grad();
    for (auto* p : d_ps) p->zero_grad();
  };

  TrainFusionResult res;
  std::vector<double> best_g = nn::flatten_params(g_ps);
  res.best_val_l1 = l1_loss(val_set, g, /*train=*/false);
  res.log.push_back({0, 0.0, 0.0, res.best_val_l1});

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch, train_set.size()));

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !res.diverged; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double sum_d = 0.0, sum_g = 0.0;
    std::size_t n_steps = 0;

    for (std::size_t lo = 0; lo + batch <= train_set.size() || (lo == 0 && batch > train_set.size());
         lo += batch) {
      std::size_t hi = std::min(lo + batch, train_set.size());
      Batch b{take_rows(train_set.radar, order, lo, hi), take_rows(train_set.imu, order, lo, hi),
              take_rows(train_set.target, order, lo, hi)};

      // D ascends L; Adam minimizes, so negate its grads.
      zero_all();
      double ld = total_loss(b, g, d, cfg.alpha, /*train=*/true, /*with_grads=*/true);
      for (auto* p : d_ps)
        for (double& gr : p->g.d) gr = -gr;
      opt_d.step();

      // G descends L on a fresh forward.
      zero_all();
      double lg = total_loss(b, g, d, cfg.alpha, /*train=*/true, /*with_grads=*/true);
      opt_g.step();

      if (!std::isfinite(ld) || !std::isfinite(lg)) {
        res.diverged = true;
        break;
      }
      sum_d += ld;
      sum_g += lg;
      ++n_steps;
    }
    if (res.diverged) break;

    double val = l1_loss(val_set, g, /*train=*/false);
    res.log.push_back({epoch, sum_d / static_cast<double>(std::max<std::size_t>(1, n_steps)),
                       sum_g / static_cast<double>(std::max<std::size_t>(1, n_steps)), val});
    if (std::isfinite(val) && val < res.best_val_l1) {
      res.best_val_l1 = val;
      res.best_epoch = epoch;
      best_g = nn::flatten_params(g_ps);
    }
  }

  nn::unflatten_params(best_g, g_ps);
  return res;
}

void save_fusion_checkpoint(const std::string& path, Generator& g, Discriminator& d,
                            const FusionConfig& cfg, const TrainFusionResult& log) {
  Archive ar;
  std::vector<double> gt = nn::flatten_params(g.params());
  ar.put_f64("g.theta", {gt.size()}, gt);
  std::vector<double> dt = nn::flatten_params(d.params());
  ar.put_f64("d.theta", {dt.size()}, dt);
  std::vector<double> ep, ld, lg, vl;
  for (const auto& e : log.log) {
    ep.push_back(static_cast<double>(e.epoch));
    ld.push_back(e.loss_d);
    lg.push_back(e.loss_g);
    vl.push_back(e.val_l1);
  }
  ar.put_f64("log.epoch", {ep.size()}, ep);
  ar.put_f64("log.loss_d", {ld.size()}, ld);
  ar.put_f64("log.loss_g", {lg.size()}, lg);
  ar.put_f64("log.val_l1", {vl.size()}, vl);
  ar.meta["config"] = {{"alpha", cfg.alpha},       {"batch", cfg.batch},
                       {"window_t", cfg.window_t}, {"dropout", cfg.dropout},
                       {"lr_g", cfg.lr_g},         {"lr_d", cfg.lr_d},
                       {"epochs", cfg.epochs},     {"seed", cfg.seed},
                       {"modality", to_string(cfg.modality)},
                       {"enc_c1", cfg.enc_c1},     {"enc_c2", cfg.enc_c2}};
  ar.meta["best_val_l1"] = log.best_val_l1;
  ar.meta["best_epoch"] = log.best_epoch;
  ar.save(path);
}

void load_fusion_checkpoint(const std::string& path, Generator& g, Discriminator& d) {
  Archive ar = Archive::load(path);
  auto g_ps = g.params();
  auto d_ps = d.params();
  nn::unflatten_params(ar.f64("g.theta"), g_ps);
  nn::unflatten_params(ar.f64("d.theta"), d_ps);
}

}  // namespace merit::fusion
