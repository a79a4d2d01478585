#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "merit/core/rng.hpp"
#include "merit/fusion.hpp"

using namespace merit;
using fusion::Batch;
using fusion::Discriminator;
using fusion::FusionConfig;
using fusion::Generator;

namespace {

FusionConfig tiny_cfg(std::size_t t = 16) {
  FusionConfig c;
  c.window_t = t;
  c.enc_c1 = 3;
  c.enc_c2 = 4;
  c.dropout = 0.0;
  c.seed = 1;
  return c;
}

Batch random_batch(std::size_t n, std::size_t cr, std::size_t ci, std::size_t t, Rng& rng) {
  Batch b;
  b.radar = Matrix(n, cr * t);
  b.imu = Matrix(n, ci * t);
  b.target = Matrix(n, t);
  for (double& v : b.radar.d) v = rng.normal();
  for (double& v : b.imu.d) v = rng.normal();
  for (double& v : b.target.d) v = 0.5 + 0.4 * std::sin(rng.normal());
  return b;
}

}  // namespace

TEST_CASE("generator output range, shape, and eval determinism") {
  Rng rng(50);
  FusionConfig cfg = tiny_cfg();
  Generator g(2, 3, cfg, rng);
  Batch b = random_batch(4, 2, 3, cfg.window_t, rng);

  Matrix y1 = g.forward(b.radar, b.imu, false);
  CHECK(y1.rows == 4);
  CHECK(y1.cols == cfg.window_t);
  for (double v : y1.d) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  Matrix y2 = g.forward(b.radar, b.imu, false);
  for (std::size_t i = 0; i < y1.d.size(); ++i) CHECK(y1.d[i] == y2.d[i]);

  CHECK_THROWS(Generator(0, 3, cfg, rng));
  FusionConfig bad = cfg;
  bad.window_t = 10;
  CHECK_THROWS(Generator(2, 3, bad, rng));
}

TEST_CASE("modality gating ignores the dropped stream") {
  Rng rng(51);
  FusionConfig cfg = tiny_cfg();
  cfg.modality = fusion::Modality::kRadarOnly;
  Generator g(2, 3, cfg, rng);
  Batch b = random_batch(3, 2, 3, cfg.window_t, rng);
  Matrix y1 = g.forward(b.radar, b.imu, false);
  for (double& v : b.imu.d) v = rng.normal();  // change IMU entirely
  Matrix y2 = g.forward(b.radar, b.imu, false);
  for (std::size_t i = 0; i < y1.d.size(); ++i)
    CHECK(y1.d[i] == doctest::Approx(y2.d[i]).epsilon(1e-12));

  cfg.modality = fusion::Modality::kImuOnly;
  Rng rng2(51);
  Generator gi(2, 3, cfg, rng2);
  Matrix z1 = gi.forward(b.radar, b.imu, false);
  for (double& v : b.radar.d) v = rng.normal();
  Matrix z2 = gi.forward(b.radar, b.imu, false);
  for (std::size_t i = 0; i < z1.d.size(); ++i)
    CHECK(z1.d[i] == doctest::Approx(z2.d[i]).epsilon(1e-12));
}

TEST_CASE("discriminator output in (0,1), deterministic, ECG-sensitive") {
  Rng rng(52);
  FusionConfig cfg = tiny_cfg();
  Discriminator d(2, 3, cfg, rng);
  Batch b = random_batch(4, 2, 3, cfg.window_t, rng);

  std::vector<double> p1 = d.forward(b.radar, b.imu, b.target, false);
  REQUIRE(p1.size() == 4);
  for (double p : p1) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  std::vector<double> p2 = d.forward(b.radar, b.imu, b.target, false);
  CHECK(p1 == p2);

  Matrix other = b.target;
  for (double& v : other.d) v = 1.0 - v;
  std::vector<double> p3 = d.forward(b.radar, b.imu, other, false);
  bool changed = false;
  for (std::size_t i = 0; i < p1.size(); ++i)
    if (std::abs(p1[i] - p3[i]) > 1e-9) changed = true;
  CHECK(changed);
}

TEST_CASE("cgan loss equals -2 log 2 when the discriminator is constant 1/2") {
  Rng rng(53);
  FusionConfig cfg = tiny_cfg();
  Generator g(2, 2, cfg, rng);
  Discriminator d(2, 2, cfg, rng);
  // Zero every discriminator parameter: the final sigmoid sees 0 -> D == 0.5.
  for (nn::Param* p : d.params())
    for (double& v : p->w.d) v = 0.0;
  Batch b = random_batch(5, 2, 2, cfg.window_t, rng);
  double l = fusion::cgan_loss(b, g, d);
  CHECK(l == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-9));
  CHECK(l == doctest::Approx(-1.3862943611).epsilon(1e-9));
}

TEST_CASE("l1 loss arithmetic") {
  Rng rng(54);
  FusionConfig cfg = tiny_cfg();
  Generator g(1, 1, cfg, rng);
  Batch b = random_batch(2, 1, 1, cfg.window_t, rng);

  Matrix pred = g.forward(b.radar, b.imu, false);
  double want = 0.0;
  for (std::size_t i = 0; i < pred.d.size(); ++i) want += std::abs(b.target.d[i] - pred.d[i]);
  want /= double(pred.d.size());
  CHECK(fusion::l1_loss(b, g) == doctest::Approx(want).epsilon(1e-12));

  // Zero loss when the target equals the generator output exactly.
  Batch b2 = b;
  b2.target = pred;
  CHECK(fusion::l1_loss(b2, g) == doctest::Approx(0.0).scale(1.0));

  // total = cgan + alpha * l1 (two-term arithmetic oracle)
  Rng rng2(55);
  Discriminator d(1, 1, cfg, rng2);
  double c = fusion::cgan_loss(b, g, d);
  double l1 = fusion::l1_loss(b, g);
  CHECK(fusion::total_loss(b, g, d, 7.0) == doctest::Approx(c + 7.0 * l1).epsilon(1e-9));
  CHECK_THROWS(fusion::total_loss(b, g, d, -1.0));
}

TEST_CASE("total loss gradients match finite differences on tiny nets") {
  Rng rng(56);
  FusionConfig cfg = tiny_cfg(8);
  cfg.enc_c1 = 2;
  cfg.enc_c2 = 2;
  Generator g(1, 1, cfg, rng);
  Discriminator d(1, 1, cfg, rng);
  Batch b = random_batch(2, 1, 1, cfg.window_t, rng);

  // Several parameters start at exactly zero, which places pre-activations on
  // a LeakyReLU kink where central differences average the two slopes. Move
  // to a generic differentiable point before comparing gradients.
  for (nn::Param* p : g.params())
    for (double& w : p->w.d) w += rng.uniform(-0.05, 0.05);
  for (nn::Param* p : d.params())
    for (double& w : p->w.d) w += rng.uniform(-0.05, 0.05);

  for (nn::Param* p : g.params()) p->zero_grad();
  for (nn::Param* p : d.params()) p->zero_grad();
  fusion::total_loss(b, g, d, 3.0, true, true);

  const double h = 1e-5;
  auto fd_check = [&](std::vector<nn::Param*> ps) {
    for (nn::Param* p : ps)
      for (std::size_t i = 0; i < p->w.d.size(); ++i) {
        double keep = p->w.d[i];
        p->w.d[i] = keep + h;
        double lp = fusion::total_loss(b, g, d, 3.0, true);
        p->w.d[i] = keep - h;
        double lm = fusion::total_loss(b, g, d, 3.0, true);
        p->w.d[i] = keep;
        double fd = (lp - lm) / (2.0 * h);
        double an = p->g.d[i];
        double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        CHECK(std::abs(fd - an) / denom < 1e-3);
      }
  };
  fd_check(g.params());
  fd_check(d.params());
}

TEST_CASE("zero-epoch training returns the initial generator") {
  Rng rng(57);
  FusionConfig cfg = tiny_cfg();
  cfg.epochs = 0;
  Generator g(1, 1, cfg, rng);
  Discriminator d(1, 1, cfg, rng);
  std::vector<double> before = nn::flatten_params(g.params());
  Batch tr = random_batch(6, 1, 1, cfg.window_t, rng);
  Batch va = random_batch(3, 1, 1, cfg.window_t, rng);
  fusion::TrainFusionResult r = fusion::train_fusion(tr, va, g, d, cfg);
  // The log always carries the pre-training validation baseline at epoch 0.
  CHECK(r.log.size() == 1);
  CHECK(r.log[0].epoch == 0);
  CHECK(nn::flatten_params(g.params()) == before);
}

TEST_CASE("a few epochs reduce validation L1 on a learnable toy problem") {
  Rng rng(58);
  FusionConfig cfg = tiny_cfg();
  cfg.epochs = 30;
  cfg.batch = 8;
  cfg.lr_g = 1e-3;
  cfg.lr_d = 1e-4;
  cfg.alpha = 20.0;
  Generator g(1, 1, cfg, rng);
  Discriminator d(1, 1, cfg, rng);

  // Target is a fixed smooth function of the radar channel.
  auto make = [&](std::size_t n, Rng& r) {
    Batch b = random_batch(n, 1, 1, cfg.window_t, r);
    for (std::size_t i = 0; i < b.target.rows; ++i)
      for (std::size_t t = 0; t < b.target.cols; ++t)
        b.target(i, t) = 0.5 + 0.45 * std::tanh(b.radar(i, t));
    return b;
  };
  Rng gr(59);
  Batch tr = make(48, gr), va = make(16, gr);

  double l0 = fusion::l1_loss(va, g);
  fusion::TrainFusionResult r = fusion::train_fusion(tr, va, g, d, cfg);
  CHECK(!r.diverged);
  CHECK(r.log.size() == 31);  // epoch-0 baseline plus one entry per epoch
  CHECK(r.best_val_l1 < l0);
}

TEST_CASE("fusion checkpoint round trip") {
  Rng rng(60);
  FusionConfig cfg = tiny_cfg();
  Generator g(2, 2, cfg, rng);
  Discriminator d(2, 2, cfg, rng);
  std::string path = (std::filesystem::temp_directory_path() / "fusion_ckpt_test.bin").string();
  fusion::TrainFusionResult log;
  fusion::save_fusion_checkpoint(path, g, d, cfg, log);

  Rng rng2(61);
  Generator g2(2, 2, cfg, rng2);
  Discriminator d2(2, 2, cfg, rng2);
  fusion::load_fusion_checkpoint(path, g2, d2);
  CHECK(nn::flatten_params(g.params()) == nn::flatten_params(g2.params()));
  CHECK(nn::flatten_params(d.params()) == nn::flatten_params(d2.params()));
  std::filesystem::remove(path);
}
