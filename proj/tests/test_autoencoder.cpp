#include <gtest/gtest.h>

#include <cmath>

#include "sindyae/autoencoder.hpp"
#include "test_support.hpp"

namespace sindyae {
namespace {

using testing::random_autoencoder;
using testing::random_matrix;
using testing::random_row;
using testing::relative_error;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Straight-line reimplementation of the layer recursion, one scalar at a time.
RowVector naive_forward(const Network& net, const RowVector& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& layer = net.layers[j];
    std::vector<double> l(static_cast<std::size_t>(layer.weights.cols()));
    for (Eigen::Index o = 0; o < layer.weights.cols(); ++o) {
      double acc = layer.bias(o);
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
        acc += a[static_cast<std::size_t>(i)] * layer.weights(i, o);
      l[static_cast<std::size_t>(o)] = acc;
    }
    if (j + 1 < net.layers.size())
      for (auto& v : l) v = sigmoid(v);
    a = std::move(l);
  }
  RowVector out(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) out(static_cast<Eigen::Index>(i)) = a[i];
  return out;
}

TEST(Encode, SingleLayerIsLinear) {
  RngStream rng(1);
  NetworkParams p = random_autoencoder(5, {}, 3, rng);
  const RowVector x = random_row(5, rng);
  const RowVector expected = x * p.encoder.layers[0].weights + p.encoder.layers[0].bias;
  EXPECT_LT((encode(x, p).output - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Encode, ZeroWeightsGiveBias) {
  NetworkParams p = make_autoencoder(4, {3}, 2, {3});
  p.encoder.layers.back().bias << 0.5, -1.5;
  RngStream rng(2);
  const RowVector z = encode(random_row(4, rng), p).output;
  EXPECT_DOUBLE_EQ(z(0), 0.5);
  EXPECT_DOUBLE_EQ(z(1), -1.5);
}

TEST(Encode, MatchesNaiveRecursion) {
  RngStream rng(3);
  NetworkParams p = random_autoencoder(8, {4}, 2, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const RowVector x = random_row(8, rng, 2.0);
    EXPECT_LT((encode(x, p).output - naive_forward(p.encoder, x)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Encode, RejectsNonFiniteInput) {
  RngStream rng(4);
  NetworkParams p = random_autoencoder(3, {2}, 1, rng);
  RowVector x = random_row(3, rng);
  x(1) = std::nan("");
  EXPECT_THROW(encode(x, p), std::invalid_argument);
  EXPECT_THROW(encode(random_row(4, rng), p), DimensionError);
}

TEST(Decode, ZeroWeightsGiveBiasAndIdentityPassesThrough) {
  NetworkParams p = make_autoencoder(2, {}, 2, {});
  p.decoder.layers[0].bias << 0.25, 0.75;
  RowVector z(2);
  z << 3.0, -4.0;
  EXPECT_DOUBLE_EQ(decode(z, p).output(0), 0.25);
  p.decoder.layers[0].weights = Matrix::Identity(2, 2);
  p.decoder.layers[0].bias.setZero();
  EXPECT_EQ(decode(z, p).output, z);
}

TEST(PropagateDz, ZeroVelocityAndLinearEncoder) {
  RngStream rng(5);
  NetworkParams p = random_autoencoder(6, {5, 4}, 3, rng);
  const RowVector x = random_row(6, rng);
  EXPECT_EQ(propagate_dz(x, RowVector::Zero(6), p).cwiseAbs().maxCoeff(), 0.0);

  NetworkParams lin = random_autoencoder(6, {}, 3, rng);
  const RowVector dx = random_row(6, rng);
  EXPECT_LT((propagate_dz(x, dx, lin) - dx * lin.encoder.layers[0].weights).cwiseAbs().maxCoeff(),
            1e-15);
  const RowVector ddx = random_row(6, rng);
  const auto second = propagate_ddz(x, dx, ddx, lin);
  EXPECT_LT((second.ddz - ddx * lin.encoder.layers[0].weights).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PropagateDz, LinearInVelocity) {
  RngStream rng(6);
  NetworkParams p = random_autoencoder(7, {6, 5}, 3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const RowVector x = random_row(7, rng);
    const RowVector v1 = random_row(7, rng);
    const RowVector v2 = random_row(7, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const RowVector lhs = propagate_dz(x, a * v1 + b * v2, p);
    const RowVector rhs = a * propagate_dz(x, v1, p) + b * propagate_dz(x, v2, p);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PropagateDdz, ZeroDerivativesGiveZero) {
  RngStream rng(7);
  NetworkParams p = random_autoencoder(5, {4}, 2, rng);
  const auto r = propagate_ddz(random_row(5, rng), RowVector::Zero(5), RowVector::Zero(5), p);
  EXPECT_EQ(r.dz.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.ddz.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PropagateDdz, ShapeMismatchThrows) {
  RngStream rng(8);
  NetworkParams p = random_autoencoder(5, {4}, 2, rng);
  EXPECT_THROW(propagate_dz(random_row(5, rng), random_row(4, rng), p), DimensionError);
  EXPECT_THROW(propagate_ddz(random_row(5, rng), random_row(5, rng), random_row(3, rng), p),
               DimensionError);
}

LossComponents recompute_components(const BatchView& batch, const NetworkParams& p, const Matrix& xi,
                                    const Matrix& mask, const Library& lib, const LossWeights& w) {
  // Sample-by-sample recomputation through the single-sample API.
  const bool second = lib.spec().model_order == 2;
  const Matrix masked = mask.cwiseProduct(xi);
  LossComponents c;
  const auto m = static_cast<double>(batch.x.rows());
  for (Eigen::Index i = 0; i < batch.x.rows(); ++i) {
    const RowVector x = batch.x.row(i);
    const RowVector z = encode(x, p).output;
    const RowVector xhat = decode(z, p).output;
    c.recon += (x - xhat).squaredNorm() / m;
    RowVector inputs, latent_target, data_target;
    if (second) {
      const auto d = propagate_ddz(x, batch.dx.row(i), batch.ddx->row(i), p);
      inputs.resize(2 * z.size());
      inputs << z, d.dz;
      latent_target = d.ddz;
      data_target = batch.ddx->row(i);
      const RowVector pred = lib.evaluate(inputs) * masked;
      // Second derivative of x(t) = psi(z(t)) along (z, dz, pred).
      const auto dd = propagate_ddz(z, d.dz, pred, NetworkParams{p.decoder, p.encoder});
      c.sindy_x += (data_target - dd.ddz).squaredNorm() / m;
      c.sindy_z += (latent_target - pred).squaredNorm() / m;
    } else {
      inputs = z;
      latent_target = propagate_dz(x, batch.dx.row(i), p);
      data_target = batch.dx.row(i);
      const RowVector pred = lib.evaluate(inputs) * masked;
      const RowVector xpred = propagate_dz(z, pred, NetworkParams{p.decoder, p.encoder});
      c.sindy_x += (data_target - xpred).squaredNorm() / m;
      c.sindy_z += (latent_target - pred).squaredNorm() / m;
    }
  }
  c.reg = masked.cwiseAbs().sum() / static_cast<double>(xi.size());
  c.total = c.recon + w.sindy_x * c.sindy_x + w.sindy_z * c.sindy_z + w.reg * c.reg;
  return c;
}

TEST(LossGradient, KeystoneSmallNetwork) {
  const testing::GradientCase gc{6, 2, {4}, {2, 2, false, 1}, {0.1, 0.01, 1e-3}, 3};
  const auto r = testing::check_loss_gradient(gc, 11);
  EXPECT_LT(r.worst_relative_error, 1e-5);
  EXPECT_EQ(r.masked_nonzero, 0u);
}

TEST(LossGradient, KeystoneSecondOrderWithSine) {
  const testing::GradientCase gc{6, 1, {5, 4}, {1, 3, true, 2}, {0.5, 0.05, 1e-2}, 4};
  const auto r = testing::check_loss_gradient(gc, 12);
  EXPECT_LT(r.worst_relative_error, 1e-5);
  EXPECT_EQ(r.masked_nonzero, 0u);
}

TEST(LossGradient, MaskedEntriesGetExactlyZero) {
  RngStream rng(17);
  NetworkParams p = random_autoencoder(4, {3}, 2, rng);
  const Library lib({2, 2, true, 1});
  const Matrix xi = random_matrix(lib.size(), 2, rng);
  Matrix mask = Matrix::Ones(lib.size(), 2);
  mask(3, 1) = 0.0;
  const Matrix x = random_matrix(5, 4, rng), dx = random_matrix(5, 4, rng);
  Gradients g = Gradients::zeros_like(p, xi);
  loss_gradient({x, dx}, p, xi, mask, lib, {1.0, 1.0, 1.0}, g);
  EXPECT_EQ(g.xi(3, 1), 0.0);
  EXPECT_NE(g.xi(3, 0), 0.0);
}

TEST(LossGradient, ScalarLinearReconstruction) {
  // x_hat = w2 * (w1 * x); recon = mean (x - w1 w2 x)^2
  NetworkParams p = make_autoencoder(1, {}, 1, {});
  p.encoder.layers[0].weights(0, 0) = 0.7;
  p.decoder.layers[0].weights(0, 0) = 1.3;
  Matrix x(2, 1), dx = Matrix::Zero(2, 1);
  x << 1.0, -2.0;
  const Library lib({1, 1, false, 1});
  Matrix xi = Matrix::Zero(2, 1), mask = Matrix::Ones(2, 1);
  Gradients g = Gradients::zeros_like(p, xi);
  loss_gradient({x, dx}, p, xi, mask, lib, {}, g);
  const double w1 = 0.7, w2 = 1.3;
  const double s = (1.0 + 4.0) / 2.0;  // mean x^2
  EXPECT_NEAR(g.encoder.layers[0].weights(0, 0), -2.0 * (1 - w1 * w2) * w2 * s, 1e-14);
  EXPECT_NEAR(g.decoder.layers[0].weights(0, 0), -2.0 * (1 - w1 * w2) * w1 * s, 1e-14);
}

TEST(CompositeLoss, MatchesPerSampleRecomputation) {
  RngStream rng(13);
  for (int order : {1, 2}) {
    NetworkParams p = random_autoencoder(5, {4, 3}, 2, rng);
    const Library lib({2, 2, true, order});
    const Matrix xi = random_matrix(lib.size(), 2, rng);
    Matrix mask = Matrix::Ones(lib.size(), 2);
    mask(1, 0) = 0.0;
    const Matrix x = random_matrix(6, 5, rng), dx = random_matrix(6, 5, rng),
                 ddx = random_matrix(6, 5, rng);
    const BatchView batch{x, dx, order == 2 ? &ddx : nullptr};
    const LossWeights w{0.3, 0.2, 0.1};
    const auto c = composite_loss(batch, p, xi, mask, lib, w);
    const auto r = recompute_components(batch, p, xi, mask, lib, w);
    EXPECT_NEAR(c.recon, r.recon, 1e-12 * std::max(1.0, r.recon));
    EXPECT_NEAR(c.sindy_x, r.sindy_x, 1e-12 * std::max(1.0, r.sindy_x));
    EXPECT_NEAR(c.sindy_z, r.sindy_z, 1e-12 * std::max(1.0, r.sindy_z));
    EXPECT_NEAR(c.reg, r.reg, 1e-14);
    EXPECT_DOUBLE_EQ(c.total, c.recon + w.sindy_x * c.sindy_x + w.sindy_z * c.sindy_z + w.reg * c.reg);
    EXPECT_GE(c.recon, 0.0);
    EXPECT_GE(c.sindy_x, 0.0);
    EXPECT_GE(c.sindy_z, 0.0);
    EXPECT_GE(c.reg, 0.0);
  }
}

TEST(CompositeLoss, ZeroXiGivesZeroRegAndEncoderVelocityLoss) {
  RngStream rng(14);
  NetworkParams p = random_autoencoder(4, {3}, 2, rng);
  const Library lib({2, 2, false, 1});
  const Matrix xi = Matrix::Zero(lib.size(), 2), mask = Matrix::Ones(lib.size(), 2);
  const Matrix x = random_matrix(5, 4, rng), dx = random_matrix(5, 4, rng);
  const auto c = composite_loss({x, dx}, p, xi, mask, lib, {1, 1, 1});
  EXPECT_EQ(c.reg, 0.0);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < 5; ++i)
    expected += propagate_dz(x.row(i), dx.row(i), p).squaredNorm() / 5.0;
  EXPECT_NEAR(c.sindy_z, expected, 1e-13);
}

TEST(CompositeLoss, ExactModelOfLinearSystemHasZeroLoss) {
  // x = z (identity autoencoder), dz = z A encoded in Xi over the linear library.
  NetworkParams p = make_autoencoder(2, {}, 2, {});
  p.encoder.layers[0].weights = Matrix::Identity(2, 2);
  p.decoder.layers[0].weights = Matrix::Identity(2, 2);
  Matrix a(2, 2);
  a << -0.5, 1.0, -1.0, -0.5;
  const Library lib({2, 1, false, 1});
  Matrix xi = Matrix::Zero(3, 2);
  xi.bottomRows(2) = a;
  RngStream rng(15);
  const Matrix x = random_matrix(10, 2, rng);
  const Matrix dx = x * a;
  const auto c = composite_loss({x, dx}, p, xi, Matrix::Ones(3, 2), lib, {1, 1, 0});
  EXPECT_LT(c.recon, 1e-30);
  EXPECT_LT(c.sindy_z, 1e-28);
  EXPECT_LT(c.sindy_x, 1e-28);
}

TEST(CompositeLoss, SecondOrderRequiresDdx) {
  RngStream rng(16);
  NetworkParams p = random_autoencoder(3, {2}, 1, rng);
  const Library lib({1, 1, false, 2});
  const Matrix x = random_matrix(2, 3, rng), dx = random_matrix(2, 3, rng);
  EXPECT_THROW(composite_loss({x, dx}, p, Matrix::Ones(3, 1), Matrix::Ones(3, 1), lib, {}),
               std::invalid_argument);
}

}  // namespace
}  // namespace sindyae
