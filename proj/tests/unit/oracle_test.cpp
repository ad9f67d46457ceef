#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dtp/errors.hpp"
#include "dtp/oracle.hpp"
#include "reference.hpp"

namespace {

using dtp::Activation;
using dtp::Matrix;
using dtp::Network;
using dtp::Vector;
namespace oracle = dtp::oracle;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Network random_net(ref::Stream& s, int d, int layers, double slope, bool bias = false) {
  std::vector<Matrix> w, omega;
  for (int l = 0; l < layers; ++l) {
    w.push_back(s.orthogonal(d) + 0.3 * s.mat(d, d));
    if (bias) {
      w.back().conservativeResize(d, d + 1);
      w.back().col(d) = s.vec(d, 0.2);
    }
    omega.push_back(w.back());
  }
  return Network(w, omega, slope == 1.0 ? Activation::identity() : Activation::leaky_relu(slope),
                 bias);
}

std::vector<Matrix> encoders(const Network& net) {
  std::vector<Matrix> w;
  for (int l = 1; l <= net.layer_count(); ++l) w.push_back(net.encoder(l));
  return w;
}

TEST(Backprop, ZeroAtTheOptimum) {
  ref::Stream s(1);
  const Network net = random_net(s, 3, 2, 0.1);
  const auto trace = dtp::forward(net, s.vec(3));
  const auto g = oracle::backprop_gradients(net, trace, trace.output());
  for (const Vector& v : g.activations) EXPECT_EQ(v.norm(), 0.0);
  for (const Matrix& m : g.weights) EXPECT_EQ(m.norm(), 0.0);
}

TEST(Backprop, SingleLinearLayerClosedForm) {
  ref::Stream s(2);
  const Network net = random_net(s, 4, 1, 1.0);
  const Vector x = s.vec(4), y = s.vec(4);
  const auto trace = dtp::forward(net, x);
  const auto g = oracle::backprop_gradients(net, trace, y);
  EXPECT_LT((g.weights[0] - (trace.output() - y) * x.transpose()).norm(), 1e-13);
}

TEST(Backprop, MatchesReferenceFiniteDifferences) {
  ref::Stream s(3);
  for (int trial = 0; trial < 20; ++trial) {
    const bool bias = s.coin();
    const double slope = s.coin() ? 1.0 : 0.2;
    const Network net = random_net(s, s.integer(2, 5), s.integer(1, 4), slope, bias);
    const int d = net.width();
    const Vector x = s.vec(d), y = s.vec(d);
    const auto g = oracle::backprop_gradients(net, dtp::forward(net, x), y);
    for (int l = 1; l <= net.layer_count(); ++l) {
      const Matrix fd = ref::fd_weight_gradient(encoders(net), slope, bias, l, x, y);
      const Matrix& an = g.weights[static_cast<std::size_t>(l - 1)];
      EXPECT_LT((an - fd).norm(), 1e-6 * (1 + fd.norm()));
    }
  }
}

TEST(Backprop, LibraryFiniteDifferenceAgrees) {
  ref::Stream s(4);
  const Network net = random_net(s, 3, 3, 0.1, true);
  const Vector x = s.vec(3), y = s.vec(3);
  const auto g = oracle::backprop_gradients(net, dtp::forward(net, x), y);
  for (int l = 1; l <= 3; ++l) {
    const Matrix fd = oracle::finite_difference_weight_gradient(net, l, x, y);
    EXPECT_LT((g.weights[static_cast<std::size_t>(l - 1)] - fd).norm(), 1e-6 * (1 + fd.norm()));
  }
}

TEST(Jacobians, IdentityNetwork) {
  const Matrix I = Matrix::Identity(3, 3);
  const Network net({I, I}, {I, I}, Activation::identity());
  const auto stack = oracle::layer_jacobians(net, dtp::forward(net, vec({1, 2, 3})));
  for (const Matrix& j : stack.to_output) EXPECT_EQ(j, I);
}

TEST(Jacobians, ScalarChain) {
  const Network net({Matrix::Constant(1, 1, 2), Matrix::Constant(1, 1, 3)},
                    {Matrix::Constant(1, 1, 1), Matrix::Constant(1, 1, 1)}, Activation::identity());
  const auto stack = oracle::layer_jacobians(net, dtp::forward(net, vec({1})));
  EXPECT_EQ(stack.to_output[0](0, 0), 6.0);
  EXPECT_EQ(stack.to_output[1](0, 0), 3.0);
  EXPECT_EQ(stack.to_output[2](0, 0), 1.0);
}

TEST(Jacobians, MatchLoopReferenceAndChainRule) {
  ref::Stream s(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = random_net(s, 4, 3, 0.15, s.coin());
    const Vector x = s.vec(4);
    const auto trace = dtp::forward(net, x);
    const auto stack = oracle::layer_jacobians(net, trace);
    std::vector<Vector> h(trace.activations.begin(), trace.activations.end());
    const auto expected = ref::output_jacobians(encoders(net), 0.15, h);
    for (std::size_t l = 0; l < expected.size(); ++l) {
      EXPECT_LT((stack.to_output[l] - expected[l]).cwiseAbs().maxCoeff(), 1e-10);
    }
    for (int l = 0; l < 3; ++l) {
      const Matrix chained = stack.to_output[static_cast<std::size_t>(l + 1)] *
                             stack.per_layer[static_cast<std::size_t>(l)];
      EXPECT_LT((stack.to_output[static_cast<std::size_t>(l)] - chained).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Jacobians, InputJacobianMatchesFiniteDifference) {
  ref::Stream s(6);
  const Network net = random_net(s, 4, 3, 0.3);
  const Vector x = s.vec(4);
  const auto stack = oracle::layer_jacobians(net, dtp::forward(net, x));
  const Matrix fd = oracle::finite_difference_jacobian(
      [&](const Vector& p) { return Vector(dtp::forward(net, p).output()); }, x);
  EXPECT_LT((stack.to_output[0] - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FiniteDifference, QuadraticGradient) {
  const auto g = oracle::finite_difference_gradient(
      [](const Vector& v) { return v.squaredNorm() + 3 * v(0); }, vec({1, -2}));
  EXPECT_NEAR(g(0), 5.0, 1e-8);
  EXPECT_NEAR(g(1), -4.0, 1e-8);
}

TEST(GaussNewton, IdentityJacobianIsTheSgdStep) {
  const Vector g = vec({1, -3});
  EXPECT_TRUE(oracle::gauss_newton_direction(Matrix::Identity(2, 2), g, 0.1).isApprox(-0.1 * g));
}

TEST(GaussNewton, ScalarInversion) {
  EXPECT_NEAR(oracle::gauss_newton_direction(Matrix::Constant(1, 1, 2), vec({3}), 0.5)(0),
              -0.5 * 3 / 4, 1e-15);
}

TEST(GaussNewton, MatchesLuReference) {
  ref::Stream s(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix j = s.orthogonal(5) + 0.3 * s.mat(5, 5);
    const Vector g = s.vec(5);
    const Vector expected = ref::gauss_newton(j, g, 1e-3);
    const Vector grad_h = j.transpose() * g;
    EXPECT_LT((oracle::gauss_newton_direction(j, grad_h, 1e-3) - expected).norm(), 1e-10 * expected.norm());
  }
}

TEST(GaussNewton, SingularSystemThrowsAndDampingRecovers) {
  Matrix j = Matrix::Zero(2, 2);
  j(0, 0) = 1;
  try {
    oracle::gauss_newton_direction(j, vec({1, 1}), 1.0);
    FAIL() << "expected singular system";
  } catch (const dtp::SingularSystemError& e) {
    EXPECT_NEAR(e.smallest_eigenvalue(), 0.0, 1e-12);
  }
  EXPECT_TRUE(oracle::gauss_newton_direction(j, vec({1, 1}), 1.0, 1.0).allFinite());
}

TEST(GaussNewton, ExactInverseTargetsAreTheGaussNewtonStep) {
  // On a linear net h_L = J_l h_l, so exact-inverse targets give
  // tau_l - h_l = J_l^{-1}(tau_L - h_L) = (J^T J)^{-1}(-beta dL/dh_l).
  ref::Stream s(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_net(s, 4, 3, 1.0);
    const Vector x = s.vec(4), y = s.vec(4);
    const auto trace = dtp::forward(net, x);
    const double beta = 1e-3;
    const Vector tau_L = trace.output() - beta * (trace.output() - y);
    const auto targets = oracle::exact_inverse_targets(net, tau_L);
    const auto stack = oracle::layer_jacobians(net, trace);
    const auto grads = oracle::backprop_gradients(net, trace, y);
    for (int l = 0; l < 3; ++l) {
      const std::size_t i = static_cast<std::size_t>(l);
      const Vector gn = ref::gauss_newton(stack.to_output[i], grads.activations[3], beta);
      const Vector change = targets[i] - trace.h(l);
      EXPECT_GT(ref::cosine(change, gn), 1 - 1e-9);
      EXPECT_LT((change - gn).norm(), 1e-6 * gn.norm());
    }
  }
}

TEST(GaussNewton, PulledBackGradientIsTheOutputGap) {
  ref::Stream s(9);
  const Network net = random_net(s, 4, 3, 0.2);
  const Vector x = s.vec(4), y = s.vec(4);
  const auto trace = dtp::forward(net, x);
  const double beta = 0.01;
  const auto stack = oracle::layer_jacobians(net, trace);
  const auto grads = oracle::backprop_gradients(net, trace, y);
  const Vector gap = -beta * (trace.output() - y);
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_LT((-beta * grads.activations[l] - stack.to_output[l].transpose() * gap).norm(), 1e-12);
  }
}

TEST(SgdEffect, IdentityLeavesTheGap) {
  EXPECT_EQ(oracle::sgd_output_effect(Matrix::Identity(2, 2), vec({1, 2})), vec({1, 2}));
}

TEST(SgdEffect, DiagonalDistortion) {
  Matrix j = Matrix::Zero(2, 2);
  j(0, 0) = 1;
  j(1, 1) = 10;
  EXPECT_EQ(oracle::sgd_output_effect(j, vec({1, 1})), vec({1, 100}));
}

TEST(SgdEffect, MisalignedWhereDtpIsAligned) {
  ref::Stream s(10);
  std::vector<Matrix> w;
  for (int l = 0; l < 3; ++l) {
    Matrix m = s.orthogonal(4);
    m.col(0) *= 20.0;  // anisotropic gains
    w.push_back(m);
  }
  const Network net(w, w, Activation::identity());
  const Vector x = s.vec(4);
  const auto trace = dtp::forward(net, x);
  const Vector gap = s.vec(4, 0.01);
  const auto targets = oracle::exact_inverse_targets(net, trace.output() + gap);
  const auto stack = oracle::layer_jacobians(net, trace);
  const Vector dtp_effect = stack.to_output[0] * (targets[0] - trace.h(0));
  const Vector sgd_effect = oracle::sgd_output_effect(stack.to_output[0], gap);
  EXPECT_GT(ref::cosine(dtp_effect, gap), 0.999);
  EXPECT_LT(ref::cosine(sgd_effect, gap), 0.999);
}

TEST(ExactInverse, DiagonalExample) {
  Matrix w = Matrix::Zero(2, 2);
  w(0, 0) = 2;
  w(1, 1) = 4;
  const Network inv = oracle::exact_inverse_decoders(Network({w}, {w}, Activation::identity()));
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 0.5;
  expected(1, 1) = 0.25;
  EXPECT_LT((inv.decoder(1) - expected).norm(), 1e-15);
}

TEST(ExactInverse, DecodersInvertEncoders) {
  ref::Stream s(11);
  for (bool bias : {false, true}) {
    const Network net = oracle::exact_inverse_decoders(random_net(s, 5, 3, 1.0, bias));
    for (int l = 1; l <= 3; ++l) {
      const Vector u = s.vec(5);
      EXPECT_LT((dtp::layer_decode(net, l, dtp::layer_encode(net, l, u)) - u).norm(), 1e-8);
    }
  }
}

TEST(ExactInverse, RejectsNonlinearOrSingular) {
  ref::Stream s(12);
  EXPECT_THROW(oracle::exact_inverse_decoders(random_net(s, 3, 1, 0.1)), std::invalid_argument);
  const Matrix z = Matrix::Zero(2, 2);
  EXPECT_THROW(oracle::exact_inverse_decoders(Network({z}, {z}, Activation::identity())),
               dtp::SingularSystemError);
}

TEST(ExactInverse, LeakyLayerMapInverts) {
  ref::Stream s(13);
  const Network net = random_net(s, 4, 2, 0.2, true);
  for (int l = 1; l <= 2; ++l) {
    const Vector u = s.vec(4);
    const Vector back = oracle::exact_inverse_map(net, l)(dtp::layer_encode(net, l, u));
    EXPECT_LT((back - u).norm(), 1e-9);
  }
}

TEST(ExactInverse, TargetsReproduceTheOutputTarget) {
  ref::Stream s(14);
  const Network net = random_net(s, 4, 3, 0.3);
  const Vector tau = s.vec(4);
  const auto targets = oracle::exact_inverse_targets(net, tau);
  EXPECT_LT((dtp::forward(net, targets[0]).output() - tau).norm(), 1e-6);
}

TEST(Norms, SpectralAndCondition) {
  ref::Stream s(15);
  const Matrix m = s.mat(5, 5);
  EXPECT_NEAR(oracle::spectral_norm(m), ref::spectral_norm(m), 1e-12);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 0.5;
  EXPECT_NEAR(oracle::condition_number(d), 8.0, 1e-12);
  EXPECT_TRUE(std::isinf(oracle::condition_number(Matrix::Zero(2, 2))));
}

TEST(DensePseudoInverse, MatchesReference) {
  ref::Stream s(16);
  const Network net = random_net(s, 3, 2, 0.2, true);
  const auto trace = dtp::forward(net, s.vec(3));
  const Vector tau = trace.h(2) + s.vec(3);
  const Matrix expected = ref::dense_min_norm_delta(tau - trace.h(2), ref::pre(trace.h(1), 0.2, true));
  EXPECT_LT((oracle::dense_pseudo_inverse_update(trace, 2, tau) - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Cosine, ZeroVectorGivesZero) {
  EXPECT_EQ(oracle::cosine(Vector::Zero(2), vec({1, 0})), 0.0);
  EXPECT_NEAR(oracle::cosine(vec({1, 1}), vec({2, 2})), 1.0, 1e-15);
}

}  // namespace
