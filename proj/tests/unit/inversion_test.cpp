#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dtp/errors.hpp"
#include "dtp/inversion.hpp"
#include "reference.hpp"

namespace {

using dtp::InversionKind;
using dtp::LayerMap;
using dtp::Matrix;
using dtp::Network;
using dtp::Vector;

Vector scalar(double x) { return Vector::Constant(1, x); }

LayerMap times(double k) {
  return [k](const Vector& v) { return Vector(k * v); };
}

LayerMap linear(const Matrix& m) {
  return [m](const Vector& v) { return Vector(m * v); };
}

// W orthogonal and Omega = (I - E) W^T with |E| = alpha, so g(f(u)) - u = -E u.
struct PerturbedLayer {
  Matrix w, omega;
};

PerturbedLayer perturbed(ref::Stream& s, int d, double alpha) {
  const Matrix w = s.orthogonal(d);
  Matrix e = s.mat(d, d);
  e *= alpha / ref::spectral_norm(e);
  return {w, (Matrix::Identity(d, d) - e) * w.transpose()};
}

Network exact_linear_net(ref::Stream& s, int d, int layers) {
  std::vector<Matrix> w, omega;
  for (int l = 0; l < layers; ++l) {
    w.push_back(s.orthogonal(d) + 0.3 * s.mat(d, d));
    omega.push_back(ref::inverse(w.back()));
  }
  return Network(w, omega, dtp::Activation::identity());
}

TEST(SimplePropagation, ScalarChain) {
  const Network net({Matrix::Constant(1, 1, 2), Matrix::Constant(1, 1, 3)},
                    {Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0 / 3)},
                    dtp::Activation::identity());
  const auto t = dtp::propagate_targets_simple(net, scalar(6.6));
  EXPECT_NEAR(t[2](0), 6.6, 0.0);
  EXPECT_NEAR(t[1](0), 2.2, 1e-14);
  EXPECT_NEAR(t[0](0), 1.1, 1e-14);
}

TEST(SimplePropagation, PerfectDecodersInvertTheForwardPass) {
  ref::Stream s(1);
  const Network net = exact_linear_net(s, 4, 3);
  const Vector x = s.vec(4);
  const auto h = ref::forward({net.encoder(1), net.encoder(2), net.encoder(3)}, 1.0, false, x);
  const auto t = dtp::propagate_targets_simple(net, h[3]);
  for (int l = 0; l <= 3; ++l) EXPECT_LT((t[static_cast<std::size_t>(l)] - h[static_cast<std::size_t>(l)]).norm(), 1e-10);
}

TEST(SimplePropagation, ExactDecodersReachTheOutputTarget) {
  ref::Stream s(2);
  const Network net = exact_linear_net(s, 5, 3);
  const Vector tau = s.vec(5);
  const auto t = dtp::propagate_targets_simple(net, tau);
  const auto h = ref::forward({net.encoder(1), net.encoder(2), net.encoder(3)}, 1.0, false, t[0]);
  EXPECT_LT((h[3] - tau).norm(), 1e-8);
}

TEST(InputCorrection, PerfectInverseConvergesInOneIteration) {
  const auto r = dtp::invert_input_correction(times(2), times(0.5), scalar(3.0));
  EXPECT_EQ(r.iterations_used, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.increment_norms[0], 0.0);
  EXPECT_EQ(r.target(0), 1.5);
}

TEST(InputCorrection, ScalarClosedForm) {
  const auto r = dtp::invert_input_correction(times(2), times(0.6), scalar(1.2), 100, 1e-13);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.last_input(0), 1.0, 1e-12);
  EXPECT_NEAR(r.target(0), 0.6, 1e-12);
  EXPECT_NEAR(2 * r.target(0), 1.2, 1e-12);
  // Ratios of increments near the tolerance are dominated by round-off.
  for (std::size_t t = 1; t < r.increment_norms.size() && r.increment_norms[t] > 1e-9; ++t) {
    EXPECT_NEAR(r.increment_norms[t] / r.increment_norms[t - 1], 0.2, 1e-6);
  }
  EXPECT_NEAR(r.estimated_alpha, 0.2, 1e-3);
}

TEST(InputCorrection, PerturbedLayerReachesTheTarget) {
  ref::Stream s(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix w = s.orthogonal(4) + 0.2 * s.mat(4, 4);
    const Matrix omega = ref::inverse(w) + 0.05 * s.mat(4, 4) / 4.0;
    const Vector tau = s.vec(4);
    const double tol = 1e-9;
    const auto r = dtp::invert_input_correction(linear(w), linear(omega), tau, 500, tol);
    ASSERT_TRUE(r.converged);
    EXPECT_LT((ref::matvec(w, r.target) - tau).norm(), 10 * tol);
  }
}

TEST(InputCorrection, RecordsOneNormPerIteration) {
  const auto r = dtp::invert_input_correction(times(2), times(0.6), scalar(1.2), 7, 1e-30);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations_used, 7);
  EXPECT_EQ(r.increment_norms.size(), 7u);
}

TEST(InputCorrection, DivergenceThrowsWithAlphaAtLeastOne) {
  // h(u) = 3.5u gives u <- u + tau - 3.5u, ratio 2.5.
  try {
    dtp::invert_input_correction(times(5), times(0.7), scalar(1.0));
    FAIL() << "expected divergence";
  } catch (const dtp::NonContractiveError& e) {
    EXPECT_GE(e.estimated_alpha(), 1.0);
    EXPECT_EQ(e.layer(), -1);
  }
}

TEST(InputCorrection, RejectsBadLimits) {
  EXPECT_THROW(dtp::invert_input_correction(times(2), times(0.5), scalar(1), 0), std::invalid_argument);
  EXPECT_THROW(dtp::invert_input_correction(times(2), times(0.5), scalar(1), 10, 0.0),
               std::invalid_argument);
}

TEST(OutputStep, ScalarArithmetic) {
  EXPECT_NEAR(dtp::invert_output_step(times(2), times(0.4), scalar(1), scalar(1))(0), 0.48, 1e-15);
}

TEST(OutputStep, PerfectAutoEncoderReturnsDecodedTarget) {
  const Vector r = dtp::invert_output_step(times(4), times(0.25), scalar(2), scalar(-7));
  EXPECT_EQ(r(0), 0.5);
}

TEST(OutputStep, ImprovesOnTheDecodedTarget) {
  ref::Stream s(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto layer = perturbed(s, 5, 0.3);
    const Vector tau = s.vec(5);
    const Vector step = dtp::invert_output_step(linear(layer.w), linear(layer.omega), tau, tau);
    const double before = (layer.w * (layer.omega * tau) - tau).norm();
    const double after = (layer.w * step - tau).norm();
    EXPECT_LT(after, before);
  }
}

TEST(OutputStep, NeverWorseAfterInputCorrectionOnLinearLayers) {
  ref::Stream s(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto layer = perturbed(s, 4, s.uniform(0.05, 0.6));
    const Vector tau = s.vec(4);
    const auto ic = dtp::invert_input_correction(linear(layer.w), linear(layer.omega), tau);
    const Vector step = dtp::invert_output_step(linear(layer.w), linear(layer.omega), tau, ic.last_input);
    EXPECT_LE((layer.w * step - tau).norm(), (layer.w * ic.target - tau).norm() + 1e-12);
  }
}

TEST(OutputIterative, PerfectAutoEncoderIsFixedAtFirstIterate) {
  const auto r = dtp::invert_output_iterative(times(4), times(0.25), scalar(2));
  EXPECT_EQ(r.iterations_used, 1);
  EXPECT_EQ(r.target(0), 0.5);
}

TEST(OutputIterative, ScalarFixedPointAndRate) {
  const auto r = dtp::invert_output_iterative(times(2), times(0.4), scalar(3), 100, 1e-13);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.target(0), 1.5, 1e-12);
  // Ratios of increments near the tolerance are dominated by round-off.
  for (std::size_t t = 1; t < r.increment_norms.size() && r.increment_norms[t] > 1e-9; ++t) {
    EXPECT_NEAR(r.increment_norms[t] / r.increment_norms[t - 1], 0.2, 1e-6);
  }
}

TEST(OutputIterative, ConvergedDecoderResidualIsBelowTolerance) {
  ref::Stream s(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto layer = perturbed(s, 6, s.uniform(0.05, 0.85));
    const Vector tau = s.vec(6);
    const double tol = 1e-8;
    const auto r = dtp::invert_output_iterative(linear(layer.w), linear(layer.omega), tau, 1000, tol);
    ASSERT_TRUE(r.converged);
    const Vector residual = layer.omega * (layer.w * r.target) - layer.omega * tau;
    // The last increment is exactly this residual.
    EXPECT_LT(residual.norm(), tol);
  }
}

TEST(OutputIterative, CustomInitIsUsed) {
  const auto r = dtp::invert_output_iterative(times(2), times(0.4), scalar(3), scalar(1.5), 10, 1e-12);
  EXPECT_EQ(r.iterations_used, 1);
  EXPECT_EQ(r.target(0), 1.5);
}

TEST(OutputIterative, GeometricDecayMatchesEstimatedAlpha) {
  ref::Stream s(7);
  const auto layer = perturbed(s, 5, 0.5);
  const auto r = dtp::invert_output_iterative(linear(layer.w), linear(layer.omega), s.vec(5), 200, 1e-12);
  // Least-squares slope of log norms against t.
  const auto& n = r.increment_norms;
  const double count = static_cast<double>(n.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t t = 0; t < n.size(); ++t) {
    const double y = std::log(n[t]);
    st += static_cast<double>(t);
    sy += y;
    stt += static_cast<double>(t * t);
    sty += static_cast<double>(t) * y;
  }
  const double slope = (count * sty - st * sy) / (count * stt - st * st);
  EXPECT_NEAR(std::exp(slope), r.estimated_alpha, 0.1);
  EXPECT_LT(r.estimated_alpha, 0.5 + 1e-9);
}

TEST(ContractionAlpha, GeometricMeanOfRatios) {
  const std::vector<double> norms{1.0, 0.1, 0.04};
  EXPECT_NEAR(dtp::estimate_contraction_alpha(norms), 0.2, 1e-15);
}

TEST(ContractionAlpha, ExactZeroMeansZero) {
  const std::vector<double> norms{0.0};
  EXPECT_EQ(dtp::estimate_contraction_alpha(norms), 0.0);
}

TEST(ContractionAlpha, LargeRatioIsInfinite) {
  const std::vector<double> norms{1.0, 1.6, 1.0};
  EXPECT_TRUE(std::isinf(dtp::estimate_contraction_alpha(norms)));
}

TEST(ContractionAlpha, TooFewNormsThrow) {
  const std::vector<double> norms{1.0, 0.5};
  EXPECT_THROW(dtp::estimate_contraction_alpha(norms), dtp::InsufficientDataError);
}

TEST(ContractionAlpha, ScalarCase) {
  const auto r = dtp::invert_output_iterative(times(2), times(0.4), scalar(3), 8, 1e-30);
  EXPECT_NEAR(dtp::estimate_contraction_alpha(r), 0.2, 1e-8);
}

TEST(InvertLayer, AllMethodsAgreeOnExactLinearLayers) {
  ref::Stream s(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = exact_linear_net(s, 4, 1);
    const Vector tau = s.vec(4);
    const Vector expected = ref::inverse(net.encoder(1)) * tau;
    for (auto kind : {InversionKind::SimpleTP, InversionKind::InputCorrection,
                      InversionKind::OutputStep, InversionKind::OutputIterative,
                      InversionKind::OutputIterativeSeeded}) {
      const auto r = dtp::invert_layer(net, 1, tau, {kind, 100, 1e-10});
      EXPECT_LT((r.target - expected).norm(), 1e-8) << static_cast<int>(kind);
    }
  }
}

TEST(InvertLayer, DivergenceCarriesTheLayer) {
  const Network net({Matrix::Constant(1, 1, 1), Matrix::Constant(1, 1, 5)},
                    {Matrix::Constant(1, 1, 1), Matrix::Constant(1, 1, 0.7)},
                    dtp::Activation::identity());
  try {
    dtp::invert_layer(net, 2, scalar(1), {InversionKind::InputCorrection, 100, 1e-6});
    FAIL() << "expected divergence";
  } catch (const dtp::NonContractiveError& e) {
    EXPECT_EQ(e.layer(), 2);
  }
}

TEST(SequentialPropagation, ExactChainReachesOutputTarget) {
  ref::Stream s(9);
  const Network net = exact_linear_net(s, 4, 3);
  const Vector tau = s.vec(4);
  const auto seq = dtp::propagate_targets_sequential(net, tau, {InversionKind::OutputIterative, 100, 1e-10});
  const auto h = ref::forward({net.encoder(1), net.encoder(2), net.encoder(3)}, 1.0, false, seq.targets[0]);
  EXPECT_LT((h[3] - tau).norm(), 1e-6);
  EXPECT_EQ(seq.per_layer.size(), 3u);
}

Network perturbed_net(ref::Stream& s, int d, int layers, double alpha) {
  std::vector<Matrix> w, omega;
  for (int l = 0; l < layers; ++l) {
    const auto layer = perturbed(s, d, alpha);
    w.push_back(layer.w);
    omega.push_back(layer.omega);
  }
  return Network(w, omega, dtp::Activation::identity());
}

TEST(Relaxation, PerfectDecodersAreStationary) {
  ref::Stream s(10);
  const Network net = exact_linear_net(s, 4, 3);
  const auto r = dtp::parallel_target_relaxation(net, s.vec(4), {1e-6, 100, dtp::SweepOrder::Jacobi});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.sweeps_used, 1);
  EXPECT_TRUE(r.per_layer[0].increment_norms.empty());  // tau_0 is decoded, not relaxed
  for (std::size_t i : {1u, 2u}) {
    ASSERT_EQ(r.per_layer[i].increment_norms.size(), 1u);
    EXPECT_LT(r.per_layer[i].increment_norms[0], 1e-12);
  }
}

TEST(Relaxation, ZeroOutputGapKeepsTheTrace) {
  ref::Stream s(11);
  const Network net = exact_linear_net(s, 3, 3);
  const Vector x = s.vec(3);
  const auto h = ref::forward({net.encoder(1), net.encoder(2), net.encoder(3)}, 1.0, false, x);
  const auto r = dtp::parallel_target_relaxation(net, h[3], {1e-9, 100, dtp::SweepOrder::Jacobi});
  for (int l = 0; l <= 3; ++l) EXPECT_LT((r.targets[static_cast<std::size_t>(l)] - h[static_cast<std::size_t>(l)]).norm(), 1e-10);
}

class RelaxationOrder : public ::testing::TestWithParam<dtp::SweepOrder> {};

TEST_P(RelaxationOrder, MatchesSequentialConvergedInversion) {
  ref::Stream s(12);
  const double sp = 1e-7;
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = perturbed_net(s, 4, 3, 0.3);
    const Vector tau = s.vec(4);
    const auto r = dtp::parallel_target_relaxation(net, tau, {sp, 500, GetParam()});
    ASSERT_TRUE(r.converged);
    const auto seq = dtp::propagate_targets_sequential(net, tau, {InversionKind::OutputIterative, 500, 1e-12});
    for (int l = 1; l <= 3; ++l) {
      EXPECT_LT((r.targets[static_cast<std::size_t>(l)] - seq.targets[static_cast<std::size_t>(l)]).norm(), 2 * sp);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Orders, RelaxationOrder,
                         ::testing::Values(dtp::SweepOrder::Jacobi, dtp::SweepOrder::GaussSeidel));

TEST(Relaxation, InputTargetIsDecodedFromRelaxedFirstTarget) {
  ref::Stream s(13);
  const Network net = perturbed_net(s, 3, 3, 0.4);
  const auto r = dtp::parallel_target_relaxation(net, s.vec(3), {1e-8, 200, dtp::SweepOrder::Jacobi});
  EXPECT_EQ(r.targets[0], dtp::layer_decode(net, 1, r.targets[1]));
}

TEST(Relaxation, SingleLayerNeedsNoSweeps) {
  ref::Stream s(14);
  const Network net = perturbed_net(s, 3, 1, 0.4);
  const Vector tau = s.vec(3);
  const auto r = dtp::parallel_target_relaxation(net, tau, {});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.sweeps_used, 0);
  EXPECT_EQ(r.targets[1], tau);
}

TEST(Relaxation, IsDeterministic) {
  ref::Stream s(15);
  const Network net = perturbed_net(s, 4, 4, 0.5);
  const Vector tau = s.vec(4);
  const auto a = dtp::parallel_target_relaxation(net, tau, {});
  const auto b = dtp::parallel_target_relaxation(net, tau, {});
  for (std::size_t l = 0; l < a.targets.size(); ++l) EXPECT_EQ(a.targets[l], b.targets[l]);
}

TEST(Relaxation, NonContractiveLayerThrows) {
  // Layer 2's regular auto-encoder has g(f(u)) = 3u, so each sweep multiplies the error by -2.
  const Network net({Matrix::Identity(2, 2), Matrix::Identity(2, 2)},
                    {Matrix::Identity(2, 2), 3.0 * Matrix::Identity(2, 2)}, dtp::Activation::identity());
  Vector tau(2);
  tau << 1, 2;
  EXPECT_THROW(dtp::parallel_target_relaxation(net, tau, {1e-8, 100, dtp::SweepOrder::Jacobi}),
               dtp::NonContractiveError);
}

TEST(Relaxation, RejectsBadOptions) {
  const Network net({Matrix::Identity(2, 2)}, {Matrix::Identity(2, 2)}, dtp::Activation::identity());
  EXPECT_THROW(dtp::parallel_target_relaxation(net, Vector::Zero(2), {1e-6, 0, dtp::SweepOrder::Jacobi}),
               std::invalid_argument);
  EXPECT_THROW(dtp::parallel_target_relaxation(net, Vector::Zero(2), {0.0, 10, dtp::SweepOrder::Jacobi}),
               std::invalid_argument);
}

}  // namespace
