#pragma once

#include <functional>
#include <vector>

#include "dtp/inversion.hpp"
#include "dtp/netcore.hpp"
#include "dtp/updates.hpp"

namespace dtp::oracle {

/// Reverse-mode gradients of the loss for one sample.
struct Gradients {
  std::vector<Vector> activations;  // dL/dh_l, l = 0..L
  std::vector<Matrix> weights;      // dL/dW_l, index l-1
};

Gradients backprop_gradients(const Network& net, const ForwardTrace& trace, const Vector& y,
                             LossKind loss = LossKind::MeanSquaredError);

/// J_l = dh_L/dh_l for l = 0..L, and the per-layer factors f'_l(h_{l-1}).
struct JacobianStack {
  std::vector<Matrix> to_output;  // J_0 .. J_L (J_L = I)
  std::vector<Matrix> per_layer;  // f'_1 .. f'_L at index l-1
};

/// f'_l(u) = W_l diag(s'(u)) (bias column dropped).
Matrix layer_jacobian(const Network& net, int l, const Vector& u);
JacobianStack layer_jacobians(const Network& net, const ForwardTrace& trace);

/// Solves (J^T J + damping I) v = -beta grad. With zero damping a
/// numerically singular system throws SingularSystemError carrying the
/// smallest eigenvalue of J^T J.
Vector gauss_newton_direction(const Matrix& J, const Vector& grad_h, double beta,
                              double damping = 0.0);

/// J J^T gap: the output movement caused by an SGD step on h_l.
Vector sgd_output_effect(const Matrix& J, const Vector& output_gap);

/// Copy of `net` with Omega_l = W_l^{-1} (and the matching bias column).
/// Requires the Identity activation and condition numbers below 1e8.
Network exact_inverse_decoders(const Network& net);

/// f_l^{-1}(v) = s^{-1}(A_l^{-1}(v - b_l)) for any invertible activation.
LayerMap exact_inverse_map(const Network& net, int l);

/// Targets tau_0..tau_L from composing exact layer inverses on tau_L.
std::vector<Vector> exact_inverse_targets(const Network& net, const Vector& tau_L);

/// Spectral norm via SVD.
double spectral_norm(const Matrix& m);
/// Ratio of extreme singular values; +infinity for singular input.
double condition_number(const Matrix& m);

/// Central finite difference of a scalar function; step defaults to 1e-5.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& fn,
                                  const Vector& point, double step = 1e-5);
/// Central finite-difference Jacobian of a vector map.
Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& fn,
                                  const Vector& point, double step = 1e-5);
/// Central finite-difference dL/dW_l for one sample.
Matrix finite_difference_weight_gradient(const Network& net, int l, const Vector& x,
                                         const Vector& y, double step = 1e-5,
                                         LossKind loss = LossKind::MeanSquaredError);

/// The Eq.-9-style update built from the full d x (d*cols) parameter
/// Jacobian and its Moore-Penrose pseudo-inverse, reshaped to d x cols.
Matrix dense_pseudo_inverse_update(const ForwardTrace& trace, int l, const Vector& tau_l);

/// Cosine similarity; 0 when either vector is zero.
double cosine(const Vector& a, const Vector& b);

}  // namespace dtp::oracle
