#include "dtp/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dtp/errors.hpp"

namespace dtp::oracle {
namespace {

// Below this ratio of extreme eigenvalues J^T J is treated as singular.
constexpr double kSingularRatio = 1e-14;
constexpr double kMaxInverseCondition = 1e8;

std::size_t at(int l) { return static_cast<std::size_t>(l); }

Matrix linear_part(const Network& net, int l) { return net.encoder(l).leftCols(net.width()); }

Vector bias_part(const Network& net, int l) {
  if (!net.has_bias()) return Vector::Zero(net.width());
  return net.encoder(l).col(net.width());
}

}  // namespace

Gradients backprop_gradients(const Network& net, const ForwardTrace& trace, const Vector& y,
                             LossKind loss) {
  const int L = net.layer_count();
  Gradients g;
  g.activations.resize(at(L) + 1);
  g.weights.resize(at(L));
  g.activations[at(L)] = loss_gradient(loss, trace.output(), y);
  for (int l = L; l >= 1; --l) {
    const Vector& upstream = g.activations[at(l)];
    g.weights[at(l - 1)] = upstream * trace.input_of(l).transpose();
    g.activations[at(l - 1)] = net.activation().derivative(trace.h(l - 1)).cwiseProduct(
        linear_part(net, l).transpose() * upstream);
  }
  return g;
}

Matrix layer_jacobian(const Network& net, int l, const Vector& u) {
  return linear_part(net, l) * net.activation().derivative(u).asDiagonal();
}

JacobianStack layer_jacobians(const Network& net, const ForwardTrace& trace) {
  const int L = net.layer_count();
  const int d = net.width();
  JacobianStack stack;
  stack.to_output.resize(at(L) + 1);
  stack.per_layer.resize(at(L));
  stack.to_output[at(L)] = Matrix::Identity(d, d);
  for (int l = L; l >= 1; --l) {
    stack.per_layer[at(l - 1)] = layer_jacobian(net, l, trace.h(l - 1));
    stack.to_output[at(l - 1)] = stack.to_output[at(l)] * stack.per_layer[at(l - 1)];
  }
  return stack;
}

Vector gauss_newton_direction(const Matrix& J, const Vector& grad_h, double beta,
                              double damping) {
  if (damping < 0.0) throw std::invalid_argument("damping must be non-negative");
  const Eigen::Index n = J.cols();
  const Matrix normal = J.transpose() * J;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normal, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  const double largest = eig.eigenvalues().maxCoeff();
  if (damping == 0.0 && !(smallest > kSingularRatio * largest)) {
    throw SingularSystemError(smallest, "Gauss-Newton system is singular (smallest eigenvalue " +
                                            std::to_string(smallest) + ", largest " +
                                            std::to_string(largest) + ")");
  }
  const Matrix system = normal + damping * Matrix::Identity(n, n);
  return system.partialPivLu().solve(-beta * grad_h);
}

Vector sgd_output_effect(const Matrix& J, const Vector& output_gap) {
  return J * (J.transpose() * output_gap);
}

double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double smallest = s(s.size() - 1);
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smallest;
}

Network exact_inverse_decoders(const Network& net) {
  if (net.activation().kind() != ActivationKind::Identity) {
    throw std::invalid_argument("exact inverse decoders need the Identity activation");
  }
  Network out = net;
  const int d = net.width();
  for (int l = 1; l <= net.layer_count(); ++l) {
    const Matrix a = linear_part(net, l);
    const double cond = condition_number(a);
    if (!(cond < kMaxInverseCondition)) {
      Eigen::JacobiSVD<Matrix> svd(a);
      throw SingularSystemError(svd.singularValues()(d - 1),
                                "encoder " + std::to_string(l) +
                                    " is near singular (condition number " +
                                    std::to_string(cond) + ")");
    }
    const Matrix inverse = a.partialPivLu().inverse();
    Matrix& omega = out.decoder(l);
    omega.leftCols(d) = inverse;
    if (net.has_bias()) omega.col(d) = -inverse * bias_part(net, l);
  }
  return out;
}

LayerMap exact_inverse_map(const Network& net, int l) {
  const Matrix a = linear_part(net, l);
  const Vector b = bias_part(net, l);
  auto lu = a.partialPivLu();
  const Activation act = net.activation();
  return [lu, b, act](const Vector& v) { return act.inverse(lu.solve(v - b)); };
}

std::vector<Vector> exact_inverse_targets(const Network& net, const Vector& tau_L) {
  const int L = net.layer_count();
  std::vector<Vector> targets(at(L) + 1);
  targets[at(L)] = tau_L;
  for (int l = L; l >= 1; --l) targets[at(l - 1)] = exact_inverse_map(net, l)(targets[at(l)]);
  return targets;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& fn,
                                  const Vector& point, double step) {
  Vector grad(point.size());
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + step;
    const double up = fn(probe);
    probe(i) = point(i) - step;
    const double down = fn(probe);
    probe(i) = point(i);
    grad(i) = (up - down) / (2.0 * step);
  }
  return grad;
}

Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& fn,
                                  const Vector& point, double step) {
  const Vector base = fn(point);
  Matrix jac(base.size(), point.size());
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + step;
    const Vector up = fn(probe);
    probe(i) = point(i) - step;
    const Vector down = fn(probe);
    probe(i) = point(i);
    jac.col(i) = (up - down) / (2.0 * step);
  }
  return jac;
}

Matrix finite_difference_weight_gradient(const Network& net, int l, const Vector& x,
                                         const Vector& y, double step, LossKind loss) {
  Network probe = net;
  const Matrix base = net.encoder(l);
  Matrix grad(base.rows(), base.cols());
  for (Eigen::Index i = 0; i < base.rows(); ++i) {
    for (Eigen::Index j = 0; j < base.cols(); ++j) {
      probe.encoder(l)(i, j) = base(i, j) + step;
      const double up = loss_value(loss, forward(probe, x).output(), y);
      probe.encoder(l)(i, j) = base(i, j) - step;
      const double down = loss_value(loss, forward(probe, x).output(), y);
      probe.encoder(l)(i, j) = base(i, j);
      grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

Matrix dense_pseudo_inverse_update(const ForwardTrace& trace, int l, const Vector& tau_l) {
  const Vector& s = trace.input_of(l);
  const Vector gap = tau_l - trace.h(l);
  const Eigen::Index d = gap.size();
  const Eigen::Index cols = s.size();
  // Parameters flattened row-major: theta(i * cols + j) = W(i, j).
  Matrix jacobian = Matrix::Zero(d, d * cols);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) jacobian(i, i * cols + j) = s(j);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(jacobian);
  const Vector theta = cod.pseudoInverse() * gap;
  Matrix delta(d, cols);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) delta(i, j) = theta(i * cols + j);
  }
  return delta;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace dtp::oracle
