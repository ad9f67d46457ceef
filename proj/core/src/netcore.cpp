#include "dtp/netcore.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dtp/errors.hpp"

namespace dtp {

Activation Activation::leaky_relu(double slope) {
  if (!(slope > 0.0) || slope > 1.0) {
    throw std::invalid_argument("leaky relu slope must lie in (0, 1], got " +
                                std::to_string(slope));
  }
  if (slope == 1.0) return identity();
  return Activation(ActivationKind::LeakyRelu, slope);
}

Vector Activation::apply(const Vector& u) const {
  return u.unaryExpr([this](double v) { return apply(v); });
}

Vector Activation::derivative(const Vector& u) const {
  return u.unaryExpr([this](double v) { return derivative(v); });
}

Vector Activation::inverse(const Vector& v) const {
  return v.unaryExpr([this](double x) { return inverse(x); });
}

Network::Network(std::vector<Matrix> encoders, std::vector<Matrix> decoders,
                 Activation activation, bool bias)
    : encoders_(std::move(encoders)),
      decoders_(std::move(decoders)),
      activation_(activation),
      bias_(bias) {
  validate();
}

std::size_t Network::checked_index(int l) const {
  if (l < 1 || l > layer_count()) {
    throw std::out_of_range("layer index " + std::to_string(l) + " outside [1, " +
                            std::to_string(layer_count()) + "]");
  }
  return static_cast<std::size_t>(l - 1);
}

const Matrix& Network::encoder(int l) const { return encoders_[checked_index(l)]; }
const Matrix& Network::decoder(int l) const { return decoders_[checked_index(l)]; }
Matrix& Network::encoder(int l) { return encoders_[checked_index(l)]; }
Matrix& Network::decoder(int l) { return decoders_[checked_index(l)]; }

Vector Network::presynaptic(const Vector& u) const {
  if (!bias_) return activation_.apply(u);
  Vector s(u.size() + 1);
  s.head(u.size()) = activation_.apply(u);
  s(u.size()) = 1.0;
  return s;
}

void Network::validate() const {
  if (encoders_.empty()) throw std::invalid_argument("network needs at least one layer");
  if (encoders_.size() != decoders_.size()) {
    throw std::invalid_argument("encoder and decoder lists differ in length");
  }
  const Eigen::Index d = encoders_.front().rows();
  if (d < 1) throw std::invalid_argument("network width must be positive");
  const Eigen::Index cols = bias_ ? d + 1 : d;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    for (const Matrix* m : {&encoders_[i], &decoders_[i]}) {
      if (m->rows() != d || m->cols() != cols) {
        throw std::invalid_argument("layer " + std::to_string(i + 1) + " has a " +
                                    std::to_string(m->rows()) + "x" + std::to_string(m->cols()) +
                                    " weight, expected " + std::to_string(d) + "x" +
                                    std::to_string(cols));
      }
      if (!m->allFinite()) {
        throw NumericalOverflowError(static_cast<int>(i + 1), "non-finite weight");
      }
    }
  }
}

ForwardTrace forward(const Network& net, const Vector& x, NormConvention convention) {
  const int L = net.layer_count();
  if (x.size() != net.width()) {
    throw std::invalid_argument("input has length " + std::to_string(x.size()) +
                                ", network width is " + std::to_string(net.width()));
  }
  if (!x.allFinite()) throw NumericalOverflowError(0, "non-finite input");

  ForwardTrace trace;
  trace.convention = convention;
  trace.activations.reserve(static_cast<std::size_t>(L) + 1);
  trace.activations.push_back(x);
  for (int l = 1; l <= L; ++l) {
    Vector s = net.presynaptic(trace.activations.back());
    const double norm_sq = s.squaredNorm();
    const bool clamped = !(norm_sq >= kNormClamp);
    Vector n = Vector::Zero(s.size());
    if (!clamped) {
      n = convention == NormConvention::Squared ? Vector(s / norm_sq)
                                                : Vector(s / std::sqrt(norm_sq));
    }
    Vector h = net.encoder(l) * s;
    if (!h.allFinite()) throw NumericalOverflowError(l, "forward activation overflow");
    trace.presynaptic.push_back(std::move(s));
    trace.normalized_inputs.push_back(std::move(n));
    trace.input_norms_sq.push_back(norm_sq);
    trace.clamped.push_back(clamped);
    trace.activations.push_back(std::move(h));
  }
  return trace;
}

Vector layer_encode(const Network& net, int l, const Vector& u) {
  return net.encoder(l) * net.presynaptic(u);
}

Vector layer_decode(const Network& net, int l, const Vector& v) {
  return net.decoder(l) * net.presynaptic(v);
}

Vector gaussian_vector(int n, Rng& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Matrix gaussian_matrix(int rows, int cols, Rng& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  // Row-major fill so the draw order does not depend on Eigen's storage.
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

Matrix random_orthogonal(int n, Rng& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Network init_weights(int width, int layers, const InitOptions& options, std::uint64_t seed) {
  if (width < 1 || layers < 1) {
    throw std::invalid_argument("init_weights needs width >= 1 and layers >= 1");
  }
  Rng rng(seed);
  const int cols = options.bias ? width + 1 : width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  std::vector<Matrix> encoders;
  std::vector<Matrix> decoders;
  for (int l = 0; l < layers; ++l) {
    Matrix w = Matrix::Zero(width, cols);
    if (options.encoder == EncoderInit::Orthogonal) {
      w.leftCols(width) = random_orthogonal(width, rng);
    } else {
      w.leftCols(width) = gaussian_matrix(width, width, rng, scale);
    }
    encoders.push_back(std::move(w));
  }
  for (int l = 0; l < layers; ++l) {
    Matrix omega = Matrix::Zero(width, cols);
    if (options.decoder == DecoderInit::Transpose) {
      omega.leftCols(width) = encoders[static_cast<std::size_t>(l)].leftCols(width).transpose();
    } else {
      omega.leftCols(width) = gaussian_matrix(width, width, rng, scale);
    }
    decoders.push_back(std::move(omega));
  }
  return Network(std::move(encoders), std::move(decoders), options.activation, options.bias);
}

}  // namespace dtp
