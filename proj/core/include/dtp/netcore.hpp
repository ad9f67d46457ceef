#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace dtp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Squared norms of presynaptic vectors below this are treated as zero.
inline constexpr double kNormClamp = 1e-12;

enum class ActivationKind { LeakyRelu, Identity };

/// Elementwise, strictly monotone non-linearity. Identity is LeakyRelu(1).
class Activation {
 public:
  static Activation identity() { return Activation(ActivationKind::Identity, 1.0); }
  static Activation leaky_relu(double slope = 0.1);

  ActivationKind kind() const noexcept { return kind_; }
  double slope() const noexcept { return slope_; }

  double apply(double u) const noexcept { return u >= 0.0 ? u : slope_ * u; }
  // Right derivative at 0.
  double derivative(double u) const noexcept { return u >= 0.0 ? 1.0 : slope_; }
  double inverse(double v) const noexcept { return v >= 0.0 ? v : v / slope_; }

  Vector apply(const Vector& u) const;
  Vector derivative(const Vector& u) const;
  Vector inverse(const Vector& v) const;

  friend bool operator==(const Activation&, const Activation&) = default;

 private:
  Activation(ActivationKind kind, double slope) : kind_(kind), slope_(slope) {}
  ActivationKind kind_;
  double slope_;
};

/// Whether presynaptic vectors are normalized by |s|^2 (the exact-recovery
/// form) or by |s|.
enum class NormConvention { Squared, Unsquared };

/// L layers of width d. Layer l computes h_l = W_l s(h_{l-1}) and its decoder
/// g_l(v) = Omega_l s(v), where s is the activation, optionally followed by a
/// constant 1 when biases are enabled (then weights are d x (d+1)).
class Network {
 public:
  Network(std::vector<Matrix> encoders, std::vector<Matrix> decoders, Activation activation,
          bool bias = false);

  int layer_count() const noexcept { return static_cast<int>(encoders_.size()); }
  int width() const noexcept { return static_cast<int>(encoders_.front().rows()); }
  bool has_bias() const noexcept { return bias_; }
  const Activation& activation() const noexcept { return activation_; }

  // 1-based layer indices, 1 <= l <= L.
  const Matrix& encoder(int l) const;
  const Matrix& decoder(int l) const;
  Matrix& encoder(int l);
  Matrix& decoder(int l);

  /// s(u), augmented with a trailing 1 when biases are enabled.
  Vector presynaptic(const Vector& u) const;

  /// Throws if any weight is non-finite or has the wrong shape.
  void validate() const;

 private:
  std::size_t checked_index(int l) const;

  std::vector<Matrix> encoders_;
  std::vector<Matrix> decoders_;
  Activation activation_;
  bool bias_;
};

/// Activations and cached normalized presynaptic vectors for one input.
struct ForwardTrace {
  NormConvention convention = NormConvention::Squared;
  std::vector<Vector> activations;        // h_0 .. h_L
  std::vector<Vector> presynaptic;        // s(h_0) .. s(h_{L-1})
  std::vector<Vector> normalized_inputs;  // n_0 .. n_{L-1}
  std::vector<double> input_norms_sq;     // |s(h_{l-1})|^2
  std::vector<bool> clamped;              // norm below kNormClamp, n zeroed

  int layer_count() const noexcept { return static_cast<int>(normalized_inputs.size()); }
  const Vector& h(int l) const { return activations.at(static_cast<std::size_t>(l)); }
  const Vector& output() const { return activations.back(); }
  /// Presynaptic vector feeding layer l (1-based), i.e. s(h_{l-1}).
  const Vector& input_of(int l) const { return presynaptic.at(static_cast<std::size_t>(l - 1)); }
  const Vector& normalized_input_of(int l) const {
    return normalized_inputs.at(static_cast<std::size_t>(l - 1));
  }
  bool clamped_at(int l) const { return clamped.at(static_cast<std::size_t>(l - 1)); }
};

ForwardTrace forward(const Network& net, const Vector& x,
                     NormConvention convention = NormConvention::Squared);

/// f_l(u) = W_l s(u).
Vector layer_encode(const Network& net, int l, const Vector& u);
/// g_l(v) = Omega_l s(v).
Vector layer_decode(const Network& net, int l, const Vector& v);

enum class EncoderInit { Orthogonal, Gaussian };
enum class DecoderInit { Transpose, Random };

struct InitOptions {
  EncoderInit encoder = EncoderInit::Orthogonal;
  DecoderInit decoder = DecoderInit::Transpose;
  Activation activation = Activation::leaky_relu(0.1);
  bool bias = false;
};

Network init_weights(int width, int layers, const InitOptions& options, std::uint64_t seed);

// Seeded sampling helpers shared by initialization and datasets.
using Rng = std::mt19937_64;
Vector gaussian_vector(int n, Rng& rng, double stddev = 1.0);
Matrix gaussian_matrix(int rows, int cols, Rng& rng, double stddev = 1.0);
/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
Matrix random_orthogonal(int n, Rng& rng);

}  // namespace dtp
