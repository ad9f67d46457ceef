#pragma once

#include <span>
#include <vector>

#include "dtp/netcore.hpp"

namespace dtp {

enum class LossKind { MeanSquaredError };

/// L(h, y) = 1/2 |h - y|^2 for MeanSquaredError.
double loss_value(LossKind loss, const Vector& h, const Vector& y);
/// dL/dh as a column vector.
Vector loss_gradient(LossKind loss, const Vector& h, const Vector& y);

/// tau_L = h_L - beta dL/dh_L.
Vector init_output_target(const Vector& h_L, const Vector& y, LossKind loss, double beta);

enum class UpdateRule { DTP1, DTP1Generic, DTPScaled, Decoder };

struct WeightDelta {
  int layer = 0;
  Matrix delta;
  UpdateRule rule = UpdateRule::DTP1;
  bool clamped = false;  // presynaptic norm below kNormClamp, delta forced to zero
};

/// Upper bound on the influence ratio |tau_L - h_L|^2 / |tau_l - h_l|^2.
inline constexpr double kInfluenceCap = 1e4;
/// Squared target gaps below this are degenerate.
inline constexpr double kGapClamp = 1e-24;

enum class StabilityMode { Off, Uniform };

/// Targets for one sample together with the per-layer bookkeeping the update
/// rules need. Layer vectors are indexed 0..L.
///
/// Under StabilityMode::Uniform every stored change tau_l - h_l has unit norm
/// and `scale_factors[l]` holds the removed magnitude, so the change the
/// update rules see is always scale_factors[l] * (targets[l] - activations[l]).
struct TargetState {
  StabilityMode mode = StabilityMode::Off;
  std::vector<Vector> activations;
  std::vector<Vector> targets;
  double output_gap_sq = 0.0;
  std::vector<double> layer_gap_sq;
  std::vector<double> scale_factors;
  std::vector<double> influence_factors;

  int layer_count() const noexcept { return static_cast<int>(targets.size()) - 1; }
  /// The (rescaled) target change tau_l - h_l.
  Vector target_change(int l) const;
  /// |target_change(l)|^2.
  double effective_gap_sq(int l) const;
};

TargetState make_target_state(const ForwardTrace& trace, std::vector<Vector> targets);

/// Delta rule normalized by the presynaptic norm:
/// dW = (tau_l - h_l) n_{l-1}^T with n taken from the trace.
WeightDelta dtp1_weight_update(const ForwardTrace& trace, int l, const Vector& tau_l);
WeightDelta dtp1_weight_update(const ForwardTrace& trace, const TargetState& state, int l);

/// The same update computed from the parameter Jacobian through its
/// block-per-neuron normal matrix: each neuron's incoming weights get
/// J_i^T (J_i J_i^T)^{-1} (tau_{l,i} - h_{l,i}) with J_i = dh_{l,i}/dW_{l,i,:}.
WeightDelta dtp1_generic_update(const ForwardTrace& trace, int l, const Vector& tau_l);

/// |tau_L - h_L|^2 / |tau_l - h_l|^2, capped at kInfluenceCap (also returned
/// when the layer gap is degenerate). 1 for the output layer. Stores the
/// value in state.influence_factors[l].
double influence_scale(TargetState& state, int l);

/// influence_scale(state, l) times the DTP1 update of layer l.
WeightDelta dtp_scaled_update(const ForwardTrace& trace, TargetState& state, int l);

/// Regular auto-encoder step driving g_l(h_l) toward h_{l-1}:
/// dOmega = beta_dec (h_{l-1} - g_l(h_l)) s(h_l)^T / |s(h_l)|^p, with p = 2 for
/// the squared norm convention of the trace and p = 1 otherwise.
WeightDelta decoder_update(const Network& net, const ForwardTrace& trace, int l, double beta_dec);

/// Adds the delta to the encoder (or decoder, for UpdateRule::Decoder).
void apply_delta(Network& net, const WeightDelta& delta);

struct BranchCombination {
  Vector target;
  std::vector<double> weights;  // convex, one per branch
};

/// Convex combination of branch targets for a shared layer with weights
/// proportional to 1 / |tau_X - h_A|^2. Degenerate branches (gap below
/// kGapClamp) take all the weight, shared equally; if every branch is
/// degenerate the result is h_A.
BranchCombination branch_combine_targets(const Vector& h_A, std::span<const Vector> branch_targets);

struct TwoBranchCombination {
  Vector target;
  double gamma = 0.5;  // weight of the first (B) branch
};
TwoBranchCombination branch_combine_targets(const Vector& h_A, const Vector& tau_BA,
                                            const Vector& tau_CA);

/// Uniform mode rescales every target change to unit norm and multiplies the
/// removed magnitude into scale_factors; Off returns the state unchanged.
TargetState normalize_target_scale(TargetState state, StabilityMode mode);

}  // namespace dtp
