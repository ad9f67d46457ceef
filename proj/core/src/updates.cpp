#include "dtp/updates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dtp/errors.hpp"

namespace dtp {
namespace {

std::size_t at(int l) { return static_cast<std::size_t>(l); }

void check_layer(const ForwardTrace& trace, int l) {
  if (l < 1 || l > trace.layer_count()) {
    throw std::out_of_range("layer index " + std::to_string(l) + " outside [1, " +
                            std::to_string(trace.layer_count()) + "]");
  }
}

WeightDelta outer_update(const ForwardTrace& trace, int l, const Vector& change, UpdateRule rule) {
  check_layer(trace, l);
  WeightDelta out;
  out.layer = l;
  out.rule = rule;
  out.clamped = trace.clamped_at(l);
  if (out.clamped) {
    out.delta = Matrix::Zero(change.size(), trace.input_of(l).size());
  } else {
    out.delta = change * trace.normalized_input_of(l).transpose();
  }
  return out;
}

}  // namespace

double loss_value(LossKind loss, const Vector& h, const Vector& y) {
  switch (loss) {
    case LossKind::MeanSquaredError:
      return 0.5 * (h - y).squaredNorm();
  }
  throw std::logic_error("unknown loss");
}

Vector loss_gradient(LossKind loss, const Vector& h, const Vector& y) {
  switch (loss) {
    case LossKind::MeanSquaredError:
      return h - y;
  }
  throw std::logic_error("unknown loss");
}

Vector init_output_target(const Vector& h_L, const Vector& y, LossKind loss, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  return h_L - beta * loss_gradient(loss, h_L, y);
}

Vector TargetState::target_change(int l) const {
  return scale_factors.at(at(l)) * (targets.at(at(l)) - activations.at(at(l)));
}

double TargetState::effective_gap_sq(int l) const {
  const double s = scale_factors.at(at(l));
  return s * s * layer_gap_sq.at(at(l));
}

TargetState make_target_state(const ForwardTrace& trace, std::vector<Vector> targets) {
  if (targets.size() != trace.activations.size()) {
    throw std::invalid_argument("expected " + std::to_string(trace.activations.size()) +
                                " targets, got " + std::to_string(targets.size()));
  }
  TargetState state;
  state.activations = trace.activations;
  state.targets = std::move(targets);
  const std::size_t n = state.targets.size();
  state.layer_gap_sq.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    state.layer_gap_sq[l] = (state.targets[l] - state.activations[l]).squaredNorm();
  }
  state.output_gap_sq = state.layer_gap_sq.back();
  state.scale_factors.assign(n, 1.0);
  state.influence_factors.assign(n, 1.0);
  return state;
}

WeightDelta dtp1_weight_update(const ForwardTrace& trace, int l, const Vector& tau_l) {
  check_layer(trace, l);
  return outer_update(trace, l, tau_l - trace.h(l), UpdateRule::DTP1);
}

WeightDelta dtp1_weight_update(const ForwardTrace& trace, const TargetState& state, int l) {
  return outer_update(trace, l, state.target_change(l), UpdateRule::DTP1);
}

WeightDelta dtp1_generic_update(const ForwardTrace& trace, int l, const Vector& tau_l) {
  check_layer(trace, l);
  const Vector& s = trace.input_of(l);
  const Vector gap = tau_l - trace.h(l);
  const Eigen::Index d = gap.size();

  WeightDelta out;
  out.layer = l;
  out.rule = UpdateRule::DTP1Generic;
  out.delta = Matrix::Zero(d, s.size());
  // Neuron i only depends on row i of W, so dh_l/dW is block diagonal with the
  // 1 x cols block J_i = s^T; its normal matrix J_i J_i^T is |s|^2.
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::RowVectorXd jacobian_row = s.transpose();
    const double block = jacobian_row.squaredNorm();
    if (!(block >= kNormClamp)) {
      out.delta.setZero();
      out.clamped = true;
      return out;
    }
    out.delta.row(i) = jacobian_row * (gap(i) / block);
  }
  return out;
}

double influence_scale(TargetState& state, int l) {
  const int L = state.layer_count();
  if (l < 1 || l > L) throw std::out_of_range("influence_scale: bad layer " + std::to_string(l));
  double factor = 1.0;
  if (l != L) {
    const double gap = state.effective_gap_sq(l);
    factor = gap < kGapClamp ? kInfluenceCap
                             : std::min(kInfluenceCap, state.effective_gap_sq(L) / gap);
  }
  state.influence_factors.at(at(l)) = factor;
  return factor;
}

WeightDelta dtp_scaled_update(const ForwardTrace& trace, TargetState& state, int l) {
  const double factor = influence_scale(state, l);
  WeightDelta out = dtp1_weight_update(trace, state, l);
  out.delta *= factor;
  out.rule = UpdateRule::DTPScaled;
  return out;
}

WeightDelta decoder_update(const Network& net, const ForwardTrace& trace, int l, double beta_dec) {
  check_layer(trace, l);
  const Vector s = net.presynaptic(trace.h(l));
  const double norm_sq = s.squaredNorm();
  WeightDelta out;
  out.layer = l;
  out.rule = UpdateRule::Decoder;
  if (!(norm_sq >= kNormClamp)) {
    out.delta = Matrix::Zero(net.width(), s.size());
    out.clamped = true;
    return out;
  }
  const double denom =
      trace.convention == NormConvention::Squared ? norm_sq : std::sqrt(norm_sq);
  const Vector residual = trace.h(l - 1) - net.decoder(l) * s;
  out.delta = (beta_dec / denom) * residual * s.transpose();
  return out;
}

void apply_delta(Network& net, const WeightDelta& delta) {
  Matrix& target = delta.rule == UpdateRule::Decoder ? net.decoder(delta.layer)
                                                     : net.encoder(delta.layer);
  if (target.rows() != delta.delta.rows() || target.cols() != delta.delta.cols()) {
    throw std::invalid_argument("weight delta shape does not match layer " +
                                std::to_string(delta.layer));
  }
  target += delta.delta;
  if (!target.allFinite()) throw NumericalOverflowError(delta.layer, "weight update overflow");
}

BranchCombination branch_combine_targets(const Vector& h_A,
                                         std::span<const Vector> branch_targets) {
  if (branch_targets.empty()) throw std::invalid_argument("need at least one branch target");
  const std::size_t k = branch_targets.size();
  std::vector<double> gaps(k);
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < k; ++i) {
    gaps[i] = (branch_targets[i] - h_A).squaredNorm();
    if (gaps[i] < kGapClamp) ++degenerate;
  }

  BranchCombination out;
  out.weights.assign(k, 0.0);
  if (degenerate == k) {
    std::fill(out.weights.begin(), out.weights.end(), 1.0 / static_cast<double>(k));
    out.target = h_A;
    return out;
  }
  if (degenerate > 0) {
    for (std::size_t i = 0; i < k; ++i) {
      if (gaps[i] < kGapClamp) out.weights[i] = 1.0 / static_cast<double>(degenerate);
    }
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += 1.0 / gaps[i];
    for (std::size_t i = 0; i < k; ++i) out.weights[i] = (1.0 / gaps[i]) / total;
  }
  out.target = Vector::Zero(h_A.size());
  for (std::size_t i = 0; i < k; ++i) out.target += out.weights[i] * branch_targets[i];
  return out;
}

TwoBranchCombination branch_combine_targets(const Vector& h_A, const Vector& tau_BA,
                                            const Vector& tau_CA) {
  const Vector branches[] = {tau_BA, tau_CA};
  BranchCombination c = branch_combine_targets(h_A, std::span<const Vector>(branches));
  return {std::move(c.target), c.weights[0]};
}

TargetState normalize_target_scale(TargetState state, StabilityMode mode) {
  if (mode == StabilityMode::Off) return state;
  for (std::size_t l = 0; l < state.targets.size(); ++l) {
    const Vector change = state.targets[l] - state.activations[l];
    const double norm = change.norm();
    if (norm * norm < kGapClamp) continue;  // nothing to rescale
    state.targets[l] = state.activations[l] + change / norm;
    state.scale_factors[l] *= norm;
    state.layer_gap_sq[l] = (state.targets[l] - state.activations[l]).squaredNorm();
  }
  state.output_gap_sq = state.layer_gap_sq.back();
  state.mode = mode;
  return state;
}

}  // namespace dtp
