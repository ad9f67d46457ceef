#include "dtp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "dtp/errors.hpp"
#include "dtp/oracle.hpp"

namespace dtp {
namespace {

std::size_t at(int l) { return static_cast<std::size_t>(l); }

}  // namespace

std::string to_json_line(const MetricsRecord& r, bool include_wall_time) {
  nlohmann::ordered_json j;
  j["record"] = r.kind == MetricsRecord::Kind::Sample ? "sample" : "epoch";
  j["epoch"] = r.epoch;
  j["sample"] = r.sample;
  j["loss"] = r.loss;
  if (r.kind == MetricsRecord::Kind::Sample) {
    j["target_gaps"] = r.target_gaps;
    j["influence"] = r.influence;
    j["alpha"] = r.alpha;
    j["sweeps"] = r.sweeps;
    j["failed"] = r.failed;
    if (r.failed) j["failure"] = r.failure;
  }
  if (include_wall_time) j["wall_time_s"] = r.wall_time_s;
  return j.dump();
}

void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& records,
                   bool include_wall_time) {
  for (const auto& r : records) out << to_json_line(r, include_wall_time) << '\n';
}

TargetComputation compute_targets(const Network& net, const Vector& tau_L,
                                  const TrainConfig& config) {
  TargetComputation out;
  if (config.inversion == InversionKind::OutputIterative) {
    RelaxationResult r = parallel_target_relaxation(net, tau_L, config.relaxation());
    out.targets = std::move(r.targets);
    out.per_layer = std::move(r.per_layer);
    out.sweeps = r.sweeps_used;
    return out;
  }
  SequentialTargets s = propagate_targets_sequential(net, tau_L, config.inversion_method());
  out.targets = std::move(s.targets);
  out.per_layer = std::move(s.per_layer);
  for (const auto& layer : out.per_layer) out.sweeps = std::max(out.sweeps, layer.iterations_used);
  return out;
}

StepPlan plan_step(const Network& net, const Vector& x, const Vector& y,
                   const TrainConfig& config) {
  const int L = net.layer_count();
  StepPlan plan;
  MetricsRecord& record = plan.record;

  const ForwardTrace trace = forward(net, x, config.norm_convention);
  record.loss = loss_value(LossKind::MeanSquaredError, trace.output(), y);

  // Decoders learn from the forward pass only, before any target exists.
  Network updated = net;
  for (int l = 1; l <= L; ++l) {
    WeightDelta d = decoder_update(net, trace, l, config.decoder_lr);
    apply_delta(updated, d);
    plan.decoder_deltas.push_back(std::move(d));
  }

  const Vector tau_L =
      init_output_target(trace.output(), y, LossKind::MeanSquaredError, config.beta);

  TargetComputation targets;
  try {
    targets = compute_targets(updated, tau_L, config);
  } catch (const NonContractiveError& e) {
    record.failed = true;
    record.failure = e.what();
  } catch (const NumericalOverflowError& e) {
    record.failed = true;
    record.failure = e.what();
  }
  if (record.failed) return plan;
  record.sweeps = targets.sweeps;

  TargetState state = make_target_state(trace, std::move(targets.targets));
  state = normalize_target_scale(std::move(state), config.stability_mode);

  for (int l = 1; l <= L; ++l) {
    if (config.scaling == ScalingRule::DTPScaled) {
      plan.encoder_deltas.push_back(dtp_scaled_update(trace, state, l));
    } else {
      influence_scale(state, l);  // reported only
      plan.encoder_deltas.push_back(dtp1_weight_update(trace, state, l));
    }
    record.target_gaps.push_back(std::sqrt(state.effective_gap_sq(l)));
    record.influence.push_back(state.influence_factors[at(l)]);
    record.alpha.push_back(targets.per_layer[at(l - 1)].estimated_alpha);
  }
  return plan;
}

MetricsRecord train_step(Network& net, const Vector& x, const Vector& y,
                         const TrainConfig& config) {
  StepPlan plan = plan_step(net, x, y, config);
  for (const auto& d : plan.decoder_deltas) apply_delta(net, d);
  for (const auto& d : plan.encoder_deltas) apply_delta(net, d);
  return std::move(plan.record);
}

double dataset_loss(const Network& net, const Dataset& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const Sample& s : data) {
    total += loss_value(LossKind::MeanSquaredError, forward(net, s.x).output(), s.y);
  }
  return total / static_cast<double>(data.size());
}

Network make_network(const TrainConfig& config) {
  InitOptions options;
  options.encoder = EncoderInit::Orthogonal;
  options.decoder = config.decoder_init;
  options.activation = config.activation();
  options.bias = config.bias;
  return init_weights(config.width, config.layers, options, config.seed);
}

TrainResult train(Network& net, const Dataset& data, const TrainConfig& config) {
  validate(config);
  using clock = std::chrono::steady_clock;
  TrainResult result;
  const bool per_sample = config.metrics == MetricsGranularity::Sample;

  auto epoch_record = [&](int epoch, double loss) {
    MetricsRecord r;
    r.kind = MetricsRecord::Kind::Epoch;
    r.epoch = epoch;
    r.loss = loss;
    result.metrics.push_back(std::move(r));
  };

  result.epoch_losses.push_back(dataset_loss(net, data));
  epoch_record(0, result.epoch_losses.back());

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  int consecutive_failures = 0;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      // Every sample of a batch is planned against the same weights and the
      // deltas are averaged.
      std::vector<StepPlan> plans;
      for (std::size_t k = start; k < stop; ++k) {
        const Sample& s = data[order[k]];
        const auto t0 = clock::now();
        StepPlan plan = plan_step(net, s.x, s.y, config);
        plan.record.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
        plan.record.epoch = epoch;
        plan.record.sample = static_cast<int>(order[k]);
        if (plan.record.failed) {
          ++result.failures;
          if (++consecutive_failures > config.failure_budget && config.failure_budget > 0) {
            throw TrainingAbortedError("aborting after " + std::to_string(consecutive_failures) +
                                       " consecutive failed steps: " + plan.record.failure);
          }
        } else {
          consecutive_failures = 0;
        }
        plans.push_back(std::move(plan));
      }

      const double scale = 1.0 / static_cast<double>(plans.size());
      for (const StepPlan& plan : plans) {
        for (WeightDelta d : plan.decoder_deltas) {
          if (plans.size() > 1) d.delta *= scale;
          apply_delta(net, d);
        }
        for (WeightDelta d : plan.encoder_deltas) {
          if (plans.size() > 1) d.delta *= scale;
          apply_delta(net, d);
        }
        if (per_sample) result.metrics.push_back(plan.record);
      }
    }
    result.epoch_losses.push_back(dataset_loss(net, data));
    epoch_record(epoch, result.epoch_losses.back());
  }
  return result;
}

std::vector<double> train_sgd_baseline(Network& net, const Dataset& data, double learning_rate,
                                       int epochs, std::uint64_t seed) {
  std::vector<double> losses{dataset_loss(net, data)};
  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const ForwardTrace trace = forward(net, data[i].x);
      const oracle::Gradients g = oracle::backprop_gradients(net, trace, data[i].y);
      for (int l = 1; l <= net.layer_count(); ++l) {
        net.encoder(l) -= learning_rate * g.weights[at(l - 1)];
      }
    }
    losses.push_back(dataset_loss(net, data));
  }
  return losses;
}

}  // namespace dtp
