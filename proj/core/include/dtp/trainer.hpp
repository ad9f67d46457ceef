#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dtp/config.hpp"
#include "dtp/dataset.hpp"
#include "dtp/inversion.hpp"
#include "dtp/netcore.hpp"
#include "dtp/updates.hpp"

namespace dtp {

/// One logged row. Per-layer vectors are indexed by layer - 1.
struct MetricsRecord {
  enum class Kind { Sample, Epoch };
  Kind kind = Kind::Sample;
  int epoch = 0;
  int sample = -1;  // -1 for epoch summaries
  double loss = 0.0;
  std::vector<double> target_gaps;  // |tau_l - h_l|
  std::vector<double> influence;
  std::vector<double> alpha;        // estimated contraction per layer inversion
  int sweeps = 0;
  bool failed = false;
  std::string failure;
  double wall_time_s = 0.0;
};

/// Serializes one record as a single JSON line (no trailing newline).
/// Wall time is only included when requested, keeping files reproducible.
std::string to_json_line(const MetricsRecord& record, bool include_wall_time = false);
void write_metrics(std::ostream& out, const std::vector<MetricsRecord>& records,
                   bool include_wall_time = false);

struct TargetComputation {
  std::vector<Vector> targets;             // tau_0 .. tau_L
  std::vector<InversionResult> per_layer;  // index l-1
  int sweeps = 0;
};

/// Layer targets for the configured inversion method. OutputIterative uses
/// the parallel relaxation; the other methods invert layer by layer.
TargetComputation compute_targets(const Network& net, const Vector& tau_L,
                                  const TrainConfig& config);

/// Everything one training step would change, without applying it.
struct StepPlan {
  MetricsRecord record;
  std::vector<WeightDelta> decoder_deltas;
  std::vector<WeightDelta> encoder_deltas;  // empty when the step failed
};

/// Runs one sample through the full scheme: forward pass with cached
/// normalized inputs; decoder update from the forward trace; output target;
/// sequential target initialization; target relaxation; feedforward updates
/// (DTP1 or influence-scaled). Targets are computed with the decoders
/// already updated. A non-contracting relaxation marks the step failed and
/// drops the feedforward deltas but keeps the decoder deltas.
StepPlan plan_step(const Network& net, const Vector& x, const Vector& y,
                   const TrainConfig& config);

/// plan_step followed by applying the deltas in layer order.
MetricsRecord train_step(Network& net, const Vector& x, const Vector& y,
                         const TrainConfig& config);

/// Mean of 1/2 |h_L - y|^2 over the dataset.
double dataset_loss(const Network& net, const Dataset& data);

struct TrainResult {
  std::vector<MetricsRecord> metrics;
  std::vector<double> epoch_losses;  // index 0 is the loss before training
  int failures = 0;
};

/// Seeded per-epoch shuffle around train_step (or averaged deltas for
/// batch_size > 1). Throws TrainingAbortedError once more than
/// failure_budget consecutive steps fail (never when the budget is 0).
TrainResult train(Network& net, const Dataset& data, const TrainConfig& config);

/// Network initialized from the config (orthogonal encoders, decoders per
/// decoder_init).
Network make_network(const TrainConfig& config);

/// Plain backprop SGD, used as a learnability baseline. Returns epoch losses
/// (index 0 before training).
std::vector<double> train_sgd_baseline(Network& net, const Dataset& data, double learning_rate,
                                       int epochs, std::uint64_t seed);

}  // namespace dtp
