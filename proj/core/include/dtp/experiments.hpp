#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtp/config.hpp"
#include "dtp/netcore.hpp"

namespace dtp {

/// What an experiment produced: a human-readable summary, JSON lines for the
/// metrics file, and whether every check it runs passed.
struct ExperimentReport {
  std::string summary;
  std::vector<std::string> metrics;
  bool ok = true;
};

/// Trains a network built from the config on the configured dataset.
/// `trained` receives the final network when given.
ExperimentReport run_train(const TrainConfig& config, Network* trained = nullptr);

/// One algebraic identity checked by the verify suite.
struct IdentityCheck {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int instances = 0;
  bool passed() const { return max_error <= tolerance; }
};

/// The seeded identity suite. Deterministic in `seed`; ok is false if any
/// identity exceeds its tolerance.
std::vector<IdentityCheck> verify_identities(std::uint64_t seed);
ExperimentReport run_verify(std::uint64_t seed);

/// Measured contraction rates of the inverse iterations: the scalar layer
/// f(u) = 2u, g(v) = 0.4v (rate 0.2), then perturbed-linear layers of the
/// configured width whose auto-encoder error has a prescribed spectral norm.
ExperimentReport run_alpha_study(const TrainConfig& config);

/// Per-layer agreement between the DTP target changes and the Gauss-Newton
/// direction at beta in {1e-2, 1e-3, 1e-4}, on the configured (untrained)
/// network and dataset.
ExperimentReport run_gn_compare(const TrainConfig& config);

}  // namespace dtp
