#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dtp/inversion.hpp"
#include "dtp/netcore.hpp"
#include "dtp/updates.hpp"

namespace dtp {

enum class ScalingRule { DTP1, DTPScaled };
enum class DatasetKind { LinearMap, RotatedNonlinear, Csv };
enum class MetricsGranularity { Sample, Epoch };

/// Everything a training run or experiment needs. The JSON config file is a
/// flat object whose keys are exactly these field names; enumerations are
/// written as snake_case strings (e.g. "inversion": "output_iterative").
struct TrainConfig {
  double beta = 0.01;
  double decoder_lr = 0.1;
  InversionKind inversion = InversionKind::OutputIterative;
  int inversion_max_iters = 100;
  double inversion_tol = 1e-6;
  double stopping_precision = 1e-6;
  int max_sweeps = 100;
  SweepOrder sweep_order = SweepOrder::Jacobi;
  NormConvention norm_convention = NormConvention::Squared;
  ScalingRule scaling = ScalingRule::DTPScaled;
  StabilityMode stability_mode = StabilityMode::Off;
  std::uint64_t seed = 1;
  int epochs = 50;
  DatasetKind dataset = DatasetKind::LinearMap;
  std::string dataset_path;
  int samples = 64;
  int width = 8;
  int layers = 3;
  double activation_slope = 1.0;  // 1 is the identity
  double dataset_slope = 0.1;     // leaky relu inside RotatedNonlinear targets
  bool bias = false;
  DecoderInit decoder_init = DecoderInit::Transpose;
  int batch_size = 1;
  int failure_budget = 0;  // consecutive failed steps before aborting; 0 never aborts
  MetricsGranularity metrics = MetricsGranularity::Sample;
  bool record_wall_time = false;

  InversionMethod inversion_method() const {
    return {inversion, inversion_max_iters, inversion_tol};
  }
  RelaxationOptions relaxation() const { return {stopping_precision, max_sweeps, sweep_order}; }
  Activation activation() const;
};

/// Throws ConfigError naming the offending field.
void validate(const TrainConfig& config);

/// Parses a flat JSON object; unknown keys and wrong types are rejected with
/// ConfigError. Missing keys keep their defaults.
TrainConfig parse_config(std::string_view json_text);
TrainConfig load_config(const std::filesystem::path& path);
std::string to_json(const TrainConfig& config);

std::string_view to_string(InversionKind kind);
std::string_view to_string(ScalingRule rule);
std::string_view to_string(DatasetKind kind);

}  // namespace dtp
