#include "dtp/config.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "dtp/errors.hpp"

namespace dtp {
namespace {

using json = nlohmann::json;

template <typename Enum, std::size_t N>
using Names = std::array<std::pair<Enum, std::string_view>, N>;

constexpr Names<InversionKind, 5> kInversionNames{{
    {InversionKind::SimpleTP, "simple_tp"},
    {InversionKind::InputCorrection, "input_correction"},
    {InversionKind::OutputStep, "output_step"},
    {InversionKind::OutputIterative, "output_iterative"},
    {InversionKind::OutputIterativeSeeded, "output_iterative_seeded"},
}};
constexpr Names<SweepOrder, 2> kSweepNames{{
    {SweepOrder::Jacobi, "jacobi"},
    {SweepOrder::GaussSeidel, "gauss_seidel"},
}};
constexpr Names<NormConvention, 2> kNormNames{{
    {NormConvention::Squared, "squared"},
    {NormConvention::Unsquared, "unsquared"},
}};
constexpr Names<ScalingRule, 2> kScalingNames{{
    {ScalingRule::DTP1, "dtp1"},
    {ScalingRule::DTPScaled, "dtp_scaled"},
}};
constexpr Names<StabilityMode, 2> kStabilityNames{{
    {StabilityMode::Off, "off"},
    {StabilityMode::Uniform, "uniform"},
}};
constexpr Names<DatasetKind, 3> kDatasetNames{{
    {DatasetKind::LinearMap, "linear_map"},
    {DatasetKind::RotatedNonlinear, "rotated_nonlinear"},
    {DatasetKind::Csv, "csv"},
}};
constexpr Names<DecoderInit, 2> kDecoderInitNames{{
    {DecoderInit::Transpose, "transpose"},
    {DecoderInit::Random, "random"},
}};
constexpr Names<MetricsGranularity, 2> kGranularityNames{{
    {MetricsGranularity::Sample, "sample"},
    {MetricsGranularity::Epoch, "epoch"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const Names<Enum, N>& names, Enum value) {
  for (const auto& [e, name] : names)
    if (e == value) return name;
  return "?";
}

template <typename Enum, std::size_t N>
Enum parse_enum(const Names<Enum, N>& names, const json& value, const std::string& key) {
  if (!value.is_string()) throw ConfigError("field '" + key + "' must be a string");
  const auto text = value.get<std::string>();
  for (const auto& [e, name] : names)
    if (name == text) return e;
  std::string allowed;
  for (const auto& [e, name] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw ConfigError("field '" + key + "' has unknown value '" + text + "' (expected one of " +
                    allowed + ")");
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("field '" + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("field '" + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

Activation TrainConfig::activation() const {
  if (activation_slope == 1.0) return Activation::identity();
  return Activation::leaky_relu(activation_slope);
}

std::string_view to_string(InversionKind kind) { return name_of(kInversionNames, kind); }
std::string_view to_string(ScalingRule rule) { return name_of(kScalingNames, rule); }
std::string_view to_string(DatasetKind kind) { return name_of(kDatasetNames, kind); }

void validate(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.beta > 0.0, "beta must be > 0");
  require(c.decoder_lr > 0.0, "decoder_lr must be > 0");
  require(c.inversion_max_iters >= 1, "inversion_max_iters must be >= 1");
  require(c.inversion_tol > 0.0, "inversion_tol must be > 0");
  require(c.stopping_precision > 0.0, "stopping_precision must be > 0");
  require(c.max_sweeps >= 1, "max_sweeps must be >= 1");
  require(c.epochs >= 0, "epochs must be >= 0");
  require(c.samples >= 1, "samples must be >= 1");
  require(c.width >= 1, "width must be >= 1");
  require(c.layers >= 1, "layers must be >= 1");
  require(c.activation_slope > 0.0 && c.activation_slope <= 1.0,
          "activation_slope must lie in (0, 1]");
  require(c.dataset_slope > 0.0 && c.dataset_slope <= 1.0, "dataset_slope must lie in (0, 1]");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.failure_budget >= 0, "failure_budget must be >= 0");
  require(c.dataset != DatasetKind::Csv || !c.dataset_path.empty(),
          "dataset 'csv' needs dataset_path");
}

TrainConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  TrainConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "beta") c.beta = get_number(v, key);
    else if (key == "decoder_lr") c.decoder_lr = get_number(v, key);
    else if (key == "inversion") c.inversion = parse_enum(kInversionNames, v, key);
    else if (key == "inversion_max_iters") c.inversion_max_iters = get_int(v, key);
    else if (key == "inversion_tol") c.inversion_tol = get_number(v, key);
    else if (key == "stopping_precision") c.stopping_precision = get_number(v, key);
    else if (key == "max_sweeps") c.max_sweeps = get_int(v, key);
    else if (key == "sweep_order") c.sweep_order = parse_enum(kSweepNames, v, key);
    else if (key == "norm_convention") c.norm_convention = parse_enum(kNormNames, v, key);
    else if (key == "scaling") c.scaling = parse_enum(kScalingNames, v, key);
    else if (key == "stability_mode") c.stability_mode = parse_enum(kStabilityNames, v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ConfigError("field 'seed' must be a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    }
    else if (key == "epochs") c.epochs = get_int(v, key);
    else if (key == "dataset") c.dataset = parse_enum(kDatasetNames, v, key);
    else if (key == "dataset_path") {
      if (!v.is_string()) throw ConfigError("field 'dataset_path' must be a string");
      c.dataset_path = v.get<std::string>();
    }
    else if (key == "samples") c.samples = get_int(v, key);
    else if (key == "width") c.width = get_int(v, key);
    else if (key == "layers") c.layers = get_int(v, key);
    else if (key == "activation_slope") c.activation_slope = get_number(v, key);
    else if (key == "dataset_slope") c.dataset_slope = get_number(v, key);
    else if (key == "bias") {
      if (!v.is_boolean()) throw ConfigError("field 'bias' must be a boolean");
      c.bias = v.get<bool>();
    }
    else if (key == "decoder_init") c.decoder_init = parse_enum(kDecoderInitNames, v, key);
    else if (key == "batch_size") c.batch_size = get_int(v, key);
    else if (key == "failure_budget") c.failure_budget = get_int(v, key);
    else if (key == "metrics") c.metrics = parse_enum(kGranularityNames, v, key);
    else if (key == "record_wall_time") {
      if (!v.is_boolean()) throw ConfigError("field 'record_wall_time' must be a boolean");
      c.record_wall_time = v.get<bool>();
    }
    else throw ConfigError("unknown config key '" + key + "'");
  }
  validate(c);
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_json(const TrainConfig& c) {
  json doc = {
      {"beta", c.beta},
      {"decoder_lr", c.decoder_lr},
      {"inversion", name_of(kInversionNames, c.inversion)},
      {"inversion_max_iters", c.inversion_max_iters},
      {"inversion_tol", c.inversion_tol},
      {"stopping_precision", c.stopping_precision},
      {"max_sweeps", c.max_sweeps},
      {"sweep_order", name_of(kSweepNames, c.sweep_order)},
      {"norm_convention", name_of(kNormNames, c.norm_convention)},
      {"scaling", name_of(kScalingNames, c.scaling)},
      {"stability_mode", name_of(kStabilityNames, c.stability_mode)},
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"dataset", name_of(kDatasetNames, c.dataset)},
      {"dataset_path", c.dataset_path},
      {"samples", c.samples},
      {"width", c.width},
      {"layers", c.layers},
      {"activation_slope", c.activation_slope},
      {"dataset_slope", c.dataset_slope},
      {"bias", c.bias},
      {"decoder_init", name_of(kDecoderInitNames, c.decoder_init)},
      {"batch_size", c.batch_size},
      {"failure_budget", c.failure_budget},
      {"metrics", name_of(kGranularityNames, c.metrics)},
      {"record_wall_time", c.record_wall_time},
  };
  return doc.dump(2);
}

}  // namespace dtp
