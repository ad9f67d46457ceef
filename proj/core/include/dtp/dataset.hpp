#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dtp/config.hpp"
#include "dtp/netcore.hpp"

namespace dtp {

struct Sample {
  Vector x;
  Vector y;
};

using Dataset = std::vector<Sample>;

struct DatasetSpec {
  DatasetKind kind = DatasetKind::LinearMap;
  int width = 8;
  int samples = 64;
  std::filesystem::path path;  // Csv only
  double slope = 0.1;          // RotatedNonlinear's leaky relu slope
};

DatasetSpec dataset_spec(const TrainConfig& config);

/// LinearMap: x ~ N(0, I), y = Q x with a seeded orthogonal Q.
/// RotatedNonlinear: y = Q s(P x), P and Q orthogonal, s leaky relu.
/// Csv: read from `path`.
Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// One sample per line: 2d comma-separated decimals, x then y, no header.
Dataset read_dataset_csv(std::istream& in, int width);
Dataset read_dataset_csv(const std::filesystem::path& path, int width);
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace dtp
