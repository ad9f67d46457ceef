#include "dtp/dataset.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dtp/errors.hpp"

namespace dtp {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

void write_number(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

}  // namespace

DatasetSpec dataset_spec(const TrainConfig& config) {
  DatasetSpec spec;
  spec.kind = config.dataset;
  spec.width = config.width;
  spec.samples = config.samples;
  spec.path = config.dataset_path;
  spec.slope = config.dataset_slope;
  return spec;
}

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.kind == DatasetKind::Csv) return read_dataset_csv(spec.path, spec.width);
  if (spec.width < 1 || spec.samples < 0) throw std::invalid_argument("bad dataset dimensions");

  Rng rng(seed);
  const Matrix q = random_orthogonal(spec.width, rng);
  Matrix p;
  Activation act = Activation::identity();
  if (spec.kind == DatasetKind::RotatedNonlinear) {
    p = random_orthogonal(spec.width, rng);
    act = spec.slope == 1.0 ? Activation::identity() : Activation::leaky_relu(spec.slope);
  }
  Dataset data;
  data.reserve(static_cast<std::size_t>(spec.samples));
  for (int i = 0; i < spec.samples; ++i) {
    Sample s;
    s.x = gaussian_vector(spec.width, rng);
    s.y = spec.kind == DatasetKind::LinearMap ? Vector(q * s.x)
                                              : Vector(q * act.apply(Vector(p * s.x)));
    data.push_back(std::move(s));
  }
  return data;
}

Dataset read_dataset_csv(std::istream& in, int width) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t expected = 2 * static_cast<std::size_t>(width);
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    std::vector<double> values;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = row.find(',', start);
      const std::string_view field =
          trim(row.substr(start, comma == std::string_view::npos ? row.npos : comma - start));
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw ParseError(line_no, "column " + std::to_string(values.size() + 1) +
                                      " is not a decimal number: '" + std::string(field) + "'");
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (values.size() != expected) {
      throw ParseError(line_no, "expected " + std::to_string(expected) + " columns, found " +
                                    std::to_string(values.size()));
    }
    Sample s;
    s.x = Eigen::Map<const Vector>(values.data(), width);
    s.y = Eigen::Map<const Vector>(values.data() + width, width);
    data.push_back(std::move(s));
  }
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path, int width) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open dataset file " + path.string());
  return read_dataset_csv(in, width);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (const Sample& s : data) {
    bool first = true;
    for (const Vector* v : {&s.x, &s.y}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) {
        if (!first) out << ',';
        write_number(out, (*v)(i));
        first = false;
      }
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
  write_dataset_csv(out, data);
}

}  // namespace dtp
