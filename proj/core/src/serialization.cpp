#include "dtp/serialization.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "dtp/errors.hpp"

namespace dtp {
namespace {

constexpr const char* kMagic = "dtp-network";
constexpr int kVersion = 1;

void write_number(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      write_number(out, m(i, j));
    }
    out << '\n';
  }
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const char* expecting) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError(line_, std::string("unexpected end of file, expecting ") + expecting);
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

void expect_word(std::istringstream& s, const std::string& word, const LineReader& reader) {
  std::string got;
  if (!(s >> got) || got != word) {
    throw ParseError(reader.line(), "expected '" + word + "', found '" + got + "'");
  }
}

Matrix read_matrix(LineReader& reader, const std::string& kind, int l, int rows, int cols) {
  auto header = reader.next(kind.c_str());
  expect_word(header, kind, reader);
  int index = 0;
  if (!(header >> index) || index != l) {
    throw ParseError(reader.line(), kind + " index " + std::to_string(l) + " expected");
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    auto row = reader.next("matrix row");
    for (int j = 0; j < cols; ++j) {
      if (!(row >> m(i, j))) {
        throw ParseError(reader.line(), kind + " " + std::to_string(l) + " row " +
                                            std::to_string(i + 1) + " needs " +
                                            std::to_string(cols) + " numbers");
      }
    }
    std::string extra;
    if (row >> extra) {
      throw ParseError(reader.line(), "trailing data '" + extra + "' in " + kind + " row");
    }
  }
  return m;
}

}  // namespace

void save_network(std::ostream& out, const Network& net) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "layers " << net.layer_count() << " width " << net.width() << " bias "
      << (net.has_bias() ? 1 : 0) << " activation ";
  if (net.activation().kind() == ActivationKind::Identity) {
    out << "identity 1";
  } else {
    out << "leaky_relu ";
    write_number(out, net.activation().slope());
  }
  out << '\n';
  for (int l = 1; l <= net.layer_count(); ++l) {
    out << "encoder " << l << '\n';
    write_matrix(out, net.encoder(l));
  }
  for (int l = 1; l <= net.layer_count(); ++l) {
    out << "decoder " << l << '\n';
    write_matrix(out, net.decoder(l));
  }
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write network file " + path.string());
  save_network(out, net);
}

Network load_network(std::istream& in) {
  LineReader reader(in);
  auto magic = reader.next("header");
  expect_word(magic, kMagic, reader);
  int version = 0;
  if (!(magic >> version) || version != kVersion) {
    throw ParseError(reader.line(), "unsupported network file version");
  }
  auto dims = reader.next("dimensions");
  int layers = 0, width = 0, bias = 0;
  std::string activation_name;
  double slope = 0.0;
  expect_word(dims, "layers", reader);
  dims >> layers;
  expect_word(dims, "width", reader);
  dims >> width;
  expect_word(dims, "bias", reader);
  dims >> bias;
  expect_word(dims, "activation", reader);
  if (!(dims >> activation_name >> slope) || layers < 1 || width < 1 || (bias != 0 && bias != 1)) {
    throw ParseError(reader.line(), "malformed dimensions line");
  }
  Activation activation = Activation::identity();
  if (activation_name == "leaky_relu") {
    activation = Activation::leaky_relu(slope);
  } else if (activation_name != "identity") {
    throw ParseError(reader.line(), "unknown activation '" + activation_name + "'");
  }
  const int cols = bias ? width + 1 : width;
  std::vector<Matrix> encoders, decoders;
  for (int l = 1; l <= layers; ++l) encoders.push_back(read_matrix(reader, "encoder", l, width, cols));
  for (int l = 1; l <= layers; ++l) decoders.push_back(read_matrix(reader, "decoder", l, width, cols));
  return Network(std::move(encoders), std::move(decoders), activation, bias == 1);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open network file " + path.string());
  return load_network(in);
}

}  // namespace dtp
