#pragma once

#include <filesystem>
#include <iosfwd>

#include "dtp/netcore.hpp"

namespace dtp {

// Plain-text network file:
//
//   dtp-network 1
//   layers <L> width <d> bias <0|1> activation <identity|leaky_relu> <slope>
//   encoder <l>
//   <row-major weights, one matrix row per line>
//   decoder <l>
//   ...
//
// Numbers are written in shortest round-trip form, so save/load is lossless.
void save_network(std::ostream& out, const Network& net);
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(std::istream& in);
Network load_network(const std::filesystem::path& path);

}  // namespace dtp
