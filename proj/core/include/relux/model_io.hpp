#pragma once

#include <iosfwd>
#include <string>

#include "relux/network.hpp"

namespace relux {

/// Network file format (JSON, schema documented in docs/model-format.md).
/// Numbers are written with full round-trip precision and the output is
/// deterministic for a given network.
std::string network_to_json(const Network& net);
Network network_from_json(const std::string& text);

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace relux
