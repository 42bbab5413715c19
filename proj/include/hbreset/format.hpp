#pragma once

#include <string>

namespace hbreset {

/// Shortest-safe round-trip text for a double: 17 significant digits.
std::string fmt17(double x);

}  // namespace hbreset
