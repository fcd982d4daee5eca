#pragma once

#include <string>

namespace liftpool {

// 17 significant digits; parses back to the same double.
std::string format_exact(double v);

}  // namespace liftpool
