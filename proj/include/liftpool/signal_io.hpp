#pragma once

#include <string>

#include "liftpool/tensor.hpp"

namespace liftpool::harness {

// Header "channel,t0,t1,..." then one row per channel: index, then values.
// Reading returns [1, C, T]; rows must list channels 0..C-1 in order.
Tensor parse_signal_csv(const std::string& text, const std::string& origin = "<text>");
Tensor read_signal_csv(const std::string& path);
std::string signal_csv(const Tensor& x);  // x is [1, C, T]
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace liftpool::harness
