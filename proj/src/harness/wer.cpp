#include "liftpool/wer.hpp"

#include <sstream>

namespace liftpool::harness {

WerBreakdown wer_text(const std::string& hyp, const std::string& ref) {
  auto tokens = [](const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
  };
  return wer(tokens(hyp), tokens(ref));
}

}  // namespace liftpool::harness
