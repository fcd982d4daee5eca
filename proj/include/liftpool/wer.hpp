#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "liftpool/errors.hpp"

namespace liftpool::harness {

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t reference_length = 0;
  double wer = 0.0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
};

// Unit-cost Levenshtein alignment of hypothesis against reference. The
// backtrace prefers a match, then substitution, deletion, insertion, so the
// breakdown is a fixed minimal edit script.
template <class Token>
WerBreakdown wer(std::span<const Token> hyp, std::span<const Token> ref) {
  if (ref.empty()) throw ConfigError("wer: reference must not be empty");
  const std::size_t n = ref.size(), m = hyp.size(), w = m + 1;
  std::vector<std::size_t> dist((n + 1) * w);
  for (std::size_t i = 0; i <= n; ++i) dist[i * w] = i;
  for (std::size_t j = 0; j <= m; ++j) dist[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = dist[(i - 1) * w + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      dist[i * w + j] = std::min({diag, dist[(i - 1) * w + j] + 1, dist[i * w + j - 1] + 1});
    }
  }

  WerBreakdown b;
  b.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = dist[i * w + j];
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && here == dist[(i - 1) * w + j - 1]) {
      --i, --j;
    } else if (i > 0 && j > 0 && here == dist[(i - 1) * w + j - 1] + 1) {
      ++b.substitutions;
      --i, --j;
    } else if (i > 0 && here == dist[(i - 1) * w + j] + 1) {
      ++b.deletions;
      --i;
    } else {
      ++b.insertions;
      --j;
    }
  }
  b.wer = static_cast<double>(b.errors()) / static_cast<double>(n);
  return b;
}

template <class Token>
WerBreakdown wer(const std::vector<Token>& hyp, const std::vector<Token>& ref) {
  return wer(std::span<const Token>(hyp), std::span<const Token>(ref));
}

// Whitespace-separated gloss strings.
WerBreakdown wer_text(const std::string& hyp, const std::string& ref);

}  // namespace liftpool::harness
