#ifndef SEQDEC_ORACLE_H_
#define SEQDEC_ORACLE_H_

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "seqdec/core.h"

namespace seqdec {

class Scorer;

// Brute-force references. Deliberately unoptimized and written without any
// of the decoder machinery so they can check it.

struct ScoredSequence {
  std::vector<TokenId> tokens;  // BOS ... EOS
  LogProb logprob = 0.0;
};

struct EnumerationResult {
  std::vector<ScoredSequence> all_complete;
  std::uint64_t count = 0;
  // Σ p over complete sequences plus over EOS-free sequences of exactly
  // n_max tokens; 1 up to rounding.
  double total_mass = 0.0;
};

// Every complete sequence with at most n_max generated tokens, each scored
// from scratch by the chain rule. Throws BudgetExceeded when |V̄|^n_max is
// over `budget`.
EnumerationResult enumerate_all(const Scorer& scorer, std::string_view context,
                                std::size_t n_max,
                                std::uint64_t budget = kDefaultNodeBudget);

// Canonical-order maximum of enumerate_all.
Hypothesis brute_force_map(const Scorer& scorer, std::string_view context,
                           std::size_t n_max,
                           std::uint64_t budget = kDefaultNodeBudget);

// h_d by full level-order expansion of all d-token continuations, EOS
// absorbing. Returns the increment over h.cum_logprob (0 for complete h or
// d = 0). With max_len set, branches that reach max_len generated tokens
// without EOS before depth d are dropped; -inf if none survive.
LogProb breadth_first_lookahead(const Scorer& scorer, std::string_view context,
                                const Hypothesis& h, std::size_t d,
                                std::optional<std::size_t> max_len = std::nullopt,
                                std::uint64_t budget = kDefaultNodeBudget);

}  // namespace seqdec

#endif  // SEQDEC_ORACLE_H_
