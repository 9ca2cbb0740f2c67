#ifndef SEQDEC_DECODE_H_
#define SEQDEC_DECODE_H_

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "seqdec/core.h"
#include "seqdec/metrics.h"
#include "seqdec/scorer.h"

namespace seqdec {

struct DecodeResult {
  Hypothesis best;
  std::vector<Hypothesis> finished;
  std::vector<Hypothesis> final_beam;
  std::uint64_t scorer_calls = 0;
  MetricsRecord metrics;
};

// Optional per-step record of a beam-family decode, for verification.
struct SlotRecord {
  std::size_t slot = 0;             // 1-based
  std::vector<Hypothesis> pool;     // B_{t,i} before popping, canonical order
  std::vector<Hypothesis> popped;   // y_t^i (two of them in practical mode)
};

struct StepRecord {
  std::size_t step = 0;                  // t, 1-based
  std::vector<Hypothesis> previous;      // Y_{t-1}, canonical order
  std::vector<SlotRecord> slots;         // LHBS only
  std::vector<Hypothesis> beam;          // Y_t
  std::uint64_t scorer_calls = 0;        // calls issued during this step
};

struct DecodeTrace {
  std::vector<StepRecord> steps;
};

DecodeResult greedy_decode(const Scorer& scorer, const DecodeInput& input,
                           const DecodeConfig& config,
                           DecodeTrace* trace = nullptr);

// Raw mode runs the beam recursion for exactly max_len steps; complete
// hypotheses ride along unchanged. Practical mode pops the top 2k candidates
// per step, routes EOS-ended ones to a best-k finished pool and stops once no
// active hypothesis can beat the best finished one.
DecodeResult beam_decode(const Scorer& scorer, const DecodeInput& input,
                         const DecodeConfig& config,
                         DecodeTrace* trace = nullptr);

// Depth-first branch-and-bound MAP search over complete sequences of at most
// max_len generated tokens. Throws BudgetExceeded when |V̄|^max_len exceeds
// config.node_budget.
DecodeResult exhaustive_decode(const Scorer& scorer, const DecodeInput& input,
                               const DecodeConfig& config);

// Beam search whose per-step selection ranks candidates by
// cum_logprob + h_d, with h_d evaluated by best-first branch and bound.
// Lookahead never extends past max_len. Returned hypotheses are ranked by
// cum_logprob.
DecodeResult lbs_decode(const Scorer& scorer, const DecodeInput& input,
                        const DecodeConfig& config,
                        DecodeTrace* trace = nullptr);

// Lookbehind heuristic beam search: slots are filled in descending order of
// the previous beam, each popping from a pool that cascades the leftovers of
// earlier slots.
DecodeResult lhbs_decode(const Scorer& scorer, const DecodeInput& input,
                         const DecodeConfig& config,
                         DecodeTrace* trace = nullptr);

// Dispatches on config.strategy.
DecodeResult decode(const Scorer& scorer, const DecodeInput& input,
                    const DecodeConfig& config, DecodeTrace* trace = nullptr);

// Returns max(f_max, h.cum_logprob + h_d(h)), where h_d is the best
// log-probability of a d-token continuation (EOS absorbing). With max_len
// set, continuations cannot run past max_len generated tokens, so a branch
// that reaches the limit without EOS before exhausting d is infeasible.
LogProb eval_lookahead(const Scorer& scorer, std::string_view context,
                       const Hypothesis& h, std::size_t d, LogProb f_max,
                       std::optional<std::size_t> max_len = std::nullopt);

}  // namespace seqdec

#endif  // SEQDEC_DECODE_H_
