#ifndef SEQDEC_METRICS_H_
#define SEQDEC_METRICS_H_

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "seqdec/core.h"

namespace seqdec {

class Scorer;

// Per-step surprisals in nats. u_0(BOS) = 0 is kept apart from `values`.
struct SurprisalSeries {
  double bos = 0.0;
  std::vector<double> values;
};

struct SurprisalOptions {
  // Whether the EOS step contributes to the series.
  bool include_eos = true;
};

struct MetricsRecord {
  double nll = 0.0;
  std::size_t length = 0;
  double perplexity = 1.0;
  double uid_error = 0.0;
  std::uint64_t scorer_calls = 0;
  double wall_time_ms = 0.0;
};

// Re-scores `sequence` step by step with `scorer`, independent of any
// decode trace.
SurprisalSeries surprisal_series(const Scorer& scorer, std::string_view context,
                                 std::span<const TokenId> sequence,
                                 SurprisalOptions options = {});

// Series built from a hypothesis' recorded step log-probabilities.
SurprisalSeries surprisal_series(const Hypothesis& h, const Vocabulary& vocab,
                                 SurprisalOptions options = {});

// Population standard deviation. Throws ContractViolation on an empty series;
// +inf when any surprisal is infinite.
double uid_error(const SurprisalSeries& series);

// Left-to-right sum of the series.
double total_surprisal(const SurprisalSeries& series);

MetricsRecord compute_metrics(const Hypothesis& h, const Vocabulary& vocab,
                              std::uint64_t scorer_calls, double wall_time_ms,
                              SurprisalOptions options = {});

struct ComparisonRow {
  std::string strategy;
  std::size_t k = 0;
  std::size_t d = 0;
  double mean_nll = 0.0;
  double delta_nll_vs_beam = 0.0;
  double mean_uid_error = 0.0;
  double mean_length = 0.0;
  double mean_ppl = 0.0;
  double mean_calls = 0.0;
};

// Decodes every input under every config and aggregates per-sentence
// metrics by unweighted mean. Search-error deltas are taken sentence-wise
// against the beam config with the same k and mode. Throws InputError on an
// empty corpus or a missing beam baseline.
std::vector<ComparisonRow> compare_strategies(
    const Scorer& scorer, const std::vector<DecodeInput>& corpus,
    const std::vector<DecodeConfig>& configs);

inline constexpr const char* kComparisonCsvHeader =
    "strategy,k,d,mean_nll,delta_nll_vs_beam,mean_uid_error,mean_length,"
    "mean_ppl,mean_calls";

void write_comparison_csv(std::ostream& out,
                          const std::vector<ComparisonRow>& rows);

}  // namespace seqdec

#endif  // SEQDEC_METRICS_H_
