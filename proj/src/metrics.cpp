#include "seqdec/metrics.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>

#include "seqdec/decode.h"
#include "seqdec/scorer.h"

namespace seqdec {

SurprisalSeries surprisal_series(const Scorer& scorer, std::string_view context,
                                 std::span<const TokenId> sequence,
                                 SurprisalOptions options) {
  const Vocabulary& vocab = scorer.vocabulary();
  if (sequence.empty() || sequence.front() != vocab.bos()) {
    throw ContractViolation("surprisal_series: sequence must start with BOS");
  }
  SurprisalSeries series;
  for (std::size_t t = 1; t < sequence.size(); ++t) {
    if (sequence[t] == vocab.eos() && !options.include_eos) break;
    LogProbRow row = scorer.next_logprobs(context, sequence.first(t));
    series.values.push_back(-row[static_cast<std::size_t>(sequence[t])]);
  }
  return series;
}

SurprisalSeries surprisal_series(const Hypothesis& h, const Vocabulary& vocab,
                                 SurprisalOptions options) {
  SurprisalSeries series;
  for (std::size_t i = 0; i < h.step_logprobs.size(); ++i) {
    if (h.tokens[i + 1] == vocab.eos() && !options.include_eos) break;
    series.values.push_back(-h.step_logprobs[i]);
  }
  return series;
}

double total_surprisal(const SurprisalSeries& series) {
  double total = 0.0;
  for (double u : series.values) total += u;
  return total;
}

double uid_error(const SurprisalSeries& series) {
  if (series.values.empty()) {
    throw ContractViolation("uid_error: empty surprisal series");
  }
  for (double u : series.values) {
    if (std::isinf(u)) return std::numeric_limits<double>::infinity();
  }
  // Deviations are taken from the first value so a constant series gives an
  // exact zero.
  const double n = static_cast<double>(series.values.size());
  const double shift = series.values.front();
  double mean = 0.0;
  for (double u : series.values) mean += u - shift;
  mean /= n;
  double ss = 0.0;
  for (double u : series.values) ss += (u - shift - mean) * (u - shift - mean);
  return std::sqrt(ss / n);
}

MetricsRecord compute_metrics(const Hypothesis& h, const Vocabulary& vocab,
                              std::uint64_t scorer_calls, double wall_time_ms,
                              SurprisalOptions options) {
  MetricsRecord m;
  m.nll = -h.cum_logprob;
  m.length = h.length();
  m.perplexity = m.length == 0 ? 1.0 : std::exp(m.nll / static_cast<double>(m.length));
  SurprisalSeries series = surprisal_series(h, vocab, options);
  m.uid_error = series.values.empty() ? 0.0 : uid_error(series);
  m.scorer_calls = scorer_calls;
  m.wall_time_ms = wall_time_ms;
  return m;
}

std::vector<ComparisonRow> compare_strategies(
    const Scorer& scorer, const std::vector<DecodeInput>& corpus,
    const std::vector<DecodeConfig>& configs) {
  if (corpus.empty()) throw InputError("compare: empty corpus");
  if (configs.empty()) throw InputError("compare: no configurations");

  // Baseline index per (k, mode).
  std::map<std::pair<std::size_t, Mode>, std::size_t> baseline;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = configs[i];
    if (c.strategy == Strategy::kBeam) {
      baseline.try_emplace({c.beam_width, c.mode}, i);
    }
  }
  for (const auto& c : configs) {
    if (!baseline.count({c.beam_width, c.mode})) {
      throw InputError("compare: no beam baseline for k=" +
                       std::to_string(c.beam_width));
    }
  }

  std::vector<std::vector<double>> nll(configs.size());
  std::vector<ComparisonRow> rows(configs.size());
  const double n = static_cast<double>(corpus.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = configs[i];
    ComparisonRow& row = rows[i];
    row.strategy = std::string(to_string(c.strategy));
    row.k = c.beam_width;
    row.d = c.strategy == Strategy::kLbs ? c.lookahead_depth : 0;
    for (const auto& input : corpus) {
      DecodeResult r = decode(scorer, input, c);
      nll[i].push_back(r.metrics.nll);
      row.mean_nll += r.metrics.nll / n;
      row.mean_uid_error += r.metrics.uid_error / n;
      row.mean_length += static_cast<double>(r.metrics.length) / n;
      row.mean_ppl += r.metrics.perplexity / n;
      row.mean_calls += static_cast<double>(r.metrics.scorer_calls) / n;
    }
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::size_t b = baseline.at({configs[i].beam_width, configs[i].mode});
    double delta = 0.0;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      delta += (nll[i][s] - nll[b][s]) / n;
    }
    rows[i].delta_nll_vs_beam = delta;
  }
  return rows;
}

void write_comparison_csv(std::ostream& out,
                          const std::vector<ComparisonRow>& rows) {
  out << kComparisonCsvHeader << '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6f,%.6f,%.6f,%.4f,%.6f,%.2f",
                  r.strategy.c_str(), r.k, r.d, r.mean_nll, r.delta_nll_vs_beam,
                  r.mean_uid_error, r.mean_length, r.mean_ppl, r.mean_calls);
    out << buf << '\n';
  }
}

}  // namespace seqdec
