#ifndef SEQDEC_SCORER_H_
#define SEQDEC_SCORER_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "seqdec/core.h"

namespace seqdec {

// Natural-log next-token distribution indexed by TokenId. The BOS slot is
// always -inf; every other slot covers V̄.
using LogProbRow = std::vector<LogProb>;

// Abstract conditional model p(y_t | x, y_<t).
//
// Implementations must be deterministic and safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  // `prefix` starts with BOS and holds no EOS.
  virtual LogProbRow next_logprobs(std::string_view context,
                                   std::span<const TokenId> prefix) const = 0;
};

// Throws ContractViolation unless prefix = BOS followed by tokens of V̄ ∖ {EOS}.
void check_prefix(const Vocabulary& vocab, std::span<const TokenId> prefix);

// Σ exp(row[y]) over V̄, accumulated in ascending id order.
double row_mass(const Vocabulary& vocab, const LogProbRow& row);

// Space-joined tokens of prefix[1:]; "" for the bare BOS prefix.
std::string context_key(const Vocabulary& vocab,
                        std::span<const TokenId> prefix);

// Explicit lookup-table model keyed by the post-BOS prefix.
class TableModel final : public Scorer {
 public:
  // Rows hold linear probabilities indexed by TokenId (BOS slot ignored).
  TableModel(Vocabulary vocab, std::map<std::string, std::vector<double>> rows,
             std::vector<double> default_row);

  static TableModel from_json(const nlohmann::json& j);
  static TableModel load(const std::string& path);
  nlohmann::json to_json() const;

  const Vocabulary& vocabulary() const override { return vocab_; }
  LogProbRow next_logprobs(std::string_view context,
                           std::span<const TokenId> prefix) const override;

  const std::map<std::string, std::vector<double>>& rows() const {
    return rows_;
  }
  const std::vector<double>& default_row() const { return default_row_; }

 private:
  LogProbRow to_log(const std::vector<double>& probs) const;

  Vocabulary vocab_;
  std::map<std::string, std::vector<double>> rows_;
  std::vector<double> default_row_;
  std::map<std::string, LogProbRow, std::less<>> log_rows_;
  LogProbRow log_default_;
};

// Random TableModel over |V̄| = extension_size tokens ("t0".."t{n-2}" plus
// EOS). Every EOS-free prefix with fewer than `depth` generated tokens gets
// its own strictly positive row; deeper prefixes use a random default row.
TableModel random_table_model(std::size_t extension_size, std::size_t depth,
                              std::uint64_t seed);

// Add-alpha smoothed n-gram model.
//
// The conditioning window is [BOS]*(order-1) + context words + prefix[1:],
// truncated to its last order-1 entries; the DecodeInput context therefore
// acts as a prompt.
class NgramModel final : public Scorer {
 public:
  using Counts = std::map<std::string, std::map<std::string, std::uint64_t>>;

  NgramModel(Vocabulary vocab, std::size_t order, double alpha, Counts counts);

  static NgramModel from_json(const nlohmann::json& j);
  static NgramModel load(const std::string& path);
  nlohmann::json to_json() const;

  const Vocabulary& vocabulary() const override { return vocab_; }
  LogProbRow next_logprobs(std::string_view context,
                           std::span<const TokenId> prefix) const override;

  // p(token | window key) in linear space.
  double probability(const std::string& key, TokenId token) const;
  std::string window_key(std::string_view context,
                         std::span<const TokenId> prefix) const;

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }
  const Counts& counts() const { return counts_; }

 private:
  Vocabulary vocab_;
  std::size_t order_;
  double alpha_;
  Counts counts_;
  std::map<std::string, std::uint64_t, std::less<>> totals_;
};

// Trains on whitespace-tokenized lines. When `vocab` is empty the vocabulary
// is the sorted set of corpus words plus markers. Throws InputError on an
// empty corpus, order 0, or alpha <= 0.
NgramModel train_ngram(const std::vector<std::string>& corpus,
                       std::size_t order, double alpha,
                       std::vector<std::string> vocab = {});

// p(y) = 1/|V̄| everywhere.
class UniformScorer final : public Scorer {
 public:
  explicit UniformScorer(Vocabulary vocab) : vocab_(std::move(vocab)) {}
  const Vocabulary& vocabulary() const override { return vocab_; }
  LogProbRow next_logprobs(std::string_view context,
                           std::span<const TokenId> prefix) const override;

 private:
  Vocabulary vocab_;
};

// Transparent wrapper counting next_logprobs invocations.
class CountingScorer final : public Scorer {
 public:
  explicit CountingScorer(const Scorer& inner) : inner_(inner) {}

  const Vocabulary& vocabulary() const override { return inner_.vocabulary(); }
  LogProbRow next_logprobs(std::string_view context,
                           std::span<const TokenId> prefix) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.next_logprobs(context, prefix);
  }

  std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }

 private:
  const Scorer& inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Model file dispatch: "table" or "ngram".
std::unique_ptr<Scorer> load_model(std::string_view kind,
                                   const std::string& path);

// Reads the vocabulary section ("vocab", optional "bos"/"eos") of any model
// file.
Vocabulary vocabulary_from_json(const nlohmann::json& j);

}  // namespace seqdec

#endif  // SEQDEC_SCORER_H_
