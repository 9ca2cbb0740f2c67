#include "seqdec/core.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace seqdec {

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId bos_id,
                       TokenId eos_id)
    : tokens_(std::move(tokens)), bos_(bos_id), eos_(eos_id) {
  if (!contains(bos_) || !contains(eos_)) {
    throw ContractViolation("vocabulary: BOS/EOS id out of range");
  }
  if (bos_ == eos_) {
    throw ContractViolation("vocabulary: BOS and EOS must differ");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw ContractViolation("vocabulary: empty token string");
    }
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw ContractViolation("vocabulary: duplicate token '" + tokens_[i] +
                              "'");
    }
    if (static_cast<TokenId>(i) != bos_) {
      extensions_.push_back(static_cast<TokenId>(i));
    }
  }
}

Vocabulary Vocabulary::with_markers(std::vector<std::string> regular,
                                    std::string bos, std::string eos) {
  const auto eos_id = static_cast<TokenId>(regular.size());
  regular.push_back(std::move(eos));
  regular.push_back(std::move(bos));
  return Vocabulary(std::move(regular), eos_id + 1, eos_id);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) {
    throw ContractViolation("vocabulary: token id " + std::to_string(id) +
                            " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Hypothesis Hypothesis::initial(const Vocabulary& vocab) {
  Hypothesis h;
  h.tokens.push_back(vocab.bos());
  return h;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kGreedy:
      return "greedy";
    case Strategy::kBeam:
      return "beam";
    case Strategy::kLbs:
      return "lbs";
    case Strategy::kLhbs:
      return "lhbs";
    case Strategy::kExhaustive:
      return "exhaustive";
  }
  return "unknown";
}

std::string_view to_string(Mode m) {
  return m == Mode::kRaw ? "raw" : "practical";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (auto v : {Strategy::kGreedy, Strategy::kBeam, Strategy::kLbs,
                 Strategy::kLhbs, Strategy::kExhaustive}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "raw") return Mode::kRaw;
  if (s == "practical") return Mode::kPractical;
  return std::nullopt;
}

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ContractViolation("beam width must be >= 1");
  if (max_len < 1) throw ContractViolation("max length must be >= 1");
}

LogProb kth_max(std::span<const LogProb> scores, std::size_t k) {
  if (k == 0) throw ContractViolation("kth_max: k must be >= 1");
  if (scores.size() < k) return kNegInf;
  std::vector<LogProb> copy(scores.begin(), scores.end());
  auto nth = copy.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(copy.begin(), nth, copy.end(), std::greater<>());
  return *nth;
}

std::strong_ordering canonical_compare(const Hypothesis& a,
                                       const Hypothesis& b) {
  if (a.cum_logprob > b.cum_logprob) return std::strong_ordering::less;
  if (a.cum_logprob < b.cum_logprob) return std::strong_ordering::greater;
  return std::lexicographical_compare_three_way(
      a.tokens.begin(), a.tokens.end(), b.tokens.begin(), b.tokens.end());
}

Hypothesis extend(const Hypothesis& h, TokenId token, LogProb logprob,
                  const Vocabulary& vocab) {
  if (h.complete) {
    throw ContractViolation("extend: hypothesis is already complete");
  }
  if (!vocab.is_extension(token)) {
    throw ContractViolation("extend: token " + std::to_string(token) +
                            " is not an extension token");
  }
  if (!(logprob <= 0.0)) {
    throw ContractViolation("extend: log-probability must be <= 0");
  }
  Hypothesis next = h;
  next.tokens.push_back(token);
  next.step_logprobs.push_back(logprob);
  next.cum_logprob = h.cum_logprob + logprob;
  next.complete = token == vocab.eos();
  return next;
}

bool power_within_budget(std::uint64_t base, std::uint64_t exponent,
                         std::uint64_t budget) {
  std::uint64_t acc = 1;
  for (std::uint64_t i = 0; i < exponent; ++i) {
    if (base != 0 && acc > budget / base) return false;
    acc *= base;
  }
  return acc <= budget;
}

}  // namespace seqdec
