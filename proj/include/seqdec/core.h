#ifndef SEQDEC_CORE_H_
#define SEQDEC_CORE_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqdec {

using TokenId = std::int32_t;
using LogProb = double;

inline constexpr LogProb kNegInf = -std::numeric_limits<double>::infinity();

// Default budget on |V̄|^n (node expansions) for exhaustive procedures.
inline constexpr std::uint64_t kDefaultNodeBudget = 10'000'000;

// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Failure talking to an out-of-process scorer (I/O, protocol, validation).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An exhaustive procedure was asked to exceed its node budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed user-facing input: model files, corpora, configurations.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Token inventory. The extension set V̄ is every token except BOS.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, TokenId bos_id, TokenId eos_id);

  // Regular tokens get ids 0..n-1, then EOS, then BOS.
  static Vocabulary with_markers(std::vector<std::string> regular,
                                 std::string bos = "<s>",
                                 std::string eos = "</s>");

  std::size_t size() const { return tokens_.size(); }
  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  bool contains(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  // V̄ in ascending id order.
  std::span<const TokenId> extension_tokens() const { return extensions_; }
  std::size_t extension_size() const { return extensions_.size(); }
  bool is_extension(TokenId id) const { return contains(id) && id != bos_; }

  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.bos_ == b.bos_ && a.eos_ == b.eos_;
  }

 private:
  std::vector<std::string> tokens_;
  TokenId bos_;
  TokenId eos_;
  std::vector<TokenId> extensions_;
  std::unordered_map<std::string, TokenId> index_;
};

// A partial or complete output sequence. tokens[0] is always BOS.
struct Hypothesis {
  std::vector<TokenId> tokens;
  LogProb cum_logprob = 0.0;
  std::vector<LogProb> step_logprobs;
  bool complete = false;

  static Hypothesis initial(const Vocabulary& vocab);

  // Generated tokens after BOS, EOS included.
  std::size_t length() const { return tokens.empty() ? 0 : tokens.size() - 1; }

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

struct DecodeInput {
  std::string id;
  std::string context;
};

enum class Strategy { kGreedy, kBeam, kLbs, kLhbs, kExhaustive };
enum class Mode { kRaw, kPractical };

std::string_view to_string(Strategy s);
std::string_view to_string(Mode m);
std::optional<Strategy> parse_strategy(std::string_view s);
std::optional<Mode> parse_mode(std::string_view s);

struct DecodeConfig {
  std::size_t beam_width = 1;
  std::size_t lookahead_depth = 0;
  std::size_t max_len = 1;
  Strategy strategy = Strategy::kBeam;
  Mode mode = Mode::kPractical;
  std::uint64_t node_budget = kDefaultNodeBudget;

  // Throws ContractViolation when beam_width or max_len is zero.
  void validate() const;
};

// k-th largest value, duplicates counted separately; -inf when fewer than k.
LogProb kth_max(std::span<const LogProb> scores, std::size_t k);

// Score descending, then token ids ascending (lexicographic).
std::strong_ordering canonical_compare(const Hypothesis& a,
                                       const Hypothesis& b);

inline bool canonical_less(const Hypothesis& a, const Hypothesis& b) {
  return canonical_compare(a, b) < 0;
}

// Appends `token`. `h` must be incomplete and `token` a member of V̄.
Hypothesis extend(const Hypothesis& h, TokenId token, LogProb logprob,
                  const Vocabulary& vocab);

// Overflow-safe check that base^exponent <= budget.
bool power_within_budget(std::uint64_t base, std::uint64_t exponent,
                         std::uint64_t budget);

}  // namespace seqdec

#endif  // SEQDEC_CORE_H_
