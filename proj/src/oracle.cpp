#include "seqdec/oracle.h"

#include <cmath>
#include <string>

#include "seqdec/scorer.h"

namespace seqdec {
namespace {

void require_budget(std::size_t base, std::size_t exponent,
                    std::uint64_t budget, const char* who) {
  if (!power_within_budget(base, exponent, budget)) {
    throw BudgetExceeded(std::string(who) + ": " + std::to_string(base) + "^" +
                         std::to_string(exponent) + " exceeds budget " +
                         std::to_string(budget));
  }
}

// log p(seq[1:] | BOS) by re-querying the scorer for every prefix.
LogProb chain_rule(const Scorer& scorer, std::string_view context,
                   const std::vector<TokenId>& seq) {
  LogProb total = 0.0;
  for (std::size_t t = 1; t < seq.size(); ++t) {
    std::vector<TokenId> prefix(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(t));
    LogProbRow row = scorer.next_logprobs(context, prefix);
    total += row[static_cast<std::size_t>(seq[t])];
  }
  return total;
}

// Odometer over regular-token strings of a fixed length.
bool advance(std::vector<std::size_t>& digits, std::size_t base) {
  for (std::size_t i = digits.size(); i-- > 0;) {
    if (++digits[i] < base) return true;
    digits[i] = 0;
  }
  return false;
}

}  // namespace

EnumerationResult enumerate_all(const Scorer& scorer, std::string_view context,
                                std::size_t n_max, std::uint64_t budget) {
  const Vocabulary& vocab = scorer.vocabulary();
  require_budget(vocab.extension_size(), n_max, budget, "enumerate_all");

  std::vector<TokenId> regular;
  for (TokenId id : vocab.extension_tokens()) {
    if (id != vocab.eos()) regular.push_back(id);
  }

  EnumerationResult out;
  for (std::size_t len = 0; len <= n_max; ++len) {
    std::vector<std::size_t> digits(len, 0);
    do {
      std::vector<TokenId> seq{vocab.bos()};
      for (std::size_t d : digits) seq.push_back(regular[d]);
      if (len == n_max) {
        // EOS-free sequence at the length limit: frontier mass only.
        out.total_mass += std::exp(chain_rule(scorer, context, seq));
        continue;
      }
      seq.push_back(vocab.eos());
      ScoredSequence s{seq, chain_rule(scorer, context, seq)};
      out.total_mass += std::exp(s.logprob);
      out.all_complete.push_back(std::move(s));
      ++out.count;
    } while (!regular.empty() && advance(digits, regular.size()));
    if (regular.empty()) break;
  }
  return out;
}

Hypothesis brute_force_map(const Scorer& scorer, std::string_view context,
                           std::size_t n_max, std::uint64_t budget) {
  EnumerationResult all = enumerate_all(scorer, context, n_max, budget);
  const ScoredSequence* best = nullptr;
  for (const auto& s : all.all_complete) {
    if (best == nullptr || s.logprob > best->logprob ||
        (s.logprob == best->logprob && s.tokens < best->tokens)) {
      best = &s;
    }
  }
  Hypothesis h;
  h.tokens = best->tokens;
  h.complete = true;
  for (std::size_t t = 1; t < h.tokens.size(); ++t) {
    std::vector<TokenId> prefix(h.tokens.begin(),
                                h.tokens.begin() + static_cast<std::ptrdiff_t>(t));
    LogProb lp = scorer.next_logprobs(context, prefix)
                     [static_cast<std::size_t>(h.tokens[t])];
    h.step_logprobs.push_back(lp);
    h.cum_logprob += lp;
  }
  return h;
}

LogProb breadth_first_lookahead(const Scorer& scorer, std::string_view context,
                                const Hypothesis& h, std::size_t d,
                                std::optional<std::size_t> max_len,
                                std::uint64_t budget) {
  const Vocabulary& vocab = scorer.vocabulary();
  require_budget(vocab.extension_size(), d, budget, "breadth_first_lookahead");

  struct Node {
    std::vector<TokenId> tokens;
    LogProb gain;
    bool done;
  };
  std::vector<Node> level{{h.tokens, 0.0, h.complete}};
  for (std::size_t step = 0; step < d; ++step) {
    std::vector<Node> next;
    for (const Node& n : level) {
      if (n.done) {
        next.push_back(n);
        continue;
      }
      if (max_len && n.tokens.size() - 1 >= *max_len) continue;
      LogProbRow row = scorer.next_logprobs(context, n.tokens);
      for (TokenId y : vocab.extension_tokens()) {
        Node child = n;
        child.tokens.push_back(y);
        child.gain = n.gain + row[static_cast<std::size_t>(y)];
        child.done = y == vocab.eos();
        next.push_back(std::move(child));
      }
    }
    level = std::move(next);
  }
  LogProb best = kNegInf;
  for (const Node& n : level) best = std::max(best, n.gain);
  return best;
}

}  // namespace seqdec
