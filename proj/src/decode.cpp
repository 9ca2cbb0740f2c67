#include "seqdec/decode.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

namespace seqdec {
namespace {

using Clock = std::chrono::steady_clock;

bool is_finite(LogProb x) { return x > kNegInf; }

// Extension ids of V̄ with finite log-probability, best first (ties by id).
std::vector<TokenId> ranked_tokens(const Vocabulary& vocab,
                                   const LogProbRow& row) {
  std::vector<TokenId> ids;
  for (TokenId id : vocab.extension_tokens()) {
    if (is_finite(row[static_cast<std::size_t>(id)])) ids.push_back(id);
  }
  std::stable_sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) {
    return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)];
  });
  return ids;
}

// Per-decode memo of scorer rows keyed by prefix. A decode owns its context,
// so the prefix alone identifies the request.
class RowCache final : public Scorer {
 public:
  explicit RowCache(const Scorer& inner) : inner_(inner) {}

  const Vocabulary& vocabulary() const override { return inner_.vocabulary(); }
  LogProbRow next_logprobs(std::string_view context,
                           std::span<const TokenId> prefix) const override {
    std::vector<TokenId> key(prefix.begin(), prefix.end());
    auto it = rows_.find(key);
    if (it != rows_.end()) return it->second;
    LogProbRow row = inner_.next_logprobs(context, prefix);
    rows_.emplace(std::move(key), row);
    return row;
  }

 private:
  const Scorer& inner_;
  mutable std::map<std::vector<TokenId>, LogProbRow> rows_;
};

// Shared state for one beam-family decode.
class Expander {
 public:
  Expander(const Scorer& scorer, std::string_view context)
      : scorer_(scorer), vocab_(scorer.vocabulary()), context_(context) {}

  const Vocabulary& vocab() const { return vocab_; }

  // Children over V̄ with finite score. A complete hypothesis is its own sole
  // child (extension log-probability 0) and costs no scorer call.
  void append_children(const Hypothesis& parent,
                       std::vector<Hypothesis>& out) const {
    if (parent.complete) {
      out.push_back(parent);
      return;
    }
    LogProbRow row = scorer_.next_logprobs(context_, parent.tokens);
    for (TokenId id : vocab_.extension_tokens()) {
      LogProb lp = row[static_cast<std::size_t>(id)];
      if (is_finite(lp)) out.push_back(extend(parent, id, lp, vocab_));
    }
  }

  std::vector<Hypothesis> children_of(std::span<const Hypothesis> parents) const {
    std::vector<Hypothesis> out;
    for (const auto& p : parents) append_children(p, out);
    return out;
  }

 private:
  const Scorer& scorer_;
  const Vocabulary& vocab_;
  std::string_view context_;
};

void sort_canonical(std::vector<Hypothesis>& hs) {
  std::sort(hs.begin(), hs.end(), canonical_less);
}

void keep_top(std::vector<Hypothesis>& hs, std::size_t k) {
  if (hs.size() > k) {
    std::partial_sort(hs.begin(), hs.begin() + static_cast<std::ptrdiff_t>(k),
                      hs.end(), canonical_less);
    hs.resize(k);
  } else {
    sort_canonical(hs);
  }
}

const Hypothesis& best_of(const std::vector<Hypothesis>& hs) {
  return *std::min_element(hs.begin(), hs.end(), canonical_less);
}

// Tracks the finished pool and the stopping rule of practical mode.
class FinishedPool {
 public:
  explicit FinishedPool(std::size_t k) : k_(k) {}

  void add(Hypothesis h) {
    pool_.push_back(std::move(h));
    keep_top(pool_, k_);
  }

  // Monotonicity: no extension of `active` can beat the best finished score.
  bool dominates(const std::vector<Hypothesis>& active) const {
    if (pool_.empty()) return false;
    if (active.empty()) return true;
    return best_of(active).cum_logprob <= pool_.front().cum_logprob;
  }

  const std::vector<Hypothesis>& items() const { return pool_; }

 private:
  std::size_t k_;
  std::vector<Hypothesis> pool_;
};

void finish(DecodeResult& result, const Vocabulary& vocab,
            std::uint64_t calls, Clock::time_point start) {
  result.scorer_calls = calls;
  double ms = std::chrono::duration<double, std::milli>(Clock::now() - start)
                  .count();
  result.metrics = compute_metrics(result.best, vocab, calls, ms);
}

// Raw mode: best complete member of the final beam, else best overall.
Hypothesis raw_mode_best(const std::vector<Hypothesis>& beam) {
  std::vector<Hypothesis> complete;
  for (const auto& h : beam) {
    if (h.complete) complete.push_back(h);
  }
  return complete.empty() ? best_of(beam) : best_of(complete);
}

Hypothesis practical_best(const FinishedPool& finished,
                          const std::vector<Hypothesis>& active) {
  if (!finished.items().empty()) return finished.items().front();
  return best_of(active);
}

// Routes popped candidates in practical mode: EOS-ended ones into the pool,
// the first k incomplete ones (canonical order) into the next beam.
std::vector<Hypothesis> route_practical(std::vector<Hypothesis> popped,
                                        std::size_t k, FinishedPool& finished) {
  sort_canonical(popped);
  std::vector<Hypothesis> next;
  for (auto& c : popped) {
    if (c.complete) {
      finished.add(std::move(c));
    } else if (next.size() < k) {
      next.push_back(std::move(c));
    }
  }
  return next;
}

// ---------------------------------------------------------------------------
// Lookahead evaluation

struct Bound {
  LogProb value;   // max(true score, threshold)
  bool attained;   // true score >= threshold
};

class LookaheadSearch {
 public:
  LookaheadSearch(const Scorer& scorer, std::string_view context,
                  std::optional<std::size_t> max_len)
      : scorer_(scorer),
        vocab_(scorer.vocabulary()),
        context_(context),
        max_len_(max_len) {}

  // Best-first branch and bound over d-step continuations. Children are
  // visited in descending score and the loop stops at the first child that
  // already falls below the running best.
  Bound run(const Hypothesis& h, std::size_t depth, LogProb threshold) const {
    const bool open_threshold = !is_finite(threshold);
    if (h.complete || depth == 0) {
      return {std::max(h.cum_logprob, threshold),
              h.cum_logprob >= threshold};
    }
    if (max_len_ && h.length() >= *max_len_) {
      return {threshold, open_threshold};
    }
    LogProbRow row = scorer_.next_logprobs(context_, h.tokens);
    LogProb best = threshold;
    bool attained = false;
    for (TokenId id : ranked_tokens(vocab_, row)) {
      LogProb lp = row[static_cast<std::size_t>(id)];
      if (h.cum_logprob + lp < best) break;
      Bound r = run(extend(h, id, lp, vocab_), depth - 1, best);
      if (r.attained) {
        best = r.value;
        attained = true;
      }
    }
    return {best, attained || open_threshold};
  }

 private:
  const Scorer& scorer_;
  const Vocabulary& vocab_;
  std::string_view context_;
  std::optional<std::size_t> max_len_;
};

struct Scored {
  Hypothesis h;
  LogProb f;
};

bool scored_less(const Scored& a, const Scored& b) {
  if (a.f != b.f) return a.f > b.f;
  return std::lexicographical_compare(a.h.tokens.begin(), a.h.tokens.end(),
                                      b.h.tokens.begin(), b.h.tokens.end());
}

// Top-`width` candidates by cum_logprob + h_d. Candidates arrive sorted by
// cum_logprob; once one falls below the running width-th best total no later
// one can enter.
std::vector<Hypothesis> lookahead_select(std::vector<Hypothesis> candidates,
                                         std::size_t width, std::size_t depth,
                                         const LookaheadSearch& search) {
  sort_canonical(candidates);
  std::vector<Scored> kept;
  std::vector<LogProb> totals;
  for (auto& c : candidates) {
    LogProb kth = kth_max(totals, width);
    if (c.cum_logprob < kth) break;
    Bound r = search.run(c, depth, kth);
    bool enters = r.value > kth || (is_finite(kth) && r.value == kth && r.attained);
    if (enters) {
      totals.push_back(r.value);
      kept.push_back({std::move(c), r.value});
    }
  }
  std::vector<Hypothesis> out;
  if (kept.empty()) {
    // Nothing can finish within max_len; fall back to the plain ranking.
    keep_top(candidates, width);
    return candidates;
  }
  std::sort(kept.begin(), kept.end(), scored_less);
  if (kept.size() > width) kept.resize(width);
  for (auto& s : kept) out.push_back(std::move(s.h));
  return out;
}

// Canonical-order priority queue used for the LHBS slot pools.
class CandidatePool {
 public:
  void push(Hypothesis h) {
    heap_.push_back(std::move(h));
    std::push_heap(heap_.begin(), heap_.end(), worse);
  }
  bool empty() const { return heap_.empty(); }
  Hypothesis pop() {
    std::pop_heap(heap_.begin(), heap_.end(), worse);
    Hypothesis top = std::move(heap_.back());
    heap_.pop_back();
    return top;
  }
  std::vector<Hypothesis> snapshot() const {
    auto copy = heap_;
    sort_canonical(copy);
    return copy;
  }

 private:
  static bool worse(const Hypothesis& a, const Hypothesis& b) {
    return canonical_less(b, a);
  }
  std::vector<Hypothesis> heap_;
};

}  // namespace

// ---------------------------------------------------------------------------

LogProb eval_lookahead(const Scorer& scorer, std::string_view context,
                       const Hypothesis& h, std::size_t d, LogProb f_max,
                       std::optional<std::size_t> max_len) {
  return LookaheadSearch(scorer, context, max_len).run(h, d, f_max).value;
}

DecodeResult greedy_decode(const Scorer& scorer, const DecodeInput& input,
                           const DecodeConfig& config, DecodeTrace* trace) {
  config.validate();
  const auto start = Clock::now();
  CountingScorer counter(scorer);
  const Vocabulary& vocab = scorer.vocabulary();

  Hypothesis h = Hypothesis::initial(vocab);
  for (std::size_t t = 1; t <= config.max_len && !h.complete; ++t) {
    const auto calls_before = counter.calls();
    StepRecord rec;
    if (trace) rec.previous = {h};
    LogProbRow row = counter.next_logprobs(input.context, h.tokens);
    TokenId pick = ranked_tokens(vocab, row).front();
    h = extend(h, pick, row[static_cast<std::size_t>(pick)], vocab);
    if (trace) {
      rec.step = t;
      rec.beam = {h};
      rec.scorer_calls = counter.calls() - calls_before;
      trace->steps.push_back(std::move(rec));
    }
  }

  DecodeResult result;
  result.best = h;
  if (h.complete) result.finished = {h};
  result.final_beam = {h};
  finish(result, vocab, counter.calls(), start);
  return result;
}

DecodeResult beam_decode(const Scorer& scorer, const DecodeInput& input,
                         const DecodeConfig& config, DecodeTrace* trace) {
  config.validate();
  const auto start = Clock::now();
  CountingScorer counter(scorer);
  Expander expander(counter, input.context);
  const Vocabulary& vocab = scorer.vocabulary();
  const std::size_t k = config.beam_width;
  const bool raw = config.mode == Mode::kRaw;

  std::vector<Hypothesis> beam{Hypothesis::initial(vocab)};
  FinishedPool finished(k);
  for (std::size_t t = 1; t <= config.max_len; ++t) {
    if (raw && std::all_of(beam.begin(), beam.end(),
                           [](const Hypothesis& h) { return h.complete; })) {
      break;  // fixed point: every member is its own sole child
    }
    const auto calls_before = counter.calls();
    StepRecord rec;
    if (trace) rec.previous = beam;

    std::vector<Hypothesis> candidates = expander.children_of(beam);
    if (raw) {
      keep_top(candidates, k);
      beam = std::move(candidates);
    } else {
      keep_top(candidates, 2 * k);
      beam = route_practical(std::move(candidates), k, finished);
    }

    if (trace) {
      rec.step = t;
      rec.beam = beam;
      rec.scorer_calls = counter.calls() - calls_before;
      trace->steps.push_back(std::move(rec));
    }
    if (!raw && finished.dominates(beam)) break;
  }

  DecodeResult result;
  result.final_beam = beam;
  if (raw) {
    result.best = raw_mode_best(beam);
  } else {
    result.finished = finished.items();
    result.best = practical_best(finished, beam);
  }
  finish(result, vocab, counter.calls(), start);
  return result;
}

DecodeResult lbs_decode(const Scorer& scorer, const DecodeInput& input,
                        const DecodeConfig& config, DecodeTrace* trace) {
  config.validate();
  const auto start = Clock::now();
  CountingScorer counter(scorer);
  RowCache cache(counter);
  Expander expander(cache, input.context);
  LookaheadSearch search(cache, input.context, config.max_len);
  const Vocabulary& vocab = scorer.vocabulary();
  const std::size_t k = config.beam_width;
  const bool raw = config.mode == Mode::kRaw;

  std::vector<Hypothesis> beam{Hypothesis::initial(vocab)};
  FinishedPool finished(k);
  for (std::size_t t = 1; t <= config.max_len; ++t) {
    if (raw && std::all_of(beam.begin(), beam.end(),
                           [](const Hypothesis& h) { return h.complete; })) {
      break;
    }
    const auto calls_before = counter.calls();
    StepRecord rec;
    if (trace) rec.previous = beam;

    std::vector<Hypothesis> selected =
        lookahead_select(expander.children_of(beam), raw ? k : 2 * k,
                         config.lookahead_depth, search);
    if (raw) {
      beam = std::move(selected);
      sort_canonical(beam);
    } else {
      // Admission follows the lookahead ranking; the pool and stopping rule
      // use the model score alone.
      std::vector<Hypothesis> next;
      for (auto& c : selected) {
        if (c.complete) {
          finished.add(std::move(c));
        } else if (next.size() < k) {
          next.push_back(std::move(c));
        }
      }
      sort_canonical(next);
      beam = std::move(next);
    }

    if (trace) {
      rec.step = t;
      rec.beam = beam;
      rec.scorer_calls = counter.calls() - calls_before;
      trace->steps.push_back(std::move(rec));
    }
    if (!raw && finished.dominates(beam)) break;
  }

  DecodeResult result;
  result.final_beam = beam;
  if (raw) {
    result.best = raw_mode_best(beam);
  } else {
    result.finished = finished.items();
    result.best = practical_best(finished, beam);
  }
  finish(result, vocab, counter.calls(), start);
  return result;
}

DecodeResult lhbs_decode(const Scorer& scorer, const DecodeInput& input,
                         const DecodeConfig& config, DecodeTrace* trace) {
  config.validate();
  const auto start = Clock::now();
  CountingScorer counter(scorer);
  Expander expander(counter, input.context);
  const Vocabulary& vocab = scorer.vocabulary();
  const std::size_t k = config.beam_width;
  const bool raw = config.mode == Mode::kRaw;
  const std::size_t pops_per_slot = raw ? 1 : 2;

  std::vector<Hypothesis> beam{Hypothesis::initial(vocab)};
  FinishedPool finished(k);
  for (std::size_t t = 1; t <= config.max_len; ++t) {
    if (raw && std::all_of(beam.begin(), beam.end(),
                           [](const Hypothesis& h) { return h.complete; })) {
      break;
    }
    const auto calls_before = counter.calls();
    sort_canonical(beam);
    StepRecord rec;
    if (trace) rec.previous = beam;

    // Slot i sees the leftovers of slots 1..i-1 plus the children of the
    // i-th best previous hypothesis. Slots past the end of a short beam only
    // draw from leftovers.
    CandidatePool pool;
    std::vector<Hypothesis> popped;
    for (std::size_t slot = 1; slot <= k; ++slot) {
      if (slot <= beam.size()) {
        std::vector<Hypothesis> children;
        expander.append_children(beam[slot - 1], children);
        for (auto& c : children) pool.push(std::move(c));
      }
      SlotRecord srec;
      if (trace) {
        srec.slot = slot;
        srec.pool = pool.snapshot();
      }
      for (std::size_t p = 0; p < pops_per_slot && !pool.empty(); ++p) {
        popped.push_back(pool.pop());
        if (trace) srec.popped.push_back(popped.back());
      }
      if (trace) rec.slots.push_back(std::move(srec));
    }

    if (raw) {
      beam = std::move(popped);
      sort_canonical(beam);
    } else {
      beam = route_practical(std::move(popped), k, finished);
    }

    if (trace) {
      rec.step = t;
      rec.beam = beam;
      rec.scorer_calls = counter.calls() - calls_before;
      trace->steps.push_back(std::move(rec));
    }
    if (!raw && finished.dominates(beam)) break;
  }

  DecodeResult result;
  result.final_beam = beam;
  if (raw) {
    result.best = raw_mode_best(beam);
  } else {
    result.finished = finished.items();
    result.best = practical_best(finished, beam);
  }
  finish(result, vocab, counter.calls(), start);
  return result;
}

namespace {

class MapSearch {
 public:
  MapSearch(const Scorer& scorer, std::string_view context, std::size_t max_len)
      : scorer_(scorer),
        vocab_(scorer.vocabulary()),
        context_(context),
        max_len_(max_len) {}

  void run(const Hypothesis& h) {
    if (h.complete) {
      if (!best_ || canonical_less(h, *best_)) best_ = h;
      return;
    }
    if (h.length() >= max_len_) {
      if (!fallback_ || canonical_less(h, *fallback_)) fallback_ = h;
      return;
    }
    LogProbRow row = scorer_.next_logprobs(context_, h.tokens);
    for (TokenId id : ranked_tokens(vocab_, row)) {
      LogProb lp = row[static_cast<std::size_t>(id)];
      if (best_) {
        LogProb cum = h.cum_logprob + lp;
        if (cum < best_->cum_logprob) break;
        if (cum == best_->cum_logprob && !may_tie_break(h, id)) continue;
      }
      run(extend(h, id, lp, vocab_));
    }
  }

  // Best complete hypothesis; without one, the best prefix cut at max_len.
  const Hypothesis& result() const { return best_ ? *best_ : *fallback_; }

 private:
  // Whether some extension of h+id could still precede the incumbent under
  // the canonical order at an equal score.
  bool may_tie_break(const Hypothesis& h, TokenId id) const {
    std::vector<TokenId> prefix = h.tokens;
    prefix.push_back(id);
    const auto& incumbent = best_->tokens;
    auto [pi, ii] = std::mismatch(prefix.begin(), prefix.end(),
                                  incumbent.begin(), incumbent.end());
    if (pi == prefix.end()) return true;  // prefix of the incumbent
    if (ii == incumbent.end()) return false;
    return *pi < *ii;
  }

  const Scorer& scorer_;
  const Vocabulary& vocab_;
  std::string_view context_;
  std::size_t max_len_;
  std::optional<Hypothesis> best_;
  std::optional<Hypothesis> fallback_;
};

}  // namespace

DecodeResult exhaustive_decode(const Scorer& scorer, const DecodeInput& input,
                               const DecodeConfig& config) {
  config.validate();
  const Vocabulary& vocab = scorer.vocabulary();
  if (!power_within_budget(vocab.extension_size(), config.max_len,
                           config.node_budget)) {
    throw BudgetExceeded("exhaustive search: |V|^max_len = " +
                         std::to_string(vocab.extension_size()) + "^" +
                         std::to_string(config.max_len) + " exceeds budget " +
                         std::to_string(config.node_budget));
  }
  const auto start = Clock::now();
  CountingScorer counter(scorer);
  MapSearch search(counter, input.context, config.max_len);
  search.run(Hypothesis::initial(vocab));

  DecodeResult result;
  result.best = search.result();
  if (result.best.complete) result.finished = {result.best};
  result.final_beam = {result.best};
  finish(result, vocab, counter.calls(), start);
  return result;
}

DecodeResult decode(const Scorer& scorer, const DecodeInput& input,
                    const DecodeConfig& config, DecodeTrace* trace) {
  switch (config.strategy) {
    case Strategy::kGreedy:
      return greedy_decode(scorer, input, config, trace);
    case Strategy::kBeam:
      return beam_decode(scorer, input, config, trace);
    case Strategy::kLbs:
      return lbs_decode(scorer, input, config, trace);
    case Strategy::kLhbs:
      return lhbs_decode(scorer, input, config, trace);
    case Strategy::kExhaustive:
      return exhaustive_decode(scorer, input, config);
  }
  throw ContractViolation("unknown strategy");
}

}  // namespace seqdec
