#include <cmath>
#include <map>
#include <string>

#include <gtest/gtest.h>

#include "seqdec/oracle.h"
#include "seqdec/scorer.h"
#include "support/reference.h"

namespace seqdec {
namespace {

using testing::make_hypothesis;
using testing::tiny3;
using testing::tokens_to_string;

TEST(Enumerate, Tiny3CompleteSequences) {
  TableModel m = tiny3();
  const Vocabulary& v = m.vocabulary();
  EnumerationResult r = enumerate_all(m, "", 3);
  std::map<std::string, double> p;
  for (const auto& s : r.all_complete) {
    p[tokens_to_string(v, s.tokens)] = std::exp(s.logprob);
  }
  std::map<std::string, double> expected{
      {"BOS EOS", 0.1},       {"BOS a EOS", 0.35},   {"BOS b EOS", 0.04},
      {"BOS a a EOS", 0.025}, {"BOS a b EOS", 0.05}, {"BOS b a EOS", 0.14},
      {"BOS b b EOS", 0.04}};
  ASSERT_EQ(p.size(), expected.size());
  for (const auto& [seq, prob] : expected) {
    ASSERT_TRUE(p.count(seq)) << seq;
    EXPECT_NEAR(p[seq], prob, 1e-12) << seq;
  }
  EXPECT_EQ(r.count, 7u);
  EXPECT_NEAR(r.total_mass, 1.0, 1e-12);
}

TEST(Enumerate, MassIsOneOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto c = testing::random_case(seed);
    EnumerationResult r = enumerate_all(c.model, "", c.n_max);
    EXPECT_NEAR(r.total_mass, 1.0, 1e-9) << seed;
    // Σ_{n<n_max} (|V̄|-1)^n complete sequences.
    std::uint64_t regular = c.model.vocabulary().extension_size() - 1;
    std::uint64_t expected = 0, power = 1;
    for (std::size_t n = 0; n < c.n_max; ++n, power *= regular) expected += power;
    EXPECT_EQ(r.count, expected) << seed;
  }
}

TEST(Enumerate, BudgetGuard) {
  TableModel m = tiny3();
  EXPECT_THROW(enumerate_all(m, "", 5, 100), BudgetExceeded);
  EXPECT_NO_THROW(enumerate_all(m, "", 4, 81));
}

TEST(BruteForceMap, Tiny3) {
  TableModel m = tiny3();
  Hypothesis h = brute_force_map(m, "", 3);
  EXPECT_EQ(tokens_to_string(m.vocabulary(), h.tokens), "BOS a EOS");
  EXPECT_NEAR(h.cum_logprob, std::log(0.35), 1e-12);
  EXPECT_TRUE(h.complete);
  ASSERT_EQ(h.step_logprobs.size(), 2u);
  EXPECT_NEAR(h.step_logprobs[0], std::log(0.5), 1e-15);
}

TEST(BruteForceMap, OneStepLimit) {
  TableModel m = tiny3();
  Hypothesis h = brute_force_map(m, "", 1);
  EXPECT_EQ(tokens_to_string(m.vocabulary(), h.tokens), "BOS EOS");
}

TEST(BruteForceMap, TieBreaksOnTokens) {
  // a and b both at 0.5 with EOS forced afterwards: both score ln 0.5.
  Vocabulary v({"a", "b", "EOS", "BOS"}, 3, 2);
  std::map<std::string, std::vector<double>> rows{{"", {0.5, 0.5, 0.0, 0.0}}};
  TableModel m(v, rows, {0.0, 0.0, 1.0, 0.0});
  Hypothesis h = brute_force_map(m, "", 3);
  EXPECT_EQ(tokens_to_string(v, h.tokens), "BOS a EOS");
}

TEST(BreadthFirstLookahead, Tiny3Values) {
  TableModel m = tiny3();
  const Vocabulary& v = m.vocabulary();
  TokenId a = *v.find("a"), b = *v.find("b");
  Hypothesis hb = make_hypothesis(m, "", {b});
  EXPECT_NEAR(hb.cum_logprob + breadth_first_lookahead(m, "", hb, 1),
              std::log(0.28), 1e-12);
  Hypothesis root = Hypothesis::initial(v);
  // Best 2-token continuation from BOS: a EOS (.35) beats b a (.28).
  EXPECT_NEAR(breadth_first_lookahead(m, "", root, 2), std::log(0.35), 1e-12);
  EXPECT_EQ(breadth_first_lookahead(m, "", root, 0), 0.0);
  Hypothesis done = make_hypothesis(m, "", {a, v.eos()});
  EXPECT_EQ(breadth_first_lookahead(m, "", done, 4), 0.0);
}

TEST(BreadthFirstLookahead, MaxLenCap) {
  TableModel m = testing::one_hot_model("a");
  Hypothesis root = Hypothesis::initial(m.vocabulary());
  // Only "a a a ..." has mass; no branch reaches EOS within 2 tokens.
  EXPECT_EQ(breadth_first_lookahead(m, "", root, 3, 3), 0.0);
  EXPECT_EQ(breadth_first_lookahead(m, "", root, 3, 2), kNegInf);
  EXPECT_EQ(breadth_first_lookahead(m, "", root, 3), 0.0);
}

}  // namespace
}  // namespace seqdec
