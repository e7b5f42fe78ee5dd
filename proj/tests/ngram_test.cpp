#include <gtest/gtest.h>

#include <random>

#include "phasescope/ngram.hpp"
#include "test_util.hpp"

using namespace phasescope;
using V = std::vector<std::string>;

namespace {

const CorpusIndex& toy() {
  static const auto idx = CorpusIndex::from_documents({"a b a b a"});
  return idx;
}

NGramScore score(const CorpusIndex& idx, V ctx, const std::string& w, int n, BackoffConfig cfg = {}) {
  return backoff_score(idx, std::span<const std::string>(ctx), w, n, cfg);
}

}  // namespace

TEST(Config, Defaults) {
  BackoffConfig cfg;
  EXPECT_EQ(cfg.alpha, 0.4);
  EXPECT_EQ(cfg.max_n, 5);
  EXPECT_TRUE(cfg.token_level_denominator);
}

TEST(Config, Validation) {
  EXPECT_THROW((BackoffConfig{0.0}).validate(), ArgumentError);
  EXPECT_THROW((BackoffConfig{1.5}).validate(), ArgumentError);
  EXPECT_NO_THROW((BackoffConfig{1.0}).validate());
  EXPECT_THROW((BackoffConfig{0.4, 0}).validate(), ArgumentError);
  EXPECT_THROW((BackoffConfig{0.4, 9}).validate(), ArgumentError);
}

TEST(Unigram, ToyCounts) {
  EXPECT_DOUBLE_EQ(unigram_score(toy(), "a").score, 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(unigram_score(toy(), "b").score, 2.0 / 5.0);
}

TEST(Unigram, OutOfVocabularyFloor) {
  const auto s = unigram_score(toy(), "zzz");
  EXPECT_EQ(s.score, 1.0 / 5.0);
  EXPECT_EQ(s.log_score, std::log(0.2));
}

TEST(Unigram, DenominatorChoice) {
  // 6 tokens, 4 of them words.
  const auto idx = CorpusIndex::from_documents({"end.", "so, it goes"});
  EXPECT_EQ(unigram_score(idx, "it").score, 1.0 / 6.0);
  EXPECT_EQ(unigram_score(idx, "it", {0.4, 5, false}).score, 1.0 / 4.0);
}

TEST(Backoff, ObservedBigramIsCountRatio) {
  const auto s = score(toy(), {"a"}, "b", 2);
  EXPECT_EQ(s.score, 2.0 / 3.0);
  EXPECT_EQ(s.backoff_depth, 0);
  EXPECT_EQ(s.order, 2);
}

TEST(Backoff, UnseenBigramBacksOffToUnigramFloor) {
  const auto s = score(toy(), {"b"}, "c", 2);
  EXPECT_EQ(s.score, 0.4 * (1.0 / 5.0));
  EXPECT_NEAR(s.score, 0.08, 1e-15);
  EXPECT_EQ(s.backoff_depth, 1);
}

TEST(Backoff, OrderOneIsUnigram) {
  for (const std::string w : {"a", "b", "zzz"}) {
    EXPECT_EQ(score(toy(), {"a", "b"}, w, 1).score, unigram_score(toy(), w).score);
  }
}

TEST(Backoff, EmptyContextCollapsesToUnigram) {
  for (int n = 1; n <= 5; ++n) {
    const auto s = score(toy(), {}, "b", n);
    EXPECT_EQ(s.score, unigram_score(toy(), "b").score);
    EXPECT_EQ(s.order, 1);
    EXPECT_EQ(s.backoff_depth, 0);
  }
}

TEST(Backoff, ShortContextReducesOrderWithoutDiscount) {
  // n = 5 with a single context word behaves as n = 2.
  EXPECT_EQ(score(toy(), {"a"}, "b", 5).score, score(toy(), {"a"}, "b", 2).score);
  EXPECT_EQ(score(toy(), {"a"}, "b", 5).order, 2);
}

TEST(Backoff, UsesOnlyLastNMinusOneWords) {
  // "zzz" is outside the 3-gram window and must not matter.
  EXPECT_EQ(score(toy(), {"zzz", "b", "a"}, "b", 3).score, score(toy(), {"b", "a"}, "b", 3).score);
  EXPECT_EQ(score(toy(), {"b", "a"}, "b", 3).score, 0.5);  // c(b a b)=1, c(b a)=2
}

TEST(Backoff, InvalidOrder) {
  EXPECT_THROW(score(toy(), {"a"}, "b", 0), ArgumentError);
}

TEST(Backoff, EachDepthMultipliesByAlpha) {
  const auto idx = CorpusIndex::from_documents({"x y z", "q"});
  // w = q: no n-gram with q in context is observed, so depth grows with n.
  for (double alpha : {0.4, 0.25, 1.0}) {
    BackoffConfig cfg{alpha};
    const double uni = unigram_score(idx, "q").score;
    for (int n = 1; n <= 4; ++n) {
      const auto s = score(idx, {"x", "y", "z"}, "q", n, cfg);
      EXPECT_EQ(s.backoff_depth, n - 1);
      double expect = uni;
      for (int d = 0; d < n - 1; ++d) expect = alpha * expect;
      EXPECT_EQ(s.score, expect);
    }
  }
}

TEST(Backoff, MatchesReferenceOnRandomCorpora) {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t alphabet = 3 + seed;
    auto docs = testutil::random_docs(rng, 1500, alphabet, 20);
    auto idx = CorpusIndex::from_documents(testutil::lines_of(docs));
    for (int q = 0; q < 100; ++q) {
      V ctx;
      for (std::size_t l = rng() % 6; l > 0; --l) ctx.push_back(testutil::word(rng() % (alphabet + 1)));
      const auto w = testutil::word(rng() % (alphabet + 1));
      for (int n = 1; n <= 5; ++n) {
        const auto s = score(idx, ctx, w, n);
        ASSERT_EQ(s.score, testutil::reference_backoff(docs, ctx, w, n, 0.4));
        ASSERT_GT(s.score, 0.0);
        ASSERT_LE(s.score, 1.0);
        ASSERT_LE(s.log_score, 0.0);
        ASSERT_EQ(s.log_score, std::log(s.score));
        ASSERT_LE(s.backoff_depth, n - 1);
      }
    }
  }
}

TEST(Backoff, ObservedGramHasNoDiscount) {
  std::mt19937_64 rng(42);
  auto docs = testutil::random_docs(rng, 1000, 3, 20);
  auto idx = CorpusIndex::from_documents(testutil::lines_of(docs));
  for (int q = 0; q < 200; ++q) {
    const auto& d = docs[rng() % docs.size()];
    if (d.size() < 2) continue;
    const auto end = 1 + rng() % (d.size() - 1);  // critical index
    const auto begin = end >= 4 ? end - 4 : 0;
    V ctx(d.begin() + static_cast<std::ptrdiff_t>(begin), d.begin() + static_cast<std::ptrdiff_t>(end));
    const auto s = score(idx, ctx, d[end], 5);
    EXPECT_EQ(s.backoff_depth, 0);
    V gram = ctx;
    gram.push_back(d[end]);
    EXPECT_EQ(s.score, static_cast<double>(testutil::naive_count(docs, gram)) /
                           static_cast<double>(testutil::naive_count(docs, ctx)));
  }
}

TEST(ScoreItems, TableShape) {
  std::vector<ScoringItem> items = {{"i1", {"a"}, "b"}, {"i2", {"b", "a"}, "zzz"}};
  auto cols = score_items(toy(), items, {1, 5});
  ASSERT_EQ(cols.log_scores.size(), 2u);
  EXPECT_EQ(cols.log_scores.at(1).size(), 2u);
  EXPECT_EQ(cols.log_scores.at(5).size(), 2u);
  EXPECT_TRUE(cols.errors.empty());
  EXPECT_EQ(cols.log_scores.at(1)[0], std::log(2.0 / 5.0));
}

TEST(ScoreItems, EmptyItemList) {
  auto cols = score_items(toy(), {}, {1, 2});
  EXPECT_TRUE(cols.log_scores.at(1).empty());
  EXPECT_TRUE(cols.errors.empty());
}

TEST(ScoreItems, OrderOutsideRange) {
  std::vector<ScoringItem> items = {{"i1", {"a"}, "b"}};
  EXPECT_THROW(score_items(toy(), items, {6}), ArgumentError);
  EXPECT_THROW(score_items(toy(), items, {0}), ArgumentError);
}

TEST(ScoreItems, FailedItemBecomesNaN) {
  std::vector<ScoringItem> items = {{"ok", {"a"}, "b"}, {"bad", {"a"}, ""}};
  auto cols = score_items(toy(), items, {2});
  EXPECT_FALSE(std::isnan(cols.log_scores.at(2)[0]));
  EXPECT_TRUE(std::isnan(cols.log_scores.at(2)[1]));
  ASSERT_EQ(cols.errors.size(), 1u);
  EXPECT_EQ(cols.errors[0].item_id, "bad");
}

TEST(ScoreItems, InvariantToBatchingAndThreads) {
  std::mt19937_64 rng(7);
  auto docs = testutil::random_docs(rng, 5000, 6);
  auto idx = CorpusIndex::from_documents(testutil::lines_of(docs));
  std::vector<ScoringItem> items;
  for (int i = 0; i < 400; ++i) {
    ScoringItem it{"i" + std::to_string(i), {}, testutil::word(rng() % 7)};
    for (int l = 0; l < 4; ++l) it.context.push_back(testutil::word(rng() % 6));
    items.push_back(it);
  }
  const auto whole = score_items(idx, items, {1, 2, 3, 4, 5});
  for (unsigned threads : {2u, 3u, 8u}) {
    EXPECT_EQ(score_items(idx, items, {1, 2, 3, 4, 5}, {}, threads).log_scores, whole.log_scores);
  }
  // Chunked sequential evaluation.
  for (std::size_t start = 0; start < items.size(); start += 37) {
    const auto len = std::min<std::size_t>(37, items.size() - start);
    auto part = score_items(idx, std::span(items).subspan(start, len), {1, 5});
    for (std::size_t i = 0; i < len; ++i) {
      ASSERT_EQ(part.log_scores.at(1)[i], whole.log_scores.at(1)[start + i]);
      ASSERT_EQ(part.log_scores.at(5)[i], whole.log_scores.at(5)[start + i]);
    }
  }
}
