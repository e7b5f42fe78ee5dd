#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "phasescope/dataset.hpp"
#include "test_util.hpp"

using namespace phasescope;
using V = std::vector<std::string>;

namespace {

FilterResult filter(V lines, FilterConfig cfg = {}) { return filter_sentences(lines, cfg); }

FilterConfig sized(std::size_t train, std::size_t validation, std::size_t test, std::uint64_t seed = 0) {
  FilterConfig cfg;
  cfg.train_size = train;
  cfg.validation_size = validation;
  cfg.test_size = test;
  cfg.seed = seed;
  return cfg;
}

Sentence sentence(const std::string& s) { return {text::tokenize(s), 1}; }

std::vector<ContextItem> make_items(std::size_t n, std::mt19937_64& rng) {
  std::vector<ContextItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    ContextItem it;
    for (int k = 0; k < 4; ++k) it.context.push_back(testutil::word(rng() % 6));
    it.critical_word = testutil::word(rng() % 6);
    it.item_id = make_item_id(it.sequence());
    items.push_back(it);
  }
  return items;
}

std::string dump(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds, {{"seed", 1}});
  return out.str();
}

}  // namespace

TEST(Filter, KeepsWellFormedSentence) {
  auto r = filter({"The cat sat on the mat"});
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].line, 1u);
  EXPECT_TRUE(r.rejected.empty());
}

TEST(Filter, RejectsSecondCapital) {
  EXPECT_TRUE(filter({"The cat saw Mary"}).kept.empty());
  auto r = filter({"The cat saw Mary in the garden"});
  EXPECT_TRUE(r.kept.empty());
  EXPECT_EQ(r.rejected.at("extra_capital"), 1u);
}

TEST(Filter, RejectsShortSentence) {
  auto r = filter({"Too short here"});
  EXPECT_TRUE(r.kept.empty());
  EXPECT_EQ(r.rejected.at("too_short"), 1u);
  // Five words is still too short; punctuation does not count.
  EXPECT_TRUE(filter({"The cat sat on mats . . ."}).kept.empty());
}

TEST(Filter, RequiresLeadingCapital) {
  auto r = filter({"the cat sat on the mat", "3 cats sat on the mat", "\"The cat sat on the mat"});
  EXPECT_TRUE(r.kept.empty());
  EXPECT_EQ(r.rejected.at("not_capitalized"), 3u);
}

TEST(Filter, CapitalizationRuleCanBeDisabled) {
  FilterConfig cfg;
  cfg.capitalization = false;
  EXPECT_EQ(filter({"the cat saw Mary in the garden"}, cfg).kept.size(), 1u);
}

TEST(Filter, PredicateHook) {
  FilterConfig cfg;
  cfg.predicate = [](const V& s) { return std::find(s.begin(), s.end(), "mat") == s.end(); };
  auto r = filter({"The cat sat on the mat", "The cat sat on the rug"}, cfg);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.rejected.at("predicate"), 1u);
}

TEST(Filter, InvalidUtf8Counted) {
  auto r = filter({"The cat sat on the \xFF mat"});
  EXPECT_EQ(r.rejected.at("invalid_utf8"), 1u);
}

TEST(Sample, FiveWordSentenceForcesFifthWord) {
  std::mt19937_64 rng(0);
  for (int i = 0; i < 20; ++i) {
    auto it = sample_critical_word(sentence("One two three four five"), rng);
    ASSERT_TRUE(it);
    EXPECT_EQ(it->critical_word, "five");
    EXPECT_EQ(it->context.size(), 4u);
  }
}

TEST(Sample, TooShort) {
  std::mt19937_64 rng(0);
  EXPECT_FALSE(sample_critical_word(sentence("One two three four"), rng));
  EXPECT_FALSE(sample_critical_word(sentence("One two three four ."), rng));
}

TEST(Sample, SkipsPunctuationPositions) {
  std::mt19937_64 rng(0);
  for (int i = 0; i < 50; ++i) {
    auto it = sample_critical_word(sentence("One two three four , six ."), rng);
    ASSERT_TRUE(it);
    EXPECT_EQ(it->critical_word, "six");
  }
}

TEST(Sample, DeterministicGivenSeed) {
  const auto s = sentence("The cat sat on the mat today");
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(sample_critical_word(s, a)->critical_word, sample_critical_word(s, b)->critical_word);
  }
}

TEST(Sample, ItemIdIsHashOfSequence) {
  std::mt19937_64 rng(3);
  auto it = sample_critical_word(sentence("One two three four five"), rng);
  EXPECT_EQ(it->item_id, digest_string("One two three four five"));
  EXPECT_EQ(it->item_id.size(), 16u);
}

TEST(Sample, PositionsUniformChiSquared) {
  // Ten words: six legal positions. Critical value of chi-squared with 5
  // degrees of freedom at p = 0.001 is 20.515.
  const auto s = sentence("w1 w2 w3 w4 w5 w6 w7 w8 w9 w10");
  std::mt19937_64 rng(2024);
  std::map<std::string, int> hist;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++hist[sample_critical_word(s, rng)->critical_word];
  ASSERT_EQ(hist.size(), 6u);
  const double expected = draws / 6.0;
  double chi2 = 0;
  for (const auto& [_, n] : hist) chi2 += (n - expected) * (n - expected) / expected;
  EXPECT_LT(chi2, 20.515);
}

TEST(UniformBelow, Range) {
  std::mt19937_64 rng(1);
  for (std::uint64_t n : {1ull, 2ull, 3ull, 7ull, 1000ull, (1ull << 63) + 5}) {
    for (int i = 0; i < 1000; ++i) EXPECT_LT(uniform_below(rng, n), n);
  }
  EXPECT_THROW(uniform_below(rng, 0), ArgumentError);
}

TEST(Decontaminate, InjectedTextRemoved) {
  auto idx = CorpusIndex::from_documents({"prefix text then the cat sat on the mat and more"});
  std::vector<ContextItem> items(2);
  items[0].context = {"the", "cat", "sat", "on"};
  items[0].critical_word = "the";
  items[1].context = {"glorp", "fizz", "wub", "zonk"};
  items[1].critical_word = "blat";
  const CorpusIndex* ptrs[] = {&idx};
  auto out = decontaminate(items, ptrs);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].critical_word, "blat");
}

TEST(Decontaminate, AnyIndexSuffices) {
  auto a = CorpusIndex::from_documents({"x y z"});
  auto b = CorpusIndex::from_documents({"p q r s t"});
  std::vector<ContextItem> items(1);
  items[0].context = {"p", "q", "r", "s"};
  items[0].critical_word = "t";
  const CorpusIndex* ptrs[] = {&a, &b};
  EXPECT_TRUE(decontaminate(items, ptrs).empty());
  const CorpusIndex* only_a[] = {&a};
  EXPECT_EQ(decontaminate(items, only_a).size(), 1u);
}

TEST(Decontaminate, MatchesNaiveOracle) {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto docs = testutil::random_docs(rng, 4000, 3, 30);
    auto idx = CorpusIndex::from_documents(testutil::lines_of(docs));
    auto items = make_items(300, rng);
    // Alphabet 6 vs corpus alphabet 3, so a mix of hits and misses.
    for (auto& it : items) {
      for (auto& w : it.context) w = testutil::word(std::stoul(w.substr(1)) % 4);
      it.critical_word = testutil::word(std::stoul(it.critical_word.substr(1)) % 4);
    }
    std::set<std::size_t> expected;
    for (std::size_t i = 0; i < items.size(); ++i) {
      items[i].source_line = i;
      if (testutil::naive_count(docs, items[i].sequence()) == 0) expected.insert(i);
    }
    const CorpusIndex* ptrs[] = {&idx};
    for (unsigned threads : {1u, 4u}) {
      std::set<std::size_t> got;
      for (const auto& it : decontaminate(items, ptrs, threads)) got.insert(it.source_line);
      EXPECT_EQ(got, expected);
    }
    EXPECT_FALSE(expected.empty());
    EXPECT_LT(expected.size(), items.size());
  }
}

TEST(DedupeSplit, DuplicatesCollapse) {
  std::vector<ContextItem> items(3);
  for (auto& it : items) {
    it.context = {"a", "b", "c", "d"};
    it.critical_word = "e";
    it.item_id = make_item_id(it.sequence());
  }
  std::mt19937_64 rng(0);
  auto ds = dedupe_and_split(items, sized(1, 1, 1), rng);
  EXPECT_EQ(ds.items.size(), 1u);
  EXPECT_EQ(ds.duplicates, 2u);
  EXPECT_FALSE(ds.warnings.empty());
}

TEST(DedupeSplit, SplitsPartitionTheSet) {
  std::mt19937_64 gen(5);
  auto items = make_items(2000, gen);
  std::mt19937_64 rng(0);
  FilterConfig cfg;
  cfg.train_size = 300;
  cfg.validation_size = 100;
  cfg.test_size = 50;
  auto ds = dedupe_and_split(items, cfg, rng);
  EXPECT_EQ(ds.count(Split::train), 300u);
  EXPECT_EQ(ds.count(Split::validation), 100u);
  EXPECT_EQ(ds.count(Split::test), 50u);
  std::set<std::string> ids;
  for (const auto& it : ds.items) EXPECT_TRUE(ids.insert(it.item_id).second);
  EXPECT_EQ(ds.items.size() + ds.duplicates + ds.surplus, items.size());
  EXPECT_TRUE(ds.warnings.empty());
}

TEST(DedupeSplit, ShortfallScalesProportionally) {
  std::mt19937_64 gen(6);
  auto items = make_items(100, gen);
  std::mt19937_64 rng(0);
  FilterConfig cfg;
  cfg.train_size = 100;
  cfg.validation_size = 50;
  cfg.test_size = 50;
  auto ds = dedupe_and_split(items, cfg, rng);
  const auto n = ds.items.size();
  EXPECT_EQ(ds.count(Split::validation), cfg.validation_size * n / 200);
  EXPECT_EQ(ds.count(Split::test), cfg.test_size * n / 200);
  EXPECT_EQ(ds.count(Split::train) + ds.count(Split::validation) + ds.count(Split::test), n);
  EXPECT_EQ(ds.surplus, 0u);
  EXPECT_EQ(ds.warnings.size(), 1u);
}

TEST(DedupeSplit, ZeroSplitSizeRejected) {
  std::mt19937_64 rng(0);
  FilterConfig cfg;
  cfg.test_size = 0;
  EXPECT_THROW(dedupe_and_split({}, cfg, rng), ArgumentError);
}

TEST(DedupeSplit, SameSeedSameBytes) {
  std::mt19937_64 gen(8);
  auto items = make_items(500, gen);
  auto cfg = sized(50, 20, 20);
  std::mt19937_64 a(17), b(17), c(18);
  EXPECT_EQ(dump(dedupe_and_split(items, cfg, a)), dump(dedupe_and_split(items, cfg, b)));
  EXPECT_NE(dump(dedupe_and_split(items, cfg, a)), dump(dedupe_and_split(items, cfg, c)));
}

TEST(Build, EveryInputAccountedFor) {
  V lines = {
      "The cat sat on the mat today",
      "The cat sat on the mat today",           // duplicate sentence
      "Short one",                              // too short
      "The dog ate the bone in the yard",
      "The bird flew over the tall old tree",
      "A fish swam in the cold dark lake",
      "Mary had a little lamb and more",        // fine: only the first word is capitalized
      "The man met Bob near the small shop",    // extra capital
      "one two three four five six seven",      // not capitalized
  };
  auto corpus = CorpusIndex::from_documents({"the bird flew over the tall old tree"});
  const CorpusIndex* ptrs[] = {&corpus};
  auto cfg = sized(2, 1, 1, 3);
  auto r = build_dataset(lines, ptrs, cfg);
  EXPECT_EQ(r.dataset.items.size() + r.rejected_total(), lines.size());
  EXPECT_EQ(r.rejected.at("duplicate_sentence"), 1u);
  EXPECT_EQ(r.rejected.at("too_short"), 1u);
  EXPECT_EQ(r.rejected.at("extra_capital"), 1u);
  EXPECT_EQ(r.rejected.at("not_capitalized"), 1u);
  for (const auto& it : r.dataset.items) {
    EXPECT_GE(it.context.size(), 4u);
    EXPECT_EQ(corpus.count(std::span<const std::string>(it.sequence())), 0u);
  }
}

TEST(Build, ContaminationRemovedWhateverTheSampledPosition) {
  // Every candidate sentence is in the corpus, so every truncation is too.
  V lines = {"The cat sat on the mat today", "The dog ate the bone in the yard"};
  auto corpus = CorpusIndex::from_documents(lines);
  const CorpusIndex* ptrs[] = {&corpus};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FilterConfig cfg;
    cfg.seed = seed;
    auto r = build_dataset(lines, ptrs, cfg);
    EXPECT_TRUE(r.dataset.items.empty());
    EXPECT_EQ(r.rejected.at("contaminated"), 2u);
  }
}

TEST(Build, VocabularyPredicateOnTruncatedSequence) {
  V lines = {"The cat sat on the mat today"};
  FilterConfig cfg;
  cfg.vocabulary = [](const V& seq) { return seq.size() <= 5; };  // rejects any truncation past the fifth word
  cfg.seed = 0;
  int rejected = 0, kept = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    cfg.seed = seed;
    auto r = build_dataset(lines, {}, cfg);
    rejected += r.rejected.count("vocabulary") ? 1 : 0;
    kept += static_cast<int>(r.dataset.items.size());
  }
  EXPECT_GT(rejected, 0);
  EXPECT_GT(kept, 0);
}

TEST(File, RoundTrip) {
  std::mt19937_64 gen(2);
  auto items = make_items(40, gen);
  std::mt19937_64 rng(0);
  auto ds = dedupe_and_split(items, sized(10, 5, 5), rng);
  std::istringstream in(dump(ds));
  auto back = read_dataset(in);
  EXPECT_EQ(back.meta.at("seed"), 1);
  EXPECT_EQ(back.meta.at("counts").at("train"), 10);
  ASSERT_EQ(back.items.size(), ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    EXPECT_EQ(back.items[i].item_id, ds.items[i].item_id);
    EXPECT_EQ(back.items[i].context, ds.items[i].context);
    EXPECT_EQ(back.items[i].critical_word, ds.items[i].critical_word);
    EXPECT_EQ(back.items[i].split, ds.items[i].split);
  }
}

TEST(File, Errors) {
  std::istringstream bad("{not json\n");
  EXPECT_THROW(read_dataset(bad), InputError);
  std::istringstream dup(
      R"({"item_id":"x","context":["a"],"critical_word":"b","split":"train"})"
      "\n"
      R"({"item_id":"x","context":["a"],"critical_word":"c","split":"test"})"
      "\n");
  EXPECT_THROW(read_dataset(dup), InputError);
  std::istringstream split(R"({"item_id":"x","context":["a"],"critical_word":"b","split":"dev"})");
  EXPECT_THROW(read_dataset(split), InputError);
}
