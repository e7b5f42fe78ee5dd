#include <gtest/gtest.h>

#include "phasescope/text.hpp"

using namespace phasescope::text;
using V = std::vector<std::string>;

TEST(Tokenize, SplitsOnWhitespace) {
  EXPECT_EQ(tokenize("a b a b a"), (V{"a", "b", "a", "b", "a"}));
  EXPECT_EQ(tokenize("  a\t\tb \n"), (V{"a", "b"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t ").empty());
}

TEST(Tokenize, DetachesEdgePunctuation) {
  EXPECT_EQ(tokenize("end."), (V{"end", "."}));
  EXPECT_EQ(tokenize("(end)."), (V{"(", "end", ")", "."}));
  EXPECT_EQ(tokenize("\"Hi,\" she said..."), (V{"\"", "Hi", ",", "\"", "she", "said", ".", ".", "."}));
}

TEST(Tokenize, KeepsInnerPunctuation) {
  EXPECT_EQ(tokenize("don't re-use e.g."), (V{"don't", "re-use", "e.g", "."}));
  EXPECT_EQ(tokenize("3.14"), (V{"3.14"}));
}

TEST(Tokenize, AllPunctuationChunk) {
  EXPECT_EQ(tokenize("-- ?!"), (V{"-", "-", "?", "!"}));
}

TEST(Tokenize, UnicodeWhitespaceSeparates) {
  // U+00A0 no-break space and U+3000 ideographic space
  EXPECT_EQ(tokenize("a\xC2\xA0" "b\xE3\x80\x80" "c"), (V{"a", "b", "c"}));
}

TEST(Tokenize, OptionalLowercase) {
  EXPECT_EQ(tokenize("The CAT", true), (V{"the", "cat"}));
  EXPECT_EQ(tokenize("\xC3\x89" "cole", true), (V{"\xC3\xA9" "cole"}));  // École
  EXPECT_EQ(tokenize("The CAT"), (V{"The", "CAT"}));
}

TEST(Utf8, RejectsMalformed) {
  EXPECT_FALSE(find_invalid_utf8("plain ascii"));
  EXPECT_FALSE(find_invalid_utf8("caf\xC3\xA9"));
  EXPECT_EQ(find_invalid_utf8("ab\xFF"), 2u);
  EXPECT_EQ(find_invalid_utf8("\xC0\x80"), 0u);          // overlong NUL
  EXPECT_EQ(find_invalid_utf8("x\xED\xA0\x80"), 1u);     // surrogate
  EXPECT_EQ(find_invalid_utf8("\xF4\x90\x80\x80"), 0u);  // above U+10FFFF
  EXPECT_EQ(find_invalid_utf8("\xE2\x82"), 0u);          // truncated
}

TEST(Utf8, EncodeDecodeRoundTrip) {
  for (char32_t c : {U'a', U'é', U'Ж', U'€', U'\U0001F600'}) {
    std::string s;
    append_utf8(s, c);
    auto cp = decode_utf8(s, 0);
    ASSERT_TRUE(cp);
    EXPECT_EQ(cp->value, c);
    EXPECT_EQ(cp->length, s.size());
  }
}

TEST(Case, UppercaseDetection) {
  EXPECT_TRUE(starts_upper("The"));
  EXPECT_FALSE(starts_upper("the"));
  EXPECT_FALSE(starts_upper("3rd"));
  EXPECT_TRUE(starts_upper("\xC3\x89" "cole"));
  EXPECT_TRUE(starts_upper("\xD0\x96"));   // Ж
  EXPECT_FALSE(starts_upper("\xD0\xB6"));  // ж
  EXPECT_TRUE(starts_upper("\xCE\xA9"));   // Ω
  EXPECT_FALSE(starts_upper(""));
}

TEST(Case, FoldMatchesUpperCoverage) {
  for (char32_t c = 0; c < 0x500; ++c) {
    if (c >= 0xD800) break;
    if (is_upper(c)) {
      EXPECT_NE(to_lower(c), c) << std::hex << static_cast<unsigned>(c);
      EXPECT_FALSE(is_upper(to_lower(c))) << std::hex << static_cast<unsigned>(c);
    }
  }
  EXPECT_EQ(fold_case("\xC5\xB8"), "\xC3\xBF");  // Ÿ -> ÿ
}

TEST(Words, PunctuationIsNotAWord) {
  EXPECT_TRUE(is_word("cat"));
  EXPECT_TRUE(is_word("a"));
  EXPECT_FALSE(is_word("."));
  EXPECT_FALSE(is_word(""));
  EXPECT_TRUE(is_word("..."));  // only single-character tokens are punctuation
}
