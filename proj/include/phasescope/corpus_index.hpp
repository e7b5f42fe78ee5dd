#pragma once

// Word-level corpus tokenization and an immutable suffix-array index that
// answers exact occurrence counts of arbitrary token sequences.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "phasescope/error.hpp"
#include "phasescope/text.hpp"

namespace phasescope {

using TokenId = std::uint32_t;

/// Identifier of the document-boundary sentinel.
inline constexpr TokenId kSentinel = 0;

namespace detail {
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};
}  // namespace detail

/// Bijective token string <-> dense id table. Id 0 is the sentinel and has
/// the empty string as its spelling; no real token is empty.
class Vocabulary {
 public:
  Vocabulary() { strings_.emplace_back(); }

  std::optional<TokenId> find(std::string_view token) const {
    if (token.empty()) return std::nullopt;
    auto it = ids_.find(token);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  TokenId intern(std::string_view token) {
    if (token.empty()) throw ArgumentError("empty token cannot be interned");
    if (auto id = find(token)) return *id;
    const auto id = static_cast<TokenId>(strings_.size());
    strings_.emplace_back(token);
    ids_.emplace(strings_.back(), id);
    return id;
  }

  const std::string& token(TokenId id) const { return strings_.at(id); }

  /// Number of ids including the sentinel.
  std::size_t size() const { return strings_.size(); }

 private:
  std::vector<std::string> strings_;
  std::unordered_map<std::string, TokenId, detail::StringHash, std::equal_to<>> ids_;
};

/// Flat token stream; every document is followed by exactly one sentinel.
struct TokenCorpus {
  std::vector<TokenId> tokens;
  std::size_t documents = 0;

  /// |C|: number of non-sentinel positions.
  std::uint64_t total_tokens() const { return tokens.size() - documents; }
};

struct TokenizeOptions {
  bool lowercase = false;
};

/// One document per line. Blank lines carry no tokens and are skipped.
/// Throws InputError (with the 1-based line number) on invalid UTF-8.
inline std::pair<TokenCorpus, Vocabulary> tokenize_corpus(std::istream& in,
                                                          TokenizeOptions opts = {}) {
  TokenCorpus corpus;
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto bad = text::find_invalid_utf8(line)) {
      throw InputError("invalid UTF-8 on line " + std::to_string(line_no) + " at byte " +
                       std::to_string(*bad));
    }
    auto words = text::tokenize(line, opts.lowercase);
    if (words.empty()) continue;
    for (const auto& w : words) corpus.tokens.push_back(vocab.intern(w));
    corpus.tokens.push_back(kSentinel);
    ++corpus.documents;
  }
  return {std::move(corpus), std::move(vocab)};
}

inline std::pair<TokenCorpus, Vocabulary> tokenize_corpus(const std::vector<std::string>& docs,
                                                          TokenizeOptions opts = {}) {
  std::string joined;
  for (const auto& d : docs) {
    joined += d;
    joined += '\n';
  }
  std::istringstream in(joined);
  return tokenize_corpus(in, opts);
}

/// Suffix array by prefix doubling with two counting-sort passes per round,
/// O(n log n). A suffix that is a proper prefix of another sorts first.
inline std::vector<std::uint64_t> build_suffix_array(std::span<const TokenId> text,
                                                     std::size_t alphabet) {
  const std::size_t n = text.size();
  std::vector<std::uint64_t> sa(n);
  if (n == 0) return sa;

  std::vector<std::uint32_t> order(n), rank(n), tmp(n);
  std::vector<std::uint32_t> bucket(std::max(n, alphabet) + 2);

  // Initial order by first token.
  for (std::size_t i = 0; i < n; ++i) ++bucket[text[i] + 1];
  for (std::size_t i = 1; i < bucket.size(); ++i) bucket[i] += bucket[i - 1];
  for (std::size_t i = 0; i < n; ++i) order[bucket[text[i]]++] = static_cast<std::uint32_t>(i);
  std::uint32_t classes = 1;
  rank[order[0]] = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (text[order[i]] != text[order[i - 1]]) ++classes;
    rank[order[i]] = classes - 1;
  }

  for (std::size_t k = 1; classes < n; k *= 2) {
    // Suffixes with no second half (i + k >= n) sort first, in increasing i;
    // the rest follow in the order of their second half.
    std::size_t pos = 0;
    for (std::size_t i = n - std::min(n, k); i < n; ++i) tmp[pos++] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < n; ++i) {
      if (order[i] >= k) tmp[pos++] = order[i] - static_cast<std::uint32_t>(k);
    }
    // Stable counting sort by first-half rank.
    std::fill(bucket.begin(), bucket.begin() + classes + 1, 0);
    for (std::size_t i = 0; i < n; ++i) ++bucket[rank[i] + 1];
    for (std::size_t i = 1; i <= classes; ++i) bucket[i] += bucket[i - 1];
    for (std::size_t i = 0; i < n; ++i) order[bucket[rank[tmp[i]]]++] = tmp[i];

    auto second = [&](std::uint32_t i) -> std::int64_t {
      return i + k < n ? static_cast<std::int64_t>(rank[i + k]) : -1;
    };
    tmp[order[0]] = 0;
    classes = 1;
    for (std::size_t i = 1; i < n; ++i) {
      const auto a = order[i - 1], b = order[i];
      if (rank[a] != rank[b] || second(a) != second(b)) ++classes;
      tmp[b] = classes - 1;
    }
    std::swap(rank, tmp);
  }
  for (std::size_t i = 0; i < n; ++i) sa[i] = order[i];
  return sa;
}

/// Immutable index over a token corpus. Safe for concurrent reads.
class CorpusIndex {
 public:
  static constexpr std::array<char, 4> kMagic = {'P', 'H', 'S', 'C'};
  static constexpr std::uint8_t kVersion = 0x01;

  /// Throws ArgumentError on an empty corpus.
  static CorpusIndex build(TokenCorpus corpus, Vocabulary vocab) {
    if (corpus.tokens.empty() || corpus.total_tokens() == 0) {
      throw ArgumentError("cannot index an empty corpus");
    }
    CorpusIndex idx;
    idx.suffixes_ = build_suffix_array(corpus.tokens, vocab.size());
    idx.total_ = corpus.total_tokens();
    idx.documents_ = corpus.documents;
    idx.tokens_ = std::move(corpus.tokens);
    idx.vocab_ = std::move(vocab);
    idx.count_words();
    return idx;
  }

  static CorpusIndex from_documents(const std::vector<std::string>& docs,
                                    TokenizeOptions opts = {}) {
    auto [corpus, vocab] = tokenize_corpus(docs, opts);
    return build(std::move(corpus), std::move(vocab));
  }

  /// Exact occurrence count of `query` as a contiguous run of tokens.
  /// Queries cannot contain the sentinel, so matches never cross documents.
  std::uint64_t count(std::span<const TokenId> query) const {
    if (query.empty()) throw ArgumentError("count query must be non-empty");
    if (std::find(query.begin(), query.end(), kSentinel) != query.end()) return 0;
    auto [lo, hi] = equal_range(query);
    return hi - lo;
  }

  /// Words are looked up in the vocabulary; any unknown word gives 0.
  std::uint64_t count(std::span<const std::string> words) const {
    if (words.empty()) throw ArgumentError("count query must be non-empty");
    auto ids = lookup(words);
    return ids ? count(*ids) : 0;
  }

  bool contains(std::span<const TokenId> query) const { return count(query) > 0; }
  bool contains(std::span<const std::string> words) const { return count(words) > 0; }

  std::optional<std::vector<TokenId>> lookup(std::span<const std::string> words) const {
    std::vector<TokenId> ids;
    ids.reserve(words.size());
    for (const auto& w : words) {
      auto id = vocab_.find(w);
      if (!id) return std::nullopt;
      ids.push_back(*id);
    }
    return ids;
  }

  /// |C|, all non-sentinel positions (punctuation tokens included).
  std::uint64_t total_tokens() const { return total_; }
  /// Non-sentinel positions holding a word token (not lone punctuation).
  std::uint64_t word_tokens() const { return words_; }
  std::size_t documents() const { return documents_; }
  std::size_t length() const { return tokens_.size(); }

  const Vocabulary& vocabulary() const { return vocab_; }
  std::span<const TokenId> tokens() const { return tokens_; }
  std::span<const std::uint64_t> suffix_array() const { return suffixes_; }

  void save(std::ostream& out) const {
    out.write(kMagic.data(), kMagic.size());
    put<std::uint8_t>(out, kVersion);
    put<std::uint64_t>(out, tokens_.size());
    put<std::uint64_t>(out, total_);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(vocab_.size()));
    for (std::size_t id = 0; id < vocab_.size(); ++id) {
      const auto& s = vocab_.token(static_cast<TokenId>(id));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
      out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    for (auto t : tokens_) put<std::uint32_t>(out, t);
    for (auto s : suffixes_) put<std::uint64_t>(out, s);
    if (!out) throw IoError("failed writing index");
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save(out);
    out.flush();
    if (!out) throw IoError("failed writing " + path);
  }

  static CorpusIndex load(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in) throw FormatError("index truncated in header");
    if (magic != kMagic) throw FormatError("bad index magic");
    if (get<std::uint8_t>(in) != kVersion) throw FormatError("unsupported index version");
    const auto length = get<std::uint64_t>(in);
    const auto total = get<std::uint64_t>(in);
    const auto vocab_size = get<std::uint32_t>(in);
    if (vocab_size == 0) throw FormatError("vocabulary must contain the sentinel");

    CorpusIndex idx;
    for (std::uint32_t id = 0; id < vocab_size; ++id) {
      const auto len = get<std::uint32_t>(in);
      std::string s(len, '\0');
      in.read(s.data(), len);
      if (!in) throw FormatError("index truncated in vocabulary");
      if (id == 0) {
        if (!s.empty()) throw FormatError("sentinel entry must be empty");
      } else if (s.empty() || idx.vocab_.intern(s) != id) {
        throw FormatError("vocabulary is not a bijection");
      }
    }
    idx.tokens_.resize(length);
    for (auto& t : idx.tokens_) {
      t = get<std::uint32_t>(in);
      if (t >= vocab_size) throw FormatError("token id out of range");
    }
    idx.suffixes_.resize(length);
    std::vector<bool> seen(length);
    for (auto& s : idx.suffixes_) {
      s = get<std::uint64_t>(in);
      if (s >= length || seen[s]) throw FormatError("suffix array is not a permutation");
      seen[s] = true;
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after index");

    idx.documents_ = static_cast<std::size_t>(
        std::count(idx.tokens_.begin(), idx.tokens_.end(), kSentinel));
    if (length - idx.documents_ != total) throw FormatError("|C| disagrees with token array");
    if (length == 0 || idx.tokens_.back() != kSentinel) throw FormatError("corpus must end with a sentinel");
    idx.total_ = total;
    idx.count_words();
    return idx;
  }

  static CorpusIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load(in);
  }

 private:
  CorpusIndex() = default;

  // <0 if the suffix at `pos` sorts before `query`, 0 if `query` is a prefix.
  int compare(std::uint64_t pos, std::span<const TokenId> query) const {
    const std::size_t n = tokens_.size();
    for (std::size_t j = 0; j < query.size(); ++j) {
      if (pos + j >= n) return -1;
      const auto t = tokens_[pos + j];
      if (t != query[j]) return t < query[j] ? -1 : 1;
    }
    return 0;
  }

  std::pair<std::size_t, std::size_t> equal_range(std::span<const TokenId> query) const {
    auto lo = std::partition_point(suffixes_.begin(), suffixes_.end(),
                                   [&](std::uint64_t p) { return compare(p, query) < 0; });
    auto hi = std::partition_point(lo, suffixes_.end(),
                                   [&](std::uint64_t p) { return compare(p, query) == 0; });
    return {static_cast<std::size_t>(lo - suffixes_.begin()),
            static_cast<std::size_t>(hi - suffixes_.begin())};
  }

  void count_words() {
    std::vector<bool> is_word(vocab_.size());
    for (std::size_t id = 1; id < vocab_.size(); ++id) {
      is_word[id] = text::is_word(vocab_.token(static_cast<TokenId>(id)));
    }
    words_ = static_cast<std::uint64_t>(
        std::count_if(tokens_.begin(), tokens_.end(), [&](TokenId t) { return is_word[t]; }));
  }

  template <typename T>
  static void put(std::ostream& out, T v) {
    std::array<char, sizeof(T)> b;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      b[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    }
    out.write(b.data(), b.size());
  }

  template <typename T>
  static T get(std::istream& in) {
    std::array<unsigned char, sizeof(T)> b;
    in.read(reinterpret_cast<char*>(b.data()), b.size());
    if (!in) throw FormatError("index truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<T>(v);
  }

  std::vector<TokenId> tokens_;
  std::vector<std::uint64_t> suffixes_;
  Vocabulary vocab_;
  std::uint64_t total_ = 0;
  std::uint64_t words_ = 0;
  std::size_t documents_ = 0;
};

}  // namespace phasescope
