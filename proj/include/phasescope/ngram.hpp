#pragma once

// Unigram and Stupid Backoff scores for a word given its left context.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "phasescope/corpus_index.hpp"
#include "phasescope/error.hpp"
#include "phasescope/parallel.hpp"

namespace phasescope {

struct BackoffConfig {
  double alpha = 0.4;
  int max_n = 5;
  /// Word-level count in the numerator over the all-token |C| in the
  /// denominator. When false the denominator is the word-token total.
  bool token_level_denominator = true;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in (0, 1]");
    if (max_n < 1 || max_n > 8) throw ArgumentError("max_n must lie in [1, 8]");
  }
};

struct NGramScore {
  int order = 1;
  double score = 0.0;      // in (0, 1]
  double log_score = 0.0;  // ln(score)
  int backoff_depth = 0;
};

/// max{1, c(w)} / |C|.
inline NGramScore unigram_score(const CorpusIndex& index, const std::string& word,
                                const BackoffConfig& cfg = {}) {
  const std::uint64_t c = word.empty() ? 0 : index.count(std::span(&word, 1));
  const std::uint64_t denom = cfg.token_level_denominator ? index.total_tokens() : index.word_tokens();
  if (denom == 0) throw ArgumentError("corpus has no tokens to normalize by");
  NGramScore s;
  s.order = 1;
  s.score = static_cast<double>(std::max<std::uint64_t>(1, c)) / static_cast<double>(denom);
  s.log_score = std::log(s.score);
  return s;
}

/// Stupid Backoff: the count ratio c(h w)/c(h) with h the last n-1 context
/// words when c(h w) > 0, otherwise alpha times the score with h shortened
/// by its leftmost word, bottoming out at the unigram score. A context
/// shorter than n-1 lowers the effective order with no discount.
inline NGramScore backoff_score(const CorpusIndex& index, std::span<const std::string> context,
                                const std::string& word, int n, const BackoffConfig& cfg = {}) {
  if (n < 1) throw ArgumentError("n-gram order must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ArgumentError("alpha must lie in (0, 1]");
  const int effective = static_cast<int>(std::min<std::size_t>(n, context.size() + 1));

  std::vector<std::string> gram;
  gram.reserve(static_cast<std::size_t>(effective));
  double value = 0.0;
  int depth = 0;
  bool found = false;
  for (int k = effective; k >= 2; --k) {
    const auto history = context.subspan(context.size() - static_cast<std::size_t>(k - 1));
    gram.assign(history.begin(), history.end());
    gram.push_back(word);
    const auto full = index.count(std::span<const std::string>(gram));
    if (full > 0) {
      const auto hist = index.count(history);
      value = static_cast<double>(full) / static_cast<double>(hist);
      found = true;
      break;
    }
    ++depth;
  }
  if (!found) value = unigram_score(index, word, cfg).score;
  // Same multiplication order as the recursive definition: alpha * (alpha * (...)).
  for (int d = 0; d < depth; ++d) value = cfg.alpha * value;

  NGramScore s;
  s.order = effective;
  s.score = value;
  s.log_score = std::log(value);
  s.backoff_depth = depth;
  return s;
}

struct ScoringItem {
  std::string item_id;
  std::vector<std::string> context;
  std::string critical_word;
};

struct ItemError {
  std::string item_id;
  std::string message;
};

/// One natural-log score column per requested order; rows follow the item
/// order. Failed items get NaN and an entry in `errors`.
struct NGramColumns {
  std::map<int, std::vector<double>> log_scores;
  std::vector<ItemError> errors;
};

inline NGramColumns score_items(const CorpusIndex& index, std::span<const ScoringItem> items,
                                const std::set<int>& orders, const BackoffConfig& cfg = {},
                                unsigned threads = 1) {
  cfg.validate();
  for (int n : orders) {
    if (n < 1 || n > cfg.max_n) throw ArgumentError("order " + std::to_string(n) + " outside [1, max_n]");
  }
  NGramColumns out;
  for (int n : orders) out.log_scores[n].assign(items.size(), std::nan(""));
  std::vector<std::string> failure(items.size());

  parallel_for(items.size(), threads, [&](std::size_t i) {
    const auto& item = items[i];
    try {
      if (item.critical_word.empty()) throw ArgumentError("empty critical word");
      for (int n : orders) {
        out.log_scores.at(n)[i] = backoff_score(index, item.context, item.critical_word, n, cfg).log_score;
      }
    } catch (const Error& e) {
      failure[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!failure[i].empty()) {
      for (int n : orders) out.log_scores[n][i] = std::nan("");
      out.errors.push_back({items[i].item_id, failure[i]});
    }
  }
  return out;
}

}  // namespace phasescope
