#pragma once

// Evaluation-set construction: sentence filtering, critical-word sampling,
// decontamination against training-corpus indexes, dedup and splitting.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "phasescope/corpus_index.hpp"
#include "phasescope/error.hpp"
#include "phasescope/hash.hpp"
#include "phasescope/parallel.hpp"
#include "phasescope/text.hpp"
#include "phasescope/version.hpp"

namespace phasescope {

enum class Split { train, validation, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw InputError("unknown split '" + std::string(s) + "'");
}

struct ContextItem {
  std::string item_id;
  std::vector<std::string> context;
  std::string critical_word;
  Split split = Split::train;
  std::size_t source_line = 0;

  std::vector<std::string> sequence() const {
    auto seq = context;
    seq.push_back(critical_word);
    return seq;
  }
};

/// Stable identifier: FNV-1a of the space-joined token sequence.
inline std::string make_item_id(std::span<const std::string> tokens) {
  Fnv1a64 h;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) h.update(" ");
    h.update(tokens[i]);
  }
  return h.hex();
}

using SequencePredicate = std::function<bool(const std::vector<std::string>&)>;

struct FilterConfig {
  std::size_t min_words = 6;
  bool capitalization = true;
  /// Applied to whole sentences and again to truncated sequences (e.g. an
  /// external toxicity score). Empty means pass-all.
  SequencePredicate predicate;
  /// Applied to truncated sequences: every word must be usable by all the
  /// models under study. Empty means pass-all.
  SequencePredicate vocabulary;
  std::size_t train_size = 100;
  std::size_t validation_size = 50;
  std::size_t test_size = 50;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const {
    return {{"min_words", min_words},
            {"capitalization", capitalization},
            {"predicate", static_cast<bool>(predicate)},
            {"vocabulary", static_cast<bool>(vocabulary)},
            {"train_size", train_size},
            {"validation_size", validation_size},
            {"test_size", test_size},
            {"seed", seed}};
  }
  std::string digest() const { return digest_string(to_json().dump()); }
};

/// Uniform integer in [0, n) by rejection; independent of the standard
/// library's distribution implementations.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_below(0)");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

struct Sentence {
  std::vector<std::string> tokens;
  std::size_t line = 0;
};

/// Rejection counts keyed by reason.
using ReasonHistogram = std::map<std::string, std::size_t>;

struct FilterResult {
  std::vector<Sentence> kept;
  ReasonHistogram rejected;
};

/// Keeps sentences with at least min_words words whose first token is a
/// capitalized word and whose other words are not capitalized.
inline FilterResult filter_sentences(std::span<const std::string> lines, const FilterConfig& cfg) {
  FilterResult out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (text::find_invalid_utf8(line)) {
      ++out.rejected["invalid_utf8"];
      continue;
    }
    auto tokens = text::tokenize(line);
    std::size_t words = 0;
    bool extra_capital = false;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (!text::is_word(tokens[t])) continue;
      ++words;
      if (t > 0 && text::starts_upper(tokens[t])) extra_capital = true;
    }
    if (words < cfg.min_words) {
      ++out.rejected["too_short"];
    } else if (cfg.capitalization && !(text::is_word(tokens[0]) && text::starts_upper(tokens[0]))) {
      ++out.rejected["not_capitalized"];
    } else if (cfg.capitalization && extra_capital) {
      ++out.rejected["extra_capital"];
    } else if (cfg.predicate && !cfg.predicate(tokens)) {
      ++out.rejected["predicate"];
    } else {
      out.kept.push_back({std::move(tokens), i + 1});
    }
  }
  return out;
}

/// Chooses the critical word uniformly among word tokens at the fifth
/// position or later; the context is everything before it. nullopt when no
/// position qualifies.
inline std::optional<ContextItem> sample_critical_word(const Sentence& sentence,
                                                       std::mt19937_64& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t p = 4; p < sentence.tokens.size(); ++p) {
    if (text::is_word(sentence.tokens[p])) eligible.push_back(p);
  }
  if (eligible.empty()) return std::nullopt;
  const auto pos = eligible[static_cast<std::size_t>(uniform_below(rng, eligible.size()))];
  ContextItem item;
  item.context.assign(sentence.tokens.begin(), sentence.tokens.begin() + static_cast<std::ptrdiff_t>(pos));
  item.critical_word = sentence.tokens[pos];
  item.item_id = make_item_id(item.sequence());
  item.source_line = sentence.line;
  return item;
}

/// Keeps items whose full truncated sequence occurs in none of the indexes.
inline std::vector<ContextItem> decontaminate(std::vector<ContextItem> items,
                                              std::span<const CorpusIndex* const> indices,
                                              unsigned threads = 1) {
  std::vector<char> clean(items.size(), 1);
  parallel_for(items.size(), threads, [&](std::size_t i) {
    const auto seq = items[i].sequence();
    for (const auto* idx : indices) {
      if (idx->contains(std::span<const std::string>(seq))) {
        clean[i] = 0;
        return;
      }
    }
  });
  std::vector<ContextItem> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (clean[i]) out.push_back(std::move(items[i]));
  }
  return out;
}

struct Dataset {
  std::vector<ContextItem> items;  // train, then validation, then test
  std::size_t duplicates = 0;
  std::size_t surplus = 0;
  std::vector<std::string> warnings;

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [s](const auto& it) { return it.split == s; }));
  }
};

/// Collapses duplicate sequences (first occurrence wins), shuffles, and
/// fills the splits. When fewer items exist than requested the targets are
/// scaled down proportionally and a warning is recorded.
inline Dataset dedupe_and_split(std::vector<ContextItem> items, const FilterConfig& cfg,
                                std::mt19937_64& rng) {
  if (cfg.train_size == 0 || cfg.validation_size == 0 || cfg.test_size == 0) {
    throw ArgumentError("split sizes must be positive");
  }
  Dataset ds;
  std::unordered_set<std::string> seen;
  std::vector<ContextItem> unique;
  for (auto& it : items) {
    if (seen.insert(text::join(it.sequence())).second) {
      unique.push_back(std::move(it));
    } else {
      ++ds.duplicates;
    }
  }
  seeded_shuffle(unique, rng);

  std::size_t want[3] = {cfg.train_size, cfg.validation_size, cfg.test_size};
  const std::size_t requested = want[0] + want[1] + want[2];
  if (unique.size() < requested) {
    ds.warnings.push_back("only " + std::to_string(unique.size()) + " items available for " +
                          std::to_string(requested) + " requested; splits scaled down");
    const auto avail = unique.size();
    want[1] = cfg.validation_size * avail / requested;
    want[2] = cfg.test_size * avail / requested;
    want[0] = avail - want[1] - want[2];
  }
  const Split order[3] = {Split::train, Split::validation, Split::test};
  std::size_t next = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < want[s]; ++k, ++next) {
      unique[next].split = order[s];
      ds.items.push_back(std::move(unique[next]));
    }
  }
  ds.surplus = unique.size() - next;
  return ds;
}

struct DatasetBuild {
  Dataset dataset;
  ReasonHistogram rejected;
  std::size_t input_sentences = 0;

  std::size_t rejected_total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : rejected) n += c;
    return n;
  }
};

/// Filter, dedupe sentences, sample one critical word per sentence,
/// re-check predicates and vocabulary on the truncated sequence,
/// decontaminate, dedupe and split. Every input sentence is either emitted
/// or counted under exactly one rejection reason.
inline DatasetBuild build_dataset(std::span<const std::string> lines,
                                  std::span<const CorpusIndex* const> indices,
                                  const FilterConfig& cfg, unsigned threads = 1) {
  DatasetBuild out;
  out.input_sentences = lines.size();
  auto filtered = filter_sentences(lines, cfg);
  out.rejected = filtered.rejected;

  std::mt19937_64 rng(cfg.seed);
  std::unordered_set<std::string> seen;
  std::vector<ContextItem> items;
  for (const auto& s : filtered.kept) {
    if (!seen.insert(text::join(s.tokens)).second) {
      ++out.rejected["duplicate_sentence"];
      continue;
    }
    auto item = sample_critical_word(s, rng);
    if (!item) {
      ++out.rejected["no_critical_position"];
      continue;
    }
    const auto seq = item->sequence();
    if (cfg.predicate && !cfg.predicate(seq)) {
      ++out.rejected["predicate"];
    } else if (cfg.vocabulary && !cfg.vocabulary(seq)) {
      ++out.rejected["vocabulary"];
    } else {
      items.push_back(std::move(*item));
    }
  }
  const auto before = items.size();
  items = decontaminate(std::move(items), indices, threads);
  if (before != items.size()) out.rejected["contaminated"] += before - items.size();

  out.dataset = dedupe_and_split(std::move(items), cfg, rng);
  if (out.dataset.duplicates) out.rejected["duplicate_item"] += out.dataset.duplicates;
  if (out.dataset.surplus) out.rejected["surplus"] += out.dataset.surplus;
  return out;
}

// JSON-lines file: one metadata header line, then one item per line.

inline nlohmann::ordered_json item_to_json(const ContextItem& it) {
  return {{"item_id", it.item_id},
          {"context", it.context},
          {"critical_word", it.critical_word},
          {"split", to_string(it.split)},
          {"source_line", it.source_line}};
}

inline void write_dataset(std::ostream& out, const Dataset& ds, const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json header = meta;
  header["counts"] = {{"train", ds.count(Split::train)},
                      {"validation", ds.count(Split::validation)},
                      {"test", ds.count(Split::test)}};
  out << nlohmann::ordered_json{{"meta", header}}.dump() << '\n';
  for (const auto& it : ds.items) out << item_to_json(it).dump() << '\n';
}

struct LoadedDataset {
  nlohmann::json meta;
  std::vector<ContextItem> items;
};

inline LoadedDataset read_dataset(std::istream& in) {
  LoadedDataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("meta")) {
      ds.meta = j["meta"];
      continue;
    }
    try {
      ContextItem it;
      it.item_id = j.at("item_id").get<std::string>();
      it.context = j.at("context").get<std::vector<std::string>>();
      it.critical_word = j.at("critical_word").get<std::string>();
      it.split = parse_split(j.at("split").get<std::string>());
      it.source_line = j.value("source_line", std::size_t{0});
      if (!ids.insert(it.item_id).second) throw InputError("duplicate item_id " + it.item_id);
      ds.items.push_back(std::move(it));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

inline LoadedDataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_dataset(in);
}

}  // namespace phasescope
