#pragma once

// Static word-embedding tables and contextual similarity between a word and
// a position-weighted mean of its context.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phasescope/corpus_index.hpp"  // detail::StringHash
#include "phasescope/error.hpp"
#include "phasescope/text.hpp"

namespace phasescope {

enum class Weighting { uniform, sgpt };

inline std::string_view to_string(Weighting w) { return w == Weighting::uniform ? "uniform" : "sgpt"; }

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  void add(std::string token, std::span<const double> vec) {
    if (vec.size() != dim_) throw InputError("vector for '" + token + "' has wrong dimension");
    if (index_.contains(token)) throw InputError("duplicate embedding token '" + token + "'");
    index_.emplace(std::move(token), rows());
    data_.insert(data_.end(), vec.begin(), vec.end());
  }

  /// Exact surface-form lookup.
  std::optional<std::span<const double>> find_exact(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return std::span<const double>(data_).subspan(it->second * dim_, dim_);
  }

  /// Surface form first, then the case-folded form.
  std::optional<std::span<const double>> find(std::string_view token) const {
    if (auto v = find_exact(token)) return v;
    auto folded = text::fold_case(token);
    if (folded != token) return find_exact(folded);
    return std::nullopt;
  }

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? index_.size() : data_.size() / dim_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t, detail::StringHash, std::equal_to<>> index_;
};

/// Reads the fastText .vec text format: a "V D" header, then V lines of a
/// token followed by D decimal values.
inline EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("embedding file is empty");
  auto header = text::split_whitespace(line);
  std::size_t rows = 0, dim = 0;
  auto parse_size = [](std::string_view s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  };
  if (header.size() != 2 || !parse_size(header[0], rows) || !parse_size(header[1], dim) || dim == 0) {
    throw InputError("malformed embedding header: '" + line + "'");
  }

  EmbeddingTable table(dim);
  std::vector<double> vec(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string where = "embedding row " + std::to_string(r + 1);
    if (!std::getline(in, line)) throw InputError(where + ": expected " + std::to_string(rows) + " rows");
    if (auto bad = text::find_invalid_utf8(line)) throw InputError(where + ": invalid UTF-8");
    // Split on ASCII spaces only; tokens may contain other whitespace.
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\r')) rest.remove_suffix(1);
    std::size_t pos;
    while ((pos = rest.find(' ')) != std::string_view::npos) {
      if (pos > 0) fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    if (!rest.empty()) fields.push_back(rest);
    if (fields.size() != dim + 1) {
      throw InputError(where + ": expected " + std::to_string(dim) + " values, got " +
                       std::to_string(fields.empty() ? 0 : fields.size() - 1));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      auto f = fields[j + 1];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), vec[j]);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(vec[j])) {
        throw InputError(where + ": bad value '" + std::string(f) + "'");
      }
    }
    table.add(std::string(fields[0]), vec);
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_embeddings(in);
}

/// beta_j = j / (1 + 2 + ... + L) for j = 1..L.
inline std::vector<double> sgpt_weights(std::size_t length) {
  if (length == 0) throw ArgumentError("context length must be positive");
  const double denom = static_cast<double>(length) * static_cast<double>(length + 1) / 2.0;
  std::vector<double> w(length);
  for (std::size_t j = 0; j < length; ++j) w[j] = static_cast<double>(j + 1) / denom;
  return w;
}

inline std::vector<double> uniform_weights(std::size_t length) {
  if (length == 0) throw ArgumentError("context length must be positive");
  return std::vector<double>(length, 1.0 / static_cast<double>(length));
}

inline std::vector<double> position_weights(std::size_t length, Weighting scheme) {
  return scheme == Weighting::uniform ? uniform_weights(length) : sgpt_weights(length);
}

/// Weighted mean of the context vectors. Words without an embedding are
/// dropped and the surviving weights renormalized to sum to 1; nullopt when
/// no context word has an embedding.
inline std::optional<std::vector<double>> context_vector(const EmbeddingTable& table,
                                                         std::span<const std::string> context,
                                                         Weighting scheme,
                                                         std::size_t* found = nullptr) {
  if (context.empty()) throw ArgumentError("context must be non-empty");
  const auto weights = position_weights(context.size(), scheme);
  std::vector<std::span<const double>> vecs;
  std::vector<double> kept;
  for (std::size_t j = 0; j < context.size(); ++j) {
    if (auto v = table.find(context[j])) {
      vecs.push_back(*v);
      kept.push_back(weights[j]);
    }
  }
  if (found) *found = vecs.size();
  if (vecs.empty()) return std::nullopt;
  double total = 0.0;
  for (double w : kept) total += w;
  std::vector<double> out(table.dim(), 0.0);
  for (std::size_t k = 0; k < vecs.size(); ++k) {
    const double w = kept[k] / total;
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += w * vecs[k][d];
  }
  return out;
}

/// u.v / (|u||v|), clamped to [-1, 1]. Throws DegenerateError for a zero vector.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ArgumentError("cosine of vectors with different dimensions");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateError("cosine undefined for a zero vector");
  const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

struct SimilarityResult {
  std::optional<double> similarity;
  std::optional<double> distance;  // 1 - similarity
  std::size_t context_found = 0;
  bool critical_missing = false;
  bool context_missing = false;
};

inline SimilarityResult contextual_similarity(const EmbeddingTable& table,
                                              std::span<const std::string> context,
                                              const std::string& word, Weighting scheme) {
  SimilarityResult r;
  auto ctx = context_vector(table, context, scheme, &r.context_found);
  auto wv = table.find(word);
  r.critical_missing = !wv;
  r.context_missing = !ctx;
  if (!wv || !ctx) return r;
  try {
    r.similarity = cosine(*wv, *ctx);
    r.distance = 1.0 - *r.similarity;
  } catch (const DegenerateError&) {
    // zero vector: similarity stays absent
  }
  return r;
}

}  // namespace phasescope
