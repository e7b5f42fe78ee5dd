#pragma once

// UTF-8 decoding and the word-level tokenization rule shared by the corpus
// indexer, the dataset builder and the heuristic scorer.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phasescope::text {

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes consumed
};

/// Strict decode of one code point at `pos`; rejects overlongs, surrogates
/// and values past U+10FFFF.
inline std::optional<CodePoint> decode_utf8(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return std::nullopt;
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return CodePoint{b0, 1};
  std::size_t len;
  char32_t cp;
  char32_t min;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return std::nullopt;
  }
  if (pos + len > s.size()) return std::nullopt;
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return std::nullopt;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
  return CodePoint{cp, len};
}

/// Byte offset of the first invalid sequence, or nullopt if `s` is valid UTF-8.
inline std::optional<std::size_t> find_invalid_utf8(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto cp = decode_utf8(s, pos);
    if (!cp) return pos;
    pos += cp->length;
  }
  return std::nullopt;
}

/// Unicode White_Space property.
constexpr bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

constexpr bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

/// Uppercase letters in Basic Latin, Latin-1, Latin Extended-A, Greek and
/// Cyrillic. Scripts without case are never uppercase.
constexpr bool is_upper(char32_t c) {
  if (c >= 'A' && c <= 'Z') return true;
  if (c >= 0xC0 && c <= 0xDE) return c != 0xD7;
  if (c >= 0x100 && c <= 0x137) return c % 2 == 0;
  if (c >= 0x139 && c <= 0x148) return c % 2 == 1;
  if (c >= 0x14A && c <= 0x177) return c % 2 == 0;
  if (c == 0x178 || c == 0x179 || c == 0x17B || c == 0x17D) return true;
  if (c >= 0x391 && c <= 0x3AB) return c != 0x3A2;
  if (c >= 0x400 && c <= 0x42F) return true;
  return false;
}

constexpr char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if ((c >= 0x100 && c <= 0x137) || (c >= 0x14A && c <= 0x177)) return c % 2 == 0 ? c + 1 : c;
  if (c >= 0x139 && c <= 0x148) return c % 2 == 1 ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c == 0x179 || c == 0x17B || c == 0x17D) return c + 1;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

inline void append_utf8(std::string& out, char32_t c) {
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
}

/// Case-fold with the same coverage as is_upper(). Input must be valid UTF-8.
inline std::string fold_case(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto cp = decode_utf8(s, pos);
    if (!cp) {  // pass through undecodable bytes unchanged
      out.push_back(s[pos++]);
      continue;
    }
    append_utf8(out, to_lower(cp->value));
    pos += cp->length;
  }
  return out;
}

inline bool starts_upper(std::string_view word) {
  auto cp = decode_utf8(word, 0);
  return cp && is_upper(cp->value);
}

/// A token that is not a lone punctuation character.
inline bool is_word(std::string_view token) {
  return !token.empty() && !(token.size() == 1 && is_ascii_punct(token[0]));
}

/// Split valid UTF-8 on Unicode whitespace.
inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> chunks;
  std::size_t pos = 0, start = 0;
  bool in_chunk = false;
  while (pos < s.size()) {
    auto cp = decode_utf8(s, pos);
    const std::size_t len = cp ? cp->length : 1;
    const bool space = cp && is_space(cp->value);
    if (space && in_chunk) {
      chunks.push_back(s.substr(start, pos - start));
      in_chunk = false;
    } else if (!space && !in_chunk) {
      start = pos;
      in_chunk = true;
    }
    pos += len;
  }
  if (in_chunk) chunks.push_back(s.substr(start));
  return chunks;
}

/// Whitespace split, then every leading and trailing ASCII punctuation
/// character of a chunk becomes its own token: "(end)." -> ( end ) .
inline std::vector<std::string> tokenize(std::string_view line, bool lowercase = false) {
  std::vector<std::string> out;
  for (auto chunk : split_whitespace(line)) {
    std::size_t lead = 0;
    while (lead < chunk.size() && is_ascii_punct(chunk[lead])) ++lead;
    std::size_t trail = chunk.size();
    while (trail > lead && is_ascii_punct(chunk[trail - 1])) --trail;
    for (std::size_t i = 0; i < lead; ++i) out.emplace_back(1, chunk[i]);
    if (trail > lead) {
      auto core = chunk.substr(lead, trail - lead);
      out.push_back(lowercase ? fold_case(core) : std::string(core));
    }
    for (std::size_t i = trail; i < chunk.size(); ++i) out.emplace_back(1, chunk[i]);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

}  // namespace phasescope::text
