#pragma once

// Item-aligned heuristic columns and per-checkpoint model score records.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "phasescope/dataset.hpp"
#include "phasescope/error.hpp"
#include "phasescope/tidy.hpp"

namespace phasescope {

/// One row per item, one named double column per heuristic. Missing values
/// are NaN.
class HeuristicTable {
 public:
  HeuristicTable() = default;

  explicit HeuristicTable(std::span<const ContextItem> items) {
    for (const auto& it : items) add_row(it.item_id, it.split);
  }

  void add_row(const std::string& item_id, Split split) {
    if (!row_of_.emplace(item_id, ids_.size()).second) {
      throw InputError("duplicate item_id " + item_id + " in heuristic table");
    }
    ids_.push_back(item_id);
    splits_.push_back(split);
    for (auto& c : columns_) c.push_back(std::nan(""));
  }

  void add_column(const std::string& name, std::vector<double> values) {
    if (values.size() != ids_.size()) throw ArgumentError("column " + name + " has wrong length");
    if (column_index(name)) throw ArgumentError("duplicate column " + name);
    names_.push_back(name);
    columns_.push_back(std::move(values));
  }

  std::optional<std::size_t> column_index(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    return std::nullopt;
  }

  std::span<const double> column(const std::string& name) const {
    auto i = column_index(name);
    if (!i) throw ArgumentError("no heuristic column named " + name);
    return columns_[*i];
  }

  std::optional<std::size_t> row(const std::string& item_id) const {
    auto it = row_of_.find(item_id);
    if (it == row_of_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t rows() const { return ids_.size(); }
  const std::vector<std::string>& item_ids() const { return ids_; }
  const std::vector<Split>& splits() const { return splits_; }
  const std::vector<std::string>& column_names() const { return names_; }

  void write_csv(std::ostream& out, const CommentHeader& comments) const {
    std::vector<std::string> header = {"item_id", "split"};
    header.insert(header.end(), names_.begin(), names_.end());
    CsvWriter w(out, comments, header);
    std::vector<std::string> fields(header.size());
    for (std::size_t r = 0; r < ids_.size(); ++r) {
      fields[0] = ids_[r];
      fields[1] = std::string(to_string(splits_[r]));
      for (std::size_t c = 0; c < columns_.size(); ++c) fields[c + 2] = format_double(columns_[c][r]);
      w.row(fields);
    }
  }

  /// Comment lines are returned through `comments` when given.
  static HeuristicTable read_csv(std::istream& in, CommentHeader* comments = nullptr) {
    HeuristicTable t;
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<double>> cols;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (comments) {
          auto body = line.substr(line.find_first_not_of("# "));
          auto eq = body.find('=');
          comments->emplace_back(body.substr(0, eq), eq == std::string::npos ? "" : body.substr(eq + 1));
        }
        continue;
      }
      auto fields = csv_split(line);
      if (header.empty()) {
        if (fields.size() < 2 || fields[0] != "item_id" || fields[1] != "split") {
          throw InputError("heuristic table header must start with item_id,split");
        }
        header = std::move(fields);
        cols.resize(header.size() - 2);
        continue;
      }
      if (fields.size() != header.size()) {
        throw InputError("heuristic table line " + std::to_string(line_no) + ": wrong field count");
      }
      t.ids_.push_back(fields[0]);
      t.splits_.push_back(parse_split(fields[1]));
      if (!t.row_of_.emplace(fields[0], t.ids_.size() - 1).second) {
        throw InputError("duplicate item_id " + fields[0] + " in heuristic table");
      }
      for (std::size_t c = 2; c < fields.size(); ++c) {
        double v = std::nan("");
        if (!fields[c].empty()) {
          auto [p, ec] = std::from_chars(fields[c].data(), fields[c].data() + fields[c].size(), v);
          if (ec != std::errc() || p != fields[c].data() + fields[c].size()) {
            throw InputError("heuristic table line " + std::to_string(line_no) + ": bad number '" +
                             fields[c] + "'");
          }
        }
        cols[c - 2].push_back(v);
      }
    }
    if (header.empty()) throw InputError("heuristic table has no header");
    for (std::size_t c = 0; c < cols.size(); ++c) {
      t.names_.push_back(header[c + 2]);
      t.columns_.push_back(std::move(cols[c]));
    }
    return t;
  }

  static HeuristicTable read_csv(const std::string& path, CommentHeader* comments = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_csv(in, comments);
  }

 private:
  std::vector<std::string> ids_;
  std::vector<Split> splits_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::unordered_map<std::string, std::size_t> row_of_;
};

struct ScoreRecord {
  std::string model;
  std::string seed;
  std::int64_t step = 0;
  std::string item_id;
  double logprob = 0.0;  // natural log
};

struct GroupKey {
  std::string model;
  std::string seed;
  std::int64_t step = 0;
  auto operator<=>(const GroupKey&) const = default;
};

/// item_id -> log-probability for each (model, seed, step).
using ScoreGroups = std::map<GroupKey, std::unordered_map<std::string, double>>;

struct IngestReport {
  ScoreGroups groups;
  std::size_t accepted = 0;
  std::size_t unknown_items = 0;
  std::vector<std::string> rejected;  // "source:line: reason"
};

/// Parses JSON-lines score records. An optional {"meta": {...}} line may
/// declare "log_base"; only "e" is accepted. Rows with non-finite or
/// missing values are reported in `rejected` and skipped.
inline std::vector<std::pair<std::size_t, ScoreRecord>> read_score_records(
    std::istream& in, const std::string& source, std::vector<std::string>& rejected) {
  std::vector<std::pair<std::size_t, ScoreRecord>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      rejected.push_back(where + ": not valid JSON");
      continue;
    }
    if (j.contains("meta")) {
      const auto base = j["meta"].value("log_base", std::string("e"));
      if (base != "e") throw InputError(where + ": log_base '" + base + "' unsupported; expected natural log");
      continue;
    }
    try {
      ScoreRecord r;
      r.model = j.at("model").get<std::string>();
      const auto& seed = j.at("seed");
      r.seed = seed.is_string() ? seed.get<std::string>() : seed.dump();
      r.step = j.at("step").get<std::int64_t>();
      r.item_id = j.at("item_id").get<std::string>();
      const auto& lp = j.at("logprob");
      if (!lp.is_number()) {
        rejected.push_back(where + ": non-finite logprob");
        continue;
      }
      r.logprob = lp.get<double>();
      if (!std::isfinite(r.logprob)) {
        rejected.push_back(where + ": non-finite logprob");
        continue;
      }
      if (r.step < 0) {
        rejected.push_back(where + ": negative step");
        continue;
      }
      out.emplace_back(line_no, std::move(r));
    } catch (const nlohmann::json::exception& e) {
      rejected.push_back(where + ": " + e.what());
    }
  }
  return out;
}

struct ScoreSource {
  std::string name;
  std::istream* stream;
};

/// Validates and groups records. Throws InputError on the first duplicate
/// (model, seed, step, item_id) key. Records naming items outside
/// `known_items` (when given) are counted and excluded.
inline IngestReport ingest_scores(std::span<const ScoreSource> sources,
                                  const std::unordered_set<std::string>* known_items = nullptr) {
  IngestReport rep;
  std::map<std::tuple<std::string, std::string, std::int64_t, std::string>, std::string> first_seen;
  for (const auto& src : sources) {
    auto records = read_score_records(*src.stream, src.name, rep.rejected);
    for (auto& [line_no, r] : records) {
      const std::string where = src.name + ":" + std::to_string(line_no);
      auto key = std::make_tuple(r.model, r.seed, r.step, r.item_id);
      auto [it, fresh] = first_seen.emplace(key, where);
      if (!fresh) {
        throw InputError("duplicate score record (model=" + r.model + ", seed=" + r.seed +
                         ", step=" + std::to_string(r.step) + ", item_id=" + r.item_id + ") at " +
                         where + ", first seen at " + it->second);
      }
      if (known_items && !known_items->contains(r.item_id)) {
        ++rep.unknown_items;
        continue;
      }
      rep.groups[GroupKey{r.model, r.seed, r.step}][r.item_id] = r.logprob;
      ++rep.accepted;
    }
  }
  return rep;
}

/// Sorted JSON-lines dump of validated groups, with a meta header line.
inline void write_score_store(std::ostream& out, const ScoreGroups& groups) {
  std::size_t records = 0;
  for (const auto& [_, g] : groups) records += g.size();
  out << nlohmann::ordered_json{{"meta", {{"log_base", "e"}, {"groups", groups.size()}, {"records", records}}}}.dump()
      << '\n';
  for (const auto& [key, g] : groups) {
    std::vector<std::pair<std::string, double>> rows(g.begin(), g.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [item, lp] : rows) {
      out << nlohmann::ordered_json{{"model", key.model},
                                    {"seed", key.seed},
                                    {"step", key.step},
                                    {"item_id", item},
                                    {"logprob", lp}}
                 .dump()
          << '\n';
    }
  }
}

}  // namespace phasescope
