#pragma once

// Stage implementations behind the command-line tool. Each stage reads its
// inputs from disk, writes its outputs, and returns a summary.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "phasescope/analysis.hpp"
#include "phasescope/corpus_index.hpp"
#include "phasescope/dataset.hpp"
#include "phasescope/manifest.hpp"
#include "phasescope/ngram.hpp"
#include "phasescope/similarity.hpp"
#include "phasescope/tables.hpp"
#include "phasescope/tidy.hpp"

namespace phasescope::pipeline {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

/// Whitespace-separated word list (e.g. one word per line).
inline std::unordered_set<std::string> read_word_set(const std::string& path) {
  std::unordered_set<std::string> words;
  for (const auto& line : read_lines(path)) {
    for (auto w : text::split_whitespace(line)) words.emplace(w);
  }
  return words;
}

// ---------------------------------------------------------------- index

struct BuildIndexSummary {
  std::size_t length = 0;
  std::uint64_t total_tokens = 0;
  std::size_t documents = 0;
  std::size_t vocabulary = 0;
};

inline BuildIndexSummary build_index(const std::string& corpus_path, const std::string& out_path,
                                     TokenizeOptions opts = {}) {
  std::ifstream in(corpus_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + corpus_path);
  auto [corpus, vocab] = tokenize_corpus(in, opts);
  const auto idx = CorpusIndex::build(std::move(corpus), std::move(vocab));
  idx.save(out_path);
  return {idx.length(), idx.total_tokens(), idx.documents(), idx.vocabulary().size()};
}

// -------------------------------------------------------------- dataset

struct DatasetArgs {
  std::string sentences_path;
  std::vector<std::string> decontam_index_paths;
  std::vector<std::string> vocab_paths;    // every word must appear in each list
  std::vector<std::string> exclude_paths;  // sentences containing a listed word are rejected
  std::string out_path;
  FilterConfig filter;
  unsigned threads = 1;
};

inline DatasetBuild build_dataset(DatasetArgs args) {
  std::vector<CorpusIndex> indices;
  for (const auto& p : args.decontam_index_paths) indices.push_back(CorpusIndex::load(p));
  std::vector<const CorpusIndex*> ptrs;
  for (const auto& i : indices) ptrs.push_back(&i);

  std::vector<std::unordered_set<std::string>> vocabs;
  for (const auto& p : args.vocab_paths) vocabs.push_back(read_word_set(p));
  if (!vocabs.empty()) {
    args.filter.vocabulary = [&vocabs](const std::vector<std::string>& seq) {
      for (const auto& v : vocabs) {
        for (const auto& w : seq) {
          if (text::is_word(w) && !v.contains(w)) return false;
        }
      }
      return true;
    };
  }
  std::unordered_set<std::string> excluded;
  for (const auto& p : args.exclude_paths) {
    for (const auto& w : read_word_set(p)) excluded.insert(text::fold_case(w));
  }
  if (!excluded.empty()) {
    args.filter.predicate = [&excluded](const std::vector<std::string>& seq) {
      for (const auto& w : seq) {
        if (excluded.contains(text::fold_case(w))) return false;
      }
      return true;
    };
  }

  const auto lines = read_lines(args.sentences_path);
  auto result = phasescope::build_dataset(lines, ptrs, args.filter, args.threads);

  RunManifest m;
  m.config = args.filter.to_json();
  m.seed = args.filter.seed;
  m.add_input("sentences", args.sentences_path);
  for (const auto& p : args.decontam_index_paths) m.add_input("decontamination_index", p);
  for (const auto& p : args.vocab_paths) m.add_input("vocabulary", p);
  for (const auto& p : args.exclude_paths) m.add_input("exclude", p);

  nlohmann::ordered_json meta;
  meta["tool_version"] = kToolVersion;
  meta["seed"] = args.filter.seed;
  meta["config"] = args.filter.to_json();
  meta["config_digest"] = m.config_digest();
  meta["manifest_digest"] = m.digest();
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [role, files] : m.inputs) {
    for (const auto& f : files) inputs[role].push_back(f.digest);
  }
  meta["input_digests"] = inputs;
  meta["input_sentences"] = result.input_sentences;
  meta["rejected"] = result.rejected;
  meta["warnings"] = result.dataset.warnings;

  auto out = open_output(args.out_path);
  write_dataset(out, result.dataset, meta);
  if (!out) throw IoError("failed writing " + args.out_path);
  return result;
}

// ----------------------------------------------------------- heuristics

struct NamedIndex {
  std::string name;
  const CorpusIndex* index;
};

struct NamedEmbeddings {
  std::string name;
  const EmbeddingTable* table;
};

struct HeuristicOptions {
  std::set<int> orders = {1, 2, 3, 4, 5};
  BackoffConfig backoff;
  std::vector<Weighting> weightings = {Weighting::uniform, Weighting::sgpt};
  unsigned threads = 1;
};

struct HeuristicReport {
  std::vector<ItemError> ngram_errors;
  std::map<std::string, std::size_t> critical_missing;  // per embedding table
  std::map<std::string, std::size_t> context_missing;
};

inline std::string ngram_column(const std::string& source, int n) {
  return source + ".ngram_logprob_n" + std::to_string(n);
}

inline std::string similarity_column(const std::string& table, Weighting w) {
  return table + ".sim_" + std::string(to_string(w));
}

/// Columns, in order: per n-gram source, one natural-log column per order;
/// per embedding table, one similarity column per weighting followed by a
/// 0/1 critical_missing flag. Missing similarities are NaN; items are never
/// dropped.
inline HeuristicTable compute_heuristics(std::span<const ContextItem> items,
                                         std::span<const NamedIndex> sources,
                                         std::span<const NamedEmbeddings> embeddings,
                                         const HeuristicOptions& opts, HeuristicReport* report = nullptr) {
  HeuristicTable table(items);
  std::vector<ScoringItem> scoring;
  scoring.reserve(items.size());
  for (const auto& it : items) scoring.push_back({it.item_id, it.context, it.critical_word});

  for (const auto& src : sources) {
    auto cols = score_items(*src.index, scoring, opts.orders, opts.backoff, opts.threads);
    for (auto& [n, values] : cols.log_scores) table.add_column(ngram_column(src.name, n), std::move(values));
    if (report) {
      for (auto& e : cols.errors) report->ngram_errors.push_back({e.item_id, src.name + ": " + e.message});
    }
  }
  for (const auto& emb : embeddings) {
    std::vector<double> missing(items.size(), 0.0);
    std::vector<char> ctx_missing(items.size(), 0);
    for (auto w : opts.weightings) {
      std::vector<double> sim(items.size(), std::nan(""));
      parallel_for(items.size(), opts.threads, [&](std::size_t i) {
        if (items[i].context.empty()) {
          ctx_missing[i] = 1;
          return;
        }
        auto r = contextual_similarity(*emb.table, items[i].context, items[i].critical_word, w);
        if (r.similarity) sim[i] = *r.similarity;
        if (r.critical_missing) missing[i] = 1.0;
        if (r.context_missing) ctx_missing[i] = 1;
      });
      table.add_column(similarity_column(emb.name, w), std::move(sim));
    }
    if (report) {
      report->critical_missing[emb.name] =
          static_cast<std::size_t>(std::count(missing.begin(), missing.end(), 1.0));
      report->context_missing[emb.name] =
          static_cast<std::size_t>(std::count(ctx_missing.begin(), ctx_missing.end(), 1));
    }
    table.add_column(emb.name + ".critical_missing", std::move(missing));
  }
  return table;
}

struct ScoreHeuristicsArgs {
  std::string dataset_path;
  std::vector<std::pair<std::string, std::string>> ngram_sources;  // name, index path
  std::vector<std::pair<std::string, std::string>> embeddings;     // name, .vec path
  HeuristicOptions options;
  std::string out_path;
};

inline HeuristicReport score_heuristics(const ScoreHeuristicsArgs& args) {
  const auto ds = read_dataset(args.dataset_path);
  std::vector<CorpusIndex> indices;
  for (const auto& [_, p] : args.ngram_sources) indices.push_back(CorpusIndex::load(p));
  std::vector<EmbeddingTable> tables;
  for (const auto& [_, p] : args.embeddings) tables.push_back(load_embeddings(p));
  std::vector<NamedIndex> sources;
  for (std::size_t i = 0; i < indices.size(); ++i) sources.push_back({args.ngram_sources[i].first, &indices[i]});
  std::vector<NamedEmbeddings> embs;
  for (std::size_t i = 0; i < tables.size(); ++i) embs.push_back({args.embeddings[i].first, &tables[i]});

  HeuristicReport report;
  const auto table = compute_heuristics(ds.items, sources, embs, args.options, &report);

  RunManifest m;
  m.config = {{"alpha", args.options.backoff.alpha},
              {"token_level_denominator", args.options.backoff.token_level_denominator},
              {"orders", args.options.orders}};
  std::vector<std::string> ws;
  for (auto w : args.options.weightings) ws.emplace_back(to_string(w));
  m.config["weightings"] = ws;
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const auto& [n, _] : args.ngram_sources) names.push_back(n);
  m.config["ngram_sources"] = names;
  names = nlohmann::ordered_json::array();
  for (const auto& [n, _] : args.embeddings) names.push_back(n);
  m.config["embeddings"] = names;
  m.add_input("dataset", args.dataset_path);
  for (const auto& [_, p] : args.ngram_sources) m.add_input("ngram_index", p);
  for (const auto& [_, p] : args.embeddings) m.add_input("embeddings", p);

  auto out = open_output(args.out_path);
  table.write_csv(out, {{"manifest_digest", m.digest()}, {"log_base", "e"}});
  if (!out) throw IoError("failed writing " + args.out_path);
  return report;
}

// --------------------------------------------------------------- scores

inline IngestReport ingest_score_files(const std::vector<std::string>& paths,
                                       const std::unordered_set<std::string>* known_items) {
  std::vector<std::ifstream> streams;
  std::vector<ScoreSource> sources;
  streams.reserve(paths.size());
  for (const auto& p : paths) {
    streams.emplace_back(p, std::ios::binary);
    if (!streams.back()) throw IoError("cannot open " + p);
  }
  for (std::size_t i = 0; i < paths.size(); ++i) sources.push_back({paths[i], &streams[i]});
  return ingest_scores(sources, known_items);
}

inline IngestReport ingest_scores_to(const std::vector<std::string>& paths, const std::string& dataset_path,
                                     const std::string& out_path) {
  std::unordered_set<std::string> known;
  if (!dataset_path.empty()) {
    for (const auto& it : read_dataset(dataset_path).items) known.insert(it.item_id);
  }
  auto rep = ingest_score_files(paths, dataset_path.empty() ? nullptr : &known);
  auto out = open_output(out_path);
  write_score_store(out, rep.groups);
  if (!out) throw IoError("failed writing " + out_path);
  return rep;
}

// -------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::vector<std::string> score_paths;
  std::string heuristics_path;
  std::string dataset_path;  // optional; item ids are checked against it
  std::string out_dir;
  RegressionMode mode = RegressionMode::zscored;
  std::vector<std::string> ngram_sources;  // empty: every family in the table
  std::vector<Weighting> weightings = {Weighting::sgpt};
  double stability_eps = 0.01;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct AnalyzeSummary {
  std::vector<std::string> warnings;
  std::size_t errors = 0;
  std::size_t groups = 0;
  std::string manifest_digest;
};

namespace detail {

inline bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void series_rows(CsvWriter& w, const std::string& model, const std::string& condition,
                        const std::string& metric, const std::string& predictor, const TrajectorySeries& s) {
  for (const auto& p : s.points) {
    const auto step = std::to_string(p.step);
    for (const auto& [seed, v] : p.per_seed) w.row({model, seed, step, condition, metric, predictor, format_double(v)});
    w.row({model, "(mean)", step, condition, metric, predictor, format_double(p.mean)});
    w.row({model, "(ci95)", step, condition, metric, predictor, format_double(p.ci95)});
  }
}

}  // namespace detail

inline const std::vector<std::string> kTidyColumns = {"model", "seed", "step", "condition",
                                                      "metric", "predictor", "value"};

/// Writes correlations.csv, coefficients.csv, r_squared.csv,
/// predictor_corr.csv, cross_model.csv, phases.csv, errors.csv and
/// manifest.json into out_dir. Per-fit failures go to errors.csv and the
/// run continues.
inline AnalyzeSummary analyze(const AnalyzeArgs& args) {
  namespace fs = std::filesystem;
  AnalyzeSummary summary;
  RunManifest manifest;
  manifest.started = utc_timestamp();

  CommentHeader heur_comments;
  const auto table = HeuristicTable::read_csv(args.heuristics_path, &heur_comments);
  std::unordered_set<std::string> known(table.item_ids().begin(), table.item_ids().end());
  if (!args.dataset_path.empty()) {
    const auto ds = read_dataset(args.dataset_path);
    std::size_t absent = 0;
    for (const auto& it : ds.items) absent += known.contains(it.item_id) ? 0 : 1;
    if (absent) summary.warnings.push_back(std::to_string(absent) + " dataset items missing from heuristics");
  }
  const auto ingest = ingest_score_files(args.score_paths, &known);
  for (const auto& r : ingest.rejected) summary.warnings.push_back("rejected score row " + r);
  if (ingest.unknown_items) {
    summary.warnings.push_back(std::to_string(ingest.unknown_items) + " score rows for unknown items excluded");
  }
  const auto& groups = ingest.groups;
  summary.groups = groups.size();
  if (groups.empty()) summary.warnings.push_back("no score records to analyze");

  // Heuristic columns and regression conditions.
  std::vector<std::string> heuristics;
  for (const auto& c : table.column_names()) {
    if (!detail::ends_with(c, ".critical_missing")) heuristics.push_back(c);
  }
  std::vector<std::string> sources = args.ngram_sources;
  if (sources.empty()) {
    for (const auto& c : heuristics) {
      if (detail::ends_with(c, ".ngram_logprob_n1")) sources.push_back(c.substr(0, c.size() - 17));
    }
  }
  std::vector<std::string> sim_columns;
  for (const auto& c : heuristics) {
    for (auto w : args.weightings) {
      if (detail::ends_with(c, ".sim_" + std::string(to_string(w)))) sim_columns.push_back(c);
    }
  }
  std::vector<std::pair<std::string, RegressionSpec>> conditions;
  for (const auto& s : sources) {
    for (const auto& sim : sim_columns) {
      RegressionSpec spec{ngram_column(s, 1), ngram_column(s, 5), sim, args.mode};
      if (!table.column_index(spec.unigram_column) || !table.column_index(spec.ngram_column)) {
        summary.warnings.push_back("n-gram source " + s + " lacks order 1 or 5 columns; skipped");
        continue;
      }
      conditions.emplace_back("ngram=" + s + ";sim=" + sim + ";mode=" + std::string(to_string(args.mode)), spec);
    }
  }
  if (conditions.empty()) summary.warnings.push_back("no regression conditions (need n1, n5 and a similarity column)");

  std::set<std::string> models;
  for (const auto& [k, _] : groups) models.insert(k.model);

  manifest.config = {{"mode", std::string(to_string(args.mode))},
                     {"ngram_sources", sources},
                     {"similarity_columns", sim_columns},
                     {"stability_eps", args.stability_eps},
                     {"ci", "normal-approximation 1.96*sd/sqrt(k), sample sd"},
                     {"normalization", "train split"}};
  manifest.seed = args.seed;
  for (const auto& p : args.score_paths) manifest.add_input("scores", p);
  manifest.add_input("heuristics", args.heuristics_path);
  if (!args.dataset_path.empty()) manifest.add_input("dataset", args.dataset_path);
  summary.manifest_digest = manifest.digest();
  const CommentHeader comments = {{"manifest_digest", summary.manifest_digest}, {"log_base", "e"}, {"ci95", "normal"}};

  fs::create_directories(args.out_dir);
  auto path = [&](const char* name) { return (fs::path(args.out_dir) / name).string(); };
  auto corr_out = open_output(path("correlations.csv"));
  auto coef_out = open_output(path("coefficients.csv"));
  auto r2_out = open_output(path("r_squared.csv"));
  auto pred_out = open_output(path("predictor_corr.csv"));
  auto cross_out = open_output(path("cross_model.csv"));
  auto phase_out = open_output(path("phases.csv"));
  auto err_out = open_output(path("errors.csv"));
  CsvWriter corr(corr_out, comments, kTidyColumns);
  CsvWriter coef(coef_out, comments, kTidyColumns);
  CsvWriter r2(r2_out, comments, kTidyColumns);
  CsvWriter pred(pred_out, comments, {"split", "row", "col", "value", "items"});
  CsvWriter cross(cross_out, comments, {"step", "row", "col", "value", "items"});
  CsvWriter phase(phase_out, comments,
                  {"model", "condition", "phase1_end_step", "phase2_end_step", "stability_eps", "status"});
  CsvWriter errs(err_out, comments, {"model", "seed", "step", "condition", "stage", "message"});
  auto log_errors = [&](const std::vector<AnalysisError>& es, const std::string& condition) {
    for (const auto& e : es) {
      errs.row({e.model, e.seed, std::to_string(e.step), condition, e.stage, e.message});
      ++summary.errors;
    }
  };

  for (const auto& model : models) {
    for (auto method : {stats::CorrelationMethod::pearson, stats::CorrelationMethod::spearman}) {
      const std::string metric = method == stats::CorrelationMethod::pearson ? "pearson" : "spearman";
      auto t = correlation_trajectory(groups, model, table, heuristics, method, Split::train, args.threads);
      for (const auto& s : t.series) detail::series_rows(corr, model, "split=train", metric, s.name, s);
      log_errors(t.errors, "split=train");
    }
    for (const auto& [cond, spec] : conditions) {
      auto t = regression_trajectory(groups, model, table, spec, args.threads);
      for (const auto& s : t.coefficients) detail::series_rows(coef, model, cond, "coefficient", s.name, s);
      detail::series_rows(coef, model, cond, "coefficient", "intercept", t.intercept);
      detail::series_rows(r2, model, cond, "r2_train", "", t.r2_train);
      detail::series_rows(r2, model, cond, "r2_validation", "", t.r2_validation);
      log_errors(t.errors, cond);
      try {
        const auto rep = detect_phases(t, args.stability_eps);
        phase.row({model, cond, std::to_string(rep.phase1_end),
                   rep.phase2_end ? std::to_string(*rep.phase2_end) : "", format_double(rep.threshold),
                   rep.phase2_end ? "ok" : "no_stable_suffix"});
      } catch (const ArgumentError&) {
        phase.row({model, cond, "", "", format_double(args.stability_eps), "insufficient_steps"});
      }
    }
  }

  // Predictor-predictor correlations on the training split.
  if (heuristics.size() >= 2) {
    try {
      const auto m = predictor_correlations(table, heuristics, Split::train);
      for (std::size_t i = 0; i < m.labels.size(); ++i) {
        for (std::size_t j = 0; j < m.labels.size(); ++j) {
          pred.row({"train", m.labels[i], m.labels[j], format_double(m.at(i, j)), std::to_string(m.items)});
        }
      }
    } catch (const Error& e) {
      errs.row({"", "", "", "split=train", "predictor_corr", e.what()});
      ++summary.errors;
    }
  }

  // Cross-model (and cross-seed) correlations at each shared step, over
  // training items.
  std::map<std::int64_t, std::map<std::string, std::unordered_map<std::string, double>>> by_step;
  for (const auto& [k, g] : groups) {
    auto& dst = by_step[k.step][k.model + "/" + k.seed];
    for (const auto& [id, v] : g) {
      if (table.splits()[*table.row(id)] == Split::train) dst[id] = v;
    }
  }
  for (const auto& [step, tables] : by_step) {
    if (tables.size() < 2) continue;
    try {
      const auto m = cross_model_correlation(tables);
      for (std::size_t i = 0; i < m.labels.size(); ++i) {
        for (std::size_t j = 0; j < m.labels.size(); ++j) {
          cross.row({std::to_string(step), m.labels[i], m.labels[j], format_double(m.at(i, j)),
                     std::to_string(m.items)});
        }
      }
      if (m.excluded_items) {
        summary.warnings.push_back("step " + std::to_string(step) + ": " + std::to_string(m.excluded_items) +
                                   " items not shared by all models excluded from cross-model correlation");
      }
    } catch (const Error& e) {
      errs.row({"", "", std::to_string(step), "split=train", "cross_model", e.what()});
      ++summary.errors;
    }
  }

  for (auto* s : {&corr_out, &coef_out, &r2_out, &pred_out, &cross_out, &phase_out, &err_out}) {
    s->flush();
    if (!*s) throw IoError("failed writing analysis outputs in " + args.out_dir);
  }
  manifest.finished = utc_timestamp();
  manifest.write(path("manifest.json"));
  return summary;
}

}  // namespace phasescope::pipeline
