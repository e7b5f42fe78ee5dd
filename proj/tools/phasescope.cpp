// phasescope: command-line driver for corpus indexing, dataset building,
// heuristic scoring, score ingestion and trajectory analysis.
//
// Exit codes: 0 success, 1 runtime or I/O error, 2 usage error.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phasescope/pipeline.hpp"

namespace ps = phasescope;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<std::string, std::string> split_named(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw UsageError("expected NAME=PATH, got '" + spec + "'");
  }
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

std::vector<ps::Weighting> parse_weighting(const std::string& w) {
  if (w == "uniform") return {ps::Weighting::uniform};
  if (w == "sgpt") return {ps::Weighting::sgpt};
  if (w == "both") return {ps::Weighting::uniform, ps::Weighting::sgpt};
  throw UsageError("--weighting must be uniform, sgpt or both");
}

std::set<int> parse_orders(const std::string& s) {
  std::set<int> orders;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      orders.insert(std::stoi(part));
    } catch (const std::exception&) {
      throw UsageError("bad --orders value '" + part + "'");
    }
  }
  if (orders.empty()) throw UsageError("--orders is empty");
  return orders;
}

void print_histogram(const ps::ReasonHistogram& h, std::size_t total) {
  std::cerr << "rejected " << total << ":\n";
  for (const auto& [reason, n] : h) std::cerr << "  " << reason << ": " << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure how well frequency, n-gram and similarity heuristics explain language "
               "model log-probabilities across training checkpoints."};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads (0 = all cores; PHASESCOPE_THREADS overrides)")
      ->capture_default_str();

  // build-index
  std::string corpus_path, index_out;
  bool lowercase = false;
  auto* build_index = app.add_subcommand("build-index", "Tokenize a corpus (one document per line) and index it");
  build_index->add_option("corpus", corpus_path, "UTF-8 corpus, one document per line")->required();
  build_index->add_option("-o,--out", index_out, "Index file to write")->required();
  build_index->add_flag("--lowercase", lowercase, "Case-fold tokens before indexing");

  // count
  std::string count_index;
  std::vector<std::string> query;
  auto* count = app.add_subcommand("count", "Print the exact occurrence count of a word sequence");
  count->add_option("index", count_index, "Index file")->required();
  count->add_option("words", query, "Query words");

  // build-dataset
  ps::pipeline::DatasetArgs ds;
  bool no_caps = false;
  auto* build_dataset = app.add_subcommand("build-dataset", "Build a decontaminated words-in-context dataset");
  build_dataset->add_option("sentences", ds.sentences_path, "One sentence per line")->required();
  build_dataset->add_option("-o,--out", ds.out_path, "Dataset JSON-lines file")->required();
  build_dataset->add_option("--decontaminate", ds.decontam_index_paths, "Training-corpus index (repeatable)");
  build_dataset->add_option("--vocab", ds.vocab_paths, "Word list every word must belong to (repeatable)");
  build_dataset->add_option("--exclude", ds.exclude_paths, "Blocklist; sentences containing a listed word are dropped");
  build_dataset->add_option("--seed", ds.filter.seed)->capture_default_str();
  build_dataset->add_option("--train", ds.filter.train_size)->capture_default_str();
  build_dataset->add_option("--validation", ds.filter.validation_size)->capture_default_str();
  build_dataset->add_option("--test", ds.filter.test_size)->capture_default_str();
  build_dataset->add_option("--min-words", ds.filter.min_words)->capture_default_str();
  build_dataset->add_flag("--no-capitalization-filter", no_caps);

  // score-heuristics
  ps::pipeline::ScoreHeuristicsArgs sh;
  std::vector<std::string> ngram_specs, emb_specs;
  std::string orders = "1,2,3,4,5", weighting = "both";
  bool word_level_unigram = false;
  auto* score = app.add_subcommand("score-heuristics", "Compute n-gram and similarity heuristics per item");
  score->add_option("dataset", sh.dataset_path, "Dataset file")->required();
  score->add_option("-o,--out", sh.out_path, "Heuristic table CSV")->required();
  score->add_option("--ngram-source", ngram_specs, "NAME=INDEX (repeatable)");
  score->add_option("--embeddings", emb_specs, "NAME=VEC_FILE (repeatable)");
  score->add_option("--orders", orders)->capture_default_str();
  score->add_option("--alpha", sh.options.backoff.alpha, "Stupid Backoff discount")->capture_default_str();
  score->add_option("--weighting", weighting, "uniform, sgpt or both")->capture_default_str();
  score->add_flag("--word-level-unigram", word_level_unigram, "Normalize unigrams by word tokens only");

  // ingest-scores
  std::vector<std::string> score_paths;
  std::string ingest_dataset, ingest_out;
  auto* ingest = app.add_subcommand("ingest-scores", "Validate and merge model score records");
  ingest->add_option("scores", score_paths, "JSON-lines score files")->required();
  ingest->add_option("-o,--out", ingest_out, "Validated score store")->required();
  ingest->add_option("--dataset", ingest_dataset, "Dataset whose item ids are expected");

  // analyze
  ps::pipeline::AnalyzeArgs an;
  std::string mode = "zscored", an_weighting = "sgpt";
  auto* analyze = app.add_subcommand("analyze", "Correlation and regression trajectories");
  analyze->add_option("--scores", an.score_paths, "Score files or store")->required();
  analyze->add_option("--heuristics", an.heuristics_path, "Heuristic table CSV")->required();
  analyze->add_option("--dataset", an.dataset_path, "Dataset file");
  analyze->add_option("-o,--out-dir", an.out_dir, "Output directory")->required();
  analyze->add_option("--mode", mode, "zscored or bits-distance")->capture_default_str();
  analyze->add_option("--ngram-source", an.ngram_sources, "Restrict to these n-gram sources (repeatable)");
  analyze->add_option("--weighting", an_weighting, "Similarity variant(s) in regressions")->capture_default_str();
  analyze->add_option("--stability-eps", an.stability_eps)->capture_default_str();
  analyze->add_option("--seed", an.seed, "Recorded in the manifest")->capture_default_str();

  // verify-manifest
  std::string manifest_path;
  auto* verify = app.add_subcommand("verify-manifest", "Re-hash the inputs recorded in a manifest");
  verify->add_option("manifest", manifest_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    threads = ps::resolve_threads(threads);
    if (*build_index) {
      const auto s = ps::pipeline::build_index(corpus_path, index_out, {lowercase});
      std::cerr << "indexed " << s.documents << " documents, |C|=" << s.total_tokens << ", vocabulary "
                << s.vocabulary - 1 << '\n';
    } else if (*count) {
      std::vector<std::string> words;
      for (const auto& q : query) {
        for (auto& w : ps::text::tokenize(q)) words.push_back(std::move(w));
      }
      if (words.empty()) throw UsageError("count needs at least one query word");
      const auto idx = ps::CorpusIndex::load(count_index);
      std::cout << idx.count(std::span<const std::string>(words)) << '\n';
    } else if (*build_dataset) {
      ds.filter.capitalization = !no_caps;
      ds.threads = threads;
      const auto r = ps::pipeline::build_dataset(ds);
      std::cerr << "items: train " << r.dataset.count(ps::Split::train) << ", validation "
                << r.dataset.count(ps::Split::validation) << ", test " << r.dataset.count(ps::Split::test)
                << '\n';
      print_histogram(r.rejected, r.rejected_total());
      for (const auto& w : r.dataset.warnings) std::cerr << "warning: " << w << '\n';
    } else if (*score) {
      for (const auto& s : ngram_specs) sh.ngram_sources.push_back(split_named(s));
      for (const auto& s : emb_specs) sh.embeddings.push_back(split_named(s));
      sh.options.orders = parse_orders(orders);
      sh.options.weightings = parse_weighting(weighting);
      sh.options.backoff.token_level_denominator = !word_level_unigram;
      sh.options.threads = threads;
      const auto rep = ps::pipeline::score_heuristics(sh);
      for (const auto& e : rep.ngram_errors) std::cerr << "item " << e.item_id << ": " << e.message << '\n';
      for (const auto& [name, n] : rep.critical_missing) {
        std::cerr << name << ": " << n << " items lack a critical-word embedding\n";
      }
    } else if (*ingest) {
      const auto rep = ps::pipeline::ingest_scores_to(score_paths, ingest_dataset, ingest_out);
      std::cerr << "groups " << rep.groups.size() << ", records " << rep.accepted << '\n';
      if (rep.unknown_items) std::cerr << "warning: " << rep.unknown_items << " records for unknown items excluded\n";
      for (const auto& r : rep.rejected) std::cerr << "rejected " << r << '\n';
    } else if (*analyze) {
      if (mode == "zscored") {
        an.mode = ps::RegressionMode::zscored;
      } else if (mode == "bits-distance") {
        an.mode = ps::RegressionMode::bits_distance;
      } else {
        throw UsageError("--mode must be zscored or bits-distance");
      }
      an.weightings = parse_weighting(an_weighting);
      an.threads = threads;
      const auto s = ps::pipeline::analyze(an);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
      std::cerr << "groups " << s.groups << ", errors " << s.errors << ", warnings " << s.warnings.size()
                << ", manifest " << s.manifest_digest << '\n';
    } else if (*verify) {
      const auto problems = ps::verify_manifest(manifest_path);
      for (const auto& p : problems) std::cerr << p << '\n';
      if (!problems.empty()) return 1;
      std::cout << "ok\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ps::ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
