#pragma once

// Heuristic-vs-model analyses across training checkpoints: correlation and
// regression trajectories with seed aggregation, cross-model and
// predictor-predictor correlation matrices, and phase detection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "phasescope/error.hpp"
#include "phasescope/parallel.hpp"
#include "phasescope/stats.hpp"
#include "phasescope/tables.hpp"

namespace phasescope {

enum class RegressionMode { zscored, bits_distance };

inline std::string_view to_string(RegressionMode m) {
  return m == RegressionMode::zscored ? "zscored" : "bits-distance";
}

/// Three item-aligned predictors (unigram log-prob, 5-gram log-prob,
/// similarity) and the model response, split into a fitting set and an
/// optional held-out set. In z-scored mode every column, response
/// included, is standardized with statistics of the fitting set.
struct DesignMatrix {
  std::array<std::string, 3> names = {"unigram", "ngram5", "similarity"};
  std::array<std::vector<double>, 3> train_x;
  std::vector<double> train_y;
  std::array<std::vector<double>, 3> val_x;
  std::vector<double> val_y;
  RegressionMode mode = RegressionMode::zscored;
  std::array<stats::ZParams, 3> x_norm{};
  stats::ZParams y_norm{};
};

struct RawColumns {
  std::array<std::vector<double>, 3> x;  // unigram ln p, 5-gram ln p, similarity
  std::vector<double> y;                  // model ln p
};

/// Builds a design from natural-log probabilities and cosine similarity.
/// zscored: standardize with train statistics. bits_distance: convert
/// log-probabilities to -log2 p and similarity to 1 - similarity, no
/// standardization.
inline DesignMatrix make_design(const RawColumns& train, const RawColumns& validation,
                                RegressionMode mode) {
  DesignMatrix d;
  d.mode = mode;
  if (mode == RegressionMode::zscored) {
    for (std::size_t j = 0; j < 3; ++j) {
      d.x_norm[j] = stats::zscore_fit(train.x[j]);
      d.train_x[j] = stats::zscore_apply(train.x[j], d.x_norm[j]);
      d.val_x[j] = stats::zscore_apply(validation.x[j], d.x_norm[j]);
    }
    d.y_norm = stats::zscore_fit(train.y);
    d.train_y = stats::zscore_apply(train.y, d.y_norm);
    d.val_y = stats::zscore_apply(validation.y, d.y_norm);
  } else {
    d.names[2] = "distance";
    auto bits = [](std::span<const double> v) {
      std::vector<double> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i] / std::numbers::ln2;
      return out;
    };
    auto distance = [](std::span<const double> v) {
      std::vector<double> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = 1.0 - v[i];
      return out;
    };
    for (const auto* pair : {&train, &validation}) {
      auto& xs = pair == &train ? d.train_x : d.val_x;
      auto& ys = pair == &train ? d.train_y : d.val_y;
      xs[0] = bits(pair->x[0]);
      xs[1] = bits(pair->x[1]);
      xs[2] = distance(pair->x[2]);
      ys = bits(pair->y);
    }
  }
  return d;
}

struct RegressionResult {
  std::array<std::string, 3> names;
  std::array<double, 3> coefficients{};
  double intercept = 0.0;
  double r2_train = 0.0;
  std::optional<double> r2_validation;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
};

/// Least-squares fit on the training rows; validation R^2 from the
/// train-fitted coefficients on the held-out rows (needs >= 2 rows).
inline RegressionResult ols_fit(const DesignMatrix& d) {
  std::vector<std::string> names(d.names.begin(), d.names.end());
  auto fit = stats::ols(d.train_x, d.train_y, names);
  RegressionResult r;
  r.names = d.names;
  std::copy(fit.coefficients.begin(), fit.coefficients.end(), r.coefficients.begin());
  r.intercept = fit.intercept;
  r.r2_train = fit.r_squared;
  r.n_train = fit.rows;
  r.n_validation = d.val_y.size();
  if (d.val_y.size() >= 2) {
    std::vector<double> pred(d.val_y.size(), fit.intercept);
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += fit.coefficients[j] * d.val_x[j][i];
    }
    r.r2_validation = stats::r_squared(d.val_y, pred);
  }
  return r;
}

/// Regression on un-normalized predictors in bits and cosine distance.
inline RegressionResult unnormalized_fit(const RawColumns& train, const RawColumns& validation = {}) {
  return ols_fit(make_design(train, validation, RegressionMode::bits_distance));
}

struct TrajectoryPoint {
  std::int64_t step = 0;
  std::map<std::string, double> per_seed;
  double mean = 0.0;
  double ci95 = 0.0;
};

struct TrajectorySeries {
  std::string name;
  std::vector<TrajectoryPoint> points;  // strictly increasing steps

  std::vector<std::int64_t> steps() const {
    std::vector<std::int64_t> s;
    for (const auto& p : points) s.push_back(p.step);
    return s;
  }
  std::vector<double> means() const {
    std::vector<double> m;
    for (const auto& p : points) m.push_back(p.mean);
    return m;
  }
};

using SeedStepValues = std::map<std::pair<std::int64_t, std::string>, double>;

inline TrajectorySeries assemble_series(std::string name, const SeedStepValues& values) {
  TrajectorySeries s;
  s.name = std::move(name);
  for (const auto& [key, v] : values) {
    if (s.points.empty() || s.points.back().step != key.first) {
      s.points.push_back({});
      s.points.back().step = key.first;
    }
    s.points.back().per_seed[key.second] = v;
  }
  for (auto& p : s.points) {
    std::vector<double> v;
    for (const auto& [_, x] : p.per_seed) v.push_back(x);
    const auto agg = stats::seed_aggregate(v);
    p.mean = agg.mean;
    p.ci95 = agg.ci95;
  }
  return s;
}

struct AnalysisError {
  std::string model;
  std::string seed;
  std::int64_t step = 0;
  std::string stage;
  std::string message;
};

namespace detail {

/// Table rows of the requested split, in table order.
inline std::vector<std::size_t> rows_in(const HeuristicTable& t, Split split) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (t.splits()[r] == split) rows.push_back(r);
  }
  return rows;
}

/// Model scores for `rows`; throws InputError naming missing items.
inline std::vector<double> gather_scores(const HeuristicTable& t, std::span<const std::size_t> rows,
                                         const std::unordered_map<std::string, double>& scores) {
  std::vector<double> y(rows.size());
  std::size_t missing = 0;
  std::string first;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = scores.find(t.item_ids()[rows[i]]);
    if (it == scores.end()) {
      if (missing++ == 0) first = t.item_ids()[rows[i]];
      continue;
    }
    y[i] = it->second;
  }
  if (missing) {
    throw InputError(std::to_string(missing) + " item(s) without a score, first " + first);
  }
  return y;
}

}  // namespace detail

struct CorrelationTrajectory {
  std::vector<TrajectorySeries> series;  // one per heuristic, in request order
  std::vector<AnalysisError> errors;
};

/// Correlation between model log-probability and each heuristic column at
/// every (seed, step) of one model, over the items of `split`. Rows where a
/// heuristic is missing are dropped for that heuristic only.
inline CorrelationTrajectory correlation_trajectory(const ScoreGroups& groups, const std::string& model,
                                                    const HeuristicTable& table,
                                                    std::span<const std::string> heuristics,
                                                    stats::CorrelationMethod method,
                                                    Split split = Split::train, unsigned threads = 1) {
  std::vector<const ScoreGroups::value_type*> work;
  for (const auto& g : groups) {
    if (g.first.model == model) work.push_back(&g);
  }
  const auto rows = detail::rows_in(table, split);
  std::vector<std::vector<std::optional<double>>> values(work.size());
  std::vector<std::vector<std::string>> failures(work.size());

  parallel_for(work.size(), threads, [&](std::size_t w) {
    values[w].assign(heuristics.size(), std::nullopt);
    failures[w].assign(heuristics.size(), "");
    std::vector<double> y;
    try {
      y = detail::gather_scores(table, rows, work[w]->second);
    } catch (const Error& e) {
      failures[w].assign(heuristics.size(), e.what());
      return;
    }
    for (std::size_t h = 0; h < heuristics.size(); ++h) {
      try {
        const auto col = table.column(heuristics[h]);
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (std::isfinite(col[rows[i]])) {
            xs.push_back(col[rows[i]]);
            ys.push_back(y[i]);
          }
        }
        values[w][h] = stats::correlate(xs, ys, method);
      } catch (const Error& e) {
        failures[w][h] = e.what();
      }
    }
  });

  CorrelationTrajectory out;
  const std::string stage = method == stats::CorrelationMethod::pearson ? "pearson" : "spearman";
  for (std::size_t h = 0; h < heuristics.size(); ++h) {
    SeedStepValues v;
    for (std::size_t w = 0; w < work.size(); ++w) {
      const auto& key = work[w]->first;
      if (values[w][h]) {
        v[{key.step, key.seed}] = *values[w][h];
      } else {
        out.errors.push_back({key.model, key.seed, key.step, stage + ":" + heuristics[h], failures[w][h]});
      }
    }
    out.series.push_back(assemble_series(heuristics[h], v));
  }
  return out;
}

struct RegressionSpec {
  std::string unigram_column;
  std::string ngram_column;
  std::string similarity_column;
  RegressionMode mode = RegressionMode::zscored;
};

struct RegressionTrajectory {
  std::array<TrajectorySeries, 3> coefficients;
  TrajectorySeries intercept;
  TrajectorySeries r2_train;
  TrajectorySeries r2_validation;
  std::vector<AnalysisError> errors;
  std::size_t dropped_rows = 0;  // rows with a missing predictor, summed over fits
};

/// Builds raw columns for `rows`, skipping rows with any missing predictor.
inline RawColumns raw_columns(const HeuristicTable& table, const RegressionSpec& spec,
                              std::span<const std::size_t> rows, std::span<const double> y,
                              std::size_t* dropped = nullptr) {
  const std::array<std::span<const double>, 3> cols = {
      table.column(spec.unigram_column), table.column(spec.ngram_column),
      table.column(spec.similarity_column)};
  RawColumns raw;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (!std::isfinite(cols[0][r]) || !std::isfinite(cols[1][r]) || !std::isfinite(cols[2][r])) {
      if (dropped) ++*dropped;
      continue;
    }
    for (std::size_t j = 0; j < 3; ++j) raw.x[j].push_back(cols[j][r]);
    raw.y.push_back(y[i]);
  }
  return raw;
}

/// One regression per (seed, step) of `model`: fit on the train split,
/// R^2 on the validation split.
inline RegressionTrajectory regression_trajectory(const ScoreGroups& groups, const std::string& model,
                                                  const HeuristicTable& table, const RegressionSpec& spec,
                                                  unsigned threads = 1) {
  std::vector<const ScoreGroups::value_type*> work;
  for (const auto& g : groups) {
    if (g.first.model == model) work.push_back(&g);
  }
  const auto train_rows = detail::rows_in(table, Split::train);
  const auto val_rows = detail::rows_in(table, Split::validation);
  std::vector<std::optional<RegressionResult>> fits(work.size());
  std::vector<std::string> failures(work.size());
  std::vector<std::size_t> dropped(work.size());

  parallel_for(work.size(), threads, [&](std::size_t w) {
    try {
      const auto& scores = work[w]->second;
      const auto ytr = detail::gather_scores(table, train_rows, scores);
      const auto yva = detail::gather_scores(table, val_rows, scores);
      const auto train = raw_columns(table, spec, train_rows, ytr, &dropped[w]);
      const auto val = raw_columns(table, spec, val_rows, yva, &dropped[w]);
      fits[w] = ols_fit(make_design(train, val, spec.mode));
    } catch (const Error& e) {
      failures[w] = e.what();
    }
  });

  RegressionTrajectory out;
  std::array<SeedStepValues, 3> coef;
  SeedStepValues icpt, r2t, r2v;
  for (std::size_t w = 0; w < work.size(); ++w) {
    const auto& key = work[w]->first;
    out.dropped_rows += dropped[w];
    if (!fits[w]) {
      out.errors.push_back({key.model, key.seed, key.step, "regression", failures[w]});
      continue;
    }
    const std::pair<std::int64_t, std::string> k{key.step, key.seed};
    for (std::size_t j = 0; j < 3; ++j) coef[j][k] = fits[w]->coefficients[j];
    icpt[k] = fits[w]->intercept;
    r2t[k] = fits[w]->r2_train;
    if (fits[w]->r2_validation) r2v[k] = *fits[w]->r2_validation;
  }
  const auto names = spec.mode == RegressionMode::zscored
                         ? std::array<std::string, 3>{"unigram", "ngram5", "similarity"}
                         : std::array<std::string, 3>{"unigram", "ngram5", "distance"};
  for (std::size_t j = 0; j < 3; ++j) out.coefficients[j] = assemble_series(names[j], coef[j]);
  out.intercept = assemble_series("intercept", icpt);
  out.r2_train = assemble_series("r2_train", r2t);
  out.r2_validation = assemble_series("r2_validation", r2v);
  return out;
}

struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;  // symmetric, unit diagonal
  std::size_t items = 0;
  std::size_t excluded_items = 0;  // present in some but not all inputs

  double at(std::size_t i, std::size_t j) const { return values[i][j]; }
};

inline CorrelationMatrix correlation_matrix(std::vector<std::string> labels,
                                            const std::vector<std::vector<double>>& columns) {
  CorrelationMatrix m;
  m.labels = std::move(labels);
  const auto k = columns.size();
  m.values.assign(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      m.values[i][j] = m.values[j][i] = stats::pearson(columns[i], columns[j]);
    }
  }
  m.items = columns.empty() ? 0 : columns.front().size();
  return m;
}

/// Pearson correlation between every pair of score tables over their
/// shared items (the intersection; the rest are counted as excluded).
inline CorrelationMatrix cross_model_correlation(
    const std::map<std::string, std::unordered_map<std::string, double>>& tables) {
  std::set<std::string> all, shared;
  bool first = true;
  for (const auto& [_, t] : tables) {
    std::set<std::string> ids;
    for (const auto& [id, _v] : t) ids.insert(id);
    all.insert(ids.begin(), ids.end());
    if (first) {
      shared = std::move(ids);
      first = false;
    } else {
      std::set<std::string> keep;
      std::set_intersection(shared.begin(), shared.end(), ids.begin(), ids.end(),
                            std::inserter(keep, keep.end()));
      shared = std::move(keep);
    }
  }
  std::vector<std::string> labels;
  std::vector<std::vector<double>> columns;
  for (const auto& [label, t] : tables) {
    labels.push_back(label);
    auto& col = columns.emplace_back();
    for (const auto& id : shared) col.push_back(t.at(id));
  }
  auto m = correlation_matrix(std::move(labels), columns);
  m.excluded_items = all.size() - shared.size();
  return m;
}

/// Pearson correlation between heuristic columns over rows of `split`
/// where every requested column is present.
inline CorrelationMatrix predictor_correlations(const HeuristicTable& table,
                                                std::span<const std::string> names,
                                                std::optional<Split> split = Split::train) {
  std::vector<std::span<const double>> cols;
  for (const auto& n : names) cols.push_back(table.column(n));
  std::vector<std::vector<double>> columns(names.size());
  std::size_t excluded = 0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (split && table.splits()[r] != *split) continue;
    bool ok = true;
    for (const auto& c : cols) ok = ok && std::isfinite(c[r]);
    if (!ok) {
      ++excluded;
      continue;
    }
    for (std::size_t j = 0; j < cols.size(); ++j) columns[j].push_back(cols[j][r]);
  }
  auto m = correlation_matrix(std::vector<std::string>(names.begin(), names.end()), columns);
  m.excluded_items = excluded;
  return m;
}

struct PhaseReport {
  std::int64_t phase1_end = 0;               // step of the unigram-coefficient peak
  std::optional<std::int64_t> phase2_end;    // first step of the stable suffix
  double threshold = 0.01;
};

/// Phase 1 ends at the step where the unigram coefficient peaks (earliest
/// on ties). Phase 2 ends at the earliest later step from which every
/// step-to-step change of all three coefficients stays below `eps`; absent
/// when no such step has at least one following change.
inline PhaseReport detect_phases(std::span<const std::int64_t> steps, std::span<const double> unigram,
                                 std::span<const double> ngram, std::span<const double> similarity,
                                 double eps = 0.01) {
  const auto n = steps.size();
  if (n < 3) throw ArgumentError("phase detection needs at least 3 steps");
  if (unigram.size() != n || ngram.size() != n || similarity.size() != n) {
    throw ArgumentError("phase detection: series lengths differ");
  }
  if (!(eps > 0.0)) throw ArgumentError("stability threshold must be positive");
  for (std::size_t i = 1; i < n; ++i) {
    if (steps[i] <= steps[i - 1]) throw ArgumentError("steps must be strictly increasing");
  }
  PhaseReport rep;
  rep.threshold = eps;
  const auto peak = static_cast<std::size_t>(std::max_element(unigram.begin(), unigram.end()) - unigram.begin());
  rep.phase1_end = steps[peak];

  // stable_from[i]: every delta (k -> k+1) for k >= i is below eps.
  std::size_t stable_from = n - 1;
  for (std::size_t k = n - 1; k-- > 0;) {
    const bool small = std::abs(unigram[k + 1] - unigram[k]) < eps &&
                       std::abs(ngram[k + 1] - ngram[k]) < eps &&
                       std::abs(similarity[k + 1] - similarity[k]) < eps;
    if (!small) break;
    stable_from = k;
  }
  const auto boundary = std::max(stable_from, peak + 1);
  if (boundary <= n - 2) rep.phase2_end = steps[boundary];
  return rep;
}

inline PhaseReport detect_phases(const RegressionTrajectory& t, double eps = 0.01) {
  // Steps where all three coefficient means exist.
  std::map<std::int64_t, std::array<std::optional<double>, 3>> by_step;
  for (std::size_t j = 0; j < 3; ++j) {
    for (const auto& p : t.coefficients[j].points) by_step[p.step][j] = p.mean;
  }
  std::vector<std::int64_t> steps;
  std::array<std::vector<double>, 3> c;
  for (const auto& [s, v] : by_step) {
    if (!v[0] || !v[1] || !v[2]) continue;
    steps.push_back(s);
    for (std::size_t j = 0; j < 3; ++j) c[j].push_back(*v[j]);
  }
  return detect_phases(steps, c[0], c[1], c[2], eps);
}

}  // namespace phasescope
