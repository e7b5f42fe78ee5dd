#pragma once

// Correlation, standardization and least-squares primitives.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phasescope/error.hpp"

namespace phasescope::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("mean of empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_sd(std::span<const double> x) {
  if (x.size() < 2) throw ArgumentError("standard deviation needs at least 2 values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
  if (x.size() < 2) throw ArgumentError("pearson: need at least 2 pairs");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateError("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; ties get the average of the ranks they span.
inline std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) r[order[k]] = avg;
    i = j;
  }
  return r;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("spearman: length mismatch");
  const auto rx = ranks(x), ry = ranks(y);
  return pearson(rx, ry);
}

enum class CorrelationMethod { pearson, spearman };

inline double correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod m) {
  return m == CorrelationMethod::pearson ? pearson(x, y) : spearman(x, y);
}

struct ZParams {
  double mean = 0.0;
  double sd = 1.0;
};

inline ZParams zscore_fit(std::span<const double> x) {
  ZParams p{mean(x), sample_sd(x)};
  if (!(p.sd > 0.0)) throw DegenerateError("z-score: zero variance");
  return p;
}

inline std::vector<double> zscore_apply(std::span<const double> x, ZParams p) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - p.mean) / p.sd;
  return out;
}

struct OlsFit {
  double intercept = 0.0;
  std::vector<double> coefficients;
  double r_squared = 0.0;
  std::vector<double> residuals;
  std::size_t rows = 0;
};

/// Least squares with an intercept via column-pivoted Householder QR.
/// `columns` are the predictors, each of length rows. Throws SingularError
/// listing the dependent columns when the design is rank deficient.
inline OlsFit ols(std::span<const std::vector<double>> columns, std::span<const double> y,
                  std::span<const std::string> names = {}) {
  const std::size_t n = y.size(), p = columns.size();
  if (n < p + 1) throw ArgumentError("ols: need at least columns + 1 rows");
  Eigen::MatrixXd X(n, p + 1);
  X.col(0).setOnes();
  for (std::size_t j = 0; j < p; ++j) {
    if (columns[j].size() != n) throw ArgumentError("ols: column length mismatch");
    X.col(static_cast<Eigen::Index>(j + 1)) = Eigen::Map<const Eigen::VectorXd>(columns[j].data(), n);
  }
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p + 1)) {
    std::string bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) {
      const auto col = static_cast<std::size_t>(perm[k]);
      if (!bad.empty()) bad += ", ";
      if (col == 0) {
        bad += "(intercept)";
      } else {
        bad += col - 1 < names.size() ? names[col - 1] : "x" + std::to_string(col - 1);
      }
    }
    throw SingularError("ols: design matrix is rank deficient; dependent columns: " + bad);
  }
  const Eigen::VectorXd beta = qr.solve(yv);
  const Eigen::VectorXd resid = yv - X * beta;

  OlsFit fit;
  fit.rows = n;
  fit.intercept = beta(0);
  fit.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
  fit.residuals.assign(resid.data(), resid.data() + resid.size());
  const double ym = yv.mean();
  const double sst = (yv.array() - ym).square().sum();
  const double sse = resid.squaredNorm();
  if (sst == 0.0) throw DegenerateError("ols: constant response");
  fit.r_squared = 1.0 - sse / sst;
  return fit;
}

/// 1 - SSE/SST of predictions against observations.
inline double r_squared(std::span<const double> observed, std::span<const double> predicted) {
  if (observed.size() != predicted.size()) throw ArgumentError("r_squared: length mismatch");
  const double m = mean(observed);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    sse += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
    sst += (observed[i] - m) * (observed[i] - m);
  }
  if (sst == 0.0) throw DegenerateError("r_squared: constant observations");
  return 1.0 - sse / sst;
}

struct Aggregate {
  double mean = 0.0;
  double ci95 = 0.0;  // half-width, 1.96 * sd / sqrt(k)
  std::size_t k = 0;
};

/// Normal-approximation 95% interval across seeds. Values are summed in
/// sorted order so the result is independent of seed order.
inline Aggregate seed_aggregate(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("seed_aggregate: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  Aggregate a;
  a.k = v.size();
  a.mean = mean(v);
  a.mean = std::clamp(a.mean, v.front(), v.back());
  a.ci95 = v.size() < 2 ? 0.0 : 1.96 * sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
  return a;
}

}  // namespace phasescope::stats
