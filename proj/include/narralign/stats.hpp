#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "narralign/error.hpp"

namespace narralign::stats {

struct Classification {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Positive class is `true`. Any 0/0 term is reported as 0.
template <class Pred, class Gold>
Classification f1_score(const Pred& predicted, const Gold& gold) {
  if (std::size(predicted) != std::size(gold)) fail(ErrorKind::InvalidArgument, "f1_score: length mismatch");
  Classification c;
  for (std::size_t k = 0; k < std::size(gold); ++k) {
    const bool p = predicted[k], g = gold[k];
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  c.precision = ratio(c.tp, c.tp + c.fp);
  c.recall = ratio(c.tp, c.tp + c.fn);
  c.f1 = c.precision + c.recall == 0.0 ? 0.0 : 2.0 * c.precision * c.recall / (c.precision + c.recall);
  return c;
}

/// Percentage of gold scenes whose assigned chapter matches; scenes missing from `assigned` are wrong.
inline double alignment_accuracy(const std::map<std::size_t, std::size_t>& assigned,
                                 const std::map<std::size_t, std::size_t>& gold) {
  if (gold.empty()) fail(ErrorKind::InvalidArgument, "alignment_accuracy: empty gold map");
  std::size_t correct = 0;
  for (const auto& [scene, chapter] : gold) {
    const auto it = assigned.find(scene);
    correct += it != assigned.end() && it->second == chapter;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
}

/// 1-based ranks, ties receive their average rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo + 1;
    while (hi < order.size() && xs[order[hi]] == xs[order[lo]]) ++hi;
    const double r = (static_cast<double>(lo + 1) + static_cast<double>(hi)) / 2.0;
    for (std::size_t k = lo; k < hi; ++k) ranks[order[k]] = r;
    lo = hi;
  }
  return ranks;
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

/// Two-sided p-value of a Student t statistic.
inline double t_two_sided_p(double t, double df) {
  if (std::isnan(t) || !(df > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Spearman rank correlation; p from t = rho*sqrt((n-2)/(1-rho^2)) with n-2 degrees of freedom.
inline Correlation spearman_rho(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) fail(ErrorKind::InvalidArgument, "spearman_rho: length mismatch");
  if (xs.size() < 3) fail(ErrorKind::InvalidArgument, "spearman_rho: need at least 3 samples");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  Correlation c;
  c.rho = pearson(rx, ry);
  if (std::isnan(c.rho)) fail(ErrorKind::DegenerateDistribution, "spearman_rho: a sample is constant");
  const double df = static_cast<double>(xs.size()) - 2.0;
  if (std::fabs(c.rho) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.rho * std::sqrt(df / ((1.0 - c.rho) * (1.0 + c.rho)));
    c.p_value = t_two_sided_p(t, df);
  }
  return c;
}

/// ROC AUC as the Mann-Whitney probability that a positive outscores a negative; ties count 1/2.
template <class Labels>
double auc_roc(std::span<const double> scores, const Labels& labels) {
  if (scores.size() != std::size(labels)) fail(ErrorKind::InvalidArgument, "auc_roc: length mismatch");
  double n_pos = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) n_pos += labels[k] ? 1.0 : 0.0;
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorKind::InvalidArgument, "auc_roc: need both classes");
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (labels[k]) rank_sum += ranks[k];
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  double cohens_d = 0.0;
};

inline double mean(std::span<const double> xs) { return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size()); }

/// Unbiased (n-1) sample variance.
inline double sample_variance(std::span<const double> xs) {
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

/// Welch's unequal-variance t-test (Welch-Satterthwaite df, two-sided p) and Cohen's d with pooled SD.
inline TTest welch_t_test(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() < 2 || ys.size() < 2) fail(ErrorKind::InvalidArgument, "welch_t_test: need at least 2 samples each");
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  const double mx = mean(xs), my = mean(ys);
  const double vx = sample_variance(xs), vy = sample_variance(ys);
  const double diff = mx - my;
  TTest r;

  const double se2 = vx / nx + vy / ny;
  if (se2 == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.df = nx + ny - 2.0;
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
  } else {
    r.t = diff / std::sqrt(se2);
    const double a = vx / nx, b = vy / ny;
    r.df = se2 * se2 / (a * a / (nx - 1.0) + b * b / (ny - 1.0));
    r.p_value = t_two_sided_p(r.t, r.df);
  }

  const double pooled = std::sqrt(((nx - 1.0) * vx + (ny - 1.0) * vy) / (nx + ny - 2.0));
  if (pooled == 0.0) r.cohens_d = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  else r.cohens_d = diff / pooled;
  return r;
}

/// Length of the longest strictly increasing subsequence (patience sorting).
template <class T>
std::size_t lis_length(std::span<const T> seq) {
  std::vector<T> tails;
  for (const T& x : seq) {
    auto it = std::lower_bound(tails.begin(), tails.end(), x);
    if (it == tails.end()) tails.push_back(x);
    else *it = x;
  }
  return tails.size();
}

template <class T>
std::size_t lis_length(const std::vector<T>& seq) {
  return lis_length(std::span<const T>(seq));
}

}  // namespace narralign::stats
