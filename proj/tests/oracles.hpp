// Slow, direct reimplementations used to cross-check the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Least squares of y on [1, t], t = 1..n, via the 2x2 normal equations
/// solved by Gaussian elimination in long double.
inline double slope(const std::vector<double>& y) {
  const std::size_t n = y.size();
  long double a[2][3] = {{0, 0, 0}, {0, 0, 0}};
  for (std::size_t i = 0; i < n; ++i) {
    const long double t = static_cast<long double>(i + 1);
    const long double row[2] = {1.0L, t};
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) a[r][c] += row[r] * row[c];
      a[r][2] += row[r] * y[i];
    }
  }
  const long double f = a[1][0] / a[0][0];
  for (int c = 0; c < 3; ++c) a[1][c] -= f * a[0][c];
  return static_cast<double>(a[1][2] / a[1][1]);
}

inline double phi(const std::vector<double>& x, std::size_t m, double r) {
  const std::size_t windows = x.size() - m + 1;
  double total = 0.0;
  for (std::size_t i = 0; i < windows; ++i) {
    std::size_t matches = 0;
    for (std::size_t j = 0; j < windows; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < m; ++k) d = std::max(d, std::fabs(x[i + k] - x[j + k]));
      if (d <= r) ++matches;
    }
    total += std::log(static_cast<double>(matches) / static_cast<double>(windows));
  }
  return total / static_cast<double>(windows);
}

/// Phi^m - Phi^{m+1}, Chebyshev distance, self-matches included.
inline double apen(const std::vector<double>& x, std::size_t m, double r) {
  return phi(x, m, r) - phi(x, m + 1, r);
}

/// Dictionary parse with the phrases kept as strings in a std::set.
inline std::size_t lz_phrases(const std::vector<std::uint32_t>& s) {
  std::set<std::vector<std::uint32_t>> dict;
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::vector<std::uint32_t> phrase;
    while (i < s.size()) {
      phrase.push_back(s[i++]);
      if (!dict.count(phrase)) break;
    }
    dict.insert(phrase);
    ++count;
  }
  return count;
}

/// P(member > nonmember) + P(tie) / 2 over all pairs.
inline double auc(const std::vector<double>& member, const std::vector<double>& nonmember) {
  double wins = 0.0;
  for (double a : member) {
    for (double b : nonmember) wins += a > b ? 1.0 : a == b ? 0.5 : 0.0;
  }
  return wins / (static_cast<double>(member.size()) * static_cast<double>(nonmember.size()));
}

/// Every (fpr, tpr) for thresholds "score >= tau", tau over all scores and +inf.
inline std::vector<std::pair<double, double>> roc_points(const std::vector<double>& member,
                                                          const std::vector<double>& nonmember) {
  std::set<double> taus(member.begin(), member.end());
  taus.insert(nonmember.begin(), nonmember.end());
  taus.insert(std::numeric_limits<double>::infinity());
  std::vector<std::pair<double, double>> out;
  for (auto it = taus.rbegin(); it != taus.rend(); ++it) {
    const double tau = *it;
    const auto tp = std::count_if(member.begin(), member.end(), [&](double v) { return v >= tau; });
    const auto fp = std::count_if(nonmember.begin(), nonmember.end(), [&](double v) { return v >= tau; });
    out.emplace_back(static_cast<double>(fp) / static_cast<double>(nonmember.size()),
                     static_cast<double>(tp) / static_cast<double>(member.size()));
  }
  return out;
}

inline double tpr_at_fpr(const std::vector<double>& member, const std::vector<double>& nonmember,
                         double target) {
  double best = 0.0;
  for (const auto& [fpr, tpr] : roc_points(member, nonmember)) {
    if (fpr <= target) best = std::max(best, tpr);
  }
  return best;
}

inline double p_value(const std::vector<double>& pool, double v) {
  std::size_t below = 0;
  for (double s : pool) below += s <= v;
  return static_cast<double>(below + 1) / static_cast<double>(pool.size() + 1);
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n x n).
/// Returns eigenvalues descending with unit eigenvectors as columns of `vecs`.
inline std::vector<double> jacobi_eigen(std::vector<std::vector<double>> a,
                                        std::vector<std::vector<double>>& vecs) {
  const std::size_t n = a.size();
  vecs.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) vecs[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vecs[k][p];
          const double vkq = vecs[k][q];
          vecs[k][p] = c * vkp - s * vkq;
          vecs[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i][i] > a[j][j]; });
  std::vector<double> vals;
  std::vector<std::vector<double>> sorted(n, std::vector<double>(n));
  for (std::size_t c = 0; c < n; ++c) {
    vals.push_back(a[order[c]][order[c]]);
    for (std::size_t r = 0; r < n; ++r) sorted[r][c] = vecs[r][order[c]];
  }
  vecs = std::move(sorted);
  return vals;
}

}  // namespace oracle
