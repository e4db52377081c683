#pragma once

// Reference implementations kept deliberately naive and independent of the
// library code they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double mcc = 0.0;
};

// Per-class counts by scanning all sample pairs; MCC as the sample correlation
// of one-hot indicator matrices.
inline Metrics brute_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  std::set<std::string> labels(gold.begin(), gold.end());
  labels.insert(pred.begin(), pred.end());
  const std::vector<std::string> L(labels.begin(), labels.end());
  const std::size_t n = gold.size();
  Metrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += gold[i] == pred[i];
  m.accuracy = double(correct) / double(n);

  double macro = 0.0, weighted = 0.0;
  for (const auto& c : L) {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (gold[i] == c) ++support;
      if (gold[i] == c && pred[i] == c) ++tp;
      if (gold[i] != c && pred[i] == c) ++fp;
      if (gold[i] == c && pred[i] != c) ++fn;
    }
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    macro += f;
    weighted += f * double(support);
  }
  m.macro_f1 = macro / double(L.size());
  m.weighted_f1 = weighted / double(n);

  const std::size_t k = L.size();
  std::vector<std::vector<double>> x(n, std::vector<double>(k, 0.0)), y = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      x[i][c] = gold[i] == L[c];
      y[i][c] = pred[i] == L[c];
    }
  auto cov = [&](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ma += a[i][c];
        mb += b[i][c];
      }
      ma /= double(n);
      mb /= double(n);
      for (std::size_t i = 0; i < n; ++i) s += (a[i][c] - ma) * (b[i][c] - mb);
    }
    return s;
  };
  const double sxy = cov(x, y), sxx = cov(x, x), syy = cov(y, y);
  m.mcc = sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return m;
}

using Mat = std::vector<std::vector<double>>;

// One-sided Jacobi SVD: rotates column pairs of A until they are mutually
// orthogonal. Returns singular values (descending) and right singular vectors
// as columns of V.
inline void jacobi_svd(Mat a, std::vector<double>& sigma, Mat& v) {
  const std::size_t m = a.size(), n = a.front().size();
  v.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += a[i][p] * a[i][p];
          beta += a[i][q] * a[i][q];
          gamma += a[i][p] * a[i][q];
        }
        if (gamma == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a[i][p], aq = a[i][q];
          a[i][p] = c * ap - s * aq;
          a[i][q] = s * ap + c * aq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v[i][p], vq = v[i][q];
          v[i][p] = c * vp - s * vq;
          v[i][q] = s * vp + c * vq;
        }
      }
    if (off < 1e-15) break;
  }
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a[i][j] * a[i][j];
    order.push_back({std::sqrt(s), j});
  }
  std::sort(order.begin(), order.end(), [](auto x, auto y) { return x.first > y.first; });
  sigma.clear();
  Mat sorted(n, std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    sigma.push_back(order[r].first);
    for (std::size_t i = 0; i < n; ++i) sorted[i][r] = v[i][order[r].second];
  }
  v = sorted;
}

// ||A - A V_k V_k^T||_F for the first k columns of V.
inline double reconstruction_error(const Mat& a, const Mat& v, std::size_t k) {
  double err = 0.0;
  const std::size_t n = v.size();
  for (const auto& row : a) {
    std::vector<double> proj(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < n; ++j) proj[c] += row[j] * v[j][c];
    for (std::size_t j = 0; j < n; ++j) {
      double r = 0.0;
      for (std::size_t c = 0; c < k; ++c) r += proj[c] * v[j][c];
      err += (row[j] - r) * (row[j] - r);
    }
  }
  return std::sqrt(err);
}

}  // namespace oracle
