#pragma once

// Long-double reimplementation of the Laplace evidence for a probit
// preference model. Shares no code with the library: its own kernel, its own
// Gauss-Jordan inverse, plain undamped Newton on the explicit precision
// matrix and a direct elimination determinant.

#include <cmath>
#include <vector>

namespace oracle {

using LD = long double;
using Mat = std::vector<std::vector<LD>>;

struct RefComparison {
  int a, b, d;  // 1-based
};

inline Mat ref_identity(int n) {
  Mat m(n, std::vector<LD>(n, 0));
  for (int i = 0; i < n; ++i) m[i][i] = 1;
  return m;
}

inline Mat ref_inverse(Mat a) {
  const int n = static_cast<int>(a.size());
  Mat inv = ref_identity(n);
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const LD p = a[c][c];
    for (int k = 0; k < n; ++k) {
      a[c][k] /= p;
      inv[c][k] /= p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const LD f = a[r][c];
      for (int k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

inline LD ref_det(Mat a) {
  const int n = static_cast<int>(a.size());
  LD det = 1;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    if (piv != c) {
      std::swap(a[c], a[piv]);
      det = -det;
    }
    det *= a[c][c];
    for (int r = c + 1; r < n; ++r) {
      const LD f = a[r][c] / a[c][c];
      for (int k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return det;
}

inline LD ref_log_phi(LD z) { return std::log(0.5L * std::erfc(-z / std::sqrt(2.0L))); }

inline LD ref_ratio(LD z) {
  const LD pdf = std::exp(-0.5L * z * z) / std::sqrt(2.0L * 3.14159265358979323846264338L);
  return pdf / (0.5L * std::erfc(-z / std::sqrt(2.0L)));
}

struct RefEvidence {
  LD value;
  std::vector<LD> mode;
};

inline RefEvidence ref_log_evidence(const std::vector<RefComparison>& data, int n,
                                    LD lambda, LD sigma, LD jitter = 1e-8L) {
  Mat K(n, std::vector<LD>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      K[i][j] = std::exp(-LD(i - j) * LD(i - j) / (2 * lambda)) + (i == j ? jitter : 0);
  const Mat Kinv = ref_inverse(K);
  std::vector<LD> f(n, 0);
  const LD s2 = std::sqrt(2.0L) * sigma;

  auto derivs = [&](const std::vector<LD>& v, std::vector<LD>& g, Mat& W) {
    g.assign(n, 0);
    W.assign(n, std::vector<LD>(n, 0));
    for (const auto& c : data) {
      const int a = c.a - 1, b = c.b - 1;
      const LD z = c.d * (v[a] - v[b]) / s2;
      const LD r = ref_ratio(z);
      g[a] += c.d * r / s2;
      g[b] -= c.d * r / s2;
      const LD h = r * (z + r) / (s2 * s2);
      W[a][a] += h;
      W[b][b] += h;
      W[a][b] -= h;
      W[b][a] -= h;
    }
  };

  std::vector<LD> g;
  Mat W;
  for (int it = 0; it < 200; ++it) {
    derivs(f, g, W);
    Mat P(n, std::vector<LD>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) P[i][j] = Kinv[i][j] + W[i][j];
    const Mat Pinv = ref_inverse(P);
    std::vector<LD> rhs(n, 0), next(n, 0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) rhs[i] += W[i][j] * f[j];
      rhs[i] += g[i];
    }
    LD change = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) next[i] += Pinv[i][j] * rhs[j];
      change = std::max(change, std::fabs(next[i] - f[i]));
    }
    f = next;
    if (change < 1e-15L) break;
  }
  derivs(f, g, W);
  LD ll = 0;
  for (const auto& c : data) ll += ref_log_phi(c.d * (f[c.a - 1] - f[c.b - 1]) / s2);
  LD quad = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) quad += f[i] * Kinv[i][j] * f[j];
  Mat IKW = ref_identity(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) IKW[i][j] += K[i][k] * W[k][j];
  return {ll - 0.5L * quad - 0.5L * std::log(ref_det(IKW)), f};
}

}  // namespace oracle
