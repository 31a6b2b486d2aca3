#pragma once

// Reference implementations used only by the tests. They are written
// independently of the library (plain loops, no Eigen solvers) so that a
// shared bug cannot make both sides agree.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvector of the largest eigenvalue.
inline std::vector<double> leading_eigenvector(Rows a) {
  const std::size_t n = a.size();
  Rows v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (a[i][i] > a[best][best]) best = i;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = v[k][best];
  return out;
}

inline Rows sample_covariance(const Rows& x) {
  const std::size_t n = x.size(), d = x[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : x)
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k] / static_cast<double>(n);
  Rows c(d, std::vector<double>(d, 0.0));
  for (const auto& r : x)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / static_cast<double>(n - 1);
  return c;
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

/// O(n) scan for the nearest row of `ref` to `q`.
inline double nearest(const Rows& ref, const std::vector<double>& q) {
  double best = INFINITY;
  for (const auto& r : ref) best = std::min(best, distance(r, q));
  return best;
}

/// Fraction of `column` that is <= x.
inline double ecdf(const std::vector<double>& column, double x) {
  std::size_t c = 0;
  for (double v : column) c += v <= x;
  return static_cast<double>(c) / static_cast<double>(column.size());
}

inline double naive_kde(const Rows& pts, const std::vector<double>& w, double h, const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) d2 += (z[k] - pts[i][k]) * (z[k] - pts[i][k]);
    s += w[i] * std::exp(-d2 / (h * h));
  }
  return s;
}

/// Gaussian log density summed over samples for a mixture given as parallel
/// arrays.
inline double mixture_log_likelihood(const std::vector<double>& x, const std::vector<double>& w,
                                     const std::vector<double>& mu, const std::vector<double>& var) {
  double ll = 0.0;
  for (double v : x) {
    double p = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c)
      p += w[c] * std::exp(-0.5 * (v - mu[c]) * (v - mu[c]) / var[c]) / std::sqrt(2.0 * M_PI * var[c]);
    ll += std::log(p);
  }
  return ll;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tabkde_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
