#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "neuralot/geometry.hpp"

namespace testing {

using neuralot::Matrix;
using neuralot::Vector;

// Central differences of f at x.
inline Vector finite_differences(const std::function<double(const Vector&)>& f, const Vector& x,
                                 double h = 1e-5) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = xp[i];
    xp[i] = x0 + h;
    const double fp = f(xp);
    xp[i] = x0 - h;
    const double fm = f(xp);
    xp[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// |analytic - numeric| / |numeric| in the Euclidean norm.
inline double relative_error(const Vector& analytic, const Vector& numeric) {
  const double denom = std::max(numeric.norm(), 1e-12);
  return (analytic - numeric).norm() / denom;
}

inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Matrix random_points(Eigen::Index n, neuralot::Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(2, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Reference statistics of an eps2 curve: earliest arg-min, then the
// population standard deviation of the tail starting at the minimum.
struct CurveStats {
  double min = 0.0;
  std::int64_t t_min = 0;
  double sigma = 0.0;
};

inline CurveStats reference_curve_stats(const std::vector<std::int64_t>& steps,
                                        const std::vector<double>& eps2) {
  std::size_t arg = 0;
  for (std::size_t k = 0; k < eps2.size(); ++k) {
    if (eps2[k] < eps2[arg]) arg = k;
  }
  const std::vector<double> tail(eps2.begin() + static_cast<long>(arg), eps2.end());
  double sum = 0.0;
  for (double e : tail) sum += e;
  const double mean = sum / static_cast<double>(tail.size());
  double ss = 0.0;
  for (double e : tail) ss += (e - mean) * (e - mean);
  return {eps2[arg], steps[arg], std::sqrt(ss / static_cast<double>(tail.size()))};
}

// Fresh scratch directory under the build tree (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("NEURALOT_TEST_TMP");
  const std::filesystem::path root =
      env != nullptr ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "neuralot_tests";
  const std::filesystem::path dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
