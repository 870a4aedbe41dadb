#pragma once

// Independent reference computations used by the tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

namespace oracle {

/// Central difference of f at x along coordinate k.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t k, double h = 1e-5) {
  const double orig = x[k];
  x[k] = orig + h;
  const double up = f(x);
  x[k] = orig - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            const std::vector<double>& x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = central_difference(f, x, k, h);
  return g;
}

/// Largest |a - n| / max(|a|, |n|, floor) over paired entries.
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

/// Singular values of a row-major matrix.
inline std::vector<double> singular_values(const std::vector<double>& m, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd a(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) a(r, c) = m[r * cols + c];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

inline std::vector<double> normal_vector(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("convcl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
