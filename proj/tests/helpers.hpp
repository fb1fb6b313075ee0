#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "robayes/numerics.hpp"

namespace testing_util {

inline double sup_dev(const std::function<double(double)>& a, const std::function<double(double)>& b, double lo,
                      double hi, int n = 2001) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    m = std::max(m, std::abs(a(x) - b(x)));
  }
  return m;
}

// Plain sample mean and standard error of g(theta + Z).
struct Mc {
  double mean, se;
};
inline Mc monte_carlo(const std::function<double(double)>& g, double theta, std::size_t draws, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double v = g(theta + z(rng));
    s += v;
    s2 += v * v;
  }
  const double m = s / draws;
  return {m, std::sqrt((s2 / draws - m * m) / (draws - 1))};
}

// Independent discrete Fisher information: sum (df)^2 / (dx * midpoint).
inline double fisher_sum(const std::vector<double>& f, double dx) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const double v = 0.5 * (f[i] + f[i + 1]);
    if (v < 1e-300) continue;
    const double u = f[i + 1] - f[i];
    acc += u * u / (dx * v);
  }
  return acc;
}

}  // namespace testing_util
