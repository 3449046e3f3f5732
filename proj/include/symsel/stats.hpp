#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace symsel {

// Pairwise (cascade) summation. Result depends only on the order of `xs`,
// never on how the values were produced.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Sample mean and standard error of the mean (n - 1 denominator).
inline MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  out.mean = pairwise_sum(xs) / n;
  if (xs.size() < 2) return out;
  // two-pass variance; cheap and stable at these sizes
  double ss = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double d = x - out.mean;
    ss += d * d;
    comp += d;
  }
  const double var = (ss - comp * comp / n) / (n - 1.0);
  out.stderr_ = std::sqrt(var > 0.0 ? var : 0.0) / std::sqrt(n);
  return out;
}

}  // namespace symsel
