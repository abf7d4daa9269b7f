// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace parex {

SampleSummary summarize(std::vector<double> samples) {
  SampleSummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.min = samples.front();
  s.max = samples.back();
  double sum = 0;
  for (double v : samples) sum += v;
  s.mean = sum / double(samples.size());
  s.median = samples[samples.size() / 2];
  s.p99 = samples[std::min(samples.size() - 1,
                           std::size_t(std::ceil(0.99 * double(samples.size())) - 1))];
  double var = 0;
  for (double v : samples) var += (v - s.mean) * (v - s.mean);
  s.stddev = samples.size() > 1 ? std::sqrt(var / double(samples.size() - 1)) : 0.0;
  return s;
}

namespace {

// Regularized incomplete gamma P(a,x) by series, Q(a,x) by continued
// fraction (Lentz). Standard forms; accurate enough for p-value thresholds.
double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-14) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_pvalue(double statistic, int dof) {
  if (statistic <= 0) return 1.0;
  double a = dof / 2.0, x = statistic / 2.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double uniformity_pvalue(const std::vector<std::size_t>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("need >= 2 categories");
  double total = 0;
  for (auto c : counts) total += double(c);
  if (total == 0) return 1.0;
  double expected = total / double(counts.size());
  double stat = 0;
  for (auto c : counts) {
    double d = double(c) - expected;
    stat += d * d / expected;
  }
  return chi_square_pvalue(stat, int(counts.size()) - 1);
}

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit needs matching samples");
  double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit f;
  double denom = n * sxx - sx * sx;
  f.slope = denom != 0 ? (n * sxy - sx * sy) / denom : 0;
  f.intercept = (sy - f.slope * sx) / n;
  double mean_y = sy / n, ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pred = f.slope * x[i] + f.intercept;
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    ss_res += (y[i] - pred) * (y[i] - pred);
  }
  f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace parex
