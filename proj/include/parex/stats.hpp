// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace parex {

struct SampleSummary {
  std::size_t count = 0;
  double min = 0, max = 0, mean = 0, median = 0, p99 = 0, stddev = 0;
};

SampleSummary summarize(std::vector<double> samples);

/// Upper-tail probability of a chi-square statistic with `dof` degrees of
/// freedom (regularized incomplete gamma Q(dof/2, x/2)).
double chi_square_pvalue(double statistic, int dof);

/// Pearson chi-square uniformity test over observed category counts.
double uniformity_pvalue(const std::vector<std::size_t>& counts);

struct LinearFit {
  double slope = 0, intercept = 0, r_squared = 0;
};

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace parex
