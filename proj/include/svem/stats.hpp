#pragma once

#include <span>
#include <vector>

namespace svem::stats {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sd(std::span<const double> x);
/// Linear-interpolation empirical quantile (Hyndman-Fan type 7).
double quantile(std::span<const double> x, double prob);
/// Same as quantile() but on an already sorted range.
double quantile_sorted(std::span<const double> sorted, double prob);
double median(std::span<const double> x);
double correlation(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value of a one-sample t statistic with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

}  // namespace svem::stats
