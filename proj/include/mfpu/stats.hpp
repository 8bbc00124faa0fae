#pragma once

// Agreement statistics, one-way ANOVA and distribution tails.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfpu {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double x, double a, double b);
// P(X > f) for X ~ F(d1, d2).
double f_sf(double f, double d1, double d2);
// Two-sided P(|T| > |t|) for T ~ Student t with df degrees of freedom.
double t_two_sided(double t, double df);

double mean(std::span<const double> values);
// Sample (n - 1) standard deviation.
double sample_sd(std::span<const double> values);

enum class CvDenominator {
  Sum,      // mean(auto) + mean(man)
  Average,  // (mean(auto) + mean(man)) / 2
};

struct BlandAltman {
  std::size_t n = 0;
  double bias = 0.0;
  double sd = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  double rpc = 0.0;
  std::optional<double> cv_percent;  // empty when the denominator is zero
};

// Differences are auto - man.
BlandAltman bland_altman(std::span<const double> automatic, std::span<const double> manual,
                         CvDenominator cv = CvDenominator::Sum);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
};

// Least squares automatic = slope * manual + intercept, Pearson r.
LinearFit pearson_fit(std::span<const double> automatic, std::span<const double> manual);

struct PairedTTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

struct AnovaTable {
  double ss_between = 0.0, ss_within = 0.0, ss_total = 0.0;
  double df_between = 0.0, df_within = 0.0, df_total = 0.0;
  double ms_between = 0.0, ms_within = 0.0;
  double f = 0.0;
  double p = 1.0;
};

AnovaTable anova_oneway(const std::vector<std::vector<double>>& groups);
AnovaTable anova_from_sums(double ss_between, double df_between, double ss_within, double df_within);
// Plain-text table with columns Source, SS, df, MS, F, p-value.
std::string format_anova(const AnovaTable& table);

struct BoxPlot {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double whisker_low = 0.0, whisker_high = 0.0;  // extreme data inside 1.5 IQR fences
  std::vector<double> outliers;
};

// Linear-interpolation quantile (R type 7), p in [0, 1].
double quantile(std::vector<double> values, double p);
BoxPlot box_plot(std::span<const double> values);

// "mean ± sd" with a fixed number of decimals.
std::string format_mean_sd(double mean, double sd, int decimals = 3);

}  // namespace mfpu
