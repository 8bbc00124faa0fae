#include "mfpu/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "mfpu/errors.hpp"

namespace mfpu {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_fraction(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double x, double a, double b) {
  require(a > 0.0 && b > 0.0, "incomplete beta needs positive shape parameters");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(x, a, b) / a;
  return 1.0 - front * beta_fraction(1.0 - x, b, a) / b;
}

double f_sf(double f, double d1, double d2) {
  require(d1 >= 1.0 && d2 >= 1.0, "F distribution needs degrees of freedom >= 1");
  require(f >= 0.0, "F statistic must be non-negative");
  if (f == 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0);
}

double t_two_sided(double t, double df) {
  require(df > 0.0, "t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
}

double mean(std::span<const double> values) {
  require(!values.empty(), "mean of an empty series");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  require(values.size() >= 2, "sample standard deviation needs at least two values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

BlandAltman bland_altman(std::span<const double> automatic, std::span<const double> manual, CvDenominator cv) {
  require(automatic.size() == manual.size(), "paired series must have equal lengths");
  require(automatic.size() >= 2, "Bland-Altman analysis needs at least two pairs");
  std::vector<double> diff(automatic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = automatic[i] - manual[i];
  BlandAltman out;
  out.n = diff.size();
  out.bias = mean(diff);
  out.sd = sample_sd(diff);
  out.rpc = 1.96 * out.sd;
  out.loa_low = out.bias - out.rpc;
  out.loa_high = out.bias + out.rpc;
  double denominator = mean(automatic) + mean(manual);
  if (cv == CvDenominator::Average) denominator /= 2.0;
  if (denominator != 0.0) out.cv_percent = 100.0 * out.sd / denominator;
  return out;
}

LinearFit pearson_fit(std::span<const double> automatic, std::span<const double> manual) {
  require(automatic.size() == manual.size(), "paired series must have equal lengths");
  require(automatic.size() >= 2, "linear fit needs at least two pairs");
  const double mx = mean(manual), my = mean(automatic);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < manual.size(); ++i) {
    const double dx = manual[i] - mx, dy = automatic[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  require(sxx > 0.0, "linear fit needs a non-constant manual series");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return fit;
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, "paired t-test needs two equal series of length >= 2");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  PairedTTest out;
  out.df = static_cast<double>(diff.size() - 1);
  const double sd = sample_sd(diff);
  const double m = mean(diff);
  if (sd == 0.0) {
    out.t = m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m);
  } else {
    out.t = m / (sd / std::sqrt(static_cast<double>(diff.size())));
  }
  out.p = t_two_sided(out.t, out.df);
  return out;
}

AnovaTable anova_from_sums(double ss_between, double df_between, double ss_within, double df_within) {
  require(df_between >= 1.0, "between-groups degrees of freedom must be >= 1");
  require(df_within >= 1.0, "within-groups degrees of freedom must be >= 1");
  require(ss_between >= 0.0 && ss_within >= 0.0, "sums of squares must be non-negative");
  AnovaTable t;
  t.ss_between = ss_between;
  t.ss_within = ss_within;
  t.ss_total = ss_between + ss_within;
  t.df_between = df_between;
  t.df_within = df_within;
  t.df_total = df_between + df_within;
  t.ms_between = ss_between / df_between;
  t.ms_within = ss_within / df_within;
  if (t.ms_within > 0.0)
    t.f = t.ms_between / t.ms_within;
  else
    t.f = t.ms_between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  t.p = f_sf(t.f, df_between, df_within);
  return t;
}

AnovaTable anova_oneway(const std::vector<std::vector<double>>& groups) {
  require(groups.size() >= 2, "ANOVA needs at least two groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    require(!g.empty(), "every ANOVA group needs at least one value");
    n += g.size();
    for (double v : g) grand += v;
  }
  grand /= static_cast<double>(n);
  double ss_b = 0.0, ss_w = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    ss_b += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) ss_w += (v - m) * (v - m);
  }
  const double df_w = static_cast<double>(n - groups.size());
  require(df_w >= 1.0, "ANOVA needs more observations than groups");
  return anova_from_sums(ss_b, static_cast<double>(groups.size() - 1), ss_w, df_w);
}

std::string format_anova(const AnovaTable& t) {
  char buf[512];
  std::string out = "Source                      SS        df    MS        F         p-value\n";
  std::snprintf(buf, sizeof buf, "%-24s %9.4f %5.0f %9.5f %9.4f %9.4g\n", "between-groups variation", t.ss_between,
                t.df_between, t.ms_between, t.f, t.p);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-24s %9.4f %5.0f %9.5f\n", "within-groups variation", t.ss_within, t.df_within,
                t.ms_within);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-24s %9.4f %5.0f\n", "Total", t.ss_total, t.df_total);
  out += buf;
  return out;
}

double quantile(std::vector<double> values, double p) {
  require(!values.empty(), "quantile of an empty series");
  require(p >= 0.0 && p <= 1.0, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BoxPlot box_plot(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  require(!v.empty(), "box plot of an empty series");
  std::sort(v.begin(), v.end());
  BoxPlot box;
  box.q1 = quantile(v, 0.25);
  box.median = quantile(v, 0.5);
  box.q3 = quantile(v, 0.75);
  const double iqr = box.q3 - box.q1;
  const double lo_fence = box.q1 - 1.5 * iqr, hi_fence = box.q3 + 1.5 * iqr;
  box.whisker_low = box.q1;
  box.whisker_high = box.q3;
  bool low_set = false;
  for (double x : v) {
    if (x < lo_fence || x > hi_fence) {
      box.outliers.push_back(x);
      continue;
    }
    if (!low_set) {
      box.whisker_low = x;
      low_set = true;
    }
    box.whisker_high = x;
  }
  return box;
}

std::string format_mean_sd(double m, double sd, int decimals) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.*f \xC2\xB1 %.*f", decimals, m, decimals, sd);
  return buf;
}

}  // namespace mfpu
