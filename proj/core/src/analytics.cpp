#include "aif/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "aif/errors.hpp"

namespace aif {

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw SchemaError("pearson: length mismatch");
  const int n = static_cast<int>(x.size());
  if (n < 3) throw NumericError("pearson needs at least 3 observations");
  const Eigen::ArrayXd dx = x.array() - x.mean();
  const Eigen::ArrayXd dy = y.array() - y.mean();
  const double sxx = (dx * dx).sum();
  const double syy = (dy * dy).sum();
  if (sxx == 0.0 || syy == 0.0) throw NumericError("zero variance");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string to_string(RemovalReason r) {
  switch (r) {
    case RemovalReason::kNone: return "none";
    case RemovalReason::kLowCorrelation: return "low_correlation";
    case RemovalReason::kShortHistory: return "short_history";
  }
  return "none";
}

namespace {

// Calendar-month means over whatever dates an indicator actually has.
std::map<Month, double> sparse_monthly_means(const std::map<Date, double>& series) {
  std::map<Month, std::pair<double, int>> sums;
  for (const auto& [date, value] : series) {
    auto& slot = sums[month_of(date)];
    slot.first += value;
    slot.second += 1;
  }
  std::map<Month, double> means;
  for (const auto& [month, slot] : sums) means[month] = slot.first / slot.second;
  return means;
}

}  // namespace

ScreeningReport screen_indicators(const RawPanel& panel, const MonthlySeries& target,
                                  double threshold, const Date& span_begin,
                                  const Date& span_end) {
  if (target.months.empty()) throw SchemaError("empty screening target");

  std::map<Month, double> target_by_month;
  for (std::size_t i = 0; i < target.months.size(); ++i) {
    target_by_month[target.months[i]] = target.values(static_cast<Eigen::Index>(i));
  }

  ScreeningReport report;
  for (const auto& [indicator, series] : panel.series) {
    ScreeningRow row;
    row.indicator = indicator;

    const bool full_span = !series.empty() && series.begin()->first <= span_begin &&
                           series.rbegin()->first >= span_end;

    const auto means = sparse_monthly_means(series);
    std::vector<double> xs, ys;
    for (const auto& [month, mean] : means) {
      const auto it = target_by_month.find(month);
      if (it != target_by_month.end()) {
        xs.push_back(mean);
        ys.push_back(it->second);
      }
    }
    if (xs.size() >= 3) {
      const Eigen::Map<Eigen::VectorXd> x(xs.data(), static_cast<Eigen::Index>(xs.size()));
      const Eigen::Map<Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
      try {
        row.r = pearson(x, y);
      } catch (const NumericError&) {
        row.r = 0.0;
      }
    } else if (full_span) {
      // A full-history indicator failing to align means the target
      // series itself does not cover the span.
      throw SchemaError("indicator '" + indicator +
                        "' overlaps the target on fewer than 3 months");
    }

    if (!full_span) {
      row.reason = RemovalReason::kShortHistory;
    } else if (std::abs(row.r) < threshold) {
      row.reason = RemovalReason::kLowCorrelation;
    } else {
      row.kept = true;
    }
    report.rows.push_back(row);
    if (row.kept) report.kept.push_back(indicator);
  }
  return report;
}

FactorScoreResult group_factor_scores(const MonthlyPanel& panel,
                                      const IndicatorHierarchy& hierarchy) {
  const int n = static_cast<int>(panel.months.size());
  if (n < 2) throw NumericError("factor scores need at least 2 observations");

  FactorScoreResult result;
  result.months = panel.months;
  for (const auto& primary : hierarchy.primaries) {
    std::vector<int> member_cols;
    std::vector<std::string> member_names;
    for (const auto& secondary : primary.secondaries) {
      for (const auto& entry : secondary.entries) {
        const auto it = std::find(panel.indicators.begin(), panel.indicators.end(),
                                  entry.name);
        if (it != panel.indicators.end()) {
          member_cols.push_back(static_cast<int>(it - panel.indicators.begin()));
          member_names.push_back(entry.name);
        }
      }
    }
    if (member_cols.empty()) {
      throw NumericError("screening emptied primary indicator '" + primary.name + "'");
    }
    const int m = static_cast<int>(member_cols.size());

    // Standardize members; the covariance of standardized columns is the
    // correlation matrix.
    Eigen::MatrixXd Z(n, m);
    for (int k = 0; k < m; ++k) {
      const Eigen::VectorXd col = panel.values.col(member_cols[k]);
      const double mean = col.mean();
      const double sd =
          std::sqrt((col.array() - mean).square().sum() / (n - 1));
      if (sd == 0.0) {
        throw NumericError("indicator '" + member_names[k] +
                           "' is constant; cannot standardize");
      }
      Z.col(k) = (col.array() - mean) / sd;
    }

    const Eigen::MatrixXd corr = (Z.transpose() * Z) / (n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(corr);
    if (solver.info() != Eigen::Success) {
      throw NumericError("eigendecomposition failed for primary '" + primary.name + "'");
    }
    // Eigenvalues ascend; the principal component is the last one.
    Eigen::VectorXd loadings = solver.eigenvectors().col(m - 1);
    const double lead = solver.eigenvalues()(m - 1);

    Eigen::VectorXd scores = Z * loadings;
    const Eigen::VectorXd group_mean = Z.rowwise().mean();
    // Sign convention: the score tracks the group, not its mirror.
    if (scores.dot(group_mean) < 0.0) {
      loadings = -loadings;
      scores = -scores;
    }

    FactorGroup group;
    group.primary = primary.name;
    group.members = member_names;
    group.loadings = loadings;
    group.explained_variance = lead / solver.eigenvalues().sum();
    group.scores = scores;
    result.groups.push_back(std::move(group));
  }
  return result;
}

RegressionReport ols_regress(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  const int n = static_cast<int>(y.size());
  const int k = static_cast<int>(X.cols());
  if (X.rows() != n) throw SchemaError("regression shapes disagree");
  if (n <= k + 1) throw NumericError("too few observations for regression");

  Eigen::MatrixXd design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = X;

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < k + 1) throw NumericError("rank-deficient regression design");
  const Eigen::VectorXd beta = qr.solve(y);

  const Eigen::VectorXd residuals = y - design * beta;
  const double ss_res = residuals.squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  if (ss_tot == 0.0) throw NumericError("zero variance");

  RegressionReport report;
  report.n = n;
  report.k = k;
  report.intercept = beta(0);
  report.coefficients = beta.tail(k);
  report.r2 = 1.0 - ss_res / ss_tot;
  report.adj_r2 = 1.0 - (1.0 - report.r2) * (n - 1) / (n - k - 1);
  report.f_stat = (report.r2 / k) / ((1.0 - report.r2) / (n - k - 1));
  report.p_value = f_pvalue(report.f_stat, k, n);
  return report;
}

namespace {

// Continued fraction for I_x(a, b), Lentz's method.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kTol) return h;
  }
  throw NumericError("incomplete beta did not converge within 300 iterations");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw NumericError("incomplete beta needs a, b > 0");
  if (x < 0.0 || x > 1.0) throw NumericError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The continued fraction converges fast only below the distribution
  // bulk; above it, use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_pvalue(double f_stat, int k, int n) {
  if (k < 1 || n - k - 1 < 1) throw NumericError("invalid degrees of freedom");
  if (f_stat < 0.0) throw NumericError("F statistic must be non-negative");
  const double d1 = static_cast<double>(k);
  const double d2 = static_cast<double>(n - k - 1);
  // Upper tail of F(d1, d2).
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f_stat));
}

namespace {

// Mean-merges each January into the following February. A January with
// no February after it is dropped.
MonthlySeries merge_januaries(const MonthlySeries& series) {
  MonthlySeries out;
  std::vector<double> values;
  for (std::size_t i = 0; i < series.months.size(); ++i) {
    const Month m = series.months[i];
    if (m.month == 1) {
      const bool feb_next = i + 1 < series.months.size() &&
                            series.months[i + 1] == Month{m.year, 2};
      if (feb_next) {
        out.months.push_back(Month{m.year, 2});
        values.push_back(0.5 * (series.values(static_cast<Eigen::Index>(i)) +
                                series.values(static_cast<Eigen::Index>(i + 1))));
        ++i;  // February is consumed by the merge
      }
      continue;
    }
    out.months.push_back(m);
    values.push_back(series.values(static_cast<Eigen::Index>(i)));
  }
  out.values = Eigen::Map<Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
  return out;
}

MonthlySeries drop_januaries(const MonthlySeries& series) {
  MonthlySeries out;
  std::vector<double> values;
  for (std::size_t i = 0; i < series.months.size(); ++i) {
    if (series.months[i].month == 1) continue;
    out.months.push_back(series.months[i]);
    values.push_back(series.values(static_cast<Eigen::Index>(i)));
  }
  out.values = Eigen::Map<Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
  return out;
}

}  // namespace

LagProfile lag_correlation(const MonthlySeries& index, const MonthlySeries& investment,
                           int max_lag, bool jan_adjust) {
  if (max_lag < 0) throw SchemaError("max_lag must be >= 0");

  const MonthlySeries idx = jan_adjust ? merge_januaries(index) : index;
  const MonthlySeries inv = jan_adjust ? drop_januaries(investment) : investment;

  // Align on common months; lags then shift positions on this axis.
  std::vector<double> xs, ys;
  {
    std::map<Month, double> inv_by_month;
    for (std::size_t i = 0; i < inv.months.size(); ++i) {
      inv_by_month[inv.months[i]] = inv.values(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 0; i < idx.months.size(); ++i) {
      const auto it = inv_by_month.find(idx.months[i]);
      if (it != inv_by_month.end()) {
        xs.push_back(idx.values(static_cast<Eigen::Index>(i)));
        ys.push_back(it->second);
      }
    }
  }
  const int n = static_cast<int>(xs.size());
  if (n < max_lag + 3) {
    throw NumericError("insufficient overlap: " + std::to_string(n) +
                       " aligned months for max_lag " + std::to_string(max_lag));
  }

  LagProfile profile;
  for (int lag = 0; lag <= max_lag; ++lag) {
    const int m = n - lag;
    Eigen::VectorXd x(m), y(m);
    for (int t = 0; t < m; ++t) {
      x(t) = xs[t];            // index at t - lag ...
      y(t) = ys[t + lag];      // ... against investment at t
    }
    profile.r.push_back(pearson(x, y));
  }
  profile.argmax_lag = static_cast<int>(
      std::max_element(profile.r.begin(), profile.r.end()) - profile.r.begin());
  return profile;
}

}  // namespace aif
