#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "aif/dates.hpp"
#include "aif/hierarchy.hpp"
#include "aif/index_engine.hpp"

namespace aif {

// Sample Pearson correlation. Throws NumericError on zero variance or
// length < 3.
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

enum class RemovalReason { kNone, kLowCorrelation, kShortHistory };

std::string to_string(RemovalReason r);

struct ScreeningRow {
  std::string indicator;
  double r = 0.0;
  bool kept = false;
  RemovalReason reason = RemovalReason::kNone;
};

struct ScreeningReport {
  std::vector<ScreeningRow> rows;
  std::vector<std::string> kept;  // indicator order preserved
};

// An indicator survives iff its history covers [span_begin, span_end]
// and the monthly-mean correlation against the target is at least
// `threshold` in absolute value. Correlations use the months common to
// both series.
ScreeningReport screen_indicators(const RawPanel& panel, const MonthlySeries& target,
                                  double threshold, const Date& span_begin,
                                  const Date& span_end);

struct FactorGroup {
  std::string primary;
  std::vector<std::string> members;
  Eigen::VectorXd loadings;          // first principal component
  double explained_variance = 0.0;   // leading eigenvalue share
  Eigen::VectorXd scores;            // one per month
};

struct FactorScoreResult {
  std::vector<Month> months;
  std::vector<FactorGroup> groups;  // primaries in hierarchy order
};

// Per primary group: standardize member columns, take the first
// principal component of their correlation matrix, sign-aligned so the
// score correlates non-negatively with the group mean. Throws
// NumericError when a primary has no surviving members.
FactorScoreResult group_factor_scores(const MonthlyPanel& panel,
                                      const IndicatorHierarchy& hierarchy);

struct RegressionReport {
  Eigen::VectorXd coefficients;  // per regressor, intercept excluded
  double intercept = 0.0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double f_stat = 0.0;
  double p_value = 0.0;
  int n = 0;
  int k = 0;
};

// OLS with intercept. Throws NumericError on rank deficiency or
// n <= k + 1.
RegressionReport ols_regress(const Eigen::VectorXd& y, const Eigen::MatrixXd& X);

// Continued-fraction regularized incomplete beta I_x(a, b), absolute
// tolerance 1e-10, at most 300 iterations.
double regularized_incomplete_beta(double a, double b, double x);

// Upper tail of F(k, n-k-1).
double f_pvalue(double f_stat, int k, int n);

struct LagProfile {
  std::vector<double> r;  // index 0..max_lag
  int argmax_lag = 0;
};

// Correlates index_{t-lag} with investment_t over the aligned month
// axis. With jan_adjust, each January index value is first merged into
// February as their mean and January investment rows are dropped
// (mirrors a target published only as a January-February cumulative).
LagProfile lag_correlation(const MonthlySeries& index, const MonthlySeries& investment,
                           int max_lag, bool jan_adjust);

}  // namespace aif
