#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aif/dates.hpp"
#include "aif/hierarchy.hpp"

namespace aif {

// Sparse ingestion form of one region's search-volume records.
struct RawPanel {
  std::string region;
  std::map<std::string, std::map<Date, double>> series;  // keyword -> date -> value
};

// Long CSV with columns date, keyword, region, value. Values must be
// non-negative; duplicate (date, keyword, region) cells are rejected.
// Panels come back sorted by region name.
std::vector<RawPanel> load_raw_panels(const std::filesystem::path& path);

// Dense date x indicator matrix with no missing cells.
struct SeriesPanel {
  std::vector<Date> dates;  // strictly increasing, contiguous
  std::vector<std::string> indicators;
  Eigen::MatrixXd values;  // dates.size() x indicators.size()
  std::string region;
};

// Densifies [begin, end] for the given indicators. Interior gaps of at
// most max_gap days are linearly interpolated when interpolate is set;
// any other missing cell is a SchemaError.
SeriesPanel assemble_panel(const RawPanel& raw, const std::vector<std::string>& indicators,
                           const Date& begin, const Date& end, bool interpolate,
                           int max_gap = 3);

struct ColumnStats {
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;  // lower-middle order statistic
};

struct NormalizationStats {
  std::vector<ColumnStats> columns;  // aligned with the panel's indicators
};

NormalizationStats column_stats(const Eigen::MatrixXd& values);

// Min-max by polarity: positive (x-min)/(max-min), negative mirrored,
// two_way peaking at the column median. Degenerate denominators map to
// 0.5. Results are clamped to [0,1] so foreign stats (a region scored
// against national ranges) stay in bounds.
Eigen::MatrixXd normalize_panel(const Eigen::MatrixXd& values,
                                const std::vector<Polarity>& polarities,
                                const NormalizationStats& stats);

struct WeightVector {
  std::vector<std::string> indicators;
  Eigen::VectorXd weights;  // non-negative, sums to 1
};

// Standard entropy weights on a [0,1] panel: p_ij = x_ij / sum_i x_ij
// (0 ln 0 := 0), e_j = -(1/ln n) sum_i p_ij ln p_ij, d_j = 1 - e_j,
// w_j = d_j / sum d_j. All-zero or constant columns carry no
// information and get weight 0; if every d_j = 0, weights are equal.
WeightVector entropy_weights(const Eigen::MatrixXd& normalized,
                             const std::vector<std::string>& indicators);

enum class Frequency { kDaily, kMonthly, kAnnual };

struct IndexPoint {
  std::string period;  // YYYY-MM-DD, YYYY-MM or YYYY
  double value = 0.0;
  bool partial = false;  // aggregate covers only part of the period
};

struct IndexSeries {
  Frequency frequency = Frequency::kDaily;
  std::vector<IndexPoint> points;  // periods strictly increasing
};

// value_t = sum_j w_j x_tj over the full indicator list.
IndexSeries composite_index(const Eigen::MatrixXd& normalized,
                            const std::vector<Date>& dates,
                            const std::vector<std::string>& indicators,
                            const WeightVector& weights);

// Composite over one primary's entries with its weights renormalized.
IndexSeries dimension_index(const Eigen::MatrixXd& normalized,
                            const std::vector<Date>& dates,
                            const std::vector<std::string>& indicators,
                            const IndicatorHierarchy& hierarchy,
                            const std::string& primary,
                            const WeightVector& weights);

// Arithmetic mean per calendar period. Equal frequency is the identity;
// refining is an error. Partial periods are flagged.
IndexSeries aggregate(const IndexSeries& series, Frequency target);

// Regional panels scored with national stats and weights, aggregated
// annually. Keyed by region name.
std::map<std::string, IndexSeries> region_indices(const std::vector<SeriesPanel>& panels,
                                                  const std::vector<Polarity>& polarities,
                                                  const NormalizationStats& national_stats,
                                                  const WeightVector& national_weights);

// Calendar-month means of a dense panel.
struct MonthlyPanel {
  std::vector<Month> months;
  std::vector<std::string> indicators;
  Eigen::MatrixXd values;
};

MonthlyPanel monthly_means(const std::vector<Date>& dates,
                           const Eigen::MatrixXd& values,
                           const std::vector<std::string>& indicators);

struct MonthlySeries {
  std::vector<Month> months;  // strictly increasing
  Eigen::VectorXd values;
};

// CSV columns: month (YYYY-MM), value.
MonthlySeries load_investment_csv(const std::filesystem::path& path);

}  // namespace aif
