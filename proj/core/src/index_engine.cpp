#include "aif/index_engine.hpp"

#include <algorithm>
#include <cmath>

#include "aif/csv.hpp"
#include "aif/errors.hpp"

namespace aif {

std::vector<RawPanel> load_raw_panels(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t c_date = table.column("date");
  const std::size_t c_keyword = table.column("keyword");
  const std::size_t c_region = table.column("region");
  const std::size_t c_value = table.column("value");

  std::map<std::string, RawPanel> by_region;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto context = path.string() + " row " + std::to_string(r + 2);
    const Date date = parse_date(row[c_date]);
    const double value = parse_double_field(row[c_value], context);
    if (value < 0.0) {
      throw SchemaError(context + ": negative search volume");
    }
    if (row[c_keyword].empty() || row[c_region].empty()) {
      throw SchemaError(context + ": empty keyword or region");
    }
    RawPanel& panel = by_region[row[c_region]];
    panel.region = row[c_region];
    if (!panel.series[row[c_keyword]].emplace(date, value).second) {
      throw SchemaError(context + ": duplicate cell (" + row[c_date] + ", " +
                        row[c_keyword] + ", " + row[c_region] + ")");
    }
  }

  std::vector<RawPanel> panels;
  for (auto& [name, panel] : by_region) panels.push_back(std::move(panel));
  return panels;
}

SeriesPanel assemble_panel(const RawPanel& raw, const std::vector<std::string>& indicators,
                           const Date& begin, const Date& end, bool interpolate,
                           int max_gap) {
  if (begin > end) throw SchemaError("panel span is empty");
  const std::int64_t first = to_serial_day(begin);
  const std::int64_t last = to_serial_day(end);
  const int n_days = static_cast<int>(last - first + 1);

  SeriesPanel panel;
  panel.region = raw.region;
  panel.indicators = indicators;
  panel.dates.reserve(n_days);
  for (std::int64_t s = first; s <= last; ++s) panel.dates.push_back(from_serial_day(s));
  panel.values.resize(n_days, static_cast<int>(indicators.size()));

  for (std::size_t j = 0; j < indicators.size(); ++j) {
    const auto it = raw.series.find(indicators[j]);
    if (it == raw.series.end()) {
      throw SchemaError("region '" + raw.region + "' has no data for indicator '" +
                        indicators[j] + "'");
    }
    const auto& by_date = it->second;
    std::vector<int> missing_run;
    int prev_present = -1;
    for (int d = 0; d < n_days; ++d) {
      const auto found = by_date.find(panel.dates[d]);
      if (found != by_date.end()) {
        if (!missing_run.empty()) {
          const bool fillable = interpolate && prev_present >= 0 &&
                                static_cast<int>(missing_run.size()) <= max_gap;
          if (!fillable) {
            throw SchemaError("region '" + raw.region + "', indicator '" +
                              indicators[j] + "': missing value on " +
                              format_date(panel.dates[missing_run.front()]));
          }
          const double lo = panel.values(prev_present, j);
          const double hi = found->second;
          const int span = d - prev_present;
          for (int m : missing_run) {
            const double t = static_cast<double>(m - prev_present) / span;
            panel.values(m, j) = lo + t * (hi - lo);
          }
          missing_run.clear();
        }
        panel.values(d, j) = found->second;
        prev_present = d;
      } else {
        missing_run.push_back(d);
      }
    }
    if (!missing_run.empty()) {
      throw SchemaError("region '" + raw.region + "', indicator '" + indicators[j] +
                        "': history ends before " + format_date(end));
    }
  }
  return panel;
}

namespace {

ColumnStats make_column_stats(std::vector<double> column) {
  ColumnStats stats;
  std::sort(column.begin(), column.end());
  stats.min = column.front();
  stats.max = column.back();
  stats.median = column[(column.size() - 1) / 2];  // lower-middle order statistic
  return stats;
}

}  // namespace

NormalizationStats column_stats(const Eigen::MatrixXd& values) {
  if (values.rows() < 1 || values.cols() < 1) throw SchemaError("empty panel");
  NormalizationStats stats;
  for (int j = 0; j < values.cols(); ++j) {
    std::vector<double> column(values.col(j).data(),
                               values.col(j).data() + values.rows());
    stats.columns.push_back(make_column_stats(std::move(column)));
  }
  return stats;
}

Eigen::MatrixXd normalize_panel(const Eigen::MatrixXd& values,
                                const std::vector<Polarity>& polarities,
                                const NormalizationStats& stats) {
  if (values.rows() < 1 || values.cols() < 1) throw SchemaError("empty panel");
  if (static_cast<std::size_t>(values.cols()) != polarities.size() ||
      polarities.size() != stats.columns.size()) {
    throw SchemaError("normalization inputs disagree on indicator count");
  }

  Eigen::MatrixXd out(values.rows(), values.cols());
  for (int j = 0; j < values.cols(); ++j) {
    const ColumnStats& cs = stats.columns[j];
    const double range = cs.max - cs.min;
    for (int i = 0; i < values.rows(); ++i) {
      const double x = values(i, j);
      double y = 0.5;
      switch (polarities[j]) {
        case Polarity::kPositive:
          if (range > 0.0) y = (x - cs.min) / range;
          break;
        case Polarity::kNegative:
          if (range > 0.0) y = (cs.max - x) / range;
          break;
        case Polarity::kTwoWay:
          if (x <= cs.median) {
            const double lo = cs.median - cs.min;
            if (lo > 0.0) y = (x - cs.min) / lo;
          } else {
            const double hi = cs.max - cs.median;
            if (hi > 0.0) y = (cs.max - x) / hi;
          }
          break;
      }
      out(i, j) = std::clamp(y, 0.0, 1.0);
    }
  }
  return out;
}

WeightVector entropy_weights(const Eigen::MatrixXd& normalized,
                             const std::vector<std::string>& indicators) {
  const int n = static_cast<int>(normalized.rows());
  const int m = static_cast<int>(normalized.cols());
  if (n < 2) throw SchemaError("entropy weights need at least 2 rows");
  if (static_cast<std::size_t>(m) != indicators.size()) {
    throw SchemaError("indicator names do not match panel width");
  }

  WeightVector wv;
  wv.indicators = indicators;
  Eigen::VectorXd divergence(m);
  const double inv_log_n = 1.0 / std::log(static_cast<double>(n));
  for (int j = 0; j < m; ++j) {
    const double column_sum = normalized.col(j).sum();
    double entropy = 0.0;
    if (column_sum > 0.0) {
      for (int i = 0; i < n; ++i) {
        const double p = normalized(i, j) / column_sum;
        if (p > 0.0) entropy -= p * std::log(p);
      }
      entropy *= inv_log_n;
    } else {
      entropy = 1.0;  // all-zero column carries no information
    }
    divergence(j) = 1.0 - entropy;
  }

  const double total = divergence.sum();
  if (total > 0.0) {
    wv.weights = divergence / total;
  } else {
    wv.weights = Eigen::VectorXd::Constant(m, 1.0 / m);
  }
  return wv;
}

namespace {

void check_weight_alignment(const std::vector<std::string>& indicators,
                            const WeightVector& weights) {
  if (weights.indicators != indicators) {
    throw SchemaError("weight vector does not match the panel's indicators");
  }
  if (weights.weights.size() != static_cast<Eigen::Index>(indicators.size())) {
    throw SchemaError("weight vector size mismatch");
  }
}

}  // namespace

IndexSeries composite_index(const Eigen::MatrixXd& normalized,
                            const std::vector<Date>& dates,
                            const std::vector<std::string>& indicators,
                            const WeightVector& weights) {
  check_weight_alignment(indicators, weights);
  if (normalized.rows() != static_cast<Eigen::Index>(dates.size())) {
    throw SchemaError("date axis does not match panel height");
  }
  IndexSeries series;
  series.frequency = Frequency::kDaily;
  const Eigen::VectorXd values = normalized * weights.weights;
  for (std::size_t i = 0; i < dates.size(); ++i) {
    series.points.push_back({format_date(dates[i]), values(static_cast<int>(i)), false});
  }
  return series;
}

IndexSeries dimension_index(const Eigen::MatrixXd& normalized,
                            const std::vector<Date>& dates,
                            const std::vector<std::string>& indicators,
                            const IndicatorHierarchy& hierarchy,
                            const std::string& primary,
                            const WeightVector& weights) {
  check_weight_alignment(indicators, weights);
  const PrimaryIndicator* found = nullptr;
  for (const auto& p : hierarchy.primaries) {
    if (p.name == primary) {
      found = &p;
      break;
    }
  }
  if (!found) throw SchemaError("unknown primary indicator '" + primary + "'");

  std::vector<int> member_cols;
  for (const auto& secondary : found->secondaries) {
    for (const auto& entry : secondary.entries) {
      const auto it = std::find(indicators.begin(), indicators.end(), entry.name);
      if (it != indicators.end()) {
        member_cols.push_back(static_cast<int>(it - indicators.begin()));
      }
    }
  }
  if (member_cols.empty()) {
    throw SchemaError("primary indicator '" + primary + "' has no panel columns");
  }

  double member_total = 0.0;
  for (int c : member_cols) member_total += weights.weights(c);

  Eigen::VectorXd local(member_cols.size());
  if (member_total > 0.0) {
    for (std::size_t k = 0; k < member_cols.size(); ++k) {
      local(static_cast<int>(k)) = weights.weights(member_cols[k]) / member_total;
    }
  } else {
    local.setConstant(1.0 / static_cast<double>(member_cols.size()));
  }

  IndexSeries series;
  series.frequency = Frequency::kDaily;
  for (std::size_t i = 0; i < dates.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < member_cols.size(); ++k) {
      v += local(static_cast<int>(k)) * normalized(static_cast<int>(i), member_cols[k]);
    }
    series.points.push_back({format_date(dates[i]), v, false});
  }
  return series;
}

namespace {

int expected_days(const std::string& period) {
  if (period.size() == 7) {
    const Month m = parse_month(period);
    return days_in_month(m.year, m.month);
  }
  const int year = std::stoi(period);
  return is_leap_year(year) ? 366 : 365;
}

std::string period_key(const std::string& fine_period, Frequency target) {
  return target == Frequency::kMonthly ? fine_period.substr(0, 7)
                                       : fine_period.substr(0, 4);
}

}  // namespace

IndexSeries aggregate(const IndexSeries& series, Frequency target) {
  if (target == series.frequency) return series;
  if (static_cast<int>(target) < static_cast<int>(series.frequency)) {
    throw SchemaError("cannot refine an index series to a finer frequency");
  }

  IndexSeries out;
  out.frequency = target;
  std::string current;
  double sum = 0.0;
  int count = 0;
  bool any_partial = false;

  auto flush = [&] {
    if (count == 0) return;
    IndexPoint point;
    point.period = current;
    point.value = sum / count;
    if (series.frequency == Frequency::kDaily) {
      point.partial = count < expected_days(current) || any_partial;
    } else {
      point.partial = count < 12 || any_partial;  // monthly to annual
    }
    out.points.push_back(point);
    sum = 0.0;
    count = 0;
    any_partial = false;
  };

  for (const auto& point : series.points) {
    const std::string key = period_key(point.period, target);
    if (key != current) {
      flush();
      current = key;
    }
    sum += point.value;
    count += 1;
    any_partial = any_partial || point.partial;
  }
  flush();
  return out;
}

std::map<std::string, IndexSeries> region_indices(const std::vector<SeriesPanel>& panels,
                                                  const std::vector<Polarity>& polarities,
                                                  const NormalizationStats& national_stats,
                                                  const WeightVector& national_weights) {
  std::map<std::string, IndexSeries> result;
  for (const auto& panel : panels) {
    if (panel.indicators != national_weights.indicators) {
      throw SchemaError("region '" + panel.region +
                        "' does not share the national indicator list");
    }
    const Eigen::MatrixXd normalized =
        normalize_panel(panel.values, polarities, national_stats);
    const IndexSeries daily =
        composite_index(normalized, panel.dates, panel.indicators, national_weights);
    result[panel.region] = aggregate(daily, Frequency::kAnnual);
  }
  return result;
}

MonthlyPanel monthly_means(const std::vector<Date>& dates,
                           const Eigen::MatrixXd& values,
                           const std::vector<std::string>& indicators) {
  if (values.rows() != static_cast<Eigen::Index>(dates.size())) {
    throw SchemaError("date axis does not match panel height");
  }
  MonthlyPanel panel;
  panel.indicators = indicators;

  std::vector<std::pair<Month, std::pair<int, int>>> blocks;  // month -> [begin, end)
  for (std::size_t i = 0; i < dates.size(); ++i) {
    const Month m = month_of(dates[i]);
    if (blocks.empty() || !(blocks.back().first == m)) {
      blocks.push_back({m, {static_cast<int>(i), static_cast<int>(i)}});
    }
    blocks.back().second.second = static_cast<int>(i) + 1;
  }

  panel.values.resize(static_cast<int>(blocks.size()), values.cols());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [begin, end] = blocks[b].second;
    panel.months.push_back(blocks[b].first);
    panel.values.row(static_cast<int>(b)) =
        values.middleRows(begin, end - begin).colwise().mean();
  }
  return panel;
}

MonthlySeries load_investment_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t c_month = table.column("month");
  const std::size_t c_value = table.column("value");

  MonthlySeries series;
  std::vector<double> values;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto context = path.string() + " row " + std::to_string(r + 2);
    const Month m = parse_month(table.rows[r][c_month]);
    if (!series.months.empty() && !(series.months.back() < m)) {
      throw SchemaError(context + ": months must be strictly increasing");
    }
    series.months.push_back(m);
    values.push_back(parse_double_field(table.rows[r][c_value], context));
  }
  if (values.empty()) throw SchemaError(path.string() + ": no investment rows");
  series.values = Eigen::Map<Eigen::VectorXd>(values.data(),
                                              static_cast<Eigen::Index>(values.size()));
  return series;
}

}  // namespace aif
