#include <doctest.h>

#include <aif/dates.hpp>
#include <aif/errors.hpp>
#include <aif/index_engine.hpp>
#include <aif/io.hpp>
#include <aif/rng.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

using namespace aif;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "aif_index_test";
  fs::create_directories(dir);
  const auto path = dir / name;
  write_file_atomic(path, content);
  return path;
}

RawPanel make_raw(const std::string& region, const std::string& keyword,
                  const Date& begin, const std::vector<double>& values) {
  RawPanel raw;
  raw.region = region;
  std::int64_t serial = to_serial_day(begin);
  for (std::size_t i = 0; i < values.size(); ++i) {
    raw.series[keyword][from_serial_day(serial + static_cast<std::int64_t>(i))] = values[i];
  }
  return raw;
}

// Entropy weights recomputed from the definition with plain loops.
std::vector<double> entropy_oracle(const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int m = static_cast<int>(x.cols());
  std::vector<double> d(m, 0.0);
  for (int j = 0; j < m; ++j) {
    double colsum = 0.0;
    for (int i = 0; i < n; ++i) colsum += x(i, j);
    if (colsum <= 0.0) {
      d[j] = 0.0;
      continue;
    }
    double entropy = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = x(i, j) / colsum;
      if (p > 0.0) entropy -= p * std::log(p);
    }
    entropy /= std::log(static_cast<double>(n));
    d[j] = 1.0 - entropy;
  }
  double total = 0.0;
  for (double v : d) total += v;
  std::vector<double> w(m);
  for (int j = 0; j < m; ++j) w[j] = total > 0.0 ? d[j] / total : 1.0 / m;
  return w;
}

IndicatorHierarchy two_primary_hierarchy() {
  IndicatorHierarchy h;
  h.primaries.resize(2);
  h.primaries[0].name = "p1";
  h.primaries[0].secondaries.resize(1);
  h.primaries[0].secondaries[0].name = "s1";
  h.primaries[0].secondaries[0].entries = {
      {"a", Polarity::kPositive, Provenance::kSeed, 1.0},
      {"b", Polarity::kPositive, Provenance::kSeed, 1.0}};
  h.primaries[1].name = "p2";
  h.primaries[1].secondaries.resize(1);
  h.primaries[1].secondaries[0].name = "s2";
  h.primaries[1].secondaries[0].entries = {
      {"c", Polarity::kPositive, Provenance::kSeed, 1.0}};
  return h;
}

}  // namespace

TEST_CASE("raw panels load sorted with duplicate and sign checks") {
  const auto path = temp_file("panel.csv",
                              "date,keyword,region,value\n"
                              "2020-01-02,kw,west,3.5\n"
                              "2020-01-01,kw,east,1.0\n"
                              "2020-01-01,kw,west,2.0\n");
  const auto panels = load_raw_panels(path);
  REQUIRE(panels.size() == 2);
  CHECK(panels[0].region == "east");
  CHECK(panels[1].region == "west");
  CHECK(panels[1].series.at("kw").at(Date{2020, 1, 2}) == 3.5);

  const auto dup = temp_file("dup.csv",
                             "date,keyword,region,value\n"
                             "2020-01-01,kw,east,1.0\n"
                             "2020-01-01,kw,east,2.0\n");
  CHECK_THROWS_AS(load_raw_panels(dup), SchemaError);

  const auto neg = temp_file("neg.csv",
                             "date,keyword,region,value\n"
                             "2020-01-01,kw,east,-1.0\n");
  CHECK_THROWS_AS(load_raw_panels(neg), SchemaError);
}

TEST_CASE("panel assembly densifies the requested window") {
  RawPanel raw = make_raw("r", "a", Date{2020, 1, 1}, {1, 2, 3, 4, 5});
  for (std::size_t i = 0; i < 5; ++i) {
    raw.series["b"][from_serial_day(to_serial_day(Date{2020, 1, 1}) + (std::int64_t)i)] =
        10.0 + static_cast<double>(i);
  }

  const SeriesPanel panel =
      assemble_panel(raw, {"a", "b"}, Date{2020, 1, 1}, Date{2020, 1, 5}, false);
  REQUIRE(panel.dates.size() == 5);
  CHECK(panel.dates.front() == Date{2020, 1, 1});
  CHECK(panel.dates.back() == Date{2020, 1, 5});
  CHECK(panel.values(2, 0) == 3.0);
  CHECK(panel.values(4, 1) == 14.0);
  CHECK(panel.indicators == std::vector<std::string>{"a", "b"});
}

TEST_CASE("panel assembly interpolates short interior gaps only on request") {
  RawPanel raw;
  raw.region = "r";
  raw.series["a"][Date{2020, 1, 1}] = 10.0;
  raw.series["a"][Date{2020, 1, 4}] = 16.0;  // 2-day interior gap

  CHECK_THROWS_AS(assemble_panel(raw, {"a"}, Date{2020, 1, 1}, Date{2020, 1, 4}, false),
                  SchemaError);

  const SeriesPanel panel =
      assemble_panel(raw, {"a"}, Date{2020, 1, 1}, Date{2020, 1, 4}, true);
  CHECK(panel.values(1, 0) == doctest::Approx(12.0));
  CHECK(panel.values(2, 0) == doctest::Approx(14.0));

  // Gap longer than max_gap fails even with interpolation on.
  RawPanel wide;
  wide.region = "r";
  wide.series["a"][Date{2020, 1, 1}] = 1.0;
  wide.series["a"][Date{2020, 1, 9}] = 9.0;
  CHECK_THROWS_AS(assemble_panel(wide, {"a"}, Date{2020, 1, 1}, Date{2020, 1, 9}, true, 3),
                  SchemaError);

  // Missing boundary values cannot be interpolated.
  RawPanel edge;
  edge.region = "r";
  edge.series["a"][Date{2020, 1, 2}] = 1.0;
  CHECK_THROWS_AS(assemble_panel(edge, {"a"}, Date{2020, 1, 1}, Date{2020, 1, 2}, true),
                  SchemaError);

  // Unknown indicators are a schema problem.
  CHECK_THROWS_AS(assemble_panel(raw, {"zz"}, Date{2020, 1, 1}, Date{2020, 1, 4}, true),
                  SchemaError);
}

TEST_CASE("column stats use the lower-middle median") {
  Eigen::MatrixXd values(4, 2);
  values << 1, 5,
            2, 1,
            3, 3,
            4, 9;
  const NormalizationStats stats = column_stats(values);
  REQUIRE(stats.columns.size() == 2);
  CHECK(stats.columns[0].min == 1.0);
  CHECK(stats.columns[0].max == 4.0);
  CHECK(stats.columns[0].median == 2.0);  // lower middle of {1,2,3,4}
  CHECK(stats.columns[1].median == 3.0);

  Eigen::MatrixXd odd(3, 1);
  odd << 5, 1, 3;
  CHECK(column_stats(odd).columns[0].median == 3.0);
}

TEST_CASE("normalization worked examples") {
  Eigen::MatrixXd pos(3, 1);
  pos << 0, 5, 10;
  const auto pos_stats = column_stats(pos);

  const Eigen::MatrixXd up = normalize_panel(pos, {Polarity::kPositive}, pos_stats);
  CHECK(up(0, 0) == 0.0);
  CHECK(up(1, 0) == 0.5);
  CHECK(up(2, 0) == 1.0);

  const Eigen::MatrixXd down = normalize_panel(pos, {Polarity::kNegative}, pos_stats);
  CHECK(down(0, 0) == 1.0);
  CHECK(down(1, 0) == 0.5);
  CHECK(down(2, 0) == 0.0);

  Eigen::MatrixXd two(3, 1);
  two << 0, 4, 10;
  const Eigen::MatrixXd peak = normalize_panel(two, {Polarity::kTwoWay}, column_stats(two));
  CHECK(peak(0, 0) == 0.0);
  CHECK(peak(1, 0) == 1.0);  // the median sample
  CHECK(peak(2, 0) == 0.0);

  Eigen::MatrixXd flat(3, 1);
  flat << 7, 7, 7;
  const Eigen::MatrixXd mid = normalize_panel(flat, {Polarity::kPositive}, column_stats(flat));
  CHECK(mid(0, 0) == 0.5);
  CHECK(mid(2, 0) == 0.5);
}

TEST_CASE("normalization clamps values outside foreign stats") {
  Eigen::MatrixXd national(3, 1);
  national << 10, 20, 30;
  const auto stats = column_stats(national);

  Eigen::MatrixXd region(3, 1);
  region << 5, 20, 40;  // outside the national range on both sides
  const Eigen::MatrixXd scored = normalize_panel(region, {Polarity::kPositive}, stats);
  CHECK(scored(0, 0) == 0.0);
  CHECK(scored(1, 0) == 0.5);
  CHECK(scored(2, 0) == 1.0);

  const Eigen::MatrixXd two = normalize_panel(region, {Polarity::kTwoWay}, stats);
  for (int i = 0; i < 3; ++i) {
    CHECK(two(i, 0) >= 0.0);
    CHECK(two(i, 0) <= 1.0);
  }
}

TEST_CASE("entropy weights match a frozen oracle") {
  Eigen::MatrixXd panel(3, 2);
  panel << 0.2, 0.9,
           0.4, 0.1,
           0.9, 0.5;
  const WeightVector w = entropy_weights(panel, {"x", "y"});
  REQUIRE(w.weights.size() == 2);
  CHECK(w.weights(0) == doctest::Approx(0.410679).epsilon(1e-5));
  CHECK(w.weights(1) == doctest::Approx(0.589321).epsilon(1e-5));
  CHECK(w.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.indicators == std::vector<std::string>{"x", "y"});
}

TEST_CASE("entropy weights match the definition on random panels") {
  Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(19));
    const int m = 1 + static_cast<int>(rng.below(6));
    Eigen::MatrixXd panel(n, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) panel(i, j) = rng.uniform();
    }
    std::vector<std::string> names;
    for (int j = 0; j < m; ++j) names.push_back("col" + std::to_string(j));

    const WeightVector w = entropy_weights(panel, names);
    const auto oracle = entropy_oracle(panel);
    for (int j = 0; j < m; ++j) {
      CHECK(w.weights(j) == doctest::Approx(oracle[j]).epsilon(1e-10));
    }
    CHECK(w.weights.minCoeff() >= 0.0);
    CHECK(w.weights.sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("entropy weight edge cases") {
  // Duplicate columns carry identical weights.
  Eigen::MatrixXd dup(4, 3);
  dup << 0.1, 0.1, 0.9,
         0.4, 0.4, 0.2,
         0.7, 0.7, 0.6,
         0.2, 0.2, 0.3;
  const WeightVector wd = entropy_weights(dup, {"a", "b", "c"});
  CHECK(std::abs(wd.weights(0) - wd.weights(1)) < 1e-12);

  // A constant column is pure noise-free entropy and gets weight 0.
  Eigen::MatrixXd with_const(3, 2);
  with_const << 0.5, 0.1,
                0.5, 0.6,
                0.5, 0.9;
  const WeightVector wc = entropy_weights(with_const, {"flat", "live"});
  CHECK(wc.weights(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(wc.weights(1) == doctest::Approx(1.0).epsilon(1e-12));

  // All-degenerate panels fall back to equal weights.
  Eigen::MatrixXd all_const(3, 2);
  all_const << 0.5, 0.25,
               0.5, 0.25,
               0.5, 0.25;
  const WeightVector we = entropy_weights(all_const, {"a", "b"});
  CHECK(we.weights(0) == doctest::Approx(0.5));
  CHECK(we.weights(1) == doctest::Approx(0.5));
}

TEST_CASE("composite index is the weighted row sum") {
  Eigen::MatrixXd normalized(2, 2);
  normalized << 0.2, 0.8,
                0.6, 0.4;
  WeightVector w;
  w.indicators = {"a", "b"};
  w.weights = Eigen::Vector2d(0.25, 0.75);

  const std::vector<Date> dates = {{2020, 1, 1}, {2020, 1, 2}};
  const IndexSeries series = composite_index(normalized, dates, {"a", "b"}, w);
  REQUIRE(series.points.size() == 2);
  CHECK(series.frequency == Frequency::kDaily);
  CHECK(series.points[0].period == "2020-01-01");
  CHECK(series.points[0].value == doctest::Approx(0.2 * 0.25 + 0.8 * 0.75));
  CHECK(series.points[1].value == doctest::Approx(0.6 * 0.25 + 0.4 * 0.75));
}

TEST_CASE("dimension index renormalizes the primary's weights") {
  const IndicatorHierarchy h = two_primary_hierarchy();
  Eigen::MatrixXd normalized(2, 3);
  normalized << 0.2, 0.8, 0.5,
                0.6, 0.4, 0.1;
  WeightVector w;
  w.indicators = {"a", "b", "c"};
  w.weights = Eigen::Vector3d(0.2, 0.3, 0.5);

  const std::vector<Date> dates = {{2020, 1, 1}, {2020, 1, 2}};
  const IndexSeries p1 = dimension_index(normalized, dates, w.indicators, h, "p1", w);
  // Weights renormalize to 0.4/0.6 over members a and b.
  CHECK(p1.points[0].value == doctest::Approx(0.2 * 0.4 + 0.8 * 0.6));
  CHECK(p1.points[1].value == doctest::Approx(0.6 * 0.4 + 0.4 * 0.6));

  const IndexSeries p2 = dimension_index(normalized, dates, w.indicators, h, "p2", w);
  CHECK(p2.points[0].value == doctest::Approx(0.5));

  CHECK_THROWS_AS(dimension_index(normalized, dates, w.indicators, h, "absent", w),
                  SchemaError);
}

TEST_CASE("dimension index falls back to equal weights on zero mass") {
  const IndicatorHierarchy h = two_primary_hierarchy();
  Eigen::MatrixXd normalized(2, 3);
  normalized << 0.2, 0.8, 0.5,
                0.6, 0.4, 0.1;
  WeightVector w;
  w.indicators = {"a", "b", "c"};
  w.weights = Eigen::Vector3d(0.0, 0.0, 1.0);  // p1 members carry no weight

  const std::vector<Date> dates = {{2020, 1, 1}, {2020, 1, 2}};
  const IndexSeries p1 = dimension_index(normalized, dates, w.indicators, h, "p1", w);
  CHECK(p1.points[0].value == doctest::Approx(0.5 * 0.2 + 0.5 * 0.8));
}

TEST_CASE("aggregation to monthly means and flags partial months") {
  IndexSeries daily;
  daily.frequency = Frequency::kDaily;
  // All of January 2020 plus the first three days of February.
  for (int d = 1; d <= 31; ++d) {
    daily.points.push_back({format_date(Date{2020, 1, d}), static_cast<double>(d), false});
  }
  for (int d = 1; d <= 3; ++d) {
    daily.points.push_back({format_date(Date{2020, 2, d}), 10.0, false});
  }

  const IndexSeries monthly = aggregate(daily, Frequency::kMonthly);
  REQUIRE(monthly.points.size() == 2);
  CHECK(monthly.points[0].period == "2020-01");
  CHECK(monthly.points[0].value == doctest::Approx(16.0));  // mean of 1..31
  CHECK_FALSE(monthly.points[0].partial);
  CHECK(monthly.points[1].period == "2020-02");
  CHECK(monthly.points[1].partial);

  const IndexSeries annual = aggregate(monthly, Frequency::kAnnual);
  REQUIRE(annual.points.size() == 1);
  CHECK(annual.points[0].period == "2020");
  CHECK(annual.points[0].partial);  // two months of twelve, and one partial

  CHECK_THROWS_AS(aggregate(monthly, Frequency::kDaily), SchemaError);

  const IndexSeries same = aggregate(monthly, Frequency::kMonthly);
  CHECK(same.points.size() == monthly.points.size());
}

TEST_CASE("full year aggregates without partial flags") {
  IndexSeries daily;
  daily.frequency = Frequency::kDaily;
  for (std::int64_t s = to_serial_day(Date{2021, 1, 1}); s <= to_serial_day(Date{2021, 12, 31});
       ++s) {
    daily.points.push_back({format_date(from_serial_day(s)), 1.0, false});
  }
  const IndexSeries annual = aggregate(daily, Frequency::kAnnual);
  REQUIRE(annual.points.size() == 1);
  CHECK(annual.points[0].period == "2021");
  CHECK(annual.points[0].value == doctest::Approx(1.0));
  CHECK_FALSE(annual.points[0].partial);
}

TEST_CASE("regional indices score against national statistics") {
  std::vector<SeriesPanel> panels(2);
  const std::vector<Date> dates = {{2020, 1, 1}, {2020, 1, 2}};
  for (int p = 0; p < 2; ++p) {
    panels[p].region = p == 0 ? "east" : "west";
    panels[p].dates = dates;
    panels[p].indicators = {"a"};
    panels[p].values = Eigen::MatrixXd(2, 1);
  }
  panels[0].values << 10, 20;
  panels[1].values << 15, 5;

  NormalizationStats stats;
  stats.columns = {{0.0, 20.0, 10.0}};
  WeightVector w;
  w.indicators = {"a"};
  w.weights = Eigen::VectorXd::Ones(1);

  const auto regions = region_indices(panels, {Polarity::kPositive}, stats, w);
  REQUIRE(regions.size() == 2);
  REQUIRE(regions.count("east") == 1);
  REQUIRE(regions.count("west") == 1);
  CHECK(regions.at("east").frequency == Frequency::kAnnual);
  // east: mean of 0.5 and 1.0 over two January days, flagged partial.
  CHECK(regions.at("east").points[0].value == doctest::Approx(0.75));
  CHECK(regions.at("east").points[0].partial);

  panels[1].indicators = {"zz"};
  CHECK_THROWS_AS(region_indices(panels, {Polarity::kPositive}, stats, w), SchemaError);
}

TEST_CASE("monthly means group a dense daily panel") {
  std::vector<Date> dates;
  for (int d = 30; d <= 31; ++d) dates.push_back(Date{2020, 1, d});
  for (int d = 1; d <= 2; ++d) dates.push_back(Date{2020, 2, d});
  Eigen::MatrixXd values(4, 1);
  values << 1, 3, 10, 20;

  const MonthlyPanel monthly = monthly_means(dates, values, {"a"});
  REQUIRE(monthly.months.size() == 2);
  CHECK(monthly.months[0] == Month{2020, 1});
  CHECK(monthly.values(0, 0) == doctest::Approx(2.0));
  CHECK(monthly.values(1, 0) == doctest::Approx(15.0));
  CHECK(monthly.indicators == std::vector<std::string>{"a"});
}

TEST_CASE("investment series load strictly increasing months") {
  const auto path = temp_file("invest.csv",
                              "month,value\n"
                              "2020-01,100\n"
                              "2020-02,110.5\n"
                              "2020-04,99\n");
  const MonthlySeries series = load_investment_csv(path);
  REQUIRE(series.months.size() == 3);
  CHECK(series.months[2] == Month{2020, 4});
  CHECK(series.values(1) == doctest::Approx(110.5));

  const auto unordered = temp_file("invest_bad.csv",
                                   "month,value\n"
                                   "2020-02,100\n"
                                   "2020-01,90\n");
  CHECK_THROWS_AS(load_investment_csv(unordered), SchemaError);

  const auto empty = temp_file("invest_empty.csv", "month,value\n");
  CHECK_THROWS_AS(load_investment_csv(empty), SchemaError);
}
