#include <doctest.h>

#include <aif/csv.hpp>
#include <aif/dates.hpp>
#include <aif/errors.hpp>
#include <aif/io.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

using namespace aif;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "aif_io_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("leap years and month lengths") {
  CHECK(is_leap_year(2020));
  CHECK(is_leap_year(2000));
  CHECK_FALSE(is_leap_year(1900));
  CHECK_FALSE(is_leap_year(2021));
  CHECK(days_in_month(2020, 2) == 29);
  CHECK(days_in_month(2021, 2) == 28);
  CHECK(days_in_month(2021, 4) == 30);
  CHECK(days_in_month(2021, 12) == 31);
}

TEST_CASE("date parsing accepts exactly YYYY-MM-DD") {
  const Date d = parse_date("2020-02-29");
  CHECK(d == Date{2020, 2, 29});
  CHECK(format_date(d) == "2020-02-29");

  for (const char* bad : {"2020/01/01", "2020-1-01", "20200101", "2020-13-01",
                          "2020-02-30", "2021-02-29", "", "2020-01-01 ", "x020-01-01"}) {
    CHECK_THROWS_AS(parse_date(bad), SchemaError);
  }
}

TEST_CASE("month parsing accepts exactly YYYY-MM") {
  CHECK(parse_month("2020-07") == Month{2020, 7});
  CHECK(format_month(Month{2020, 7}) == "2020-07");
  for (const char* bad : {"2020-00", "2020-13", "2020-7", "2020-07-01", "", "2020_07"}) {
    CHECK_THROWS_AS(parse_month(bad), SchemaError);
  }
}

TEST_CASE("serial day anchors and round trip") {
  CHECK(to_serial_day(Date{1970, 1, 1}) == 0);
  CHECK(to_serial_day(Date{1970, 1, 2}) == 1);
  CHECK(to_serial_day(Date{1969, 12, 31}) == -1);
  CHECK(to_serial_day(Date{2020, 3, 1}) - to_serial_day(Date{2020, 2, 28}) == 2);
  CHECK(to_serial_day(Date{2021, 3, 1}) - to_serial_day(Date{2021, 2, 28}) == 1);

  for (std::int64_t s = -200000; s <= 200000; s += 7919) {
    CHECK(to_serial_day(from_serial_day(s)) == s);
  }

  // Consecutive dates map to consecutive serials across month and year turns.
  std::int64_t prev = to_serial_day(Date{2019, 12, 1});
  Date d{2019, 12, 1};
  for (int i = 0; i < 450; ++i) {
    d = from_serial_day(prev + 1);
    CHECK(to_serial_day(d) == prev + 1);
    ++prev;
  }
  CHECK(d == Date{2021, 2, 23});
}

TEST_CASE("month index arithmetic") {
  CHECK(month_index(Month{0, 1}) == 0);
  CHECK(month_index(Month{2020, 1}) - month_index(Month{2019, 12}) == 1);
  for (int idx : {0, 1, 11, 12, 24000, 24245}) {
    CHECK(month_index(month_from_index(idx)) == idx);
  }
  CHECK(month_of(Date{2020, 5, 17}) == Month{2020, 5});
}

TEST_CASE("csv parses quoted fields") {
  const auto t = parse_csv("a,b,c\n1,\"x,y\",3\n\"he said \"\"hi\"\"\",\"line\nbreak\",z\n");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[1][0] == "he said \"hi\"");
  CHECK(t.rows[1][1] == "line\nbreak");
  CHECK(t.column("b") == 1);
  CHECK_THROWS_AS(t.column("missing"), SchemaError);
}

TEST_CASE("csv rejects ragged rows") {
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), SchemaError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), SchemaError);
}

TEST_CASE("csv round trips through to_csv") {
  CsvTable t;
  t.header = {"name", "note"};
  t.rows = {{"plain", "x"}, {"with,comma", "with \"quote\""}, {"multi\nline", ""}};
  const auto back = parse_csv(to_csv(t));
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
}

TEST_CASE("csv file round trip is atomic write plus read") {
  const auto path = temp_dir() / "round.csv";
  CsvTable t;
  t.header = {"k", "v"};
  t.rows = {{"a", "1"}, {"b", "2"}};
  write_csv_atomic(path, t);
  const auto back = read_csv(path);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  fs::remove(path);
}

TEST_CASE("numeric fields parse strictly") {
  CHECK(parse_double_field("1.5", "t") == 1.5);
  CHECK(parse_double_field("-3e2", "t") == -300.0);
  CHECK(parse_double_field("0", "t") == 0.0);
  CHECK_THROWS_AS(parse_double_field("", "t"), SchemaError);
  CHECK_THROWS_AS(parse_double_field("1.5x", "t"), SchemaError);
  CHECK_THROWS_AS(parse_double_field("nan", "t"), SchemaError);
  CHECK_THROWS_AS(parse_double_field("inf", "t"), SchemaError);
}

TEST_CASE("numeric formatting is stable 12 digit shortest form") {
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.333333333333");
  CHECK(format_double(1e300) == "1e+300");
  CHECK(format_double(-0.25) == "-0.25");
  // Parses back to within one part in 1e12.
  const double x = 0.7236412387;
  CHECK(parse_double_field(format_double(x), "t") == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("text files write atomically and read back") {
  const auto path = temp_dir() / "nested" / "deep" / "file.txt";
  write_file_atomic(path, "hello\nworld\n");
  CHECK(read_text_file(path) == "hello\nworld\n");
  fs::remove_all(temp_dir() / "nested");
  CHECK_THROWS_AS(read_text_file(temp_dir() / "absent.txt"), SchemaError);
}

TEST_CASE("split_lines handles CRLF and trailing newline") {
  CHECK(split_lines("a\r\nb\n") == std::vector<std::string>{"a", "b"});
  CHECK(split_lines("a\nb") == std::vector<std::string>{"a", "b"});
  CHECK(split_lines("") == std::vector<std::string>{});
  CHECK(split_lines("\n") == std::vector<std::string>{""});
  CHECK(split_lines("a\n\nb\n") == std::vector<std::string>{"a", "", "b"});
}
