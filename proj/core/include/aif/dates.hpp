#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace aif {

struct Date {
  int year = 0;
  int month = 0;  // 1..12
  int day = 0;    // 1..31

  auto operator<=>(const Date&) const = default;
};

struct Month {
  int year = 0;
  int month = 0;  // 1..12

  auto operator<=>(const Month&) const = default;
};

bool is_leap_year(int year);
int days_in_month(int year, int month);

// Parse "YYYY-MM-DD". Throws SchemaError on malformed or out-of-range input.
Date parse_date(const std::string& s);

// Parse "YYYY-MM". Throws SchemaError on malformed or out-of-range input.
Month parse_month(const std::string& s);

std::string format_date(const Date& d);
std::string format_month(const Month& m);

// Days since 1970-01-01 (may be negative). Proleptic Gregorian.
std::int64_t to_serial_day(const Date& d);
Date from_serial_day(std::int64_t serial);

inline Month month_of(const Date& d) { return Month{d.year, d.month}; }

// Months since year 0. Handy for contiguous month arithmetic.
inline int month_index(const Month& m) { return m.year * 12 + (m.month - 1); }
Month month_from_index(int index);

}  // namespace aif
