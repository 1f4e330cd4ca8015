#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace bankdist {

enum class DatePrecision { Day, Month, Year, Inferred };

// Proleptic Gregorian calendar date. Partial dates (year-month or year only)
// keep a precision flag; the day is defaulted to mid-month / mid-year so date
// arithmetic stays well defined.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;
  DatePrecision precision = DatePrecision::Day;

  static bool is_leap(int y);
  static int days_in_month(int y, int m);
  bool valid() const;

  // Days since 1970-01-01 (negative before the epoch).
  std::int64_t to_days() const;
  static Date from_days(std::int64_t days);

  // Accepts YYYY-MM-DD, YYYY-MM (day := 15, precision Month) and
  // YYYY (month := 7, day := 1, precision Year).
  static std::optional<Date> parse(const std::string& iso);
  std::string to_iso() const;

  Date add_days(std::int64_t n) const { return from_days(to_days() + n); }

  friend auto operator<=>(const Date& a, const Date& b) {
    if (auto c = a.year <=> b.year; c != 0) return c;
    if (auto c = a.month <=> b.month; c != 0) return c;
    return a.day <=> b.day;
  }
  friend bool operator==(const Date& a, const Date& b) {
    return a.year == b.year && a.month == b.month && a.day == b.day;
  }
};

std::string to_string(DatePrecision p);
std::optional<DatePrecision> precision_from_string(const std::string& s);

}  // namespace bankdist
