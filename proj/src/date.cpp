#include "bankdist/date.hpp"

#include <array>
#include <cstdio>

namespace bankdist {

bool Date::is_leap(int y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

int Date::days_in_month(int y, int m) {
  static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                  31, 31, 30, 31, 30, 31};
  if (m < 1 || m > 12) return 0;
  if (m == 2 && is_leap(y)) return 29;
  return lengths[static_cast<std::size_t>(m - 1)];
}

bool Date::valid() const {
  return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

// Howard Hinnant's days_from_civil algorithm.
std::int64_t Date::to_days() const {
  std::int64_t y = year;
  const std::int64_t m = month;
  const std::int64_t d = day;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const std::int64_t yoe = y - era * 400;
  const std::int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

Date Date::from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const std::int64_t doe = z - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = yoe + era * 400;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
  const std::int64_t m = mp + (mp < 10 ? 3 : -9);
  Date out;
  out.year = static_cast<int>(y + (m <= 2));
  out.month = static_cast<int>(m);
  out.day = static_cast<int>(d);
  return out;
}

std::optional<Date> Date::parse(const std::string& iso) {
  Date d;
  int n = 0;
  if (std::sscanf(iso.c_str(), "%d-%d-%d%n", &d.year, &d.month, &d.day, &n) == 3 &&
      n == static_cast<int>(iso.size())) {
    d.precision = DatePrecision::Day;
    if (!d.valid()) return std::nullopt;
    return d;
  }
  if (std::sscanf(iso.c_str(), "%d-%d%n", &d.year, &d.month, &n) == 2 &&
      n == static_cast<int>(iso.size())) {
    d.day = 15;
    d.precision = DatePrecision::Month;
    if (!d.valid()) return std::nullopt;
    return d;
  }
  if (std::sscanf(iso.c_str(), "%d%n", &d.year, &n) == 1 &&
      n == static_cast<int>(iso.size()) && iso.size() == 4) {
    d.month = 7;
    d.day = 1;
    d.precision = DatePrecision::Year;
    return d;
  }
  return std::nullopt;
}

std::string Date::to_iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::string to_string(DatePrecision p) {
  switch (p) {
    case DatePrecision::Day: return "day";
    case DatePrecision::Month: return "month";
    case DatePrecision::Year: return "year";
    case DatePrecision::Inferred: return "inferred";
  }
  return "day";
}

std::optional<DatePrecision> precision_from_string(const std::string& s) {
  if (s == "day") return DatePrecision::Day;
  if (s == "month") return DatePrecision::Month;
  if (s == "year") return DatePrecision::Year;
  if (s == "inferred") return DatePrecision::Inferred;
  return std::nullopt;
}

}  // namespace bankdist
