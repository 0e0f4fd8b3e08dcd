#include "trendwatch/date.hpp"

#include <chrono>
#include <cstdio>

#include "trendwatch/error.hpp"

namespace trendwatch {

namespace {

namespace chr = std::chrono;

bool parse_digits(std::string_view s, int& out) {
  if (s.empty()) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "invalid calendar date %04d-%02u-%02u", year, month, day);
    throw DataError("date", buf);
  }
  return Date(static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
}

bool Date::try_parse(std::string_view iso, Date& out) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return false;
  int y = 0, m = 0, d = 0;
  if (!parse_digits(iso.substr(0, 4), y) || !parse_digits(iso.substr(5, 2), m) ||
      !parse_digits(iso.substr(8, 2), d)) {
    return false;
  }
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  out = Date(static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
  return true;
}

Date Date::parse(std::string_view iso) {
  Date d;
  if (!try_parse(iso, d)) {
    throw DataError("date", "unparseable ISO-8601 date '" + std::string(iso) + "'");
  }
  return d;
}

Date Date::from_yyyymmdd(std::int64_t value) {
  const auto year = static_cast<int>(value / 10000);
  const auto month = static_cast<unsigned>((value / 100) % 100);
  const auto day = static_cast<unsigned>(value % 100);
  return from_ymd(year, month, day);
}

std::string Date::iso() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::int64_t Date::yyyymmdd() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  return static_cast<std::int64_t>(static_cast<int>(ymd.year())) * 10000 +
         static_cast<unsigned>(ymd.month()) * 100 + static_cast<unsigned>(ymd.day());
}

int Date::weekday() const {
  const chr::weekday wd{chr::sys_days{chr::days{days_}}};
  // iso_encoding: Monday = 1 ... Sunday = 7
  return static_cast<int>(wd.iso_encoding()) - 1;
}

}  // namespace trendwatch
