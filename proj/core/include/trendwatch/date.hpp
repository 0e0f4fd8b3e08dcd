#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace trendwatch {

/// Calendar day stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  /// Parses YYYY-MM-DD. Throws DataError("date") on malformed or invalid dates.
  static Date parse(std::string_view iso);
  /// Non-throwing variant; returns false on failure.
  static bool try_parse(std::string_view iso, Date& out);
  static Date from_ymd(int year, unsigned month, unsigned day);
  /// Parses the compact YYYYMMDD integer form used by the epidata service.
  static Date from_yyyymmdd(std::int64_t value);

  std::string iso() const;
  std::int64_t yyyymmdd() const;

  /// 0 = Monday ... 6 = Sunday.
  int weekday() const;

  constexpr std::int32_t days() const { return days_; }

  constexpr Date operator+(int n) const { return Date(days_ + n); }
  constexpr Date operator-(int n) const { return Date(days_ - n); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr Date& operator+=(int n) {
    days_ += n;
    return *this;
  }
  constexpr Date& operator++() {
    ++days_;
    return *this;
  }

  friend constexpr auto operator<=>(Date, Date) = default;
  friend constexpr bool operator==(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

/// Inclusive calendar range.
struct DateRange {
  Date first;
  Date last;

  int length() const { return last - first + 1; }
  bool contains(Date d) const { return first <= d && d <= last; }
  friend bool operator==(const DateRange&, const DateRange&) = default;
};

}  // namespace trendwatch

template <>
struct std::hash<trendwatch::Date> {
  std::size_t operator()(trendwatch::Date d) const noexcept {
    return std::hash<std::int32_t>{}(d.days());
  }
};
