#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "trendwatch/date.hpp"

namespace trendwatch {

struct RegionMeta {
  std::string region_id;
  std::string state_code;
  std::optional<double> latitude;
  std::optional<double> longitude;
  std::optional<long long> population;
};

using RegionMetaSet = std::map<std::string, RegionMeta>;

enum class StreamKind { count, rate };

std::string to_string(StreamKind kind);
StreamKind parse_stream_kind(std::string_view text);

/// One (region, stream) daily series. Missing days are NaN internally and
/// surface as std::nullopt; a stored 0 is a real observation.
class DailySeries {
 public:
  DailySeries() = default;
  DailySeries(Date first, std::vector<double> values);

  Date first() const { return first_; }
  Date last() const { return first_ + static_cast<int>(values_.size()) - 1; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::optional<double> at(Date d) const;
  bool observed(Date d) const { return at(d).has_value(); }
  std::size_t observed_count() const;

  /// Raw storage with NaN for missing days, indexed from first().
  std::span<const double> raw() const { return values_; }

 private:
  Date first_{};
  std::vector<double> values_;
};

using SeriesKey = std::pair<std::string, std::string>;  // (region_id, stream_id)

/// Immutable multi-region, multi-stream daily observation table.
class StreamPanel {
 public:
  StreamPanel() = default;

  const std::set<std::string>& regions() const { return regions_; }
  const std::map<std::string, StreamKind>& streams() const { return streams_; }
  bool has_stream(const std::string& stream) const { return streams_.count(stream) != 0; }
  StreamKind stream_kind(const std::string& stream) const;

  /// Nullptr when the pair has no observations.
  const DailySeries* find(const std::string& region, const std::string& stream) const;
  /// Throws DataError("unknown_series") when absent.
  const DailySeries& series(const std::string& region, const std::string& stream) const;
  const std::map<SeriesKey, DailySeries>& all_series() const { return series_; }

  std::optional<double> value(const std::string& region, const std::string& stream, Date d) const;
  std::size_t observation_count() const { return observation_count_; }
  /// Hull of all observed dates; nullopt for an empty panel.
  std::optional<DateRange> date_range() const { return range_; }
  bool empty() const { return observation_count_ == 0; }

 private:
  friend class PanelBuilder;
  std::set<std::string> regions_;
  std::map<std::string, StreamKind> streams_;
  std::map<SeriesKey, DailySeries> series_;
  std::size_t observation_count_ = 0;
  std::optional<DateRange> range_;
};

/// Accumulates observations, then freezes them into a StreamPanel.
class PanelBuilder {
 public:
  void set_stream_kind(const std::string& stream, StreamKind kind);
  /// Returns false (and records nothing) if the key already has a value.
  bool add(const std::string& region, const std::string& stream, Date date, double value);
  /// Adds the whole series, skipping NaN entries.
  void add_series(const std::string& region, const std::string& stream, Date first,
                  std::span<const double> values);
  std::size_t size() const { return cells_.size(); }
  StreamPanel build() const;

 private:
  struct Cell {
    std::string region;
    std::string stream;
    Date date;
    bool operator<(const Cell& o) const {
      return std::tie(region, stream, date) < std::tie(o.region, o.stream, o.date);
    }
  };
  std::map<Cell, double> cells_;
  std::map<std::string, StreamKind> kinds_;
};

/// Column names used when reading a panel CSV.
struct PanelSchema {
  std::string region = "region_id";
  std::string stream = "stream_id";
  std::string date = "date";
  std::string value = "value";
};

struct RowError {
  std::size_t line = 0;
  std::string reason;
};

struct PanelLoad {
  StreamPanel panel;
  /// Rows rejected for bad dates or values; never silently dropped.
  std::vector<RowError> errors;
};

/// Reads `region_id,stream_id,date,value`. Throws SchemaError on missing
/// columns and DuplicateError listing every duplicated key.
PanelLoad load_panel_csv(const std::filesystem::path& path, const PanelSchema& schema = {},
                         const std::map<std::string, StreamKind>& kinds = {});
PanelLoad read_panel_csv(std::istream& in, const PanelSchema& schema = {},
                         const std::map<std::string, StreamKind>& kinds = {});

/// Canonical order: region, stream, date. Values round-trip exactly.
void write_panel_csv(std::ostream& out, const StreamPanel& panel);
void write_panel_csv(const std::filesystem::path& path, const StreamPanel& panel);

RegionMetaSet load_region_meta_csv(const std::filesystem::path& path);
RegionMetaSet read_region_meta_csv(std::istream& in);
void write_region_meta_csv(std::ostream& out, const RegionMetaSet& meta);

enum class GapPolicy { fail, interpolate };

/// Longest run of consecutive missing days that GapPolicy::interpolate fills.
inline constexpr int kMaxInterpolatedGap = 7;

/// n consecutive daily values ending on end_date, with no missing entries.
struct Window {
  std::vector<double> values;
  Date end_date;
  /// Positions that were filled by interpolation.
  std::vector<bool> interpolated;

  std::size_t size() const { return values.size(); }
  Date start_date() const { return end_date - static_cast<int>(values.size()) + 1; }
  /// Day index i in 1..n.
  Date date_of(std::size_t day_index) const { return start_date() + static_cast<int>(day_index) - 1; }
  int weekday_of(std::size_t day_index) const { return date_of(day_index).weekday(); }
  bool any_interpolated() const;
};

/// The n most recent daily values ending at end_date. Interior gaps of at
/// most kMaxInterpolatedGap days are linearly interpolated under
/// GapPolicy::interpolate, using observations on either side of the gap
/// (never after end_date). Throws InsufficientHistoryError or GapError.
Window extract_window(const StreamPanel& panel, const std::string& region, const std::string& stream,
                      Date end_date, std::size_t n, GapPolicy policy = GapPolicy::interpolate);
Window extract_window(const DailySeries& series, Date end_date, std::size_t n,
                      GapPolicy policy = GapPolicy::interpolate);

/// Gap-filled values over [range.first, range.last]; throws like extract_window.
std::vector<double> fill_range(const DailySeries& series, DateRange range,
                               GapPolicy policy = GapPolicy::interpolate);

}  // namespace trendwatch
