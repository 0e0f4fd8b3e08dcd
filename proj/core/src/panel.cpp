#include "trendwatch/panel.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "trendwatch/csv.hpp"
#include "trendwatch/error.hpp"

namespace trendwatch {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string key_label(const std::string& region, const std::string& stream, Date d) {
  return region + "/" + stream + "/" + d.iso();
}

/// Fills the NaN positions of `out` (covering [first, first+size)) by linear
/// interpolation between the surrounding observations of `series`.
/// `horizon` is the last date we may look at for the right-hand anchor.
void fill_gaps(const DailySeries& series, Date first, std::vector<double>& out,
               std::vector<bool>& filled, GapPolicy policy, Date horizon) {
  const auto raw = series.raw();
  const auto index_of = [&](Date d) { return static_cast<long>(d - series.first()); };
  const long horizon_idx = std::min<long>(index_of(horizon), static_cast<long>(raw.size()) - 1);

  std::size_t i = 0;
  while (i < out.size()) {
    if (!std::isnan(out[i])) {
      ++i;
      continue;
    }
    const Date gap_date = first + static_cast<int>(i);
    if (policy == GapPolicy::fail) {
      throw GapError("missing observation on " + gap_date.iso() + " (gap policy: fail)");
    }
    long left = index_of(gap_date) - 1;
    while (left >= 0 && std::isnan(raw[static_cast<std::size_t>(left)])) --left;
    long right = index_of(gap_date) + 1;
    while (right <= horizon_idx && std::isnan(raw[static_cast<std::size_t>(right)])) ++right;
    if (left < 0) {
      throw InsufficientHistoryError("no observation before the gap starting " + gap_date.iso());
    }
    if (right > horizon_idx) {
      throw GapError("trailing gap from " + gap_date.iso() + " cannot be interpolated");
    }
    const long run = right - left - 1;
    if (run > kMaxInterpolatedGap) {
      throw GapError("gap of " + std::to_string(run) + " days from " +
                     (series.first() + static_cast<int>(left + 1)).iso() +
                     " exceeds the interpolation limit of " + std::to_string(kMaxInterpolatedGap));
    }
    const double yl = raw[static_cast<std::size_t>(left)];
    const double yr = raw[static_cast<std::size_t>(right)];
    const double span = static_cast<double>(right - left);
    for (long k = left + 1; k < right; ++k) {
      const long pos = k - index_of(first);
      if (pos < 0 || pos >= static_cast<long>(out.size())) continue;
      const double frac = static_cast<double>(k - left) / span;
      out[static_cast<std::size_t>(pos)] = yl + frac * (yr - yl);
      filled[static_cast<std::size_t>(pos)] = true;
    }
    i = static_cast<std::size_t>(std::max<long>(static_cast<long>(i) + 1, right - index_of(first)));
  }
}

}  // namespace

std::string to_string(StreamKind kind) { return kind == StreamKind::count ? "count" : "rate"; }

StreamKind parse_stream_kind(std::string_view text) {
  if (text == "count") return StreamKind::count;
  if (text == "rate") return StreamKind::rate;
  throw UsageError("unknown stream kind '" + std::string(text) + "' (expected count|rate)");
}

DailySeries::DailySeries(Date first, std::vector<double> values)
    : first_(first), values_(std::move(values)) {}

std::optional<double> DailySeries::at(Date d) const {
  if (values_.empty() || d < first_ || d > last()) return std::nullopt;
  const double v = values_[static_cast<std::size_t>(d - first_)];
  if (std::isnan(v)) return std::nullopt;
  return v;
}

std::size_t DailySeries::observed_count() const {
  std::size_t n = 0;
  for (double v : values_) n += std::isnan(v) ? 0 : 1;
  return n;
}

StreamKind StreamPanel::stream_kind(const std::string& stream) const {
  auto it = streams_.find(stream);
  if (it == streams_.end()) throw DataError("unknown_stream", "unknown stream '" + stream + "'");
  return it->second;
}

const DailySeries* StreamPanel::find(const std::string& region, const std::string& stream) const {
  auto it = series_.find({region, stream});
  return it == series_.end() ? nullptr : &it->second;
}

const DailySeries& StreamPanel::series(const std::string& region, const std::string& stream) const {
  if (const auto* s = find(region, stream)) return *s;
  if (!regions_.count(region)) throw DataError("unknown_region", "unknown region '" + region + "'");
  if (!streams_.count(stream)) throw DataError("unknown_stream", "unknown stream '" + stream + "'");
  throw DataError("unknown_series", "no observations for " + region + "/" + stream);
}

std::optional<double> StreamPanel::value(const std::string& region, const std::string& stream,
                                         Date d) const {
  const auto* s = find(region, stream);
  return s ? s->at(d) : std::nullopt;
}

void PanelBuilder::set_stream_kind(const std::string& stream, StreamKind kind) {
  kinds_[stream] = kind;
}

bool PanelBuilder::add(const std::string& region, const std::string& stream, Date date,
                       double value) {
  return cells_.emplace(Cell{region, stream, date}, value).second;
}

void PanelBuilder::add_series(const std::string& region, const std::string& stream, Date first,
                              std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isnan(values[i])) add(region, stream, first + static_cast<int>(i), values[i]);
  }
}

StreamPanel PanelBuilder::build() const {
  StreamPanel panel;
  auto it = cells_.begin();
  while (it != cells_.end()) {
    const std::string& region = it->first.region;
    const std::string& stream = it->first.stream;
    auto end = it;
    Date lo = it->first.date, hi = it->first.date;
    while (end != cells_.end() && end->first.region == region && end->first.stream == stream) {
      hi = end->first.date;
      ++end;
    }
    std::vector<double> values(static_cast<std::size_t>(hi - lo + 1), kMissing);
    for (auto c = it; c != end; ++c) {
      values[static_cast<std::size_t>(c->first.date - lo)] = c->second;
      ++panel.observation_count_;
    }
    panel.regions_.insert(region);
    auto kind = kinds_.find(stream);
    panel.streams_[stream] = kind == kinds_.end() ? StreamKind::count : kind->second;
    panel.series_.emplace(SeriesKey{region, stream}, DailySeries(lo, std::move(values)));
    if (!panel.range_) {
      panel.range_ = DateRange{lo, hi};
    } else {
      panel.range_->first = std::min(panel.range_->first, lo);
      panel.range_->last = std::max(panel.range_->last, hi);
    }
    it = end;
  }
  for (const auto& [stream, kind] : kinds_) panel.streams_.emplace(stream, kind);
  return panel;
}

PanelLoad read_panel_csv(std::istream& in, const PanelSchema& schema,
                         const std::map<std::string, StreamKind>& kinds) {
  const CsvTable table = read_csv(in);
  std::vector<std::string> missing;
  for (const auto* name : {&schema.region, &schema.stream, &schema.date, &schema.value}) {
    if (!table.column(*name)) missing.push_back(*name);
  }
  if (!missing.empty()) {
    std::string msg = "panel CSV is missing column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }
  const auto ci = table.require_column(schema.region);
  const auto cs = table.require_column(schema.stream);
  const auto cd = table.require_column(schema.date);
  const auto cv = table.require_column(schema.value);
  const std::size_t width = std::max({ci, cs, cd, cv}) + 1;

  PanelLoad load;
  PanelBuilder builder;
  for (const auto& [stream, kind] : kinds) builder.set_stream_kind(stream, kind);
  std::vector<std::string> duplicates;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    if (row.size() < width) {
      load.errors.push_back({line, "too few fields"});
      continue;
    }
    if (row[ci].empty() || row[cs].empty()) {
      load.errors.push_back({line, "empty region or stream id"});
      continue;
    }
    Date date;
    if (!Date::try_parse(row[cd], date)) {
      load.errors.push_back({line, "unparseable date '" + row[cd] + "'"});
      continue;
    }
    const auto value = parse_double(row[cv]);
    if (!value) {
      load.errors.push_back({line, "non-numeric value '" + row[cv] + "'"});
      continue;
    }
    if (*value < 0.0) {
      load.errors.push_back({line, "negative value " + row[cv]});
      continue;
    }
    if (!builder.add(row[ci], row[cs], date, *value)) {
      duplicates.push_back(key_label(row[ci], row[cs], date) + " (line " + std::to_string(line) + ")");
    }
  }
  if (!duplicates.empty()) {
    const std::string message = "panel CSV has " + std::to_string(duplicates.size()) +
                                " duplicate (region, stream, date) row(s); first: " + duplicates.front();
    throw DuplicateError(message, std::move(duplicates));
  }
  load.panel = builder.build();
  return load;
}

PanelLoad load_panel_csv(const std::filesystem::path& path, const PanelSchema& schema,
                         const std::map<std::string, StreamKind>& kinds) {
  std::ifstream in(path);
  if (!in) throw DataError("io", "cannot open panel file '" + path.string() + "'");
  return read_panel_csv(in, schema, kinds);
}

void write_panel_csv(std::ostream& out, const StreamPanel& panel) {
  out << "region_id,stream_id,date,value\n";
  for (const auto& [key, series] : panel.all_series()) {
    const auto raw = series.raw();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (std::isnan(raw[i])) continue;
      write_csv_record(out, {key.first, key.second, (series.first() + static_cast<int>(i)).iso(),
                             format_double(raw[i])});
    }
  }
}

void write_panel_csv(const std::filesystem::path& path, const StreamPanel& panel) {
  std::ofstream out(path);
  if (!out) throw DataError("io", "cannot write '" + path.string() + "'");
  write_panel_csv(out, panel);
}

RegionMetaSet read_region_meta_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const auto ci = table.require_column("region_id");
  const auto cs = table.require_column("state_code");
  const auto clat = table.column("latitude");
  const auto clon = table.column("longitude");
  const auto cpop = table.column("population");

  RegionMetaSet meta;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto cell = [&](std::optional<std::size_t> c) -> std::string {
      return c && *c < row.size() ? row[*c] : std::string{};
    };
    const std::string where = " on line " + std::to_string(table.lines[r]);
    RegionMeta m;
    m.region_id = cell(ci);
    m.state_code = cell(cs);
    if (m.region_id.empty()) throw DataError("region_meta", "empty region_id" + where);
    if (m.state_code.size() != 2) {
      throw DataError("region_meta", "state_code must have 2 letters" + where);
    }
    if (auto s = cell(clat); !s.empty()) {
      auto v = parse_double(s);
      if (!v || *v < -90.0 || *v > 90.0) throw DataError("region_meta", "latitude out of range" + where);
      m.latitude = v;
    }
    if (auto s = cell(clon); !s.empty()) {
      auto v = parse_double(s);
      if (!v || *v < -180.0 || *v > 180.0) {
        throw DataError("region_meta", "longitude out of range" + where);
      }
      m.longitude = v;
    }
    if (auto s = cell(cpop); !s.empty()) {
      auto v = parse_double(s);
      if (!v || *v <= 0.0 || std::floor(*v) != *v) {
        throw DataError("region_meta", "population must be a positive integer" + where);
      }
      m.population = static_cast<long long>(*v);
    }
    if (!meta.emplace(m.region_id, m).second) {
      throw DuplicateError("duplicate region_id '" + m.region_id + "'", {m.region_id});
    }
  }
  return meta;
}

RegionMetaSet load_region_meta_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("io", "cannot open region metadata '" + path.string() + "'");
  return read_region_meta_csv(in);
}

void write_region_meta_csv(std::ostream& out, const RegionMetaSet& meta) {
  out << "region_id,state_code,latitude,longitude,population\n";
  for (const auto& [id, m] : meta) {
    write_csv_record(out, {id, m.state_code, m.latitude ? format_double(*m.latitude) : "",
                           m.longitude ? format_double(*m.longitude) : "",
                           m.population ? std::to_string(*m.population) : ""});
  }
}

bool Window::any_interpolated() const {
  for (bool b : interpolated) {
    if (b) return true;
  }
  return false;
}

Window extract_window(const DailySeries& series, Date end_date, std::size_t n, GapPolicy policy) {
  if (n < 3) throw UsageError("window size must be at least 3");
  const Date start = end_date - static_cast<int>(n) + 1;
  if (series.empty() || start < series.first()) {
    throw InsufficientHistoryError("fewer than " + std::to_string(n) + " days of history before " +
                                   end_date.iso());
  }
  if (end_date > series.last()) {
    throw InsufficientHistoryError("no observations through " + end_date.iso());
  }
  Window w;
  w.end_date = end_date;
  w.values.assign(series.raw().begin() + (start - series.first()),
                  series.raw().begin() + (start - series.first()) + static_cast<long>(n));
  w.interpolated.assign(n, false);
  fill_gaps(series, start, w.values, w.interpolated, policy, end_date);
  return w;
}

Window extract_window(const StreamPanel& panel, const std::string& region, const std::string& stream,
                      Date end_date, std::size_t n, GapPolicy policy) {
  return extract_window(panel.series(region, stream), end_date, n, policy);
}

std::vector<double> fill_range(const DailySeries& series, DateRange range, GapPolicy policy) {
  if (series.empty() || range.first < series.first() || range.last > series.last()) {
    throw InsufficientHistoryError("series does not cover " + range.first.iso() + ".." +
                                   range.last.iso());
  }
  std::vector<double> out(series.raw().begin() + (range.first - series.first()),
                          series.raw().begin() + (range.last - series.first()) + 1);
  std::vector<bool> filled(out.size(), false);
  fill_gaps(series, range.first, out, filled, policy, series.last());
  return out;
}

}  // namespace trendwatch
