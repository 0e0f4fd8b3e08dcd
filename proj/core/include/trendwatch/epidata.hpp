#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "trendwatch/date.hpp"
#include "trendwatch/panel.hpp"

namespace trendwatch {

struct EpidataRequest {
  /// Service root, e.g. https://api.delphi.cmu.edu/epidata
  std::string base_url;
  /// `data_source:signal`
  std::string signal;
  std::string geo_type = "hrr";
  std::vector<std::string> geo_values;  ///< empty means all ("*")
  DateRange dates;
  std::string stream_id;  ///< panel stream name; defaults to the signal
  StreamKind kind = StreamKind::count;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};  ///< doubled after each failed attempt
  std::chrono::seconds timeout{30};
  int max_pages = 100;
};

struct EpidataResult {
  StreamPanel panel;
  std::vector<std::string> warnings;
  int requests = 0;
  int pages = 0;
};

/// GETs `<base>/covidcast/` and builds a one-stream panel from the
/// (geo_value, time_value, value) rows. A truncated page (result 2) is
/// followed by a request starting at the last date received; repeated rows
/// are dropped. Failed requests are retried with exponential backoff before a
/// TransportError; malformed bodies raise DataError. An empty result is a
/// warning with an empty panel.
EpidataResult fetch_epidata(const EpidataRequest& request);

}  // namespace trendwatch
