#include "trendwatch/epidata.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "trendwatch/error.hpp"

namespace trendwatch {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("base URL needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw UsageError("unsupported URL scheme: " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw UsageError("this build has no TLS support; use an http:// URL");
#endif
  const auto path_begin = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_begin);
  e.path = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

std::string join(const std::vector<std::string>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    out += v;
  }
  return out;
}

std::string geo_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw DataError("malformed_response", "geo_value is neither a string nor an integer");
}

}  // namespace

EpidataResult fetch_epidata(const EpidataRequest& request) {
  const auto colon = request.signal.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == request.signal.size()) {
    throw UsageError("signal must look like data_source:signal, got '" + request.signal + "'");
  }
  if (request.dates.last < request.dates.first) throw UsageError("empty date range");
  if (request.max_attempts < 1) throw UsageError("max_attempts must be at least 1");
  const Endpoint endpoint = split_url(request.base_url);
  const std::string stream = request.stream_id.empty() ? request.signal : request.stream_id;

  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(request.timeout);
  client.set_read_timeout(request.timeout);
  client.set_follow_location(true);

  EpidataResult result;
  PanelBuilder builder;
  builder.set_stream_kind(stream, request.kind);
  std::set<std::pair<std::string, std::int64_t>> seen;
  Date from = request.dates.first;

  for (int page = 0; page < request.max_pages; ++page) {
    const httplib::Params params{
        {"data_source", request.signal.substr(0, colon)},
        {"signals", request.signal.substr(colon + 1)},
        {"time_type", "day"},
        {"geo_type", request.geo_type},
        {"geo_values", request.geo_values.empty() ? "*" : join(request.geo_values)},
        {"time_values", std::to_string(from.yyyymmdd()) + "-" + std::to_string(request.dates.last.yyyymmdd())},
    };
    const std::string path = httplib::append_query_params(endpoint.path + "/covidcast/", params);

    std::string body;
    int last_status = -1;
    std::string last_problem;
    for (int attempt = 0; attempt < request.max_attempts; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(request.backoff * (1 << (attempt - 1)));
      ++result.requests;
      const auto response = client.Get(path);
      if (!response) {
        last_problem = httplib::to_string(response.error());
        continue;
      }
      last_status = response->status;
      if (response->status >= 200 && response->status < 300) {
        body = response->body;
        last_problem.clear();
        break;
      }
      last_problem = "HTTP " + std::to_string(response->status);
    }
    if (!last_problem.empty()) {
      throw TransportError("epidata request failed after " + std::to_string(request.max_attempts) +
                               " attempts: " + last_problem,
                           last_status);
    }
    ++result.pages;

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed_response", std::string("epidata response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("result")) {
      throw DataError("malformed_response", "epidata response lacks a result code");
    }
    int code = 0;
    Date newest = from;
    bool any_new = false;
    try {
      code = doc["result"].get<int>();
      if (code == -2) break;  // no results
      if (code != 1 && code != 2) {
        throw DataError("epidata_error", "epidata returned result " + std::to_string(code) + ": " +
                                             doc.value("message", std::string("no message")));
      }
      const auto& rows = doc["epidata"];
      if (!rows.is_array()) throw DataError("malformed_response", "epidata field is not an array");

      for (const auto& row : rows) {
        if (!row.is_object() || !row.contains("geo_value") || !row.contains("time_value") || !row.contains("value")) {
          throw DataError("malformed_response", "epidata row lacks geo_value, time_value or value");
        }
        const std::string geo = geo_string(row["geo_value"]);
        const auto stamp = row["time_value"].get<std::int64_t>();
        const Date date = Date::from_yyyymmdd(stamp);
        newest = std::max(newest, date);
        if (!seen.insert({geo, stamp}).second) continue;
        any_new = true;
        if (row["value"].is_null()) continue;
        const double value = row["value"].get<double>();
        if (!std::isfinite(value) || value < 0.0) {
          result.warnings.push_back("dropped invalid value for " + geo + " on " + date.iso());
          continue;
        }
        builder.add(geo, stream, date, value);
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed_response", std::string("unexpected epidata field type: ") + e.what());
    }
    if (code == 1) break;
    if (!any_new) {
      result.warnings.push_back("truncated response made no progress; stopping pagination");
      break;
    }
    from = newest;
  }
  if (builder.size() == 0) result.warnings.push_back("empty result set for " + request.signal);
  result.panel = builder.build();
  return result;
}

}  // namespace trendwatch
