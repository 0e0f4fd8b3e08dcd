#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace trendwatch::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(const std::string& text);

/// One command invocation: its output directory and the manifest that lists
/// inputs, configuration, stage timings and every file written.
class RunContext {
 public:
  RunContext(std::string command, std::string config_snapshot, std::optional<std::uint64_t> seed);

  /// Records an input file and its digest. Call before open().
  void add_input(const std::string& role, const std::filesystem::path& path);

  /// Creates the run directory: `explicit_dir` if set, else
  /// `<root>/<UTC timestamp>-<hash of command, config and inputs>`.
  void open(const std::optional<std::filesystem::path>& explicit_dir, const std::filesystem::path& root);

  const std::filesystem::path& dir() const { return dir_; }

  /// Writes `name` inside the run directory and lists it in the manifest.
  void write(const std::string& name, const std::function<void(std::ostream&)>& body);
  void write_text(const std::string& name, const std::string& text);

  /// Times fn() as a named stage.
  template <class Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record_stage(name, t0);
    } else {
      auto result = fn();
      record_stage(name, t0);
      return result;
    }
  }

  void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void warn(const std::string& message);

  /// Writes manifest.json.
  void finish();

 private:
  void record_stage(const std::string& name, std::chrono::steady_clock::time_point t0);

  std::string command_;
  std::string config_;
  std::optional<std::uint64_t> seed_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point clock_start_;
  std::filesystem::path dir_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json stages_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json warnings_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json extra_ = nlohmann::ordered_json::object();
};

}  // namespace trendwatch::cli
