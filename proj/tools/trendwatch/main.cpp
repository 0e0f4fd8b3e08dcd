#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "trendwatch/error.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitInternal = 1;

int report(const std::string& kind, const std::string& code, const std::string& message, int exit_code) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"code", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return exit_code;
}

int exit_code_for(trendwatch::ErrorKind kind) {
  switch (kind) {
    case trendwatch::ErrorKind::usage:
      return kExitUsage;
    case trendwatch::ErrorKind::numeric:
      return kExitNumeric;
    case trendwatch::ErrorKind::data:
    case trendwatch::ErrorKind::transport:
      return kExitData;
  }
  return kExitInternal;
}

std::string kind_name(trendwatch::ErrorKind kind) {
  switch (kind) {
    case trendwatch::ErrorKind::usage:
      return "usage";
    case trendwatch::ErrorKind::data:
      return "data";
    case trendwatch::ErrorKind::numeric:
      return "numeric";
    case trendwatch::ErrorKind::transport:
      return "transport";
  }
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trendwatch: early detection of growth trends in multi-stream surveillance panels"};
  app.set_version_flag("--version", TRENDWATCH_VERSION);
  app.set_config("--config", "", "TOML config file; one [section] per subcommand, flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  trendwatch::cli::GlobalOptions global;
  app.add_option("--run-dir", global.run_dir, "Write outputs here instead of a new timestamped directory");
  app.add_option("--out-root", global.out_root, "Parent of timestamped run directories")->capture_default_str();
  app.add_option("--jobs", global.jobs, "Worker threads (default $TRENDWATCH_JOBS, else all cores)")
      ->check(CLI::NonNegativeNumber);

  const auto commands = trendwatch::cli::register_commands(app, global);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", "arguments", e.what(), kExitUsage);
  }

  try {
    for (const auto& c : commands) {
      if (c.app->parsed()) c.run();
    }
  } catch (const trendwatch::Error& e) {
    return report(kind_name(e.kind()), e.code(), e.what(), exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    return report("internal", "internal", e.what(), kExitInternal);
  }
  return 0;
}
