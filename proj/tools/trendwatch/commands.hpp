#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace trendwatch::cli {

/// Options every subcommand shares.
struct GlobalOptions {
  std::optional<std::filesystem::path> run_dir;
  std::filesystem::path out_root = "runs";
  int jobs = 0;
};

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> run;
};

std::vector<Command> register_commands(CLI::App& app, GlobalOptions& global);

}  // namespace trendwatch::cli
