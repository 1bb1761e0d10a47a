#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebench/config.hpp"
#include "framebench/gateway.hpp"

namespace framebench::pipeline {

/// Process exit codes used by every command.
enum ExitCode : int {
    kOk = 0,
    kIncomplete = 1,  ///< ran, but coverage has gaps or a threshold was exceeded
    kUsage = 2,       ///< bad config or flags
    kDataError = 3,   ///< missing or degenerate inputs
};

struct CommandOptions {
    bool fresh = false;
    std::optional<analysis::Unit> unit;
    std::vector<std::string> models;  ///< provider names or model ids; empty means all configured
    std::optional<std::filesystem::path> embeddings;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_in_flight;
    bool allow_fingerprint_mismatch = false;
    bool shuffle_labels = false;
    bool svg = false;
};

struct CommandResult {
    int exit_code = kOk;
    std::string message;  ///< human-readable outcome, printed by the CLI
    nlohmann::json details = nlohmann::json::object();
};

CommandResult cmd_generate(const RunConfig& config, const CommandOptions& opts, gateway::Gateway& gw);
CommandResult cmd_evaluate(const RunConfig& config, const CommandOptions& opts, gateway::Gateway& gw);
CommandResult cmd_judge(const RunConfig& config, const CommandOptions& opts, gateway::Gateway& gw);
CommandResult cmd_analyze(const RunConfig& config, const CommandOptions& opts);
CommandResult cmd_predict(const RunConfig& config, const CommandOptions& opts);
/// Prints the stored analysis summary and predictor metrics; with svg set,
/// renders heatmaps from the stored report.
CommandResult cmd_report(const RunConfig& config, const CommandOptions& opts);

/// Maps library exceptions to exit codes and messages.
[[nodiscard]] CommandResult run_guarded(const std::function<CommandResult()>& fn);

}  // namespace framebench::pipeline
