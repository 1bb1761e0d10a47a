#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebench/analysis.hpp"
#include "framebench/context.hpp"
#include "framebench/game.hpp"
#include "framebench/gateway.hpp"
#include "framebench/predictor.hpp"

namespace framebench {

struct PredictorSettings {
    predictor::ModelKind kind = predictor::ModelKind::Logistic;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
    std::optional<predictor::Hyperparams> hyperparams;  ///< unset: defaults for the kind
    bool search = false;                                 ///< boosted trees only
    predictor::SearchGrid grid;
    std::size_t search_budget = 512;
    bool embedding_order_feature = true;
    std::optional<std::filesystem::path> embeddings;
};

/// Everything a pipeline run needs. Relative paths resolve against the
/// directory of the config file.
struct RunConfig {
    std::map<std::string, gateway::ProviderConfig> providers;
    std::string generator;
    std::vector<std::string> models;
    std::string judge;

    std::vector<Topic> topics;
    std::vector<WorldType> worlds;
    std::vector<ActorType> actors;
    int per_cell_count = 100;
    int batch_size = 10;
    std::uint64_t seed = 0;
    game::PayoffMatrix payoff = game::canonical_pd();
    bool require_pd = true;
    std::size_t core_set_token_budget = 8000;
    bool reject_numeric_payoffs = true;
    int max_batches = 0;

    gateway::RetryPolicy retry;
    std::size_t max_in_flight = 4;
    std::size_t max_parallel_cells = 1;

    std::filesystem::path storage_dir;
    std::filesystem::path report_dir;

    double judge_failure_threshold = 0.05;
    analysis::Unit unit = analysis::Unit::Vignette;
    analysis::CiMethod ci = analysis::CiMethod::Wald;
    std::map<std::string, double> benchmark_scores;
    bool svg = false;

    PredictorSettings predictor;

    /// Throws ConfigError when a referenced provider name is missing, a
    /// provider is invalid, or the plan is out of range.
    void validate() const;

    [[nodiscard]] const gateway::ProviderConfig& provider(const std::string& name) const;
    [[nodiscard]] std::vector<ContextCell> cells() const;

    /// Hash over everything that shapes the vignette dataset.
    [[nodiscard]] std::string fingerprint() const;
};

/// Seeds are mandatory: a config without plan.seed or predictor.seed is
/// rejected.
[[nodiscard]] RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

}  // namespace framebench
