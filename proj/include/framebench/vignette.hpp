#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebench/context.hpp"
#include "framebench/error.hpp"
#include "framebench/game.hpp"
#include "framebench/gateway.hpp"

namespace framebench::vignette {

/// One generated scenario. The generator is told that Decision A is the
/// cooperative action; `cooperative_label` records which narrative decision
/// cooperates so that the evaluation runner can swap the presentation.
struct Vignette {
    std::string vignette_id;
    ContextCell cell;
    std::string text;
    std::string protagonist;
    std::string summary;
    int batch_index = 0;
    std::string generator_model_id;
    std::string option_a;  ///< short description of the story's Decision A
    std::string option_b;
    char cooperative_label = 'A';

    friend bool operator==(const Vignette&, const Vignette&) = default;
};

/// Running list of one-line summaries passed to later batches. Token usage is
/// estimated as ceil(chars / 4); the oldest entries go first on overflow.
class CoreSet {
public:
    explicit CoreSet(std::size_t token_budget = 8000);

    void add(const std::string& summary);
    [[nodiscard]] const std::deque<std::string>& summaries() const noexcept { return summaries_; }
    [[nodiscard]] std::size_t token_budget() const noexcept { return token_budget_; }
    [[nodiscard]] std::size_t estimated_tokens() const noexcept { return tokens_; }
    [[nodiscard]] bool empty() const noexcept { return summaries_.empty(); }

    [[nodiscard]] static std::size_t estimate_tokens(const std::string& s) noexcept { return (s.size() + 3) / 4; }

private:
    std::deque<std::string> summaries_;
    std::size_t token_budget_;
    std::size_t tokens_ = 0;
};

/// Lowercase, whitespace collapsed, trimmed. Dedupe key for summaries.
[[nodiscard]] std::string normalize_summary(const std::string& s);

/// Collapse a multi-line reply into one line.
[[nodiscard]] std::string flatten_line(const std::string& s);

struct ValidationOptions {
    /// Reject stories that state numeric payoffs ("happiness level of 3",
    /// "(3, 0)"). Off accepts them.
    bool reject_numeric_payoffs = true;
};

/// Empty when valid; otherwise the first violated invariant.
[[nodiscard]] std::optional<std::string> validate(const Vignette& v, const ValidationOptions& opts = {});

/// Throws DomainError unless the game is 2x2 (two narrative decisions).
[[nodiscard]] std::string build_generation_prompt(const ContextCell& cell, const game::PayoffMatrix& payoff,
                                                  int batch_size, const CoreSet& core_set);

struct Reject {
    int position = 0;  ///< 1-based position in the raw response
    std::string reason;
    std::string excerpt;
};

struct ParsedBatch {
    std::vector<Vignette> vignettes;  ///< ids, summaries and batch index left for the caller
    std::vector<Reject> rejects;
};

/// Splits on the sentinel line, falling back to "You are ... What decision
/// will you make?" anchors. Throws GenerationError if nothing parses.
[[nodiscard]] ParsedBatch parse_generated_batch(const std::string& raw, const ContextCell& cell,
                                                const ValidationOptions& opts = {});

[[nodiscard]] std::string build_summary_prompt(const std::vector<Vignette>& batch);

/// One entry per vignette; entries the reply did not cover stay empty.
[[nodiscard]] std::vector<std::optional<std::string>> parse_summaries(const std::string& raw, std::size_t count);

/// One single-line summary per vignette. Missing lines fall back to the
/// protagonist plus the story's first sentence. Throws DomainError on an
/// empty batch; gateway errors propagate.
[[nodiscard]] std::vector<std::string> summarize_batch(const std::vector<Vignette>& batch,
                                                       const gateway::ProviderConfig& provider,
                                                       gateway::Gateway& gw, const gateway::RetryPolicy& retry);

struct GenerationPlan {
    std::vector<ContextCell> cells;
    int per_cell_count = 100;
    int batch_size = 10;
    game::PayoffMatrix payoff = game::canonical_pd();
    bool require_pd = true;
    gateway::ProviderConfig generator;
    gateway::RetryPolicy retry;
    std::uint64_t seed = 0;
    std::size_t core_set_token_budget = 8000;
    ValidationOptions validation;
    int max_batches = 0;  ///< 0 means ceil(3 * n / batch_size)
    std::size_t max_parallel_cells = 1;

    void validate() const;
    [[nodiscard]] int batch_budget() const;
};

struct BatchEvent {
    ContextCell cell;
    int batch_index = 0;
    std::string prompt;
    int parsed = 0;
    int accepted = 0;
    int duplicates = 0;
    int rejected = 0;
    std::string error;  ///< transport or parse failure, empty on success
};

using BatchObserver = std::function<void(const BatchEvent&)>;
/// Receives each batch's newly accepted vignettes as soon as they exist.
using VignetteSink = std::function<void(const std::vector<Vignette>&)>;

/// Budget ran out before the cell reached n vignettes.
class PartialGenerationError : public GenerationError {
public:
    PartialGenerationError(const std::string& what, std::vector<Vignette> produced)
        : GenerationError(what), produced_(std::move(produced)) {}
    [[nodiscard]] const std::vector<Vignette>& produced() const noexcept { return produced_; }

private:
    std::vector<Vignette> produced_;
};

/// Generates until the cell holds plan.per_cell_count vignettes. `existing`
/// are previously persisted vignettes of the same cell; they seed the core set
/// and the dedupe index and are included in the returned list.
std::vector<Vignette> generate_cell(const ContextCell& cell, const GenerationPlan& plan, gateway::Gateway& gw,
                                    const std::vector<Vignette>& existing = {}, const VignetteSink& sink = {},
                                    const BatchObserver& observer = {});

struct CellStatus {
    ContextCell cell;
    int count = 0;
    bool complete = false;
    bool skipped = false;  ///< already complete before this run
    std::string error;
};

struct GridReport {
    std::vector<CellStatus> cells;
    std::string generator_model_id;

    [[nodiscard]] bool complete() const;
    [[nodiscard]] int total() const;
};

/// Cells are independent. `existing` maps cell_key to persisted vignettes;
/// cells already at n are skipped without provider calls. Per-cell failures
/// are reported, never thrown.
GridReport generate_grid(const GenerationPlan& plan, gateway::Gateway& gw,
                         const std::map<std::string, std::vector<Vignette>>& existing = {},
                         const VignetteSink& sink = {}, const BatchObserver& observer = {});

[[nodiscard]] nlohmann::json to_json(const Vignette& v);
[[nodiscard]] Vignette vignette_from_json(const nlohmann::json& j);

[[nodiscard]] std::string make_vignette_id(const ContextCell& cell, int index);

}  // namespace framebench::vignette
