#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebench/game.hpp"
#include "framebench/gateway.hpp"
#include "framebench/vignette.hpp"

namespace framebench::eval {

enum class PresentationOrder { CooperateIsA, CooperateIsB };
enum class Decision { Cooperate, Defect, Unparseable };
enum class Recognition { Recognized, NotRecognized };
enum class RecordStatus { Completed, Failed };

inline constexpr std::array kBothOrders = {PresentationOrder::CooperateIsA, PresentationOrder::CooperateIsB};

[[nodiscard]] std::string_view to_string(PresentationOrder o);
[[nodiscard]] std::string_view to_string(Decision d);
[[nodiscard]] std::string_view to_string(Recognition r);
[[nodiscard]] std::string_view to_string(RecordStatus s);
[[nodiscard]] PresentationOrder order_from_string(std::string_view s);
[[nodiscard]] Decision decision_from_string(std::string_view s);
[[nodiscard]] Recognition recognition_from_string(std::string_view s);

/// Which game strategy each presented letter stands for.
struct DecisionLabelMap {
    game::Strategy label_a;
    game::Strategy label_b;

    [[nodiscard]] const game::Strategy& strategy(char letter) const;
};

/// Strategies come from the canonical game: index 0 Cooperate, index 1 Defect.
[[nodiscard]] DecisionLabelMap label_map(PresentationOrder order);

/// Semantic decision behind a presented letter.
[[nodiscard]] Decision decision_for_label(PresentationOrder order, char label);

struct ParsedDecision {
    Decision decision = Decision::Unparseable;
    std::optional<char> chosen_label;
    std::string justification;
};

[[nodiscard]] std::string assemble_decision_prompt(const vignette::Vignette& v, PresentationOrder order);

/// Cascade: last "Decision: X"; else a final standalone A/B; else an
/// unambiguous "I choose Decision A"-style phrase; else Unparseable.
/// Never throws.
[[nodiscard]] ParsedDecision parse_decision(const std::string& raw, PresentationOrder order);

struct EvaluationRecord {
    std::string record_id;
    std::string vignette_id;
    std::string model_id;
    PresentationOrder order = PresentationOrder::CooperateIsA;
    RecordStatus status = RecordStatus::Completed;
    std::string raw_response;
    std::string first_response;  ///< set when a clarification re-ask happened
    Decision decision = Decision::Unparseable;
    std::optional<char> chosen_label;
    std::string justification;
    std::optional<Recognition> recognition;
    std::string recognition_evidence;
    int attempts = 0;
    std::int64_t latency_ms = 0;
    std::string timestamp;
    std::string error;

    [[nodiscard]] bool parseable() const noexcept {
        return status == RecordStatus::Completed && decision != Decision::Unparseable;
    }
    [[nodiscard]] std::string triple_key() const;
};

[[nodiscard]] std::string triple_key(const std::string& vignette_id, const std::string& model_id,
                                     PresentationOrder order);

/// Empty when the record honours label/decision consistency.
[[nodiscard]] std::optional<std::string> validate(const EvaluationRecord& r);

/// Both orders, each in a fresh single-turn prompt. An unparseable first
/// answer gets one re-ask with a clarification suffix. Transport failures
/// become Failed records. `generation` disambiguates record ids on retries.
[[nodiscard]] std::array<EvaluationRecord, 2> evaluate_vignette(const vignette::Vignette& v,
                                                                const gateway::ProviderConfig& model,
                                                                gateway::Gateway& gw,
                                                                const gateway::RetryPolicy& retry,
                                                                int generation = 0);

/// One (vignette, model, order) elicitation; building block of
/// evaluate_vignette and run_evaluation.
[[nodiscard]] EvaluationRecord evaluate_presentation(const vignette::Vignette& v, PresentationOrder order,
                                                     const gateway::ProviderConfig& model, gateway::Gateway& gw,
                                                     const gateway::RetryPolicy& retry, int generation = 0);

struct EvaluationPlan {
    std::vector<vignette::Vignette> vignettes;
    std::vector<gateway::ProviderConfig> models;
    gateway::RetryPolicy retry;
    std::size_t max_in_flight = 4;
    bool resume = true;

    void validate() const;
};

struct Triple {
    std::string vignette_id;
    std::string model_id;
    PresentationOrder order = PresentationOrder::CooperateIsA;

    friend bool operator==(const Triple&, const Triple&) = default;
};

struct EvaluationSummary {
    std::size_t new_records = 0;
    std::size_t skipped = 0;
    std::vector<Triple> failed;  ///< sorted by (vignette, model, order)
    std::size_t unparseable = 0;

    [[nodiscard]] bool complete() const noexcept { return failed.empty(); }
};

/// Records are handed to `sink` (serialized) as they complete. Under resume,
/// triples that already hold a Completed record in `existing` are skipped.
EvaluationSummary run_evaluation(const EvaluationPlan& plan, gateway::Gateway& gw,
                                 const std::vector<EvaluationRecord>& existing,
                                 const std::function<void(const EvaluationRecord&)>& sink);

struct JudgeResult {
    Recognition recognition = Recognition::NotRecognized;
    std::string evidence;
};

[[nodiscard]] std::string build_judge_prompt(const std::string& justification);

/// Leading "<YES>" or "<NO>"; anything else throws JudgeParseError.
[[nodiscard]] JudgeResult parse_judge_reply(const std::string& reply);

/// Throws DomainError for an empty justification, JudgeParseError on a
/// protocol violation, TransportError when the judge is unreachable.
[[nodiscard]] JudgeResult judge_recognition(const EvaluationRecord& record, const gateway::ProviderConfig& judge,
                                            gateway::Gateway& gw, const gateway::RetryPolicy& retry);

struct Judgment {
    std::string record_id;
    Recognition recognition = Recognition::NotRecognized;
    std::string evidence;
    std::string judge_model_id;
};

struct JudgeSummary {
    std::vector<Judgment> judgments;
    std::size_t eligible = 0;
    std::size_t skipped = 0;
    std::size_t parse_failures = 0;
    std::size_t transport_failures = 0;

    [[nodiscard]] double failure_rate() const noexcept {
        const std::size_t attempted = eligible - skipped;
        return attempted == 0 ? 0.0
                              : static_cast<double>(parse_failures + transport_failures) /
                                    static_cast<double>(attempted);
    }
};

/// Judges completed records with a nonempty justification. Records whose id
/// is in `already_judged` are skipped.
JudgeSummary run_judging(const std::vector<EvaluationRecord>& records, const gateway::ProviderConfig& judge,
                         gateway::Gateway& gw, const gateway::RetryPolicy& retry, std::size_t max_in_flight,
                         const std::vector<std::string>& already_judged,
                         const std::function<void(const Judgment&)>& sink);

[[nodiscard]] nlohmann::json to_json(const EvaluationRecord& r);
[[nodiscard]] EvaluationRecord record_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const Judgment& j);
[[nodiscard]] Judgment judgment_from_json(const nlohmann::json& j);

/// Latest record per triple (a Completed record beats any Failed one), with
/// judgments merged by record_id. Output sorted by triple.
[[nodiscard]] std::vector<EvaluationRecord> effective_records(const std::vector<EvaluationRecord>& all,
                                                              const std::vector<Judgment>& judgments = {});

}  // namespace framebench::eval
