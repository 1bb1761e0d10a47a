#include "framebench/eval.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "framebench/error.hpp"
#include "framebench/parallel.hpp"
#include "framebench/prompt_format.hpp"
#include "framebench/timefmt.hpp"

namespace framebench::eval {

namespace pf = prompt_format;
using nlohmann::json;

std::string_view to_string(PresentationOrder o) {
    return o == PresentationOrder::CooperateIsA ? "cooperate_is_A" : "cooperate_is_B";
}

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::Cooperate: return "Cooperate";
        case Decision::Defect: return "Defect";
        case Decision::Unparseable: return "Unparseable";
    }
    return "Unparseable";
}

std::string_view to_string(Recognition r) {
    return r == Recognition::Recognized ? "recognized" : "not_recognized";
}

std::string_view to_string(RecordStatus s) { return s == RecordStatus::Completed ? "completed" : "failed"; }

PresentationOrder order_from_string(std::string_view s) {
    if (s == "cooperate_is_A") return PresentationOrder::CooperateIsA;
    if (s == "cooperate_is_B") return PresentationOrder::CooperateIsB;
    throw SchemaError("unknown presentation order '" + std::string(s) + "'");
}

Decision decision_from_string(std::string_view s) {
    if (s == "Cooperate") return Decision::Cooperate;
    if (s == "Defect") return Decision::Defect;
    if (s == "Unparseable") return Decision::Unparseable;
    throw SchemaError("unknown decision '" + std::string(s) + "'");
}

Recognition recognition_from_string(std::string_view s) {
    if (s == "recognized") return Recognition::Recognized;
    if (s == "not_recognized") return Recognition::NotRecognized;
    throw SchemaError("unknown recognition flag '" + std::string(s) + "'");
}

const game::Strategy& DecisionLabelMap::strategy(char letter) const {
    if (letter == 'A') return label_a;
    if (letter == 'B') return label_b;
    throw DomainError(std::string("decision label must be A or B, got '") + letter + "'");
}

DecisionLabelMap label_map(PresentationOrder order) {
    static const auto pd = game::canonical_pd();
    const auto& s = pd.strategies(game::Player::One);
    return order == PresentationOrder::CooperateIsA ? DecisionLabelMap{s[0], s[1]} : DecisionLabelMap{s[1], s[0]};
}

Decision decision_for_label(PresentationOrder order, char label) {
    return label_map(order).strategy(label).index == 0 ? Decision::Cooperate : Decision::Defect;
}

// --- prompt ---------------------------------------------------------------

std::string assemble_decision_prompt(const vignette::Vignette& v, PresentationOrder order) {
    const char coop = v.cooperative_label;
    const char defect = coop == 'A' ? 'B' : 'A';
    const std::string& coop_text = coop == 'A' ? v.option_a : v.option_b;
    const std::string& defect_text = coop == 'A' ? v.option_b : v.option_a;

    auto option = [](const std::string& text, char narrative) {
        return text + " (Decision " + std::string(1, narrative) + " in the story)";
    };
    const bool coop_first = order == PresentationOrder::CooperateIsA;

    std::ostringstream p;
    p << v.text << "\n\n";
    p << pf::kOptionsHeader << "\n";
    p << pf::kOptionAField << (coop_first ? option(coop_text, coop) : option(defect_text, defect)) << "\n";
    p << pf::kOptionBField << (coop_first ? option(defect_text, defect) : option(coop_text, coop)) << "\n\n";
    p << pf::kSingleShotInstruction << "\n";
    p << pf::kAnswerDirective;
    return p.str();
}

// --- parsing --------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Removes the line spanning [pos, pos+len) from `raw`.
std::string without_line_at(const std::string& raw, std::size_t pos) {
    const auto start = raw.rfind('\n', pos);
    const auto end = raw.find('\n', pos);
    const std::size_t b = start == std::string::npos ? 0 : start;
    const std::size_t e = end == std::string::npos ? raw.size() : end;
    return trim(raw.substr(0, b) + raw.substr(e));
}

}  // namespace

ParsedDecision parse_decision(const std::string& raw, PresentationOrder order) {
    ParsedDecision out;
    out.justification = trim(raw);

    auto finish = [&](char label, std::string justification) {
        out.chosen_label = label;
        out.decision = decision_for_label(order, label);
        out.justification = std::move(justification);
        return out;
    };

    // (1) last explicit "Decision: X"
    static const std::regex explicit_line(R"(Decision\s*:\s*[*_"'`]*\s*(?:Option\s+)?([AB])\b)", std::regex::icase);
    std::optional<std::smatch> last;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), explicit_line); it != std::sregex_iterator(); ++it) {
        last = *it;
    }
    if (last) {
        const char label = static_cast<char>(std::toupper(static_cast<unsigned char>((*last)[1].str()[0])));
        return finish(label, without_line_at(raw, static_cast<std::size_t>(last->position())));
    }

    // (2) final standalone letter
    const std::string body = trim(raw);
    const auto nl = body.rfind('\n');
    std::string tail = trim(nl == std::string::npos ? body : body.substr(nl + 1));
    tail.erase(std::remove_if(tail.begin(), tail.end(),
                              [](char c) { return c == '*' || c == '_' || c == '.' || c == '"' || c == '`'; }),
               tail.end());
    if (tail == "A" || tail == "B") {
        return finish(tail[0], trim(nl == std::string::npos ? std::string() : body.substr(0, nl)));
    }

    // (3) unambiguous phrase
    static const std::regex phrase(
        R"(\b(?:choose|chose|select|selected|pick|picked|go with|opt for|opted for|make|take|decision is)\s+(?:option\s+|decision\s+)([AB])\b)",
        std::regex::icase);
    std::set<char> labels;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), phrase); it != std::sregex_iterator(); ++it) {
        labels.insert(static_cast<char>(std::toupper(static_cast<unsigned char>((*it)[1].str()[0]))));
    }
    if (labels.size() == 1) {
        return finish(*labels.begin(), trim(raw));
    }
    return out;
}

// --- records --------------------------------------------------------------

std::string triple_key(const std::string& vignette_id, const std::string& model_id, PresentationOrder order) {
    return vignette_id + "|" + model_id + "|" + std::string(to_string(order));
}

std::string EvaluationRecord::triple_key() const { return eval::triple_key(vignette_id, model_id, order); }

std::optional<std::string> validate(const EvaluationRecord& r) {
    if (r.record_id.empty() || r.vignette_id.empty() || r.model_id.empty()) {
        return "record is missing an identifier";
    }
    if (r.status == RecordStatus::Failed) {
        if (r.chosen_label) return "failed record carries a chosen label";
        return std::nullopt;
    }
    if (r.decision == Decision::Unparseable) {
        if (r.chosen_label) return "unparseable record carries a chosen label";
        return std::nullopt;
    }
    if (!r.chosen_label) {
        return "decision without a chosen label";
    }
    if (*r.chosen_label != 'A' && *r.chosen_label != 'B') {
        return "chosen label must be A or B";
    }
    if (decision_for_label(r.order, *r.chosen_label) != r.decision) {
        return "decision inconsistent with the presentation order's label map";
    }
    return std::nullopt;
}

EvaluationRecord evaluate_presentation(const vignette::Vignette& v, PresentationOrder order,
                                       const gateway::ProviderConfig& model, gateway::Gateway& gw,
                                       const gateway::RetryPolicy& retry, int generation) {
    EvaluationRecord r;
    r.vignette_id = v.vignette_id;
    r.model_id = model.model_id;
    r.order = order;
    r.record_id = r.triple_key() + "|" + std::to_string(generation);
    const std::string prompt = assemble_decision_prompt(v, order);
    try {
        auto ex = gw.complete(prompt, model, retry);
        r.attempts = ex.attempt_count;
        r.latency_ms = ex.latency_ms;
        r.timestamp = format_utc(ex.timestamp);
        r.raw_response = ex.response_text;
        auto parsed = parse_decision(ex.response_text, order);
        if (parsed.decision == Decision::Unparseable) {
            r.first_response = ex.response_text;
            auto again = gw.complete(prompt + "\n\n" + std::string(pf::kClarificationSuffix), model, retry);
            r.attempts += again.attempt_count;
            r.latency_ms += again.latency_ms;
            r.timestamp = format_utc(again.timestamp);
            r.raw_response = again.response_text;
            parsed = parse_decision(again.response_text, order);
        }
        r.status = RecordStatus::Completed;
        r.decision = parsed.decision;
        r.chosen_label = parsed.chosen_label;
        r.justification = parsed.justification;
    } catch (const TransportError& e) {
        r.status = RecordStatus::Failed;
        r.decision = Decision::Unparseable;
        r.chosen_label.reset();
        r.error = e.what();
        r.attempts = e.attempts();
        r.timestamp = format_utc(std::chrono::system_clock::now());
    }
    return r;
}

std::array<EvaluationRecord, 2> evaluate_vignette(const vignette::Vignette& v, const gateway::ProviderConfig& model,
                                                  gateway::Gateway& gw, const gateway::RetryPolicy& retry,
                                                  int generation) {
    if (auto reason = vignette::validate(v)) {
        throw DomainError("vignette " + v.vignette_id + " is invalid: " + *reason);
    }
    return {evaluate_presentation(v, PresentationOrder::CooperateIsA, model, gw, retry, generation),
            evaluate_presentation(v, PresentationOrder::CooperateIsB, model, gw, retry, generation)};
}

void EvaluationPlan::validate() const {
    if (models.empty()) {
        throw ConfigError("evaluation plan needs at least one model");
    }
    std::set<std::string> ids;
    for (const auto& m : models) {
        m.validate();
        if (!ids.insert(m.model_id).second) {
            throw ConfigError("model " + m.model_id + " listed twice");
        }
    }
    if (max_in_flight == 0) {
        throw ConfigError("max_in_flight must be at least 1");
    }
    retry.validate();
}

EvaluationSummary run_evaluation(const EvaluationPlan& plan, gateway::Gateway& gw,
                                 const std::vector<EvaluationRecord>& existing,
                                 const std::function<void(const EvaluationRecord&)>& sink) {
    plan.validate();

    std::set<std::string> done;
    std::map<std::string, int> generations;
    for (const auto& r : existing) {
        ++generations[r.triple_key()];
        if (r.status == RecordStatus::Completed) {
            done.insert(r.triple_key());
        }
    }

    struct Job {
        const vignette::Vignette* v;
        const gateway::ProviderConfig* model;
        PresentationOrder order;
        int generation;
    };
    EvaluationSummary summary;
    std::vector<Job> jobs;
    for (const auto& v : plan.vignettes) {
        for (const auto& m : plan.models) {
            for (PresentationOrder o : kBothOrders) {
                const std::string key = triple_key(v.vignette_id, m.model_id, o);
                if (plan.resume && done.count(key) != 0) {
                    ++summary.skipped;
                    continue;
                }
                const auto g = generations.find(key);
                jobs.push_back({&v, &m, o, g == generations.end() ? 0 : g->second});
            }
        }
    }

    std::mutex mutex;
    bounded_for_each(jobs.size(), plan.max_in_flight, [&](std::size_t i) {
        const Job& job = jobs[i];
        EvaluationRecord r = evaluate_presentation(*job.v, job.order, *job.model, gw, plan.retry, job.generation);
        std::lock_guard lock(mutex);
        ++summary.new_records;
        if (r.status == RecordStatus::Failed) {
            summary.failed.push_back({r.vignette_id, r.model_id, r.order});
        } else if (r.decision == Decision::Unparseable) {
            ++summary.unparseable;
        }
        if (sink) {
            sink(r);
        }
    });

    std::sort(summary.failed.begin(), summary.failed.end(), [](const Triple& a, const Triple& b) {
        return std::tie(a.vignette_id, a.model_id, a.order) < std::tie(b.vignette_id, b.model_id, b.order);
    });
    return summary;
}

// --- judging --------------------------------------------------------------

std::string build_judge_prompt(const std::string& justification) {
    std::string p(pf::kJudgeTemplate);
    const auto pos = p.find("{text}");
    p.replace(pos, 6, justification);
    return p;
}

JudgeResult parse_judge_reply(const std::string& reply) {
    const std::string body = trim(reply);
    if (body.rfind("<YES>", 0) == 0) {
        return {Recognition::Recognized, trim(body.substr(5))};
    }
    if (body.rfind("<NO>", 0) == 0) {
        return {Recognition::NotRecognized, trim(body.substr(4))};
    }
    throw JudgeParseError("judge reply starts with neither <YES> nor <NO>: '" + body.substr(0, 80) + "'");
}

JudgeResult judge_recognition(const EvaluationRecord& record, const gateway::ProviderConfig& judge,
                              gateway::Gateway& gw, const gateway::RetryPolicy& retry) {
    if (trim(record.justification).empty()) {
        throw DomainError("record " + record.record_id + " has no justification to judge");
    }
    const auto ex = gw.complete(build_judge_prompt(record.justification), judge, retry);
    return parse_judge_reply(ex.response_text);
}

JudgeSummary run_judging(const std::vector<EvaluationRecord>& records, const gateway::ProviderConfig& judge,
                         gateway::Gateway& gw, const gateway::RetryPolicy& retry, std::size_t max_in_flight,
                         const std::vector<std::string>& already_judged,
                         const std::function<void(const Judgment&)>& sink) {
    const std::set<std::string> judged(already_judged.begin(), already_judged.end());
    std::vector<const EvaluationRecord*> todo;
    JudgeSummary summary;
    for (const auto& r : records) {
        if (r.status != RecordStatus::Completed || trim(r.justification).empty()) {
            continue;
        }
        ++summary.eligible;
        if (judged.count(r.record_id) != 0) {
            ++summary.skipped;
            continue;
        }
        todo.push_back(&r);
    }

    std::vector<std::optional<Judgment>> results(todo.size());
    std::mutex mutex;
    bounded_for_each(todo.size(), max_in_flight, [&](std::size_t i) {
        try {
            const auto res = judge_recognition(*todo[i], judge, gw, retry);
            results[i] = Judgment{todo[i]->record_id, res.recognition, res.evidence, judge.model_id};
        } catch (const JudgeParseError&) {
            std::lock_guard lock(mutex);
            ++summary.parse_failures;
        } catch (const TransportError&) {
            std::lock_guard lock(mutex);
            ++summary.transport_failures;
        }
    });
    // Emit in input order so repeated runs write identical files.
    for (auto& j : results) {
        if (j) {
            if (sink) sink(*j);
            summary.judgments.push_back(std::move(*j));
        }
    }
    return summary;
}

// --- serialization --------------------------------------------------------

json to_json(const EvaluationRecord& r) {
    json j{{"record_id", r.record_id},
           {"vignette_id", r.vignette_id},
           {"model_id", r.model_id},
           {"order", to_string(r.order)},
           {"status", to_string(r.status)},
           {"raw_response", r.raw_response},
           {"decision", to_string(r.decision)},
           {"chosen_label", r.chosen_label ? json(std::string(1, *r.chosen_label)) : json(nullptr)},
           {"justification", r.justification},
           {"attempts", r.attempts},
           {"latency_ms", r.latency_ms},
           {"timestamp", r.timestamp}};
    if (!r.first_response.empty()) j["first_response"] = r.first_response;
    if (!r.error.empty()) j["error"] = r.error;
    if (r.recognition) {
        j["recognition"] = to_string(*r.recognition);
        j["recognition_evidence"] = r.recognition_evidence;
    }
    return j;
}

EvaluationRecord record_from_json(const json& j) {
    try {
        EvaluationRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        r.vignette_id = j.at("vignette_id").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        r.order = order_from_string(j.at("order").get<std::string>());
        r.status = j.value("status", std::string("completed")) == "failed" ? RecordStatus::Failed
                                                                          : RecordStatus::Completed;
        r.raw_response = j.value("raw_response", std::string());
        r.first_response = j.value("first_response", std::string());
        r.decision = decision_from_string(j.at("decision").get<std::string>());
        if (j.contains("chosen_label") && j.at("chosen_label").is_string()) {
            const auto s = j.at("chosen_label").get<std::string>();
            if (!s.empty()) r.chosen_label = s[0];
        }
        r.justification = j.value("justification", std::string());
        r.attempts = j.value("attempts", 0);
        r.latency_ms = j.value("latency_ms", std::int64_t{0});
        r.timestamp = j.value("timestamp", std::string());
        r.error = j.value("error", std::string());
        if (j.contains("recognition")) {
            r.recognition = recognition_from_string(j.at("recognition").get<std::string>());
            r.recognition_evidence = j.value("recognition_evidence", std::string());
        }
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed evaluation record: ") + e.what());
    }
}

json to_json(const Judgment& j) {
    return {{"record_id", j.record_id},
            {"recognition", to_string(j.recognition)},
            {"evidence", j.evidence},
            {"judge_model_id", j.judge_model_id}};
}

Judgment judgment_from_json(const json& j) {
    try {
        return {j.at("record_id").get<std::string>(), recognition_from_string(j.at("recognition").get<std::string>()),
                j.value("evidence", std::string()), j.value("judge_model_id", std::string())};
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed judgment: ") + e.what());
    }
}

std::vector<EvaluationRecord> effective_records(const std::vector<EvaluationRecord>& all,
                                                const std::vector<Judgment>& judgments) {
    std::map<std::string, const EvaluationRecord*> best;
    for (const auto& r : all) {
        auto& slot = best[r.triple_key()];
        // Later lines win, except that a failure never displaces a completion.
        if (slot == nullptr || !(r.status == RecordStatus::Failed && slot->status == RecordStatus::Completed)) {
            slot = &r;
        }
    }
    std::map<std::string, const Judgment*> by_record;
    for (const auto& j : judgments) {
        by_record[j.record_id] = &j;
    }
    std::vector<EvaluationRecord> out;
    out.reserve(best.size());
    for (const auto& [key, r] : best) {
        EvaluationRecord copy = *r;
        if (const auto it = by_record.find(copy.record_id); it != by_record.end()) {
            copy.recognition = it->second->recognition;
            copy.recognition_evidence = it->second->evidence;
        }
        out.push_back(std::move(copy));
    }
    return out;
}

}  // namespace framebench::eval
