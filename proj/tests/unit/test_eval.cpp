#include <doctest.h>

#include <map>

#include "../common/fixtures.hpp"
#include "framebench/error.hpp"
#include "framebench/eval.hpp"
#include "framebench/prompt_format.hpp"

using namespace framebench;
using namespace framebench::eval;
namespace pf = framebench::prompt_format;

namespace {

const ContextCell kCell{Topic::Politics, WorldType::RealWorld, ActorType::Neutral};

std::vector<vignette::Vignette> vignettes(int n) {
    std::vector<vignette::Vignette> out;
    for (int i = 0; i < n; ++i) out.push_back(fixture::make_vignette(kCell, i));
    return out;
}

gateway::ProviderConfig scripted(const std::string& id, std::vector<std::string> script) {
    gateway::MockBehavior b;
    b.mode = gateway::MockMode::ScriptedSequence;
    b.script = std::move(script);
    return fixture::mock(id, b);
}

}  // namespace

TEST_CASE("label map swaps with the presentation order") {
    CHECK(label_map(PresentationOrder::CooperateIsA).label_a.label == "Cooperate");
    CHECK(label_map(PresentationOrder::CooperateIsB).label_a.label == "Defect");
    CHECK(decision_for_label(PresentationOrder::CooperateIsA, 'A') == Decision::Cooperate);
    CHECK(decision_for_label(PresentationOrder::CooperateIsA, 'B') == Decision::Defect);
    CHECK(decision_for_label(PresentationOrder::CooperateIsB, 'A') == Decision::Defect);
    CHECK(decision_for_label(PresentationOrder::CooperateIsB, 'B') == Decision::Cooperate);
    CHECK_THROWS_AS((void)decision_for_label(PresentationOrder::CooperateIsA, 'C'), DomainError);
}

TEST_CASE("decision prompt: story, both options, single-shot instruction, no system framing") {
    const auto v = fixture::make_vignette(kCell, 0);
    const auto a = assemble_decision_prompt(v, PresentationOrder::CooperateIsA);
    const auto b = assemble_decision_prompt(v, PresentationOrder::CooperateIsB);
    CHECK(a.rfind(v.text, 0) == 0);
    CHECK(a.find("Option A: " + v.option_a + " (Decision A in the story)") != std::string::npos);
    CHECK(b.find("Option A: " + v.option_b + " (Decision B in the story)") != std::string::npos);
    CHECK(b.find("Option B: " + v.option_a + " (Decision A in the story)") != std::string::npos);
    CHECK(a.find(pf::kSingleShotInstruction) != std::string::npos);
    CHECK(a.find(pf::kAnswerDirective) != std::string::npos);

    auto flipped = v;
    flipped.cooperative_label = 'B';
    const auto c = assemble_decision_prompt(flipped, PresentationOrder::CooperateIsA);
    CHECK(c.find("Option A: " + v.option_b + " (Decision B in the story)") != std::string::npos);
}

TEST_CASE("parse cascade") {
    using O = PresentationOrder;
    auto p = parse_decision("I'd rather trust them.\nDecision: A", O::CooperateIsA);
    CHECK(p.decision == Decision::Cooperate);
    CHECK(p.chosen_label == 'A');
    CHECK(p.justification == "I'd rather trust them.");

    p = parse_decision("Decision: A at first, but on reflection\nDecision: **B**", O::CooperateIsA);
    CHECK(p.chosen_label == 'B');
    CHECK(p.decision == Decision::Defect);

    p = parse_decision("decision: option b", O::CooperateIsB);
    CHECK(p.decision == Decision::Cooperate);

    p = parse_decision("Long reasoning here.\n\n**A**", O::CooperateIsB);
    CHECK(p.chosen_label == 'A');
    CHECK(p.decision == Decision::Defect);
    CHECK(p.justification == "Long reasoning here.");

    p = parse_decision("After thinking, I choose Option B because it is safer.", O::CooperateIsA);
    CHECK(p.chosen_label == 'B');

    p = parse_decision("I could choose Option A or I could pick Option B.", O::CooperateIsA);
    CHECK(p.decision == Decision::Unparseable);
    CHECK_FALSE(p.chosen_label.has_value());

    p = parse_decision("", O::CooperateIsA);
    CHECK(p.decision == Decision::Unparseable);
}

TEST_CASE("unparseable answer triggers exactly one clarification re-ask") {
    gateway::Gateway gw(0);
    const auto v = fixture::make_vignette(kCell, 0);
    auto m = scripted("s", {"I am torn.", "Fine.\nDecision: B"});
    const auto r = evaluate_presentation(v, PresentationOrder::CooperateIsA, m, gw, fixture::no_jitter());
    CHECK(r.status == RecordStatus::Completed);
    CHECK(r.first_response == "I am torn.");
    CHECK(r.decision == Decision::Defect);
    CHECK(r.attempts == 2);
    CHECK_FALSE(validate(r).has_value());

    auto m2 = scripted("s2", {"Hmm.", "Still torn."});
    const auto r2 = evaluate_presentation(v, PresentationOrder::CooperateIsA, m2, gw, fixture::no_jitter());
    CHECK(r2.status == RecordStatus::Completed);
    CHECK(r2.decision == Decision::Unparseable);
    CHECK_FALSE(r2.parseable());
}

TEST_CASE("each order is a fresh single-turn prompt; transport failures become Failed records") {
    gateway::Gateway gw(0);
    const auto v = fixture::make_vignette(kCell, 0);
    const auto recs = evaluate_vignette(v, fixture::letter_mock("letters", 'A'), gw, fixture::no_jitter());
    CHECK(recs[0].order == PresentationOrder::CooperateIsA);
    CHECK(recs[0].decision == Decision::Cooperate);
    CHECK(recs[1].decision == Decision::Defect);
    CHECK(recs[0].record_id == v.vignette_id + "|letters|cooperate_is_A|0");

    auto broken = fixture::policy_mock("down");
    broken.mock->fail_when_contains = {"Options:"};
    auto retry = fixture::no_jitter();
    retry.max_retries = 2;
    const auto failed = evaluate_presentation(v, PresentationOrder::CooperateIsA, broken, gw, retry);
    CHECK(failed.status == RecordStatus::Failed);
    CHECK(failed.attempts == 3);
    CHECK_FALSE(failed.error.empty());
    CHECK_FALSE(validate(failed).has_value());
}

TEST_CASE("record validation catches label/decision inconsistency") {
    EvaluationRecord r;
    r.record_id = "x";
    r.vignette_id = "v";
    r.model_id = "m";
    r.order = PresentationOrder::CooperateIsB;
    r.decision = Decision::Cooperate;
    r.chosen_label = 'A';
    CHECK(validate(r).has_value());
    r.chosen_label = 'B';
    CHECK_FALSE(validate(r).has_value());
}

TEST_CASE("run_evaluation resumes by skipping completed triples") {
    const auto vs = vignettes(5);
    EvaluationPlan plan;
    plan.vignettes = vs;
    plan.models = {fixture::policy_mock("m1", 1), fixture::policy_mock("m2", 2)};
    plan.retry = fixture::no_jitter();
    plan.max_in_flight = 3;

    gateway::Gateway gw(0);
    std::vector<EvaluationRecord> first;
    auto s = run_evaluation(plan, gw, {}, [&](const EvaluationRecord& r) { first.push_back(r); });
    CHECK(s.new_records == 20);
    CHECK(s.complete());
    CHECK(first.size() == 20);

    gateway::Gateway gw2(0);
    std::vector<EvaluationRecord> second;
    s = run_evaluation(plan, gw2, first, [&](const EvaluationRecord& r) { second.push_back(r); });
    CHECK(s.new_records == 0);
    CHECK(s.skipped == 20);
    CHECK(gw2.attempts_sent() == 0);

    // Drop three records: exactly those are redone, with a new generation.
    std::vector<EvaluationRecord> partial(first.begin() + 3, first.end());
    partial.push_back(first[0]);
    partial.back().status = RecordStatus::Failed;
    partial.back().decision = Decision::Unparseable;
    partial.back().chosen_label.reset();
    std::vector<EvaluationRecord> redo;
    gateway::Gateway gw3(0);
    s = run_evaluation(plan, gw3, partial, [&](const EvaluationRecord& r) { redo.push_back(r); });
    CHECK(s.new_records == 3);
    for (const auto& r : redo) {
        if (r.triple_key() == first[0].triple_key()) CHECK(r.record_id.back() == '1');
    }
    plan.resume = false;
    gateway::Gateway gw4(0);
    s = run_evaluation(plan, gw4, first, [](const EvaluationRecord&) {});
    CHECK(s.new_records == 20);
}

TEST_CASE("failed triples are listed in sorted order") {
    auto vs = vignettes(3);
    EvaluationPlan plan;
    plan.vignettes = vs;
    auto m = fixture::policy_mock("m");
    m.mock->fail_when_contains = {"Options:"};
    plan.models = {m};
    plan.retry = fixture::no_jitter();
    plan.retry.max_retries = 0;
    gateway::Gateway gw(0);
    const auto s = run_evaluation(plan, gw, {}, [](const EvaluationRecord&) {});
    REQUIRE(s.failed.size() == 6);
    CHECK_FALSE(s.complete());
    CHECK(s.failed[0].vignette_id == vs[0].vignette_id);
    CHECK(s.failed[0].order == PresentationOrder::CooperateIsA);
    CHECK(s.failed[5].vignette_id == vs[2].vignette_id);
}

TEST_CASE("judge prompt and reply protocol") {
    const auto p = build_judge_prompt("It is a prisoner's dilemma.");
    CHECK(p.find(pf::kJudgeQuestion) != std::string::npos);
    CHECK(p.find("Here is the text: It is a prisoner's dilemma.") != std::string::npos);
    CHECK(p.find("{text}") == std::string::npos);

    auto r = parse_judge_reply("<YES> It is a prisoner's dilemma.");
    CHECK(r.recognition == Recognition::Recognized);
    CHECK(r.evidence == "It is a prisoner's dilemma.");
    CHECK(parse_judge_reply("  <NO>").recognition == Recognition::NotRecognized);
    CHECK_THROWS_AS((void)parse_judge_reply("Yes, it does."), JudgeParseError);
}

TEST_CASE("judging sees only the justification and reports failures") {
    EvaluationRecord rec;
    rec.record_id = "r1";
    rec.vignette_id = "v";
    rec.model_id = "m";
    rec.decision = Decision::Defect;
    rec.chosen_label = 'B';
    rec.justification = "Classic game theory says defect.";
    rec.raw_response = rec.justification + "\nDecision: B";

    auto r2 = rec;
    r2.record_id = "r2";
    r2.justification = "I trust my partner.";
    auto r3 = rec;
    r3.record_id = "r3";
    r3.justification = "";
    auto r4 = rec;
    r4.record_id = "r4";
    r4.justification = "odd";

    auto judge = fixture::policy_mock("judge");
    judge.mock->rules = {{"Here is the text: odd", "maybe"}};
    gateway::Gateway gw(0);
    std::vector<Judgment> sunk;
    const auto s = run_judging({rec, r2, r3, r4}, judge, gw, fixture::no_jitter(), 2, {"r2"},
                               [&](const Judgment& j) { sunk.push_back(j); });
    CHECK(s.eligible == 3);
    CHECK(s.skipped == 1);
    CHECK(s.parse_failures == 1);
    CHECK(s.failure_rate() == doctest::Approx(0.5));
    REQUIRE(s.judgments.size() == 1);
    CHECK(s.judgments[0].record_id == "r1");
    CHECK(s.judgments[0].recognition == Recognition::Recognized);
    CHECK(sunk.size() == 1);
    CHECK_THROWS_AS((void)judge_recognition(r3, judge, gw, fixture::no_jitter()), DomainError);
}

TEST_CASE("effective records: latest per triple, completed beats failed, judgments merged") {
    EvaluationRecord a;
    a.vignette_id = "v1";
    a.model_id = "m";
    a.order = PresentationOrder::CooperateIsA;
    a.record_id = a.triple_key() + "|0";
    a.decision = Decision::Cooperate;
    a.chosen_label = 'A';
    auto failed_later = a;
    failed_later.record_id = a.triple_key() + "|1";
    failed_later.status = RecordStatus::Failed;
    failed_later.decision = Decision::Unparseable;
    failed_later.chosen_label.reset();
    auto b = a;
    b.order = PresentationOrder::CooperateIsB;
    b.record_id = b.triple_key() + "|0";
    b.status = RecordStatus::Failed;
    auto b_redo = b;
    b_redo.record_id = b.triple_key() + "|1";
    b_redo.status = RecordStatus::Completed;
    b_redo.decision = Decision::Defect;
    b_redo.chosen_label = 'A';

    Judgment j{a.record_id, Recognition::Recognized, "ev", "judge"};
    const auto eff = effective_records({b, a, failed_later, b_redo}, {j});
    REQUIRE(eff.size() == 2);
    CHECK(eff[0].record_id == a.record_id);
    CHECK(eff[0].recognition == Recognition::Recognized);
    CHECK(eff[1].record_id == b_redo.record_id);
    CHECK_FALSE(eff[1].recognition.has_value());
}

TEST_CASE("record and judgment JSON round trips") {
    EvaluationRecord r;
    r.record_id = "v|m|cooperate_is_B|0";
    r.vignette_id = "v";
    r.model_id = "m";
    r.order = PresentationOrder::CooperateIsB;
    r.decision = Decision::Cooperate;
    r.chosen_label = 'B';
    r.justification = "j";
    r.recognition = Recognition::NotRecognized;
    r.attempts = 2;
    const auto back = record_from_json(to_json(r));
    CHECK(to_json(back) == to_json(r));
    CHECK(back.chosen_label == 'B');

    Judgment j{"id", Recognition::Recognized, "ev", "judge"};
    const auto jb = judgment_from_json(to_json(j));
    CHECK(jb.record_id == "id");
    CHECK(jb.recognition == Recognition::Recognized);
}
