// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// constants below; the process exits non-zero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "../common/fixtures.hpp"
#include "../common/mock_config.hpp"
#include "../common/oracles.hpp"
#include "../common/planted.hpp"
#include "framebench/analysis.hpp"
#include "framebench/eval.hpp"
#include "framebench/game.hpp"
#include "framebench/gateway.hpp"
#include "framebench/predictor.hpp"
#include "framebench/prompt_format.hpp"
#include "framebench/vignette.hpp"

using namespace framebench;
using Clock = std::chrono::steady_clock;
using O = eval::PresentationOrder;

namespace {

constexpr double kGameSeconds = 5.0;
constexpr int kGameTrials = 1000;
constexpr double kFleissHandTol = 1e-12;
constexpr double kFleissUniformTol = 0.03;
constexpr double kCramerIndependenceMax = 0.02;
constexpr double kCramerHandTol = 1e-9;
constexpr double kPlantedAurocMin = 0.95;
constexpr double kShuffledLow = 0.45;
constexpr double kShuffledHigh = 0.55;
constexpr double kPredictorSeconds = 30.0;
constexpr double kPipelineSeconds = 60.0;

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Collects failed sub-checks; a criterion passes when none failed.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    void note(const std::string& s) { notes_.push_back(s); }
    [[nodiscard]] Outcome outcome() const {
        Outcome o;
        o.pass = failures_.empty();
        std::ostringstream ss;
        const auto& items = o.pass ? notes_ : failures_;
        for (std::size_t i = 0; i < items.size(); ++i) ss << (i ? "; " : "") << items[i];
        o.detail = ss.str();
        return o;
    }

private:
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome game_core() {
    Checks c;
    const auto t0 = Clock::now();
    const auto m = game::canonical_pd();
    const auto a = game::analyze(m);
    c.expect(a.dominant_p1 && a.dominant_p1->label == "Defect", "player 1 dominant strategy is not Defect");
    c.expect(a.dominant_p2 && a.dominant_p2->label == "Defect", "player 2 dominant strategy is not Defect");
    const bool unique_dd = a.pure_nash.size() == 1 && a.pure_nash[0] == game::StrategyProfile{1, 1};
    c.expect(unique_dd, "pure Nash set is not {(Defect, Defect)}");
    if (unique_dd) {
        c.expect(game::payoff(m, a.pure_nash[0], game::Player::One) == game::Rational(1) &&
                     game::payoff(m, a.pure_nash[0], game::Player::Two) == game::Rational(1),
                 "(Defect, Defect) payoffs are not (1, 1)");
    }

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    int mismatches = 0;
    for (int t = 0; t < kGameTrials; ++t) {
        const auto g = oracle::random_game(rng, dim(rng), dim(rng));
        const auto mm = oracle::to_matrix(g);
        for (bool row : {true, false}) {
            const auto d = game::strictly_dominant_strategy(mm, row ? game::Player::One : game::Player::Two);
            const auto o = oracle::dominant(g, row);
            if (d.has_value() != o.has_value() || (d && d->index != *o)) ++mismatches;
        }
        std::vector<std::pair<std::size_t, std::size_t>> ne;
        for (const auto& p : game::pure_nash_equilibria(mm)) ne.emplace_back(p.row, p.col);
        if (ne != oracle::nash(g)) ++mismatches;
    }
    const double secs = seconds_since(t0);
    c.expect(mismatches == 0, fmt::format("{} brute-force mismatches", mismatches));
    c.expect(secs < kGameSeconds, fmt::format("took {:.2f}s (limit {}s)", secs, kGameSeconds));
    c.note(fmt::format("canonical PD ok; {} random games, 0 mismatches, {:.2f}s", kGameTrials, secs));
    return c.outcome();
}

Outcome ci_formula() {
    Checks c;
    for (const auto& [n, want] : std::vector<std::pair<std::size_t, std::string>>{
             {600, "0.040"}, {2000, "0.022"}, {3000, "0.018"}}) {
        const auto got = analysis::format_sig(analysis::wald_half_width(0.5, n));
        c.expect(got == want, fmt::format("n={} gave {} (want {})", n, got, want));
        c.note(fmt::format("n={} -> {}", n, got));
    }
    return c.outcome();
}

Outcome fleiss() {
    Checks c;
    const double unanimous = analysis::fleiss_kappa({{3, 0}, {0, 3}, {3, 0}, {0, 3}, {3, 0}});
    c.expect(unanimous == 1.0, fmt::format("unanimous table gave {}", unanimous));

    std::mt19937_64 rng(2024);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::vector<int>> counts;
    for (int i = 0; i < 10000; ++i) {
        std::vector<int> row(2, 0);
        for (int k = 0; k < 3; ++k) ++row[coin(rng) ? 0 : 1];
        counts.push_back(row);
    }
    const double uniform = analysis::fleiss_kappa(counts);
    c.expect(std::abs(uniform) <= kFleissUniformTol, fmt::format("uniform raters gave {:.4f}", uniform));

    // Ratings per instance, three raters, categories {0, 1}.
    const std::vector<std::vector<int>> ratings{{0, 0, 0}, {1, 1, 1}, {0, 0, 1}, {0, 1, 1}, {0, 0, 0}, {1, 0, 0}};
    std::vector<std::vector<int>> hand_counts;
    for (const auto& r : ratings) {
        std::vector<int> row(2, 0);
        for (int x : r) ++row[x];
        hand_counts.push_back(row);
    }
    const double hand = analysis::fleiss_kappa(hand_counts);
    const double expected = oracle::fleiss(ratings, 2);
    c.expect(std::abs(hand - expected) <= kFleissHandTol && std::abs(hand - 23.0 / 77.0) <= kFleissHandTol,
             fmt::format("hand table gave {:.15f}, oracle {:.15f}", hand, expected));
    c.note(fmt::format("unanimous 1.0; uniform {:.4f}; hand {:.12f}", uniform, hand));
    return c.outcome();
}

std::vector<vignette::Vignette> mock_vignettes(const std::vector<ContextCell>& cells, int n, gateway::Gateway& gw) {
    vignette::GenerationPlan plan;
    plan.cells = cells;
    plan.per_cell_count = n;
    plan.batch_size = 5;
    plan.generator = fixture::policy_mock("mock-storyteller", 7);
    plan.generator.max_tokens = 16000;
    plan.retry = fixture::no_jitter();
    plan.seed = 3;
    std::vector<vignette::Vignette> out;
    const auto rep = vignette::generate_grid(plan, gw, {}, [&](const std::vector<vignette::Vignette>& b) {
        out.insert(out.end(), b.begin(), b.end());
    });
    if (!rep.complete()) throw std::runtime_error("mock generation incomplete");
    return out;
}

std::vector<analysis::Row> evaluate_rows(const std::vector<vignette::Vignette>& vs,
                                         const std::vector<gateway::ProviderConfig>& models, gateway::Gateway& gw) {
    eval::EvaluationPlan plan;
    plan.vignettes = vs;
    plan.models = models;
    plan.retry = fixture::no_jitter();
    std::vector<eval::EvaluationRecord> records;
    const auto summary = eval::run_evaluation(plan, gw, {}, [&](const eval::EvaluationRecord& r) { records.push_back(r); });
    if (!summary.complete()) throw std::runtime_error("mock evaluation incomplete");
    return analysis::join_rows(records, vs);
}

Outcome order_bias() {
    Checks c;
    gateway::Gateway gw(0);
    const std::vector<ContextCell> cells{{Topic::Business, WorldType::RealWorld, ActorType::Allies},
                                         {Topic::Business, WorldType::RealWorld, ActorType::Enemies},
                                         {Topic::SportingEvents, WorldType::ImaginaryWorld, ActorType::Neutral}};
    const auto vs = mock_vignettes(cells, 10, gw);
    const auto rows = evaluate_rows(vs, {fixture::letter_mock("letter", 'A'), fixture::content_mock("content", {"allies"})}, gw);

    const auto letter = analysis::order_bias_delta(rows, "letter");
    c.expect(letter.flip_rate == 1.0, fmt::format("letter flip rate {}", letter.flip_rate));
    c.expect(!letter.deltas.empty(), "letter model has no deltas");
    for (const auto& d : letter.deltas) c.expect(d.delta == -1.0, fmt::format("letter delta {} in {}", d.delta, d.group.label()));

    const auto content = analysis::order_bias_delta(rows, "content");
    c.expect(content.flip_rate == 0.0, fmt::format("content flip rate {}", content.flip_rate));
    c.expect(!content.deltas.empty(), "content model has no deltas");
    for (const auto& d : content.deltas) c.expect(d.delta == 0.0, fmt::format("content delta {} in {}", d.delta, d.group.label()));
    c.note(fmt::format("{} vignettes over {} cells; letter flip 1.0, {} deltas -1.0; content flip 0.0, {} deltas 0.0",
                       vs.size(), cells.size(), letter.deltas.size(), content.deltas.size()));
    return c.outcome();
}

Outcome agreement() {
    Checks c;
    std::mt19937_64 rng(77);
    int violations = 0, evaluated = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double skew = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
        const int n = 1 + static_cast<int>(rng() % 12);
        std::vector<analysis::Row> rows;
        for (int v = 0; v < n; ++v) {
            for (const std::string m : {"m1", "m2", "m3"}) {
                for (O o : eval::kBothOrders) {
                    if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.1) continue;
                    rows.push_back(fixture::row("v" + std::to_string(v), m, o, std::bernoulli_distribution(skew)(rng)));
                }
            }
        }
        const auto rep = analysis::agreement_percentage(rows, {"m1", "m2", "m3"});
        if (rep.empty()) continue;
        ++evaluated;
        double lowest = 1.0;
        for (const auto& [pair, f] : rep[0].pairwise) lowest = std::min(lowest, f);
        if (rep[0].unanimous > lowest + 1e-12) ++violations;
    }
    c.expect(violations == 0, fmt::format("{} of {} record sets had P above min pairwise", violations, evaluated));

    gateway::Gateway gw(0);
    const auto vs = mock_vignettes({{Topic::Business, WorldType::RealWorld, ActorType::Allies},
                                    {Topic::Business, WorldType::RealWorld, ActorType::Enemies}},
                                   10, gw);
    std::vector<gateway::ProviderConfig> same;
    for (const std::string id : {"twin-1", "twin-2", "twin-3"}) {
        auto p = fixture::content_mock(id, {"allies"});
        p.mock->order_weight = 1.5;
        same.push_back(p);
    }
    const auto rows = evaluate_rows(vs, same, gw);
    const auto rep = analysis::agreement_percentage(rows, {"twin-1", "twin-2", "twin-3"});
    c.expect(rep.size() == 1 && rep[0].unanimous == 1.0,
             fmt::format("identical mocks gave P = {}", rep.empty() ? -1.0 : rep[0].unanimous));
    c.note(fmt::format("{} randomized sets, 0 violations; identical mocks P = 1.0 over {} instances", evaluated,
                       rep.empty() ? 0 : rep[0].n_instances));
    return c.outcome();
}

Outcome cramers() {
    Checks c;
    const std::vector<double> row_p{0.3, 0.7};
    const std::vector<double> col_p{0.2, 0.5, 0.3};
    std::vector<std::vector<double>> indep(2, std::vector<double>(3));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) indep[i][j] = std::round(10000 * row_p[i] * col_p[j]);
    const double vi = analysis::cramers_v(indep).cramers_v;
    c.expect(vi <= kCramerIndependenceMax, fmt::format("independence table gave {:.4f}", vi));

    const double vd = analysis::cramers_v({{40, 0, 0}, {0, 35, 25}}).cramers_v;
    c.expect(vd == 1.0, fmt::format("deterministic table gave {:.17g}", vd));

    const std::vector<std::vector<double>> hand{{10, 20, 30}, {30, 20, 10}};
    const double vh = analysis::cramers_v(hand).cramers_v;
    const double want = std::sqrt(20.0 / 120.0);  // chi^2 = 20 by hand, n = 120, min(r, c) - 1 = 1
    c.expect(std::abs(vh - want) <= kCramerHandTol && std::abs(vh - oracle::cramers_v(hand)) <= kCramerHandTol,
             fmt::format("hand 2x3 gave {:.12f}, want {:.12f}", vh, want));
    c.note(fmt::format("independence {:.2e}; deterministic 1.0; hand {:.10f}", vi, vh));
    return c.outcome();
}

Outcome predictor_checks() {
    using namespace framebench::predictor;
    Checks c;
    const auto t0 = Clock::now();

    std::vector<int> labels;
    for (int i = 0; i < 1000; ++i) labels.push_back(i % 2);
    const auto chance = score(std::vector<double>(labels.size(), 0.5), labels);
    c.expect(chance.brier == 0.25, fmt::format("constant predictor Brier {:.17g}", chance.brier));
    c.expect(chance.auroc && *chance.auroc == 0.5, "constant predictor AUROC is not 0.5");

    const auto truth = planted::strong_truth();
    const auto data = categorical_dataset(planted::rows(truth, 5000, 17));
    c.expect(data.schema.dim() == 16, fmt::format("schema has {} features", data.schema.dim()));
    TrainConfig cfg;
    cfg.seed = 31;
    auto fit = [&](const Dataset& d) {
        const auto [tr, te] = split_dataset(d.examples, cfg.split_ratio, cfg.seed);
        return evaluate(train(d.schema, tr, cfg), te);
    };
    const auto planted_m = fit(data);
    const double planted_auc = planted_m.auroc.value_or(0.0);
    c.expect(planted_auc >= kPlantedAurocMin, fmt::format("planted AUROC {:.4f}", planted_auc));

    auto shuffled = data;
    shuffle_labels(shuffled.examples, 1234);
    const double shuffled_auc = fit(shuffled).auroc.value_or(-1.0);
    c.expect(shuffled_auc >= kShuffledLow && shuffled_auc <= kShuffledHigh,
             fmt::format("shuffled AUROC {:.4f}", shuffled_auc));

    const auto again = fit(data);
    const bool identical = again.accuracy == planted_m.accuracy && again.f1 == planted_m.f1 &&
                           again.brier == planted_m.brier && again.auroc == planted_m.auroc;
    c.expect(identical, "re-fit with the same seed changed the metrics");

    const double secs = seconds_since(t0);
    c.expect(secs < kPredictorSeconds, fmt::format("took {:.2f}s (limit {}s)", secs, kPredictorSeconds));
    c.note(fmt::format("chance Brier 0.25 AUROC 0.5; planted AUROC {:.4f}; shuffled {:.4f}; bit-identical; {:.2f}s",
                       planted_auc, shuffled_auc, secs));
    return c.outcome();
}

/// Fails the first `failures` attempts of every request.
class FlakyTransport final : public gateway::Transport {
public:
    FlakyTransport(int failures, int status) : failures_(failures), status_(status) {}
    std::string send(const gateway::ProviderConfig& c, std::string_view, int attempt) override {
        ++calls;
        if (attempt <= failures_) throw gateway::AttemptFailure("scripted failure", status_);
        return c.model_id;
    }
    std::atomic<int> calls{0};

private:
    int failures_;
    int status_;
};

Outcome retry_policy() {
    using namespace framebench::gateway;
    Checks c;
    auto model = fixture::policy_mock("m");
    {
        Gateway gw(0);
        gw.set_transport(ProviderKind::Mock, std::make_shared<FlakyTransport>(3, 503));
        auto clock = std::make_shared<RecordingSleeper>();
        gw.set_sleeper(ProviderKind::Mock, clock);
        const auto ex = gw.complete("x", model, fixture::no_jitter());
        c.expect(clock->delays() == std::vector<double>{3.0, 9.0, 27.0},
                 fmt::format("recorded delays {}", fmt::join(clock->delays(), ",")));
        c.expect(ex.attempt_count == 4, fmt::format("attempt count {}", ex.attempt_count));
    }
    {
        Gateway gw(0);
        auto flaky = std::make_shared<FlakyTransport>(1000, 429);
        gw.set_transport(ProviderKind::Mock, flaky);
        auto clock = std::make_shared<RecordingSleeper>();
        gw.set_sleeper(ProviderKind::Mock, clock);
        bool threw = false;
        try {
            (void)gw.complete("x", model, fixture::no_jitter());
        } catch (const TransportError& e) {
            threw = true;
            c.expect(e.attempts() == 11, fmt::format("error reports {} attempts", e.attempts()));
        }
        c.expect(threw, "persistent failure did not raise TransportError");
        c.expect(flaky->calls == 11, fmt::format("{} attempts sent", flaky->calls.load()));
        c.expect(clock->delays().size() == 10, fmt::format("{} delays recorded", clock->delays().size()));
    }
    c.note("delays 3, 9, 27; 10 retries (11 attempts) then TransportError");
    return c.outcome();
}

std::vector<std::string> core_lines(const std::string& prompt) {
    std::vector<std::string> out;
    const auto pos = prompt.find(prompt_format::kCoreSetHeader);
    if (pos == std::string::npos) return out;
    std::istringstream in(prompt.substr(pos));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line) && line.rfind("- ", 0) == 0) out.push_back(line.substr(2));
    return out;
}

Outcome generation_protocol() {
    Checks c;
    vignette::GenerationPlan plan;
    plan.cells = {{Topic::Business, WorldType::RealWorld, ActorType::Allies},
                  {Topic::SportingEvents, WorldType::ImaginaryWorld, ActorType::Enemies}};
    plan.per_cell_count = 100;
    plan.batch_size = 10;
    plan.generator = fixture::policy_mock("mock-storyteller", 7);
    plan.generator.max_tokens = 16000;
    plan.retry = fixture::no_jitter();
    plan.seed = 11;
    gateway::Gateway gw(0);
    std::vector<vignette::Vignette> stored;
    std::vector<vignette::BatchEvent> events;
    const auto rep = vignette::generate_grid(
        plan, gw, {}, [&](const std::vector<vignette::Vignette>& b) { stored.insert(stored.end(), b.begin(), b.end()); },
        [&](const vignette::BatchEvent& e) { events.push_back(e); });
    c.expect(rep.complete(), "generation incomplete");

    std::map<std::string, int> per_cell;
    std::map<std::string, std::set<int>> batches;
    for (const auto& v : stored) {
        ++per_cell[cell_key(v.cell)];
        batches[cell_key(v.cell)].insert(v.batch_index);
        if (auto why = vignette::validate(v)) c.expect(false, v.vignette_id + " invalid: " + *why);
    }
    for (const auto& cell : plan.cells) {
        c.expect(per_cell[cell_key(cell)] == 100, fmt::format("{} holds {}", cell_key(cell), per_cell[cell_key(cell)]));
        c.expect(batches[cell_key(cell)].size() >= 10, fmt::format("{} used {} batches", cell_key(cell), batches[cell_key(cell)].size()));
    }
    int bad_prompts = 0;
    for (const auto& e : events) {
        std::multiset<std::string> expected;
        for (const auto& v : stored) {
            if (v.cell == e.cell && v.batch_index < e.batch_index) expected.insert(v.summary);
        }
        const auto lines = core_lines(e.prompt);
        if (std::multiset<std::string>(lines.begin(), lines.end()) != expected) ++bad_prompts;
    }
    c.expect(bad_prompts == 0, fmt::format("{} of {} prompts had the wrong core set", bad_prompts, events.size()));
    c.note(fmt::format("{} vignettes, {} batch prompts, core sets exact, all valid", stored.size(), events.size()));
    return c.outcome();
}

int run_cli(const std::filesystem::path& config, const std::string& sub) {
    const std::string cmd = fmt::format("\"{}\" {} --config \"{}\" --quiet > /dev/null", FRAMEBENCH_CLI_PATH, sub, config.string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end() {
    Checks c;
    fixture::TempDir dir("acceptance_e2e");
    const auto config = dir.path() / "config.json";
    std::ofstream(config) << mock_config::pipeline("run", 6, 3).dump(2);

    const auto t0 = Clock::now();
    for (const std::string sub : {"generate", "evaluate", "judge", "analyze", "predict"}) {
        const int code = run_cli(config, sub);
        c.expect(code == 0, fmt::format("{} exited {}", sub, code));
    }
    const double secs = seconds_since(t0);
    c.expect(secs < kPipelineSeconds, fmt::format("took {:.2f}s (limit {}s)", secs, kPipelineSeconds));

    const auto report = dir.path() / "run" / "report" / "report.json";
    const auto first = slurp(report);
    c.expect(!first.empty(), "analyze wrote no report");
    const int code = run_cli(config, "analyze");
    c.expect(code == 0, fmt::format("second analyze exited {}", code));
    c.expect(slurp(report) == first, "second analyze output differs");
    c.note(fmt::format("5 stages exit 0 in {:.2f}s; second analyze byte-identical ({} bytes)", secs, first.size()));
    return c.outcome();
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"game core", game_core},
        {"CI formula", ci_formula},
        {"Fleiss' kappa", fleiss},
        {"order-bias bounds", order_bias},
        {"agreement", agreement},
        {"Cramer's V", cramers},
        {"predictor", predictor_checks},
        {"retry policy", retry_policy},
        {"generation protocol", generation_protocol},
        {"end-to-end", end_to_end},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << fmt::format("{}/{} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
    return failed == 0 ? 0 : 1;
}
