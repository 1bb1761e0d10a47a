#include <doctest.h>

#include <fstream>
#include <sstream>

#include "../common/fixtures.hpp"
#include "../common/mock_config.hpp"
#include "framebench/config.hpp"
#include "framebench/error.hpp"
#include "framebench/pipeline.hpp"
#include "framebench/store.hpp"

using namespace framebench;
using namespace framebench::pipeline;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CommandResult guarded_generate(const RunConfig& c, const CommandOptions& o = {}) {
    gateway::Gateway gw(c.seed);
    return run_guarded([&] { return cmd_generate(c, o, gw); });
}

CommandResult guarded_evaluate(const RunConfig& c, const CommandOptions& o = {}) {
    gateway::Gateway gw(c.seed);
    return run_guarded([&] { return cmd_evaluate(c, o, gw); });
}

CommandResult guarded_judge(const RunConfig& c, const CommandOptions& o = {}) {
    gateway::Gateway gw(c.seed);
    return run_guarded([&] { return cmd_judge(c, o, gw); });
}

}  // namespace

TEST_CASE("config: seeds are mandatory, 'all' expands, relative paths resolve") {
    fixture::TempDir dir("cfg");
    auto j = mock_config::pipeline("store");
    const auto c = config_from_json(j, dir.path());
    CHECK(c.worlds.size() == 2);
    CHECK(c.actors.size() == 3);
    CHECK(c.cells().size() == 12);
    CHECK(c.storage_dir == dir.path() / "store");
    CHECK(c.report_dir == dir.path() / "store" / "report");

    auto no_seed = j;
    no_seed["plan"].erase("seed");
    CHECK_THROWS_AS((void)config_from_json(no_seed), ConfigError);
    auto no_pred_seed = j;
    no_pred_seed["predictor"].erase("seed");
    CHECK_THROWS_AS((void)config_from_json(no_pred_seed), ConfigError);
    auto bad_topic = j;
    bad_topic["plan"]["topics"] = {"cooking"};
    CHECK_THROWS_AS((void)config_from_json(bad_topic), ConfigError);
    auto bad_model = j;
    bad_model["models"] = {"alpha", "gamma"};
    CHECK_THROWS_AS((void)config_from_json(bad_model), ConfigError);
    auto not_pd = j;
    not_pd["plan"]["payoff"] = {{"strategies_p1", {"S", "H"}},
                                {"strategies_p2", {"S", "H"}},
                                {"payoffs", {{{4, 4}, {0, 3}}, {{3, 0}, {3, 3}}}}};
    CHECK_THROWS_AS((void)config_from_json(not_pd), ConfigError);
}

TEST_CASE("config: model metadata file supplies benchmark scores") {
    fixture::TempDir dir("meta");
    std::ofstream(dir.path() / "models.json") << R"({"mock-alpha": {"score": 71.5}, "mock-beta": 64})";
    auto j = mock_config::pipeline("store");
    j["analysis"]["model_metadata"] = "models.json";
    const auto c = config_from_json(j, dir.path());
    CHECK(c.benchmark_scores.at("mock-alpha") == 71.5);
    CHECK(c.benchmark_scores.at("mock-beta") == 64.0);
}

TEST_CASE("config fingerprint tracks only generation-relevant settings") {
    auto j = mock_config::pipeline("s");
    const auto base = config_from_json(j).fingerprint();
    auto k = j;
    k["models"] = {"alpha"};
    k["judge_failure_threshold"] = 0.2;
    CHECK(config_from_json(k).fingerprint() == base);
    k["plan"]["seed"] = 1;
    CHECK(config_from_json(k).fingerprint() != base);
}

TEST_CASE("exit-code mapping") {
    CHECK(run_guarded([]() -> CommandResult { throw ConfigError("x"); }).exit_code == kUsage);
    CHECK(run_guarded([]() -> CommandResult { throw DegenerateDataError("x"); }).exit_code == kDataError);
    CHECK(run_guarded([]() -> CommandResult { throw MigrationError(2, 1); }).exit_code == kDataError);
    CHECK(run_guarded([]() -> CommandResult { throw FormatError("x"); }).exit_code == kDataError);
    const auto ok = run_guarded([] { return CommandResult{}; });
    CHECK(ok.exit_code == kOk);
}

TEST_CASE("pipeline: generate, evaluate, judge, analyze, predict; reruns are idle and byte-identical") {
    fixture::TempDir dir("pipe");
    const auto cfg = config_from_json(mock_config::pipeline(dir.path() / "run", 4, 2));

    auto r = guarded_generate(cfg);
    REQUIRE_MESSAGE(r.exit_code == kOk, r.message);
    r = guarded_evaluate(cfg);
    REQUIRE_MESSAGE(r.exit_code == kOk, r.message);
    r = guarded_judge(cfg);
    REQUIRE_MESSAGE(r.exit_code == kOk, r.message);
    r = run_guarded([&] { return cmd_analyze(cfg, {}); });
    REQUIRE_MESSAGE(r.exit_code == kOk, r.message);
    r = run_guarded([&] { return cmd_predict(cfg, {}); });
    REQUIRE_MESSAGE(r.exit_code == kOk, r.message);

    const store::Paths paths{cfg.storage_dir};
    CHECK(store::load_vignettes(paths.vignettes()).items.size() == 48);
    CHECK(store::load_records(paths.records()).items.size() == 192);
    const auto report1 = slurp(cfg.report_dir / "report.json");
    const auto records1 = slurp(paths.records());
    const auto manifest1 = slurp(paths.manifest());

    gateway::Gateway gw(cfg.seed);
    CHECK(cmd_generate(cfg, {}, gw).exit_code == kOk);
    CHECK(cmd_evaluate(cfg, {}, gw).exit_code == kOk);
    CHECK(cmd_judge(cfg, {}, gw).exit_code == kOk);
    CHECK(gw.attempts_sent() == 0);
    CHECK(cmd_analyze(cfg, {}).exit_code == kOk);
    CHECK(slurp(cfg.report_dir / "report.json") == report1);
    CHECK(slurp(paths.records()) == records1);
    CHECK(slurp(paths.manifest()) == manifest1);

    CommandOptions svg;
    svg.svg = true;
    std::filesystem::remove_all(cfg.report_dir / "heatmap_mock-alpha.svg");
    r = run_guarded([&] { return cmd_report(cfg, svg); });
    CHECK_MESSAGE(r.exit_code == kOk, r.message);
    CHECK(r.message.find("mock-alpha") != std::string::npos);
    CHECK(r.message.find("4 heatmap figures") != std::string::npos);
    CHECK(slurp(cfg.report_dir / "heatmap_mock-alpha.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("evaluate before generate is a data error; fingerprint drift is refused") {
    fixture::TempDir dir("order");
    auto j = mock_config::pipeline(dir.path() / "run", 2, 2);
    j["plan"]["topics"] = {"business"};
    j["plan"]["world_types"] = {"real_world"};
    j["plan"]["actor_types"] = {"allies"};
    const auto cfg = config_from_json(j);
    CHECK(guarded_evaluate(cfg).exit_code == kDataError);
    REQUIRE(guarded_generate(cfg).exit_code == kOk);

    auto drift = j;
    drift["plan"]["seed"] = 1;
    const auto cfg2 = config_from_json(drift);
    CHECK(guarded_generate(cfg2).exit_code == kUsage);
    CommandOptions force;
    force.allow_fingerprint_mismatch = true;
    CHECK(guarded_generate(cfg2, force).exit_code == kOk);
}

TEST_CASE("judge failure threshold: 1 in 100 passes, 10 in 100 fails") {
    for (int failures : {1, 10}) {
        fixture::TempDir dir("judge");
        auto j = mock_config::pipeline(dir.path() / "run", 2, 2);
        j["plan"]["topics"] = {"business"};
        j["plan"]["world_types"] = {"real_world"};
        j["plan"]["actor_types"] = {"allies"};
        json rules = json::array();
        for (int i = 0; i < failures; ++i) {
            rules.push_back({{"contains", "reasoning #" + std::to_string(1000 + i) + "."}, {"response", "unsure"}});
        }
        j["providers"]["referee"]["mock"]["rules"] = rules;
        const auto cfg = config_from_json(j);

        const store::Paths paths{cfg.storage_dir};
        const ContextCell cell{Topic::Business, WorldType::RealWorld, ActorType::Allies};
        std::vector<json> vs, rs;
        for (int i = 0; i < 50; ++i) {
            const auto v = fixture::make_vignette(cell, i, "Hero " + std::to_string(i));
            vs.push_back(vignette::to_json(v));
            for (auto o : eval::kBothOrders) {
                eval::EvaluationRecord r;
                r.vignette_id = v.vignette_id;
                r.model_id = "mock-alpha";
                r.order = o;
                r.record_id = r.triple_key() + "|0";
                r.decision = eval::Decision::Cooperate;
                r.chosen_label = o == eval::PresentationOrder::CooperateIsA ? 'A' : 'B';
                r.justification = "My reasoning #" + std::to_string(1000 + rs.size()) + ".";
                rs.push_back(eval::to_json(r));
            }
        }
        store::append_lines(paths.vignettes(), vs);
        store::append_lines(paths.records(), rs);

        const auto res = guarded_judge(cfg);
        CHECK(res.details["parse_failures"] == failures);
        CHECK(res.exit_code == (failures == 1 ? kOk : kIncomplete));
    }
}

TEST_CASE("predict reports a missing embeddings file as a usage error") {
    fixture::TempDir dir("emb");
    auto j = mock_config::pipeline(dir.path() / "run", 2, 2);
    j["plan"]["topics"] = {"business"};
    const auto cfg = config_from_json(j);
    REQUIRE(guarded_generate(cfg).exit_code == kOk);
    REQUIRE(guarded_evaluate(cfg).exit_code == kOk);
    CommandOptions o;
    o.embeddings = dir.path() / "nope.jsonl";
    const auto r = run_guarded([&] { return cmd_predict(cfg, o); });
    CHECK(r.exit_code == kUsage);
    CHECK(r.message.find("--embeddings") != std::string::npos);
}
