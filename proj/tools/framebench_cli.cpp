// framebench: generate vignettes, evaluate models on both presentation
// orders, judge justifications, analyze and predict.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "framebench/config.hpp"
#include "framebench/gateway.hpp"
#include "framebench/pipeline.hpp"

using namespace framebench;

int main(int argc, char** argv) {
    CLI::App app{"Framing-effects evaluation harness for LLM decisions in Prisoner's Dilemma vignettes"};
    app.require_subcommand(1);

    std::string config_path;
    bool fresh = false;
    bool resume = false;
    std::string unit;
    std::vector<std::string> models;
    std::string embeddings;
    std::uint64_t seed = 0;
    std::size_t max_in_flight = 0;
    bool allow_mismatch = false;
    bool shuffle = false;
    bool svg = false;
    bool quiet = false;
    bool json_out = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration file (JSON)")->required()->check(CLI::ExistingFile);
        auto* f = sub->add_flag("--fresh", fresh, "Ignore prior progress for this stage");
        auto* r = sub->add_flag("--resume", resume, "Continue from prior progress (default)");
        f->excludes(r);
        sub->add_option("--models", models, "Restrict to these evaluated models (names or model ids)")->delimiter(',');
        sub->add_option("--max-in-flight", max_in_flight, "Concurrent provider requests")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "Override the configured seed for this stage");
        sub->add_flag("--quiet", quiet, "Only print warnings and errors on stderr");
        sub->add_flag("--json", json_out, "Print the machine-readable result instead of the text summary");
    };

    auto* gen = app.add_subcommand("generate", "Generate the vignette dataset over the context grid");
    add_common(gen);
    gen->add_flag("--allow-fingerprint-mismatch", allow_mismatch, "Proceed although the generation settings changed");

    auto* ev = app.add_subcommand("evaluate", "Ask each model for a decision on every vignette in both orders");
    add_common(ev);
    ev->add_flag("--allow-fingerprint-mismatch", allow_mismatch, "Proceed although the generation settings changed");

    auto* judge = app.add_subcommand("judge", "Flag justifications that name the game or game theory");
    add_common(judge);

    auto* analyze = app.add_subcommand("analyze", "Compute proportions, agreement, order bias and effect sizes");
    add_common(analyze);
    analyze->add_option("--unit", unit, "Analysis unit")->check(CLI::IsMember({"vignette", "presentation"}));
    analyze->add_flag("--svg", svg, "Also write heatmap figures");

    auto* predict = app.add_subcommand("predict", "Train and score a decision predictor per model");
    add_common(predict);
    predict->add_option("--embeddings", embeddings, "Line-delimited vignette embeddings; switches to embedding mode");
    predict->add_flag("--shuffle-labels", shuffle, "Permute labels before training (no-signal control)");

    auto* rep = app.add_subcommand("report", "Print the stored analysis and predictor results");
    add_common(rep);
    rep->add_flag("--svg", svg, "Render heatmap figures from the stored report");

    CLI11_PARSE(app, argc, argv);

    auto logger = spdlog::stderr_color_mt("framebench");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

    pipeline::CommandOptions opts;
    opts.fresh = fresh;
    opts.models = models;
    opts.allow_fingerprint_mismatch = allow_mismatch;
    opts.shuffle_labels = shuffle;
    opts.svg = svg;
    if (!unit.empty()) opts.unit = analysis::unit_from_string(unit);
    if (!embeddings.empty()) opts.embeddings = embeddings;
    if (app.got_subcommand(gen) ? gen->count("--seed") > 0
        : app.got_subcommand(predict) ? predict->count("--seed") > 0
                                      : false) {
        opts.seed = seed;
    }
    if (max_in_flight > 0) opts.max_in_flight = max_in_flight;

    const auto result = pipeline::run_guarded([&]() -> pipeline::CommandResult {
        const RunConfig config = load_config(config_path);
        gateway::Gateway gw(config.seed);
        if (app.got_subcommand(gen)) return pipeline::cmd_generate(config, opts, gw);
        if (app.got_subcommand(ev)) return pipeline::cmd_evaluate(config, opts, gw);
        if (app.got_subcommand(judge)) return pipeline::cmd_judge(config, opts, gw);
        if (app.got_subcommand(analyze)) return pipeline::cmd_analyze(config, opts);
        if (app.got_subcommand(predict)) return pipeline::cmd_predict(config, opts);
        return pipeline::cmd_report(config, opts);
    });

    if (result.exit_code != pipeline::kOk && result.message.rfind("error: ", 0) == 0) {
        std::cerr << result.message << "\n";
    } else if (json_out) {
        std::cout << result.details.dump(2) << "\n";
    } else {
        std::cout << result.message << "\n";
    }
    return result.exit_code;
}
