#include "framebench/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "framebench/error.hpp"
#include "framebench/eval.hpp"
#include "framebench/predictor.hpp"
#include "framebench/report.hpp"
#include "framebench/store.hpp"
#include "framebench/vignette.hpp"

namespace framebench::pipeline {

using nlohmann::json;

namespace {

std::string file_safe(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
    return out;
}

void log_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) spdlog::warn("{}", w);
}

std::vector<std::string> selected_model_names(const RunConfig& config, const CommandOptions& opts) {
    if (opts.models.empty()) return config.models;
    std::vector<std::string> out;
    for (const auto& want : opts.models) {
        const auto it = std::find_if(config.models.begin(), config.models.end(), [&](const std::string& name) {
            return name == want || config.provider(name).model_id == want;
        });
        if (it == config.models.end()) {
            throw ConfigError("--models: '" + want + "' is not an evaluated model in the config");
        }
        if (std::find(out.begin(), out.end(), *it) == out.end()) out.push_back(*it);
    }
    return out;
}

std::vector<std::string> selected_model_ids(const RunConfig& config, const CommandOptions& opts) {
    std::vector<std::string> ids;
    for (const auto& name : selected_model_names(config, opts)) ids.push_back(config.provider(name).model_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

/// Moves the data files of a storage directory into archive-<k>/.
void archive_run(const store::Paths& paths) {
    int k = 1;
    while (std::filesystem::exists(paths.dir / fmt::format("archive-{}", k))) ++k;
    const auto dest = paths.dir / fmt::format("archive-{}", k);
    bool moved = false;
    for (const auto& f : {paths.vignettes(), paths.records(), paths.judgments(), paths.manifest(), paths.audit()}) {
        if (!std::filesystem::exists(f)) continue;
        std::filesystem::create_directories(dest);
        std::filesystem::rename(f, dest / f.filename());
        moved = true;
    }
    if (moved) spdlog::info("moved previous run files to {}", dest.string());
}

void refresh_manifest(const store::Paths& paths, const std::string& fingerprint) {
    store::write_manifest(paths, store::compute_manifest(paths, fingerprint));
}

/// Stored fingerprint, verifying the manifest against the files on the way.
std::optional<std::string> stored_fingerprint(const store::Paths& paths) {
    const auto stored = store::read_manifest(paths);
    if (!stored) return std::nullopt;
    const auto actual = store::compute_manifest(paths, stored->fingerprint);
    for (const auto& diff : store::verify_manifest(*stored, actual)) {
        spdlog::warn("manifest {}: {}; rebuilding it from the files", paths.manifest().string(), diff);
    }
    return stored->fingerprint;
}

void check_fingerprint(const store::Paths& paths, const RunConfig& config, const CommandOptions& opts) {
    const auto stored = stored_fingerprint(paths);
    if (!stored || stored->empty() || *stored == config.fingerprint()) return;
    if (opts.allow_fingerprint_mismatch) {
        spdlog::warn("config fingerprint {} differs from the dataset's {}; continuing as requested",
                     config.fingerprint(), *stored);
        return;
    }
    throw ConfigError(fmt::format(
        "config fingerprint {} does not match the dataset in {} (fingerprint {}); the generation settings changed. "
        "Pass --allow-fingerprint-mismatch to proceed anyway",
        config.fingerprint(), paths.dir.string(), *stored));
}

std::vector<vignette::Vignette> load_dataset(const store::Paths& paths, const RunConfig& config) {
    if (!std::filesystem::exists(paths.vignettes())) {
        throw DegenerateDataError("no vignette dataset at " + paths.vignettes().string() + "; run 'generate' first");
    }
    auto loaded = store::load_vignettes(paths.vignettes(), {config.reject_numeric_payoffs});
    log_warnings(loaded.warnings);
    return std::move(loaded.items);
}

std::vector<eval::EvaluationRecord> load_effective(const store::Paths& paths, bool with_judgments) {
    if (!std::filesystem::exists(paths.records())) {
        throw DegenerateDataError("no evaluation records at " + paths.records().string() + "; run 'evaluate' first");
    }
    auto records = store::load_records(paths.records());
    log_warnings(records.warnings);
    std::vector<eval::Judgment> judgments;
    if (with_judgments) {
        auto j = store::load_judgments(paths.judgments());
        log_warnings(j.warnings);
        judgments = std::move(j.items);
    }
    return eval::effective_records(records.items, judgments);
}

}  // namespace

CommandResult cmd_generate(const RunConfig& base, const CommandOptions& opts, gateway::Gateway& gw) {
    RunConfig config = base;
    if (opts.seed) config.seed = *opts.seed;
    const store::Paths paths{config.storage_dir};
    store::DirectoryLock lock(paths.dir);
    if (opts.fresh) archive_run(paths);
    check_fingerprint(paths, config, opts);

    vignette::GenerationPlan plan;
    plan.cells = config.cells();
    plan.per_cell_count = config.per_cell_count;
    plan.batch_size = config.batch_size;
    plan.payoff = config.payoff;
    plan.require_pd = config.require_pd;
    plan.generator = config.provider(config.generator);
    plan.retry = config.retry;
    plan.seed = config.seed;
    plan.core_set_token_budget = config.core_set_token_budget;
    plan.validation.reject_numeric_payoffs = config.reject_numeric_payoffs;
    plan.max_batches = config.max_batches;
    plan.max_parallel_cells = config.max_parallel_cells;

    std::map<std::string, std::vector<vignette::Vignette>> existing;
    if (std::filesystem::exists(paths.vignettes())) {
        for (auto& v : load_dataset(paths, config)) existing[cell_key(v.cell)].push_back(std::move(v));
    }

    gw.set_audit_log(paths.audit());
    store::JsonlAppender out(paths.vignettes());
    const auto sink = [&](const std::vector<vignette::Vignette>& batch) {
        for (const auto& v : batch) out.append(vignette::to_json(v));
    };
    const auto observer = [](const vignette::BatchEvent& e) {
        if (!e.error.empty()) {
            spdlog::warn("{} batch {}: {}", cell_key(e.cell), e.batch_index, e.error);
        } else {
            spdlog::info("{} batch {}: {} parsed, {} accepted, {} duplicates, {} rejected", cell_key(e.cell),
                         e.batch_index, e.parsed, e.accepted, e.duplicates, e.rejected);
        }
    };
    const auto grid = vignette::generate_grid(plan, gw, existing, sink, observer);
    refresh_manifest(paths, config.fingerprint());

    CommandResult res;
    std::ostringstream msg;
    json cells = json::array();
    for (const auto& c : grid.cells) {
        msg << fmt::format("{:<60} {:>4}/{} {}{}\n", cell_key(c.cell), c.count, config.per_cell_count,
                           c.complete ? "complete" : "INCOMPLETE", c.skipped ? " (already complete)" : "");
        if (!c.error.empty()) msg << "    " << c.error << "\n";
        cells.push_back({{"cell", cell_key(c.cell)},
                         {"count", c.count},
                         {"complete", c.complete},
                         {"skipped", c.skipped},
                         {"error", c.error}});
    }
    msg << fmt::format("{} vignettes across {} cells; {} new this run", grid.total(), grid.cells.size(), out.appended());
    res.exit_code = grid.complete() ? kOk : kIncomplete;
    res.message = msg.str();
    res.details = {{"cells", cells}, {"total", grid.total()}, {"new", out.appended()}, {"complete", grid.complete()}};
    return res;
}

CommandResult cmd_evaluate(const RunConfig& config, const CommandOptions& opts, gateway::Gateway& gw) {
    const store::Paths paths{config.storage_dir};
    store::DirectoryLock lock(paths.dir);
    auto vignettes = load_dataset(paths, config);
    check_fingerprint(paths, config, opts);

    const auto cells = config.cells();
    const std::set<ContextCell> wanted(cells.begin(), cells.end());
    std::erase_if(vignettes, [&](const vignette::Vignette& v) { return wanted.count(v.cell) == 0; });
    if (vignettes.empty()) {
        throw DegenerateDataError("the dataset at " + paths.vignettes().string() +
                                  " holds no vignettes for the configured grid");
    }

    eval::EvaluationPlan plan;
    plan.vignettes = std::move(vignettes);
    for (const auto& name : selected_model_names(config, opts)) plan.models.push_back(config.provider(name));
    plan.retry = config.retry;
    plan.max_in_flight = opts.max_in_flight.value_or(config.max_in_flight);
    plan.resume = !opts.fresh;

    auto existing = store::load_records(paths.records());
    log_warnings(existing.warnings);
    gw.set_audit_log(paths.audit());
    store::JsonlAppender out(paths.records());
    std::size_t done = 0;
    const std::size_t expected = plan.vignettes.size() * plan.models.size() * 2;
    const auto summary = eval::run_evaluation(plan, gw, existing.items, [&](const eval::EvaluationRecord& r) {
        out.append(eval::to_json(r));
        ++done;
        if (done % 50 == 0) spdlog::info("{} new records", done);
    });
    refresh_manifest(paths, config.fingerprint());

    CommandResult res;
    std::ostringstream msg;
    msg << fmt::format("{} presentations planned; {} evaluated now, {} already complete, {} unparseable, {} failed",
                       expected, summary.new_records, summary.skipped, summary.unparseable, summary.failed.size());
    json failed = json::array();
    for (const auto& t : summary.failed) {
        failed.push_back({{"vignette_id", t.vignette_id}, {"model_id", t.model_id}, {"order", eval::to_string(t.order)}});
    }
    if (!summary.complete()) {
        msg << "\nFailed triples (rerun to retry them):";
        for (std::size_t i = 0; i < summary.failed.size() && i < 20; ++i) {
            const auto& t = summary.failed[i];
            msg << fmt::format("\n  {} | {} | {}", t.vignette_id, t.model_id, eval::to_string(t.order));
        }
        if (summary.failed.size() > 20) msg << fmt::format("\n  ... and {} more", summary.failed.size() - 20);
    }
    res.exit_code = summary.complete() ? kOk : kIncomplete;
    res.message = msg.str();
    res.details = {{"planned", expected},
                   {"new_records", summary.new_records},
                   {"skipped", summary.skipped},
                   {"unparseable", summary.unparseable},
                   {"failed", failed}};
    return res;
}

CommandResult cmd_judge(const RunConfig& config, const CommandOptions& opts, gateway::Gateway& gw) {
    const store::Paths paths{config.storage_dir};
    store::DirectoryLock lock(paths.dir);
    auto records = load_effective(paths, false);
    const auto ids = selected_model_ids(config, opts);
    std::erase_if(records, [&](const eval::EvaluationRecord& r) {
        return !std::binary_search(ids.begin(), ids.end(), r.model_id);
    });

    std::vector<std::string> already;
    if (!opts.fresh) {
        auto prior = store::load_judgments(paths.judgments());
        log_warnings(prior.warnings);
        for (const auto& j : prior.items) already.push_back(j.record_id);
    }
    gw.set_audit_log(paths.audit());
    store::JsonlAppender out(paths.judgments());
    const auto summary = eval::run_judging(records, config.provider(config.judge), gw, config.retry,
                                           opts.max_in_flight.value_or(config.max_in_flight), already,
                                           [&](const eval::Judgment& j) { out.append(eval::to_json(j)); });
    refresh_manifest(paths, config.fingerprint());

    std::size_t recognized = 0;
    for (const auto& j : summary.judgments) recognized += j.recognition == eval::Recognition::Recognized;
    const double rate = summary.failure_rate();
    CommandResult res;
    res.message = fmt::format(
        "{} eligible justifications; {} judged now ({} recognized), {} already judged, {} parse failures, "
        "{} transport failures (failure rate {}, threshold {})",
        summary.eligible, summary.judgments.size(), recognized, summary.skipped, summary.parse_failures,
        summary.transport_failures, analysis::format_sig(rate), analysis::format_sig(config.judge_failure_threshold));
    res.exit_code = rate > config.judge_failure_threshold ? kIncomplete : kOk;
    res.details = {{"eligible", summary.eligible},
                   {"judged", summary.judgments.size()},
                   {"recognized", recognized},
                   {"skipped", summary.skipped},
                   {"parse_failures", summary.parse_failures},
                   {"transport_failures", summary.transport_failures},
                   {"failure_rate", rate}};
    return res;
}

CommandResult cmd_analyze(const RunConfig& config, const CommandOptions& opts) {
    const store::Paths paths{config.storage_dir};
    const auto vignettes = load_dataset(paths, config);
    const auto records = load_effective(paths, true);

    report::ReportOptions ro;
    ro.unit = opts.unit.value_or(config.unit);
    ro.ci = config.ci;
    ro.models = selected_model_ids(config, opts);
    ro.benchmark_scores = config.benchmark_scores;
    ro.svg = opts.svg || config.svg;
    const auto rep = report::build_report(records, vignettes, ro);
    report::write_report(rep, config.report_dir);
    log_warnings(rep.warnings);

    CommandResult res;
    res.message = rep.summary + "\nReport written to " + config.report_dir.string();
    res.details = rep.data;
    return res;
}

CommandResult cmd_predict(const RunConfig& config, const CommandOptions& opts) {
    const store::Paths paths{config.storage_dir};
    const auto vignettes = load_dataset(paths, config);
    const auto records = load_effective(paths, false);
    const auto rows = analysis::join_rows(records, vignettes);
    const auto& ps = config.predictor;
    const std::uint64_t seed = opts.seed.value_or(ps.seed);

    std::optional<std::filesystem::path> embeddings = ps.embeddings;
    if (opts.embeddings) {
        if (!std::filesystem::exists(*opts.embeddings)) {
            throw ConfigError("--embeddings: file " + opts.embeddings->string() + " does not exist");
        }
        embeddings = opts.embeddings;
    } else if (embeddings && !std::filesystem::exists(*embeddings)) {
        throw ConfigError("predictor.embeddings: file " + embeddings->string() + " does not exist");
    }

    std::filesystem::create_directories(config.report_dir);
    json all = json::object();
    std::ostringstream msg;
    msg << fmt::format("{} predictor ({} features{})\n", predictor::to_string(ps.kind),
                       embeddings ? "embedding" : "categorical", opts.shuffle_labels ? ", shuffled labels" : "");
    msg << fmt::format("  {:<28} {:>8} {:>8} {:>8} {:>8} {:>7}\n", "model", "accuracy", "F1", "Brier", "AUROC", "n_test");
    int exit_code = kOk;
    for (const auto& model : selected_model_ids(config, opts)) {
        std::vector<analysis::Row> mine;
        std::copy_if(rows.begin(), rows.end(), std::back_inserter(mine),
                     [&](const analysis::Row& r) { return r.model_id == model; });
        predictor::Dataset data;
        std::size_t skipped = 0;
        if (embeddings) {
            auto loaded = predictor::load_embeddings(*embeddings, mine, ps.embedding_order_feature);
            data = std::move(loaded.data);
            skipped = loaded.skipped;
            if (skipped > 0) spdlog::warn("{}: {} records have no embedding and were skipped", model, skipped);
        } else {
            data = predictor::categorical_dataset(mine);
        }
        if (opts.shuffle_labels) predictor::shuffle_labels(data.examples, seed ^ 0x5eedULL);

        json entry = {{"examples", data.examples.size()}, {"skipped", skipped}};
        try {
            auto [train_set, test_set] = predictor::split_dataset(data.examples, ps.split_ratio, seed);
            predictor::TrainConfig tc;
            tc.split_ratio = ps.split_ratio;
            tc.seed = seed;
            tc.kind = ps.kind;
            tc.hyperparams = ps.hyperparams.value_or(ps.kind == predictor::ModelKind::Logistic
                                                         ? predictor::Hyperparams::logistic_defaults()
                                                         : predictor::Hyperparams::tree_defaults());
            if (ps.search && ps.kind == predictor::ModelKind::BoostedTrees) {
                const auto sr = predictor::hyperparam_search({data.schema, train_set}, ps.grid, seed, 5,
                                                             ps.search_budget, config.max_in_flight);
                tc.hyperparams = sr.best;
                entry["search"] = {{"grid_size", ps.grid.size()}, {"cv_auroc", sr.cv_auroc}};
            }
            const auto trained = predictor::train(data.schema, train_set, tc);
            const auto metrics = predictor::evaluate(trained, test_set);
            predictor::save_model(trained, config.report_dir / ("predictor_" + file_safe(model) + ".json"));
            entry["metrics"] = predictor::to_json(metrics);
            entry["n_train"] = train_set.size();
            entry["n_test"] = test_set.size();
            entry["hyperparams"] = predictor::to_json(tc.hyperparams);
            msg << fmt::format("  {:<28} {:>8} {:>8} {:>8} {:>8} {:>7}\n", model,
                               analysis::format_sig(metrics.accuracy), analysis::format_sig(metrics.f1),
                               analysis::format_sig(metrics.brier),
                               metrics.auroc ? analysis::format_sig(*metrics.auroc) : std::string("n/a"),
                               test_set.size());
        } catch (const DegenerateDataError& e) {
            entry["error"] = e.what();
            msg << fmt::format("  {:<28} degenerate labels: {}\n", model, e.what());
            exit_code = kDataError;
        } catch (const DomainError& e) {
            entry["error"] = e.what();
            msg << fmt::format("  {:<28} {}\n", model, e.what());
            exit_code = kDataError;
        }
        all[model] = std::move(entry);
    }
    const json out = {{"model_kind", predictor::to_string(ps.kind)},
                      {"feature_kind", embeddings ? "embedding" : "categorical_onehot"},
                      {"seed", seed},
                      {"split_ratio", ps.split_ratio},
                      {"shuffled_labels", opts.shuffle_labels},
                      {"models", all}};
    {
        std::ofstream f(config.report_dir / "predictor.json", std::ios::binary | std::ios::trunc);
        f << out.dump(2) << "\n";
    }
    CommandResult res;
    res.exit_code = exit_code;
    res.message = msg.str() + "Metrics written to " + (config.report_dir / "predictor.json").string();
    res.details = out;
    return res;
}

CommandResult cmd_report(const RunConfig& config, const CommandOptions& opts) {
    const auto report_json = config.report_dir / "report.json";
    const auto summary_txt = config.report_dir / "summary.txt";
    if (!std::filesystem::exists(report_json) || !std::filesystem::exists(summary_txt)) {
        throw DegenerateDataError("no analysis report in " + config.report_dir.string() + "; run 'analyze' first");
    }
    std::ostringstream msg;
    {
        std::ifstream in(summary_txt);
        msg << in.rdbuf();
    }
    json data;
    {
        std::ifstream in(report_json);
        data = json::parse(in);
    }
    const auto predictor_json = config.report_dir / "predictor.json";
    if (std::filesystem::exists(predictor_json)) {
        std::ifstream in(predictor_json);
        const json p = json::parse(in);
        msg << "\nPredictor (" << p.value("model_kind", std::string()) << ", " << p.value("feature_kind", std::string())
            << ")\n";
        for (const auto& [model, entry] : p.at("models").items()) {
            if (!entry.contains("metrics")) {
                msg << fmt::format("  {:<28} {}\n", model, entry.value("error", std::string("no metrics")));
                continue;
            }
            const auto& m = entry.at("metrics");
            msg << fmt::format("  {:<28} accuracy {} F1 {} Brier {} AUROC {}\n", model,
                               analysis::format_sig(m.at("accuracy").get<double>()),
                               analysis::format_sig(m.at("f1").get<double>()),
                               analysis::format_sig(m.at("brier").get<double>()),
                               m.at("auroc").is_null() ? std::string("n/a")
                                                       : analysis::format_sig(m.at("auroc").get<double>()));
        }
    }
    if (opts.svg || config.svg) {
        std::size_t written = 0;
        const json heatmaps = data.value("heatmaps", json::object());
        const json order_bias = data.value("order_bias", json::object());
        for (const auto& [model, h] : heatmaps.items()) {
            std::ofstream f(config.report_dir / ("heatmap_" + file_safe(model) + ".svg"), std::ios::trunc);
            f << report::heatmap_svg(report::heatmap_from_json(h), "Proportion of cooperation: " + model, 0.0, 1.0);
            ++written;
        }
        for (const auto& [model, b] : order_bias.items()) {
            if (!b.contains("heatmap")) continue;
            std::ofstream f(config.report_dir / ("order_bias_" + file_safe(model) + ".svg"), std::ios::trunc);
            f << report::heatmap_svg(report::heatmap_from_json(b.at("heatmap")), "Order bias delta: " + model, -1.0,
                                     1.0);
            ++written;
        }
        msg << fmt::format("\n{} heatmap figures written to {}", written, config.report_dir.string());
    }
    CommandResult res;
    res.message = msg.str();
    res.details = data;
    return res;
}

CommandResult run_guarded(const std::function<CommandResult()>& fn) {
    auto fail = [](int code, const std::string& what) {
        CommandResult r;
        r.exit_code = code;
        r.message = "error: " + what;
        return r;
    };
    try {
        return fn();
    } catch (const ConfigError& e) {
        return fail(kUsage, e.what());
    } catch (const MigrationError& e) {
        return fail(kDataError, e.what());
    } catch (const DegenerateDataError& e) {
        return fail(kDataError, e.what());
    } catch (const FormatError& e) {
        return fail(kDataError, e.what());
    } catch (const SchemaError& e) {
        return fail(kDataError, e.what());
    } catch (const std::exception& e) {
        return fail(kIncomplete, e.what());
    }
}

}  // namespace framebench::pipeline
