#include "framebench/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "framebench/error.hpp"
#include "framebench/hash.hpp"

namespace framebench {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_absolute() || base.empty() ? path : base / path).lexically_normal();
}

template <class T, class Parse, std::size_t N>
std::vector<T> levels(const json& plan, const char* key, const std::array<T, N>& all, Parse parse) {
    if (!plan.contains(key) || (plan.at(key).is_string() && plan.at(key).get<std::string>() == "all")) {
        return {all.begin(), all.end()};
    }
    std::vector<T> out;
    std::set<T> seen;
    for (const auto& s : plan.at(key)) {
        const T v = parse(s.get<std::string>());
        if (!seen.insert(v).second) throw ConfigError(fmt::format("plan.{} lists '{}' twice", key, s.get<std::string>()));
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(fmt::format("plan.{} is empty", key));
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (providers.empty()) throw ConfigError("config defines no providers");
    for (const auto& [name, p] : providers) {
        try {
            p.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("provider '{}': {}", name, e.what()));
        }
    }
    (void)provider(generator);
    (void)provider(judge);
    if (models.empty()) throw ConfigError("config lists no evaluated models");
    std::set<std::string> model_ids;
    for (const auto& m : models) {
        if (!model_ids.insert(provider(m).model_id).second) {
            throw ConfigError(fmt::format("evaluated model '{}' shares its model_id with another entry", m));
        }
    }
    if (topics.empty() || worlds.empty() || actors.empty()) throw ConfigError("plan has an empty context dimension");
    if (per_cell_count < 1) throw ConfigError("plan.per_cell_count must be at least 1");
    if (batch_size < 1) throw ConfigError("plan.batch_size must be at least 1");
    if (max_in_flight == 0) throw ConfigError("concurrency.max_in_flight must be at least 1");
    if (max_parallel_cells == 0) throw ConfigError("concurrency.max_parallel_cells must be at least 1");
    if (!(judge_failure_threshold >= 0.0 && judge_failure_threshold <= 1.0)) {
        throw ConfigError("judge_failure_threshold must lie in [0, 1]");
    }
    if (storage_dir.empty()) throw ConfigError("storage.dir is required");
    retry.validate();
    if (require_pd && !game::is_prisoners_dilemma(payoff)) {
        throw ConfigError("plan.payoff is not a Prisoner's Dilemma and plan.require_pd is set");
    }
}

const gateway::ProviderConfig& RunConfig::provider(const std::string& name) const {
    const auto it = providers.find(name);
    if (it == providers.end()) throw ConfigError("unknown provider name '" + name + "'");
    return it->second;
}

std::vector<ContextCell> RunConfig::cells() const { return make_grid(topics, worlds, actors); }

std::string RunConfig::fingerprint() const {
    auto gen = gateway::to_json(provider(generator));
    gen.erase("api_key_env");
    gen.erase("timeout_seconds");
    gen.erase("requests_per_minute");
    json topics_j = json::array(), worlds_j = json::array(), actors_j = json::array();
    for (Topic t : topics) topics_j.push_back(to_string(t));
    for (WorldType w : worlds) worlds_j.push_back(to_string(w));
    for (ActorType a : actors) actors_j.push_back(to_string(a));
    const json material = {{"generator", gen},
                           {"topics", topics_j},
                           {"world_types", worlds_j},
                           {"actor_types", actors_j},
                           {"per_cell_count", per_cell_count},
                           {"batch_size", batch_size},
                           {"seed", seed},
                           {"payoff", game::to_json(payoff)},
                           {"core_set_token_budget", core_set_token_budget},
                           {"reject_numeric_payoffs", reject_numeric_payoffs}};
    return hex64(fnv1a64(material.dump()));
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        RunConfig c;
        for (const auto& [name, p] : j.at("providers").items()) {
            c.providers.emplace(name, gateway::provider_from_json(p));
        }
        c.generator = j.at("generator").get<std::string>();
        c.models = j.at("models").get<std::vector<std::string>>();
        c.judge = j.at("judge").get<std::string>();

        const json plan = j.value("plan", json::object());
        if (!plan.contains("seed")) throw ConfigError("plan.seed is required");
        c.seed = plan.at("seed").get<std::uint64_t>();
        c.topics = levels(plan, "topics", kAllTopics, [](const std::string& s) { return topic_from_string(s); });
        c.worlds = levels(plan, "world_types", kAllWorlds, [](const std::string& s) { return world_from_string(s); });
        c.actors = levels(plan, "actor_types", kAllActors, [](const std::string& s) { return actor_from_string(s); });
        c.per_cell_count = plan.value("per_cell_count", c.per_cell_count);
        c.batch_size = plan.value("batch_size", c.batch_size);
        if (plan.contains("payoff")) c.payoff = game::resolve_matrix(plan.at("payoff"));
        c.require_pd = plan.value("require_pd", c.require_pd);
        c.core_set_token_budget = plan.value("core_set_token_budget", c.core_set_token_budget);
        c.reject_numeric_payoffs = plan.value("reject_numeric_payoffs", c.reject_numeric_payoffs);
        c.max_batches = plan.value("max_batches", c.max_batches);

        if (j.contains("retry")) c.retry = gateway::retry_from_json(j.at("retry"));
        const json conc = j.value("concurrency", json::object());
        c.max_in_flight = conc.value("max_in_flight", c.max_in_flight);
        c.max_parallel_cells = conc.value("max_parallel_cells", c.max_parallel_cells);

        const json storage = j.value("storage", json::object());
        c.storage_dir = resolve(base_dir, storage.value("dir", std::string("run")));
        c.report_dir = storage.contains("report_dir") ? resolve(base_dir, storage.at("report_dir").get<std::string>())
                                                      : c.storage_dir / "report";

        c.judge_failure_threshold = j.value("judge_failure_threshold", c.judge_failure_threshold);

        const json an = j.value("analysis", json::object());
        c.unit = analysis::unit_from_string(an.value("unit", std::string("vignette")));
        const std::string ci = an.value("ci", std::string("wald"));
        if (ci != "wald" && ci != "wilson") throw ConfigError("analysis.ci must be 'wald' or 'wilson'");
        c.ci = ci == "wald" ? analysis::CiMethod::Wald : analysis::CiMethod::Wilson;
        c.svg = an.value("svg", false);
        if (an.contains("benchmark_scores")) {
            c.benchmark_scores = an.at("benchmark_scores").get<std::map<std::string, double>>();
        }
        if (an.contains("model_metadata")) {
            const auto path = resolve(base_dir, an.at("model_metadata").get<std::string>());
            std::ifstream in(path);
            if (!in) throw ConfigError("analysis.model_metadata: cannot open " + path.string());
            const json metadata = json::parse(in);
            for (const auto& [model, score] : metadata.items()) {
                c.benchmark_scores[model] = score.is_object() ? score.at("score").get<double>() : score.get<double>();
            }
        }

        const json pr = j.value("predictor", json::object());
        if (!pr.contains("seed")) throw ConfigError("predictor.seed is required");
        c.predictor.seed = pr.at("seed").get<std::uint64_t>();
        c.predictor.kind = predictor::model_kind_from_string(pr.value("model_kind", std::string("logistic")));
        c.predictor.split_ratio = pr.value("split_ratio", c.predictor.split_ratio);
        if (pr.contains("hyperparams")) {
            const auto defaults = c.predictor.kind == predictor::ModelKind::Logistic
                                      ? predictor::Hyperparams::logistic_defaults()
                                      : predictor::Hyperparams::tree_defaults();
            c.predictor.hyperparams = predictor::hyperparams_from_json(pr.at("hyperparams"), defaults);
        }
        c.predictor.search = pr.value("search", false);
        if (pr.contains("grid")) {
            const auto& g = pr.at("grid");
            auto& grid = c.predictor.grid;
            grid.max_depth = g.value("max_depth", grid.max_depth);
            grid.learning_rate = g.value("learning_rate", grid.learning_rate);
            grid.rounds = g.value("rounds", grid.rounds);
            grid.subsample = g.value("subsample", grid.subsample);
            grid.colsample = g.value("colsample", grid.colsample);
            grid.gamma = g.value("gamma", grid.gamma);
        }
        c.predictor.search_budget = pr.value("search_budget", c.predictor.search_budget);
        c.predictor.embedding_order_feature = pr.value("embedding_order_feature", true);
        if (pr.contains("embeddings")) c.predictor.embeddings = resolve(base_dir, pr.at("embeddings").get<std::string>());

        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const SchemaError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not JSON: " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

}  // namespace framebench
