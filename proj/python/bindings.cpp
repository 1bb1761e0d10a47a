// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the framebench package.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <spdlog/spdlog.h>

#include "framebench/analysis.hpp"
#include "framebench/config.hpp"
#include "framebench/error.hpp"
#include "framebench/game.hpp"
#include "framebench/pipeline.hpp"
#include "framebench/predictor.hpp"

namespace py = pybind11;
using namespace framebench;
using nlohmann::json;

namespace {

std::string analyze_game(const std::string& matrix_json) {
    const auto m = game::resolve_matrix(json::parse(matrix_json));
    const auto a = game::analyze(m);
    auto strategy = [](const std::optional<game::Strategy>& s) { return s ? json(s->label) : json(nullptr); };
    json nash = json::array();
    for (const auto& p : a.pure_nash) {
        nash.push_back({{"p1", m.strategies(game::Player::One)[p.row].label},
                        {"p2", m.strategies(game::Player::Two)[p.col].label},
                        {"payoffs",
                         {game::payoff(m, p, game::Player::One).to_double(),
                          game::payoff(m, p, game::Player::Two).to_double()}}});
    }
    return json{{"dominant_p1", strategy(a.dominant_p1)},
                {"dominant_p2", strategy(a.dominant_p2)},
                {"pure_nash", nash},
                {"is_prisoners_dilemma", a.is_pd}}
        .dump();
}

py::dict cramers_v(const std::vector<std::vector<double>>& table) {
    const auto c = analysis::cramers_v(table);
    py::dict d;
    d["cramers_v"] = c.cramers_v;
    d["chi_square"] = c.chi_square;
    d["dof"] = c.dof;
    d["n"] = c.n;
    return d;
}

py::dict score(const std::vector<double>& probs, const std::vector<int>& labels) {
    const auto m = predictor::score(probs, labels);
    py::dict d;
    d["accuracy"] = m.accuracy;
    d["f1"] = m.f1;
    d["brier"] = m.brier;
    d["auroc"] = m.auroc ? py::object(py::float_(*m.auroc)) : py::object(py::none());
    d["n"] = m.n;
    return d;
}

py::tuple run_command(const std::string& command, const std::string& config_path, bool fresh,
                      const std::vector<std::string>& models, const std::optional<std::string>& embeddings,
                      bool shuffle_labels) {
    pipeline::CommandOptions opts;
    opts.fresh = fresh;
    opts.models = models;
    opts.shuffle_labels = shuffle_labels;
    if (embeddings) opts.embeddings = *embeddings;
    pipeline::CommandResult res;
    {
        py::gil_scoped_release release;
        res = pipeline::run_guarded([&]() -> pipeline::CommandResult {
            const RunConfig config = load_config(config_path);
            gateway::Gateway gw(config.seed);
            if (command == "generate") return pipeline::cmd_generate(config, opts, gw);
            if (command == "evaluate") return pipeline::cmd_evaluate(config, opts, gw);
            if (command == "judge") return pipeline::cmd_judge(config, opts, gw);
            if (command == "analyze") return pipeline::cmd_analyze(config, opts);
            if (command == "predict") return pipeline::cmd_predict(config, opts);
            if (command == "report") return pipeline::cmd_report(config, opts);
            throw ConfigError("unknown command '" + command + "'");
        });
    }
    return py::make_tuple(res.exit_code, res.message, res.details.dump());
}

}  // namespace

PYBIND11_MODULE(_framebench, m) {
    m.doc() = "Framing-effects evaluation harness (native core)";

    auto base = py::register_exception<Error>(m, "FramebenchError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DegenerateDataError>(m, "DegenerateDataError", base.ptr());

    m.def("set_log_level", [](const std::string& level) { spdlog::set_level(spdlog::level::from_str(level)); });

    m.def("canonical_pd_json", [] { return game::to_json(game::canonical_pd()).dump(); });
    m.def("analyze_game_json", &analyze_game, py::arg("matrix_json"));

    m.def("wald_half_width", &analysis::wald_half_width, py::arg("p"), py::arg("n"));
    m.def("wilson_interval", &analysis::wilson_interval, py::arg("p"), py::arg("n"));
    m.def("format_sig", &analysis::format_sig, py::arg("x"), py::arg("sig") = 2);
    m.def("fleiss_kappa", py::overload_cast<const std::vector<std::vector<int>>&>(&analysis::fleiss_kappa),
          py::arg("counts"));
    m.def("cramers_v", &cramers_v, py::arg("table"));

    m.def("auroc", &predictor::auroc, py::arg("scores"), py::arg("labels"));
    m.def("score", &score, py::arg("probs"), py::arg("labels"));

    m.def("run_command", &run_command, py::arg("command"), py::arg("config_path"), py::arg("fresh") = false,
          py::arg("models") = std::vector<std::string>{}, py::arg("embeddings") = std::nullopt,
          py::arg("shuffle_labels") = false);
}
