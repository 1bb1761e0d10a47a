#include "framebench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "framebench/error.hpp"

namespace framebench::report {

using analysis::Dimension;
using analysis::GroupKey;
using nlohmann::json;

namespace {

const GroupKey kCell = {Dimension::Topic, Dimension::WorldType, Dimension::ActorType};
const GroupKey kHeatRows = {Dimension::Topic};
const GroupKey kHeatCols = {Dimension::WorldType, Dimension::ActorType};
constexpr std::array kFactors = {Dimension::WorldType, Dimension::ActorType, Dimension::Topic};

/// Shortest text that reads back to the same double.
std::string num(double x) { return fmt::format("{}", x); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string file_safe(const std::string& s) {
    std::string out;
    for (char c : s) {
        out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
    }
    return out;
}

json group_json(const analysis::GroupValues& g) {
    json j = json::object();
    for (const auto& [d, v] : g.values) j[std::string(analysis::to_string(d))] = v;
    return j;
}

json estimate_json(const analysis::ProportionEstimate& e) {
    return {{"group", group_json(e.group)}, {"p", e.p},         {"n", e.n},
            {"half_width", e.half_width},   {"lower", e.lower}, {"upper", e.upper}};
}

std::string factor_level(const analysis::GroupValues& g, Dimension factor) { return g.value(factor); }

}  // namespace

json to_json(const analysis::Heatmap& h) {
    json values = json::array();
    for (const auto& row : h.values) {
        json r = json::array();
        for (const auto& v : row) r.push_back(v ? json(*v) : json(nullptr));
        values.push_back(std::move(r));
    }
    return {{"rows", h.row_labels}, {"cols", h.col_labels}, {"values", std::move(values)}};
}

analysis::Heatmap heatmap_from_json(const json& j) {
    analysis::Heatmap h;
    h.row_labels = j.at("rows").get<std::vector<std::string>>();
    h.col_labels = j.at("cols").get<std::vector<std::string>>();
    for (const auto& row : j.at("values")) {
        std::vector<std::optional<double>> r;
        for (const auto& v : row) r.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
        h.values.push_back(std::move(r));
    }
    return h;
}

std::string heatmap_svg(const analysis::Heatmap& h, const std::string& title, double lo, double hi) {
    constexpr int kCellW = 110;
    constexpr int kCellH = 28;
    constexpr int kLeft = 190;
    constexpr int kTop = 70;
    const int width = kLeft + kCellW * static_cast<int>(h.col_labels.size()) + 20;
    const int height = kTop + kCellH * static_cast<int>(h.row_labels.size()) + 20;

    auto colour = [&](double v) {
        // Red at `lo`, white at the midpoint, blue at `hi`.
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        int r, g, b;
        if (t < 0.5) {
            const double u = t / 0.5;
            r = 214 + static_cast<int>((255 - 214) * u);
            g = 39 + static_cast<int>((255 - 39) * u);
            b = 40 + static_cast<int>((255 - 40) * u);
        } else {
            const double u = (t - 0.5) / 0.5;
            r = 255 - static_cast<int>((255 - 31) * u);
            g = 255 - static_cast<int>((255 - 119) * u);
            b = 255 - static_cast<int>((255 - 180) * u);
        }
        return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
    };

    std::ostringstream s;
    s << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">)",
                     width, height)
      << "\n";
    s << fmt::format(R"(<text x="10" y="20" font-size="14">{}</text>)", title) << "\n";
    for (std::size_t c = 0; c < h.col_labels.size(); ++c) {
        s << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)",
                         kLeft + kCellW * static_cast<int>(c) + kCellW / 2, kTop - 10, h.col_labels[c])
          << "\n";
    }
    for (std::size_t r = 0; r < h.row_labels.size(); ++r) {
        const int y = kTop + kCellH * static_cast<int>(r);
        s << fmt::format(R"(<text x="{}" y="{}" text-anchor="end">{}</text>)", kLeft - 6, y + kCellH / 2 + 4,
                         h.row_labels[r])
          << "\n";
        for (std::size_t c = 0; c < h.col_labels.size(); ++c) {
            const int x = kLeft + kCellW * static_cast<int>(c);
            const auto& v = h.values[r][c];
            s << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="#999"/>)", x, y, kCellW,
                             kCellH, v ? colour(*v) : std::string("#dddddd"))
              << "\n";
            s << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", x + kCellW / 2,
                             y + kCellH / 2 + 4, v ? analysis::format_sig(*v) : std::string("missing"))
              << "\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

Report build_report(const std::vector<eval::EvaluationRecord>& records,
                    const std::vector<vignette::Vignette>& vignettes, const ReportOptions& options) {
    Report rep;
    analysis::DataQuality quality;
    auto rows = analysis::join_rows(records, vignettes, &quality);

    std::vector<std::string> models = options.models;
    if (models.empty()) {
        std::set<std::string> seen;
        for (const auto& r : records) seen.insert(r.model_id);
        models.assign(seen.begin(), seen.end());
    } else {
        std::sort(models.begin(), models.end());
        const std::set<std::string> keep(models.begin(), models.end());
        std::erase_if(rows, [&](const analysis::Row& r) { return keep.count(r.model_id) == 0; });
    }
    if (rows.empty()) {
        throw DegenerateDataError("no parseable evaluation records to analyze");
    }

    auto& w = rep.warnings;
    json& d = rep.data;
    std::ostringstream sum;
    sum << "Cooperation analysis (" << analysis::to_string(options.unit) << " units, "
        << (options.ci == analysis::CiMethod::Wald ? "Wald" : "Wilson") << " 95% CI)\n";

    // Data quality, per model and overall.
    {
        json per_model = json::object();
        for (const auto& m : models) {
            std::size_t failed = 0, unparseable = 0, total = 0;
            for (const auto& r : records) {
                if (r.model_id != m) continue;
                ++total;
                failed += r.status == eval::RecordStatus::Failed ? 1 : 0;
                unparseable += r.status == eval::RecordStatus::Completed && r.decision == eval::Decision::Unparseable;
            }
            per_model[m] = {{"records", total}, {"failed", failed}, {"unparseable", unparseable}};
        }
        d["data_quality"] = {{"records", quality.records},
                             {"parseable", quality.parseable},
                             {"failed", quality.failed},
                             {"unparseable", quality.unparseable},
                             {"missing_vignette", quality.missing_vignette},
                             {"per_model", per_model}};
        sum << fmt::format("\nData quality: {} records, {} parseable, {} failed, {} unparseable, {} orphaned\n",
                           quality.records, quality.parseable, quality.failed, quality.unparseable,
                           quality.missing_vignette);
    }

    // Proportions by factor, per model.
    {
        json props = json::object();
        std::string csv = "model_id,factor,level,p,n,half_width,lower,upper\n";
        for (Dimension f : kFactors) {
            const auto est = analysis::cooperation_proportion(rows, {Dimension::ModelId, f}, options.unit, options.ci, &w);
            json arr = json::array();
            sum << "\nCooperation by " << analysis::to_string(f) << "\n";
            for (const auto& e : est) {
                arr.push_back(estimate_json(e));
                const std::string level = factor_level(e.group, f);
                const std::string model = e.group.value(Dimension::ModelId);
                csv += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(model), analysis::to_string(f), level,
                                   num(e.p), e.n, num(e.half_width), num(e.lower), num(e.upper));
                sum << fmt::format("  {:<28} {:<26} {} +/- {} (n={})\n", model, level, analysis::format_sig(e.p),
                                   analysis::format_sig(e.half_width), e.n);
            }
            props[std::string(analysis::to_string(f))] = std::move(arr);
        }
        const auto overall = analysis::cooperation_proportion(rows, {Dimension::ModelId}, options.unit, options.ci, &w);
        json arr = json::array();
        sum << "\nCooperation overall\n";
        for (const auto& e : overall) {
            arr.push_back(estimate_json(e));
            csv += fmt::format("{},overall,all,{},{},{},{},{}\n", csv_field(e.group.value(Dimension::ModelId)),
                               num(e.p), e.n, num(e.half_width), num(e.lower), num(e.upper));
            sum << fmt::format("  {:<28} {} +/- {} (n={})\n", e.group.value(Dimension::ModelId),
                               analysis::format_sig(e.p), analysis::format_sig(e.half_width), e.n);
        }
        props["overall"] = std::move(arr);
        d["proportions"] = std::move(props);
        rep.tables["proportions.csv"] = std::move(csv);
    }

    // Per-model heatmaps (topic rows, world x actor columns) of cooperation
    // and of order-bias deltas.
    {
        json heat = json::object();
        json bias = json::object();
        std::string bias_csv = "model_id,topic,world_type,actor_type,p_coop_a,p_coop_b,n_a,n_b,delta\n";
        sum << "\nOrder bias (delta = p_coop when Cooperate is B minus when it is A)\n";
        for (const auto& m : models) {
            std::vector<analysis::Row> mine;
            std::copy_if(rows.begin(), rows.end(), std::back_inserter(mine),
                         [&](const analysis::Row& r) { return r.model_id == m; });
            if (mine.empty()) {
                w.push_back("model " + m + " has no parseable records");
                continue;
            }
            const auto est = analysis::cooperation_proportion(mine, kCell, options.unit, options.ci, &w);
            const auto h = analysis::heatmap_matrix(est, kHeatRows, kHeatCols);
            heat[m] = to_json(h);
            std::string csv = "topic," ;
            for (std::size_t c = 0; c < h.col_labels.size(); ++c) {
                csv += h.col_labels[c] + (c + 1 < h.col_labels.size() ? "," : "\n");
            }
            for (std::size_t r = 0; r < h.row_labels.size(); ++r) {
                csv += h.row_labels[r];
                for (const auto& v : h.values[r]) csv += "," + (v ? num(*v) : std::string("NA"));
                csv += "\n";
            }
            rep.tables["heatmap_" + file_safe(m) + ".csv"] = std::move(csv);
            if (options.svg) {
                rep.figures["heatmap_" + file_safe(m) + ".svg"] =
                    heatmap_svg(h, "Proportion of cooperation: " + m, 0.0, 1.0);
            }

            const auto ob = analysis::order_bias_delta(rows, m, kCell, &w);
            json deltas = json::array();
            for (const auto& od : ob.deltas) {
                deltas.push_back({{"group", group_json(od.group)},
                                  {"p_coop_a", od.p_coop_a},
                                  {"p_coop_b", od.p_coop_b},
                                  {"n_a", od.n_a},
                                  {"n_b", od.n_b},
                                  {"delta", od.delta}});
                bias_csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(m), od.group.value(Dimension::Topic),
                                        od.group.value(Dimension::WorldType), od.group.value(Dimension::ActorType),
                                        num(od.p_coop_a), num(od.p_coop_b), od.n_a, od.n_b, num(od.delta));
            }
            json entry = {{"flip_rate", ob.flip_rate}, {"flip_vignettes", ob.flip_vignettes}, {"deltas", deltas}};
            if (!ob.deltas.empty()) {
                const auto dh = analysis::heatmap_matrix(ob.deltas, kHeatRows, kHeatCols);
                entry["heatmap"] = to_json(dh);
                if (options.svg) {
                    rep.figures["order_bias_" + file_safe(m) + ".svg"] =
                        heatmap_svg(dh, "Order bias delta: " + m, -1.0, 1.0);
                }
            }
            bias[m] = std::move(entry);
            sum << fmt::format("  {:<28} flip rate {} over {} vignettes\n", m, analysis::format_sig(ob.flip_rate),
                               ob.flip_vignettes);
        }
        d["heatmaps"] = std::move(heat);
        d["order_bias"] = std::move(bias);
        rep.tables["order_bias.csv"] = std::move(bias_csv);
    }

    // Agreement and kappa across models.
    {
        sum << "\nAgreement\n";
        if (models.size() == 3) {
            const auto overall = analysis::agreement_percentage(rows, models, {}, &w);
            const auto by_cell = analysis::agreement_percentage(rows, models, kCell, &w);
            auto rep_json = [&](const analysis::AgreementReport& a) {
                json pw = json::object();
                for (const auto& [pair, f] : a.pairwise) pw[pair.first + " vs " + pair.second] = f;
                return json{{"group", group_json(a.group)},
                            {"unanimous", a.unanimous},
                            {"n_instances", a.n_instances},
                            {"skipped", a.skipped},
                            {"pairwise", pw}};
            };
            json cells = json::array();
            std::string csv = "topic,world_type,actor_type,unanimous,n_instances,skipped\n";
            for (const auto& a : by_cell) {
                cells.push_back(rep_json(a));
                csv += fmt::format("{},{},{},{},{},{}\n", a.group.value(Dimension::Topic),
                                   a.group.value(Dimension::WorldType), a.group.value(Dimension::ActorType),
                                   num(a.unanimous), a.n_instances, a.skipped);
            }
            rep.tables["agreement.csv"] = std::move(csv);
            d["agreement"] = {{"applicable", true},
                              {"overall", overall.empty() ? json(nullptr) : rep_json(overall.front())},
                              {"by_cell", cells}};
            if (!overall.empty()) {
                sum << fmt::format("  unanimous agreement P = {} over {} instances ({} skipped)\n",
                                   analysis::format_sig(overall.front().unanimous), overall.front().n_instances,
                                   overall.front().skipped);
            }
        } else {
            d["agreement"] = {{"applicable", false},
                              {"reason", fmt::format("needs exactly 3 models, have {}", models.size())}};
            sum << "  unanimous agreement: not applicable (needs exactly 3 models)\n";
        }

        json pairs = json::array();
        for (std::size_t i = 0; i < models.size(); ++i) {
            for (std::size_t j = i + 1; j < models.size(); ++j) {
                const auto pw = analysis::pairwise_agreement(rows, models[i], models[j], {}, &w);
                if (pw.empty()) continue;
                pairs.push_back({{"model_a", models[i]},
                                 {"model_b", models[j]},
                                 {"fraction", pw.front().fraction},
                                 {"n_instances", pw.front().n_instances}});
                sum << fmt::format("  {} vs {}: {} (n={})\n", models[i], models[j],
                                   analysis::format_sig(pw.front().fraction), pw.front().n_instances);
            }
        }
        d["pairwise_agreement"] = std::move(pairs);

        if (models.size() >= 2) {
            try {
                std::size_t n = 0;
                const double k = analysis::fleiss_kappa(rows, models, &n);
                d["fleiss_kappa"] = {{"applicable", true}, {"kappa", k}, {"n_instances", n}};
                sum << fmt::format("  Fleiss' kappa = {} over {} instances\n", analysis::format_sig(k), n);
            } catch (const DomainError& e) {
                d["fleiss_kappa"] = {{"applicable", false}, {"reason", e.what()}};
                sum << "  Fleiss' kappa: not applicable (" << e.what() << ")\n";
            }
        } else {
            d["fleiss_kappa"] = {{"applicable", false}, {"reason", "needs at least 2 models"}};
            sum << "  Fleiss' kappa: not applicable (needs at least 2 models)\n";
        }
    }

    // Effect sizes.
    {
        json cv = json::object();
        std::string csv = "model_id,factor,cramers_v,chi_square,dof,n\n";
        sum << "\nEffect size (Cramer's V)\n";
        for (const auto& m : models) {
            json per = json::object();
            for (Dimension f : kFactors) {
                const std::string fname(analysis::to_string(f));
                try {
                    const auto e = analysis::cramers_v(rows, m, f, &w);
                    per[fname] = {{"cramers_v", e.cramers_v}, {"chi_square", e.chi_square}, {"dof", e.dof}, {"n", e.n}};
                    csv += fmt::format("{},{},{},{},{},{}\n", csv_field(m), fname, num(e.cramers_v),
                                       num(e.chi_square), e.dof, e.n);
                    sum << fmt::format("  {:<28} {:<12} V = {}\n", m, fname, analysis::format_sig(e.cramers_v));
                } catch (const DegenerateDataError& e) {
                    per[fname] = {{"applicable", false}, {"reason", e.what()}};
                    sum << fmt::format("  {:<28} {:<12} not applicable\n", m, fname);
                }
            }
            cv[m] = std::move(per);
        }
        d["cramers_v"] = std::move(cv);
        rep.tables["cramers_v.csv"] = std::move(csv);
    }

    // Recognition split.
    {
        json rs = json::object();
        std::string csv = "model_id,recognition,p,n,half_width\n";
        sum << "\nCooperation by game-theory recognition\n";
        for (const auto& m : models) {
            const auto est = analysis::recognition_split(rows, m, options.ci, &w);
            json arr = json::array();
            for (const auto& e : est) {
                arr.push_back(estimate_json(e));
                const std::string flag = e.group.value(Dimension::Recognition);
                csv += fmt::format("{},{},{},{},{}\n", csv_field(m), flag, num(e.p), e.n, num(e.half_width));
                sum << fmt::format("  {:<28} {:<16} {} +/- {} (n={})\n", m, flag, analysis::format_sig(e.p),
                                   analysis::format_sig(e.half_width), e.n);
            }
            rs[m] = std::move(arr);
        }
        d["recognition_split"] = std::move(rs);
        rep.tables["recognition.csv"] = std::move(csv);
    }

    // Defection rate against an external benchmark score.
    if (!options.benchmark_scores.empty()) {
        json pts = json::array();
        std::string csv = "model_id,score,defection_rate,n\n";
        const auto overall = analysis::cooperation_proportion(rows, {Dimension::ModelId}, analysis::Unit::Presentation,
                                                              analysis::CiMethod::Wald, &w);
        for (const auto& e : overall) {
            const std::string m = e.group.value(Dimension::ModelId);
            const auto it = options.benchmark_scores.find(m);
            if (it == options.benchmark_scores.end()) continue;
            pts.push_back({{"model_id", m}, {"score", it->second}, {"defection_rate", 1.0 - e.p}, {"n", e.n}});
            csv += fmt::format("{},{},{},{}\n", csv_field(m), num(it->second), num(1.0 - e.p), e.n);
        }
        d["benchmark_scatter"] = std::move(pts);
        rep.tables["benchmark_scatter.csv"] = std::move(csv);
    }

    d["options"] = {{"unit", analysis::to_string(options.unit)},
                    {"ci", options.ci == analysis::CiMethod::Wald ? "wald" : "wilson"},
                    {"models", models}};
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    d["warnings"] = w;
    if (!w.empty()) {
        sum << "\nWarnings\n";
        for (const auto& msg : w) sum << "  " << msg << "\n";
    }
    rep.summary = sum.str();
    return rep;
}

void write_report(const Report& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + (dir / name).string());
        out << text;
    };
    write("report.json", report.data.dump(2) + "\n");
    write("summary.txt", report.summary);
    for (const auto& [name, text] : report.tables) write(name, text);
    for (const auto& [name, text] : report.figures) write(name, text);
}

}  // namespace framebench::report
