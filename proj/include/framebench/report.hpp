#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebench/analysis.hpp"

namespace framebench::report {

struct ReportOptions {
    analysis::Unit unit = analysis::Unit::Vignette;
    analysis::CiMethod ci = analysis::CiMethod::Wald;
    std::vector<std::string> models;               ///< empty: every model in the records
    std::map<std::string, double> benchmark_scores;  ///< model_id -> external score
    bool svg = false;
};

/// Everything the analysis emits. `data` keeps full precision; `summary`
/// rounds to two significant figures.
struct Report {
    nlohmann::json data;
    std::map<std::string, std::string> tables;   ///< file name -> CSV text
    std::map<std::string, std::string> figures;  ///< file name -> SVG text
    std::string summary;
    std::vector<std::string> warnings;
};

/// `records` should already be the effective set (one per triple). Throws
/// DegenerateDataError when no parseable record joins a vignette.
[[nodiscard]] Report build_report(const std::vector<eval::EvaluationRecord>& records,
                                  const std::vector<vignette::Vignette>& vignettes, const ReportOptions& options);

/// Writes report.json, summary.txt, the CSV tables and any figures.
void write_report(const Report& report, const std::filesystem::path& dir);

/// Renders a heatmap as a standalone SVG document.
[[nodiscard]] std::string heatmap_svg(const analysis::Heatmap& h, const std::string& title, double lo, double hi);

[[nodiscard]] nlohmann::json to_json(const analysis::Heatmap& h);
[[nodiscard]] analysis::Heatmap heatmap_from_json(const nlohmann::json& j);

}  // namespace framebench::report
