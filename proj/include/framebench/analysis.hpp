#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "framebench/context.hpp"
#include "framebench/eval.hpp"
#include "framebench/vignette.hpp"

namespace framebench::analysis {

using eval::Decision;
using eval::PresentationOrder;
using eval::Recognition;

enum class Dimension { Topic, WorldType, ActorType, ModelId, Order, Recognition };

[[nodiscard]] std::string_view to_string(Dimension d);
[[nodiscard]] Dimension dimension_from_string(std::string_view s);

/// Nonempty list of distinct dimensions; grouping is exact match on them.
using GroupKey = std::vector<Dimension>;

enum class Unit { Presentation, Vignette };
enum class CiMethod { Wald, Wilson };

[[nodiscard]] std::string_view to_string(Unit u);
[[nodiscard]] Unit unit_from_string(std::string_view s);

/// Collected warnings (empty groups, dropped levels, ...). Optional everywhere.
using Warnings = std::vector<std::string>;

/// One parseable decision joined with its vignette's context cell.
struct Row {
    std::string record_id;
    std::string vignette_id;
    std::string model_id;
    ContextCell cell;
    PresentationOrder order = PresentationOrder::CooperateIsA;
    Decision decision = Decision::Cooperate;
    std::optional<Recognition> recognition;

    [[nodiscard]] bool cooperated() const noexcept { return decision == Decision::Cooperate; }
};

struct DataQuality {
    std::size_t records = 0;           ///< effective records considered
    std::size_t failed = 0;            ///< transport failures
    std::size_t unparseable = 0;
    std::size_t missing_vignette = 0;  ///< record points at an unknown vignette
    std::size_t parseable = 0;
};

/// Keeps parseable records whose vignette is known. Counts the rest.
[[nodiscard]] std::vector<Row> join_rows(const std::vector<eval::EvaluationRecord>& records,
                                         const std::vector<vignette::Vignette>& vignettes,
                                         DataQuality* quality = nullptr);

/// Values of the grouped dimensions, in GroupKey order.
struct GroupValues {
    std::vector<std::pair<Dimension, std::string>> values;

    [[nodiscard]] std::string label() const;  ///< "topic=business,world_type=real_world"
    [[nodiscard]] std::string value(Dimension d) const;
    friend bool operator==(const GroupValues&, const GroupValues&) = default;
};

struct ProportionEstimate {
    GroupValues group;
    double p = 0.0;
    std::size_t n = 0;
    double half_width = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// 1.96 * sqrt(p (1 - p) / n). Throws DomainError for n == 0 or p outside [0, 1].
[[nodiscard]] double wald_half_width(double p, std::size_t n);

/// Wilson score interval bounds at 95%.
[[nodiscard]] std::pair<double, double> wilson_interval(double p, std::size_t n);

/// Presentation unit counts each row. Vignette unit averages a (vignette,
/// model) pair's orders into {0, 0.5, 1}; grouping by order or recognition is
/// then a DomainError. Groups come back in canonical order.
[[nodiscard]] std::vector<ProportionEstimate> cooperation_proportion(const std::vector<Row>& rows,
                                                                     const GroupKey& group_by, Unit unit,
                                                                     CiMethod ci = CiMethod::Wald,
                                                                     Warnings* warnings = nullptr);

/// Instance = (vignette, order).
struct AgreementReport {
    GroupValues group;
    double unanimous = 0.0;  ///< P
    std::size_t n_instances = 0;
    std::size_t skipped = 0;  ///< instances where some model lacks a parseable decision
    std::map<std::pair<std::string, std::string>, double> pairwise;
};

/// `models` must hold exactly three distinct ids. An empty group_by yields a
/// single overall group. Groups without a complete instance are omitted.
[[nodiscard]] std::vector<AgreementReport> agreement_percentage(const std::vector<Row>& rows,
                                                                const std::vector<std::string>& models,
                                                                const GroupKey& group_by = {},
                                                                Warnings* warnings = nullptr);

struct PairwiseEstimate {
    GroupValues group;
    double fraction = 0.0;
    std::size_t n_instances = 0;
};

[[nodiscard]] std::vector<PairwiseEstimate> pairwise_agreement(const std::vector<Row>& rows,
                                                               const std::string& model_a,
                                                               const std::string& model_b,
                                                               const GroupKey& group_by = {},
                                                               Warnings* warnings = nullptr);

/// Fleiss' kappa over a count table: one row per instance, one column per
/// category, every row summing to the same rater count r >= 2. P_e == 1
/// returns 1.0 when every instance is unanimous.
[[nodiscard]] double fleiss_kappa(const std::vector<std::vector<int>>& counts);

/// Raters are `models`; instances are (vignette, order) pairs on which every
/// rater is parseable.
[[nodiscard]] double fleiss_kappa(const std::vector<Row>& rows, const std::vector<std::string>& models,
                                  std::size_t* n_instances = nullptr);

struct FlipRate {
    double rate = 0.0;
    std::size_t n_vignettes = 0;
};

/// Fraction of vignettes (both orders parseable) whose two decisions differ.
[[nodiscard]] FlipRate order_flip_rate(const std::vector<Row>& rows, const std::string& model);

struct OrderDelta {
    GroupValues group;
    double p_coop_a = 0.0;  ///< Cooperate presented as option A
    double p_coop_b = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    double delta = 0.0;  ///< p_coop_b - p_coop_a
};

struct OrderBiasReport {
    std::string model_id;
    double flip_rate = 0.0;
    std::size_t flip_vignettes = 0;
    std::vector<OrderDelta> deltas;
};

[[nodiscard]] OrderBiasReport order_bias_delta(const std::vector<Row>& rows, const std::string& model,
                                               const GroupKey& group_by = {Dimension::Topic, Dimension::WorldType,
                                                                           Dimension::ActorType},
                                               Warnings* warnings = nullptr);

struct ChiSquare {
    double chi_square = 0.0;
    int dof = 0;
    double n = 0.0;
    double cramers_v = 0.0;
    std::size_t rows = 0;  ///< after dropping empty levels
    std::size_t cols = 0;
};

/// Drops all-zero rows and columns first. Throws DegenerateDataError when
/// fewer than two rows or columns remain.
[[nodiscard]] ChiSquare cramers_v(const std::vector<std::vector<double>>& table, Warnings* warnings = nullptr);

struct EffectSizeReport {
    std::string model_id;
    Dimension factor = Dimension::Topic;
    double cramers_v = 0.0;
    double chi_square = 0.0;
    int dof = 0;
    std::size_t n = 0;
};

/// Decision (2 levels) x factor levels for one model. Factor must be topic,
/// world_type or actor_type.
[[nodiscard]] EffectSizeReport cramers_v(const std::vector<Row>& rows, const std::string& model, Dimension factor,
                                         Warnings* warnings = nullptr);

/// Presentation-unit proportions split by recognition flag; unset flags are
/// excluded.
[[nodiscard]] std::vector<ProportionEstimate> recognition_split(const std::vector<Row>& rows,
                                                                const std::string& model,
                                                                CiMethod ci = CiMethod::Wald,
                                                                Warnings* warnings = nullptr);

struct Heatmap {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<std::optional<double>>> values;  ///< nullopt marks a missing cell
};

/// Rows and columns are composite labels over the given dimensions, taking
/// the levels present in `estimates` in canonical order.
[[nodiscard]] Heatmap heatmap_matrix(const std::vector<ProportionEstimate>& estimates, const GroupKey& rows,
                                     const GroupKey& cols);

/// Same layout from order-bias deltas.
[[nodiscard]] Heatmap heatmap_matrix(const std::vector<OrderDelta>& deltas, const GroupKey& rows,
                                     const GroupKey& cols);

/// Fixed-point text with `sig` significant figures; keeps trailing zeros
/// ("0.040").
[[nodiscard]] std::string format_sig(double x, int sig = 2);

}  // namespace framebench::analysis
