#include "framebench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "framebench/error.hpp"

namespace framebench::analysis {

namespace {

constexpr double kZ = 1.96;

using SortKey = std::vector<std::pair<int, std::string>>;

std::pair<int, std::string> ordinal(Dimension d, const std::string& value) {
    switch (d) {
        case Dimension::Topic: return {static_cast<int>(topic_from_string(value)), value};
        case Dimension::WorldType: return {static_cast<int>(world_from_string(value)), value};
        case Dimension::ActorType: return {static_cast<int>(actor_from_string(value)), value};
        case Dimension::Order: return {static_cast<int>(eval::order_from_string(value)), value};
        case Dimension::Recognition: return {static_cast<int>(eval::recognition_from_string(value)), value};
        case Dimension::ModelId: return {0, value};
    }
    return {0, value};
}

std::string value_of(const Row& r, Dimension d) {
    switch (d) {
        case Dimension::Topic: return std::string(to_string(r.cell.topic));
        case Dimension::WorldType: return std::string(to_string(r.cell.world));
        case Dimension::ActorType: return std::string(to_string(r.cell.actor));
        case Dimension::ModelId: return r.model_id;
        case Dimension::Order: return std::string(eval::to_string(r.order));
        case Dimension::Recognition:
            return r.recognition ? std::string(eval::to_string(*r.recognition)) : std::string("unset");
    }
    return {};
}

void check_group_key(const GroupKey& key, bool allow_empty) {
    if (key.empty() && !allow_empty) {
        throw DomainError("group_by must name at least one dimension");
    }
    std::set<Dimension> seen(key.begin(), key.end());
    if (seen.size() != key.size()) {
        throw DomainError("group_by lists a dimension twice");
    }
}

void forbid(const GroupKey& key, std::initializer_list<Dimension> banned, const char* context) {
    for (Dimension d : banned) {
        if (std::find(key.begin(), key.end(), d) != key.end()) {
            throw DomainError(fmt::format("{} cannot group by {}", context, to_string(d)));
        }
    }
}

GroupValues group_of(const Row& r, const GroupKey& key) {
    GroupValues g;
    for (Dimension d : key) {
        g.values.emplace_back(d, value_of(r, d));
    }
    return g;
}

SortKey sort_key(const GroupValues& g) {
    SortKey k;
    for (const auto& [d, v] : g.values) {
        k.push_back(ordinal(d, v));
    }
    return k;
}

/// Groups with canonical ordering; value holds the representative GroupValues.
template <class Acc>
struct Grouped {
    std::map<SortKey, std::pair<GroupValues, Acc>> groups;

    Acc& at(const GroupValues& g) {
        auto [it, inserted] = groups.try_emplace(sort_key(g));
        if (inserted) it->second.first = g;
        return it->second.second;
    }
};

void warn(Warnings* w, std::string msg) {
    if (w != nullptr) w->push_back(std::move(msg));
}

ProportionEstimate make_estimate(GroupValues g, double successes, std::size_t n, CiMethod ci) {
    ProportionEstimate e;
    e.group = std::move(g);
    e.n = n;
    e.p = successes / static_cast<double>(n);
    if (ci == CiMethod::Wald) {
        e.half_width = wald_half_width(e.p, n);
        e.lower = std::max(0.0, e.p - e.half_width);
        e.upper = std::min(1.0, e.p + e.half_width);
    } else {
        std::tie(e.lower, e.upper) = wilson_interval(e.p, n);
        e.half_width = (e.upper - e.lower) / 2.0;
    }
    return e;
}

using InstanceKey = std::pair<std::string, PresentationOrder>;

}  // namespace

std::string_view to_string(Dimension d) {
    switch (d) {
        case Dimension::Topic: return "topic";
        case Dimension::WorldType: return "world_type";
        case Dimension::ActorType: return "actor_type";
        case Dimension::ModelId: return "model_id";
        case Dimension::Order: return "order";
        case Dimension::Recognition: return "recognition";
    }
    return "?";
}

Dimension dimension_from_string(std::string_view s) {
    for (Dimension d : {Dimension::Topic, Dimension::WorldType, Dimension::ActorType, Dimension::ModelId,
                        Dimension::Order, Dimension::Recognition}) {
        if (to_string(d) == s) return d;
    }
    throw SchemaError("unknown dimension '" + std::string(s) + "'");
}

std::string_view to_string(Unit u) { return u == Unit::Vignette ? "vignette" : "presentation"; }

Unit unit_from_string(std::string_view s) {
    if (s == "vignette") return Unit::Vignette;
    if (s == "presentation") return Unit::Presentation;
    throw ConfigError("unit must be 'vignette' or 'presentation', got '" + std::string(s) + "'");
}

std::string GroupValues::label() const {
    if (values.empty()) return "all";
    std::string out;
    for (const auto& [d, v] : values) {
        if (!out.empty()) out += ',';
        out += to_string(d);
        out += '=';
        out += v;
    }
    return out;
}

std::string GroupValues::value(Dimension d) const {
    for (const auto& [dim, v] : values) {
        if (dim == d) return v;
    }
    throw DomainError("group has no " + std::string(to_string(d)) + " value");
}

std::vector<Row> join_rows(const std::vector<eval::EvaluationRecord>& records,
                           const std::vector<vignette::Vignette>& vignettes, DataQuality* quality) {
    std::unordered_map<std::string, const vignette::Vignette*> by_id;
    for (const auto& v : vignettes) {
        by_id.emplace(v.vignette_id, &v);
    }
    DataQuality q;
    std::vector<Row> rows;
    for (const auto& r : records) {
        ++q.records;
        if (r.status == eval::RecordStatus::Failed) {
            ++q.failed;
            continue;
        }
        if (r.decision == Decision::Unparseable) {
            ++q.unparseable;
            continue;
        }
        const auto it = by_id.find(r.vignette_id);
        if (it == by_id.end()) {
            ++q.missing_vignette;
            continue;
        }
        ++q.parseable;
        rows.push_back({r.record_id, r.vignette_id, r.model_id, it->second->cell, r.order, r.decision, r.recognition});
    }
    if (quality != nullptr) *quality = q;
    return rows;
}

double wald_half_width(double p, std::size_t n) {
    if (n == 0) throw DomainError("confidence interval over zero units");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("proportion outside [0, 1]");
    return kZ * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

std::pair<double, double> wilson_interval(double p, std::size_t n) {
    if (n == 0) throw DomainError("confidence interval over zero units");
    const double nn = static_cast<double>(n);
    const double z2 = kZ * kZ;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double margin = kZ * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - margin), std::min(1.0, center + margin)};
}

std::vector<ProportionEstimate> cooperation_proportion(const std::vector<Row>& rows, const GroupKey& group_by,
                                                       Unit unit, CiMethod ci, Warnings* warnings) {
    check_group_key(group_by, false);
    struct Acc {
        double successes = 0;
        std::size_t n = 0;
    };
    Grouped<Acc> grouped;

    if (unit == Unit::Presentation) {
        for (const auto& r : rows) {
            auto& acc = grouped.at(group_of(r, group_by));
            acc.successes += r.cooperated() ? 1.0 : 0.0;
            ++acc.n;
        }
    } else {
        forbid(group_by, {Dimension::Order, Dimension::Recognition}, "vignette-unit proportions");
        // (vignette, model) -> cooperations, presentations, representative row
        std::map<std::pair<std::string, std::string>, std::tuple<int, int, const Row*>> units;
        for (const auto& r : rows) {
            auto& [coop, count, rep] = units[{r.vignette_id, r.model_id}];
            coop += r.cooperated() ? 1 : 0;
            ++count;
            if (rep == nullptr) rep = &r;
        }
        for (const auto& [key, u] : units) {
            const auto& [coop, count, rep] = u;
            auto& acc = grouped.at(group_of(*rep, group_by));
            acc.successes += static_cast<double>(coop) / static_cast<double>(count);
            ++acc.n;
        }
    }

    if (grouped.groups.empty()) {
        warn(warnings, "cooperation proportion: no parseable rows");
    }
    std::vector<ProportionEstimate> out;
    for (auto& [key, entry] : grouped.groups) {
        out.push_back(make_estimate(entry.first, entry.second.successes, entry.second.n, ci));
    }
    return out;
}

namespace {

struct InstanceTable {
    /// instance -> model -> decision, plus the group each instance belongs to
    std::map<InstanceKey, std::map<std::string, Decision>> decisions;
    std::map<InstanceKey, GroupValues> groups;
};

InstanceTable instances(const std::vector<Row>& rows, const std::vector<std::string>& models,
                        const GroupKey& group_by) {
    const std::set<std::string> wanted(models.begin(), models.end());
    InstanceTable t;
    for (const auto& r : rows) {
        if (wanted.count(r.model_id) == 0) continue;
        const InstanceKey k{r.vignette_id, r.order};
        t.decisions[k][r.model_id] = r.decision;
        t.groups.try_emplace(k, group_of(r, group_by));
    }
    return t;
}

}  // namespace

std::vector<AgreementReport> agreement_percentage(const std::vector<Row>& rows,
                                                  const std::vector<std::string>& models, const GroupKey& group_by,
                                                  Warnings* warnings) {
    const std::set<std::string> distinct(models.begin(), models.end());
    if (models.size() != 3 || distinct.size() != 3) {
        throw DomainError(fmt::format("agreement percentage needs exactly 3 distinct models, got {}", models.size()));
    }
    check_group_key(group_by, true);
    forbid(group_by, {Dimension::ModelId, Dimension::Recognition}, "agreement");

    const auto table = instances(rows, models, group_by);
    const std::vector<std::string> sorted(distinct.begin(), distinct.end());
    struct Acc {
        std::size_t unanimous = 0;
        std::size_t complete = 0;
        std::size_t skipped = 0;
        std::map<std::pair<std::string, std::string>, std::size_t> pair_equal;
    };
    Grouped<Acc> grouped;
    for (const auto& [key, by_model] : table.decisions) {
        auto& acc = grouped.at(table.groups.at(key));
        if (by_model.size() != 3) {
            ++acc.skipped;
            continue;
        }
        ++acc.complete;
        const Decision d0 = by_model.at(sorted[0]);
        const Decision d1 = by_model.at(sorted[1]);
        const Decision d2 = by_model.at(sorted[2]);
        if (d0 == d1 && d1 == d2) ++acc.unanimous;
        acc.pair_equal[{sorted[0], sorted[1]}] += d0 == d1 ? 1 : 0;
        acc.pair_equal[{sorted[0], sorted[2]}] += d0 == d2 ? 1 : 0;
        acc.pair_equal[{sorted[1], sorted[2]}] += d1 == d2 ? 1 : 0;
    }

    std::vector<AgreementReport> out;
    for (auto& [key, entry] : grouped.groups) {
        const Acc& acc = entry.second;
        if (acc.complete == 0) {
            warn(warnings, "agreement: group " + entry.first.label() + " has no instance rated by all models");
            continue;
        }
        AgreementReport rep;
        rep.group = entry.first;
        rep.n_instances = acc.complete;
        rep.skipped = acc.skipped;
        const double n = static_cast<double>(acc.complete);
        rep.unanimous = static_cast<double>(acc.unanimous) / n;
        for (const auto& [pair, equal] : acc.pair_equal) {
            rep.pairwise[pair] = static_cast<double>(equal) / n;
        }
        out.push_back(std::move(rep));
    }
    return out;
}

std::vector<PairwiseEstimate> pairwise_agreement(const std::vector<Row>& rows, const std::string& model_a,
                                                 const std::string& model_b, const GroupKey& group_by,
                                                 Warnings* warnings) {
    check_group_key(group_by, true);
    forbid(group_by, {Dimension::ModelId, Dimension::Recognition}, "pairwise agreement");
    const auto table = instances(rows, {model_a, model_b}, group_by);
    struct Acc {
        std::size_t equal = 0;
        std::size_t n = 0;
    };
    Grouped<Acc> grouped;
    for (const auto& [key, by_model] : table.decisions) {
        auto& acc = grouped.at(table.groups.at(key));
        const auto a = by_model.find(model_a);
        const auto b = by_model.find(model_b);
        if (a == by_model.end() || b == by_model.end()) continue;
        ++acc.n;
        acc.equal += a->second == b->second ? 1 : 0;
    }
    std::vector<PairwiseEstimate> out;
    for (auto& [key, entry] : grouped.groups) {
        if (entry.second.n == 0) {
            warn(warnings, "pairwise agreement: group " + entry.first.label() + " has no shared instance");
            continue;
        }
        out.push_back({entry.first, static_cast<double>(entry.second.equal) / static_cast<double>(entry.second.n),
                       entry.second.n});
    }
    return out;
}

double fleiss_kappa(const std::vector<std::vector<int>>& counts) {
    if (counts.empty()) throw DomainError("Fleiss' kappa over zero instances");
    const std::size_t k = counts.front().size();
    if (k == 0) throw DomainError("Fleiss' kappa needs at least one category");
    long r = -1;
    std::vector<double> column(k, 0.0);
    double p_bar = 0.0;
    for (const auto& row : counts) {
        if (row.size() != k) throw DomainError("count table rows differ in category count");
        long sum = 0;
        long sq = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (row[j] < 0) throw DomainError("negative count in Fleiss table");
            sum += row[j];
            sq += static_cast<long>(row[j]) * row[j];
            column[j] += row[j];
        }
        if (r < 0) r = sum;
        if (sum != r) throw DomainError("every instance must have the same number of raters");
        if (r < 2) throw DomainError("Fleiss' kappa needs at least two raters");
        p_bar += static_cast<double>(sq - r) / static_cast<double>(r * (r - 1));
    }
    const double n = static_cast<double>(counts.size());
    p_bar /= n;
    const double total = n * static_cast<double>(r);
    double p_e = 0.0;
    std::size_t used = 0;
    for (double c : column) {
        const double pj = c / total;
        p_e += pj * pj;
        used += c > 0 ? 1 : 0;
    }
    if (used <= 1) {
        // All ratings fell in one category, hence every instance is unanimous.
        return 1.0;
    }
    return (p_bar - p_e) / (1.0 - p_e);
}

double fleiss_kappa(const std::vector<Row>& rows, const std::vector<std::string>& models, std::size_t* n_instances) {
    const std::set<std::string> distinct(models.begin(), models.end());
    if (distinct.size() < 2 || distinct.size() != models.size()) {
        throw DomainError("Fleiss' kappa needs at least two distinct raters");
    }
    const auto table = instances(rows, models, {});
    std::vector<std::vector<int>> counts;
    for (const auto& [key, by_model] : table.decisions) {
        if (by_model.size() != distinct.size()) continue;
        std::vector<int> row(2, 0);
        for (const auto& [m, d] : by_model) {
            ++row[d == Decision::Cooperate ? 0 : 1];
        }
        counts.push_back(std::move(row));
    }
    if (n_instances != nullptr) *n_instances = counts.size();
    return fleiss_kappa(counts);
}

FlipRate order_flip_rate(const std::vector<Row>& rows, const std::string& model) {
    std::map<std::string, std::pair<std::optional<Decision>, std::optional<Decision>>> by_vignette;
    for (const auto& r : rows) {
        if (r.model_id != model) continue;
        auto& slot = by_vignette[r.vignette_id];
        (r.order == PresentationOrder::CooperateIsA ? slot.first : slot.second) = r.decision;
    }
    FlipRate out;
    std::size_t flips = 0;
    for (const auto& [id, pair] : by_vignette) {
        if (!pair.first || !pair.second) continue;
        ++out.n_vignettes;
        flips += *pair.first != *pair.second ? 1 : 0;
    }
    out.rate = out.n_vignettes == 0 ? 0.0 : static_cast<double>(flips) / static_cast<double>(out.n_vignettes);
    return out;
}

OrderBiasReport order_bias_delta(const std::vector<Row>& rows, const std::string& model, const GroupKey& group_by,
                                 Warnings* warnings) {
    check_group_key(group_by, true);
    forbid(group_by, {Dimension::Order, Dimension::ModelId, Dimension::Recognition}, "order bias");
    struct Acc {
        std::size_t coop_a = 0, n_a = 0, coop_b = 0, n_b = 0;
    };
    Grouped<Acc> grouped;
    for (const auto& r : rows) {
        if (r.model_id != model) continue;
        auto& acc = grouped.at(group_of(r, group_by));
        if (r.order == PresentationOrder::CooperateIsA) {
            ++acc.n_a;
            acc.coop_a += r.cooperated() ? 1 : 0;
        } else {
            ++acc.n_b;
            acc.coop_b += r.cooperated() ? 1 : 0;
        }
    }
    OrderBiasReport rep;
    rep.model_id = model;
    const auto flip = order_flip_rate(rows, model);
    rep.flip_rate = flip.rate;
    rep.flip_vignettes = flip.n_vignettes;
    for (auto& [key, entry] : grouped.groups) {
        const Acc& a = entry.second;
        if (a.n_a == 0 || a.n_b == 0) {
            warn(warnings, "order bias: " + model + " group " + entry.first.label() + " lacks one order");
            continue;
        }
        OrderDelta d;
        d.group = entry.first;
        d.n_a = a.n_a;
        d.n_b = a.n_b;
        d.p_coop_a = static_cast<double>(a.coop_a) / static_cast<double>(a.n_a);
        d.p_coop_b = static_cast<double>(a.coop_b) / static_cast<double>(a.n_b);
        d.delta = d.p_coop_b - d.p_coop_a;
        rep.deltas.push_back(std::move(d));
    }
    return rep;
}

ChiSquare cramers_v(const std::vector<std::vector<double>>& table, Warnings* warnings) {
    if (table.empty() || table.front().empty()) throw DegenerateDataError("empty contingency table");
    const std::size_t cols = table.front().size();
    for (const auto& row : table) {
        if (row.size() != cols) throw DomainError("contingency table is ragged");
        for (double x : row) {
            if (x < 0 || !std::isfinite(x)) throw DomainError("contingency counts must be finite and nonnegative");
        }
    }
    std::vector<std::size_t> keep_rows;
    std::vector<std::size_t> keep_cols;
    for (std::size_t i = 0; i < table.size(); ++i) {
        double s = 0;
        for (double x : table[i]) s += x;
        if (s > 0) {
            keep_rows.push_back(i);
        } else {
            warn(warnings, fmt::format("contingency row {} has no observations and was dropped", i));
        }
    }
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0;
        for (const auto& row : table) s += row[j];
        if (s > 0) {
            keep_cols.push_back(j);
        } else {
            warn(warnings, fmt::format("contingency column {} has no observations and was dropped", j));
        }
    }
    if (keep_rows.size() < 2 || keep_cols.size() < 2) {
        throw DegenerateDataError(fmt::format("contingency table reduces to {}x{}; association is undefined",
                                              keep_rows.size(), keep_cols.size()));
    }

    std::vector<double> row_sum(keep_rows.size(), 0.0);
    std::vector<double> col_sum(keep_cols.size(), 0.0);
    double n = 0;
    for (std::size_t a = 0; a < keep_rows.size(); ++a) {
        for (std::size_t b = 0; b < keep_cols.size(); ++b) {
            const double x = table[keep_rows[a]][keep_cols[b]];
            row_sum[a] += x;
            col_sum[b] += x;
            n += x;
        }
    }
    // chi2 = n * (sum_i (1/R_i) sum_j O_ij^2 / C_j - 1), equal to sum (O-E)^2/E.
    double s = 0;
    for (std::size_t a = 0; a < keep_rows.size(); ++a) {
        double inner = 0;
        for (std::size_t b = 0; b < keep_cols.size(); ++b) {
            const double x = table[keep_rows[a]][keep_cols[b]];
            inner += x * x / col_sum[b];
        }
        s += inner / row_sum[a];
    }
    ChiSquare out;
    out.rows = keep_rows.size();
    out.cols = keep_cols.size();
    out.n = n;
    out.dof = static_cast<int>((out.rows - 1) * (out.cols - 1));
    out.chi_square = std::max(0.0, n * (s - 1.0));
    const double k = static_cast<double>(std::min(out.rows, out.cols) - 1);
    out.cramers_v = std::min(1.0, std::sqrt(out.chi_square / (n * k)));
    return out;
}

EffectSizeReport cramers_v(const std::vector<Row>& rows, const std::string& model, Dimension factor,
                           Warnings* warnings) {
    std::size_t levels = 0;
    switch (factor) {
        case Dimension::Topic: levels = kAllTopics.size(); break;
        case Dimension::WorldType: levels = kAllWorlds.size(); break;
        case Dimension::ActorType: levels = kAllActors.size(); break;
        default: throw DomainError("Cramer's V factor must be topic, world_type or actor_type");
    }
    std::vector<std::vector<double>> full(2, std::vector<double>(levels, 0.0));
    std::vector<bool> in_design(levels, false);
    std::size_t n = 0;
    for (const auto& r : rows) {
        const auto level = static_cast<std::size_t>(ordinal(factor, value_of(r, factor)).first);
        in_design[level] = true;
        if (r.model_id != model) continue;
        full[r.cooperated() ? 0 : 1][level] += 1.0;
        ++n;
    }
    // Levels absent from the whole table are outside the run's design and
    // skipped silently; levels only this model lacks are reported by name.
    std::vector<std::vector<double>> table(2);
    std::string dropped;
    for (std::size_t j = 0; j < levels; ++j) {
        if (full[0][j] + full[1][j] > 0) {
            table[0].push_back(full[0][j]);
            table[1].push_back(full[1][j]);
            continue;
        }
        if (!in_design[j]) continue;
        if (!dropped.empty()) dropped += ", ";
        switch (factor) {
            case Dimension::Topic: dropped += to_string(kAllTopics[j]); break;
            case Dimension::WorldType: dropped += to_string(kAllWorlds[j]); break;
            default: dropped += to_string(kAllActors[j]); break;
        }
    }
    if (!dropped.empty()) {
        warn(warnings, fmt::format("Cramer's V ({}, {}): levels without observations dropped: {}", model,
                                   to_string(factor), dropped));
    }
    if (table[0].empty()) throw DegenerateDataError("no observations for " + model);
    const auto chi = cramers_v(table, warnings);
    return {model, factor, chi.cramers_v, chi.chi_square, chi.dof, n};
}

std::vector<ProportionEstimate> recognition_split(const std::vector<Row>& rows, const std::string& model,
                                                  CiMethod ci, Warnings* warnings) {
    std::vector<Row> flagged;
    for (const auto& r : rows) {
        if (r.model_id == model && r.recognition) flagged.push_back(r);
    }
    if (flagged.empty()) {
        warn(warnings, "recognition split: " + model + " has no judged records");
        return {};
    }
    return cooperation_proportion(flagged, {Dimension::Recognition}, Unit::Presentation, ci, warnings);
}

namespace {

template <class T, class ValueFn>
Heatmap build_heatmap(const std::vector<T>& items, const GroupKey& rows, const GroupKey& cols, ValueFn value) {
    check_group_key(rows, false);
    check_group_key(cols, false);
    auto project = [](const GroupValues& g, const GroupKey& dims) {
        GroupValues out;
        for (Dimension d : dims) out.values.emplace_back(d, g.value(d));
        return out;
    };
    auto label = [](const GroupValues& g) {
        std::string s;
        for (const auto& [d, v] : g.values) {
            if (!s.empty()) s += '/';
            s += v;
        }
        return s;
    };
    std::map<SortKey, std::string> row_index;
    std::map<SortKey, std::string> col_index;
    for (const auto& it : items) {
        const auto r = project(it.group, rows);
        const auto c = project(it.group, cols);
        row_index.emplace(sort_key(r), label(r));
        col_index.emplace(sort_key(c), label(c));
    }
    Heatmap h;
    std::map<SortKey, std::size_t> row_pos;
    std::map<SortKey, std::size_t> col_pos;
    for (const auto& [k, l] : row_index) {
        row_pos[k] = h.row_labels.size();
        h.row_labels.push_back(l);
    }
    for (const auto& [k, l] : col_index) {
        col_pos[k] = h.col_labels.size();
        h.col_labels.push_back(l);
    }
    h.values.assign(h.row_labels.size(), std::vector<std::optional<double>>(h.col_labels.size()));
    for (const auto& it : items) {
        auto& cell = h.values[row_pos.at(sort_key(project(it.group, rows)))]
                             [col_pos.at(sort_key(project(it.group, cols)))];
        if (cell) throw DomainError("two estimates map to the same heatmap cell; group more narrowly");
        cell = value(it);
    }
    return h;
}

}  // namespace

Heatmap heatmap_matrix(const std::vector<ProportionEstimate>& estimates, const GroupKey& rows, const GroupKey& cols) {
    return build_heatmap(estimates, rows, cols, [](const ProportionEstimate& e) { return e.p; });
}

Heatmap heatmap_matrix(const std::vector<OrderDelta>& deltas, const GroupKey& rows, const GroupKey& cols) {
    return build_heatmap(deltas, rows, cols, [](const OrderDelta& d) { return d.delta; });
}

std::string format_sig(double x, int sig) {
    if (!std::isfinite(x)) return "nan";
    if (x == 0.0) return fmt::format("{:.{}f}", 0.0, std::max(0, sig - 1));
    // Round to `sig` figures first so that 0.0996 prints as 0.10, not 0.100.
    const double mag = std::floor(std::log10(std::fabs(std::stod(fmt::format("{:.{}e}", x, sig - 1)))));
    const int decimals = std::max(0, sig - 1 - static_cast<int>(mag));
    return fmt::format("{:.{}f}", x, decimals);
}

}  // namespace framebench::analysis
