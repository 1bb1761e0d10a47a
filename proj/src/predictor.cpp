#include "framebench/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include <fmt/format.h>

#include "framebench/error.hpp"
#include "framebench/parallel.hpp"

namespace framebench::predictor {

using nlohmann::json;

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Uniform integer in [0, n) by rejection; portable across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[bounded(rng, i)]);
    }
}

void check_examples(const FeatureSchema& schema, const std::vector<LabeledExample>& examples) {
    for (const auto& e : examples) {
        if (e.features.size() != schema.dim()) {
            throw SchemaError(fmt::format("example {} has {} features, schema expects {}", e.record_id,
                                          e.features.size(), schema.dim()));
        }
        if (e.label != 0 && e.label != 1) throw SchemaError("labels must be 0 or 1");
    }
}

// --- logistic --------------------------------------------------------------

void train_logistic(TrainedModel& m, const std::vector<LabeledExample>& ex) {
    const std::size_t d = m.schema.dim();
    const double n = static_cast<double>(ex.size());
    const auto& hp = m.hyperparams;
    double mean_sq = 0;
    for (const auto& e : ex) {
        for (double x : e.features) mean_sq += x * x;
    }
    mean_sq /= n;
    // 0.25 * lambda_max(X'X / n) <= 0.25 * mean ||x||^2 (intercept adds 1).
    const double step = hp.learning_rate / (0.25 * (mean_sq + 1.0) + hp.l2);

    m.weights.assign(d, 0.0);
    m.bias = 0.0;
    std::vector<double> grad(d);
    for (int it = 0; it < hp.rounds; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0;
        for (const auto& e : ex) {
            double z = m.bias;
            for (std::size_t j = 0; j < d; ++j) z += m.weights[j] * e.features[j];
            const double r = sigmoid(z) - e.label;
            grad_b += r;
            for (std::size_t j = 0; j < d; ++j) grad[j] += r * e.features[j];
        }
        for (std::size_t j = 0; j < d; ++j) {
            m.weights[j] -= step * (grad[j] / n + hp.l2 * m.weights[j]);
        }
        m.bias -= step * grad_b / n;
    }
}

// --- boosted trees ---------------------------------------------------------

constexpr std::size_t kMaxBins = 256;

struct Binned {
    std::vector<std::vector<double>> cuts;       ///< per feature, ascending
    std::vector<std::vector<std::uint16_t>> bin;  ///< per feature, per row
};

Binned bin_features(const std::vector<LabeledExample>& ex, std::size_t d) {
    Binned b;
    b.cuts.resize(d);
    b.bin.resize(d);
    std::vector<double> vals(ex.size());
    for (std::size_t f = 0; f < d; ++f) {
        for (std::size_t i = 0; i < ex.size(); ++i) vals[i] = ex[i].features[f];
        std::vector<double> u = vals;
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        if (u.size() > kMaxBins) {
            std::vector<double> q;
            for (std::size_t k = 1; k <= kMaxBins; ++k) {
                q.push_back(u[(k * (u.size() - 1)) / kMaxBins]);
            }
            q.erase(std::unique(q.begin(), q.end()), q.end());
            u = std::move(q);
        }
        b.cuts[f] = u;
        b.bin[f].resize(ex.size());
        for (std::size_t i = 0; i < ex.size(); ++i) {
            const auto pos = std::lower_bound(u.begin(), u.end(), vals[i]) - u.begin();
            b.bin[f][i] = static_cast<std::uint16_t>(std::min<std::size_t>(pos, u.size() - 1));
        }
    }
    return b;
}

struct TreeBuilder {
    const Binned& binned;
    const std::vector<double>& g;
    const std::vector<double>& h;
    const std::vector<std::size_t>& features;
    const Hyperparams& hp;
    Tree tree;

    int build(std::vector<std::size_t>& rows, int depth) {
        double G = 0, H = 0;
        for (auto i : rows) {
            G += g[i];
            H += h[i];
        }
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[id].value = -G / (H + hp.l2) * hp.learning_rate;
        if (depth >= hp.max_depth || H < 2 * hp.min_child_weight) return id;

        const double parent = G * G / (H + hp.l2);
        double best_gain = 0;
        int best_f = -1;
        std::size_t best_bin = 0;
        std::vector<double> hg, hh;
        for (auto f : features) {
            const auto nb = binned.cuts[f].size();
            if (nb < 2) continue;
            hg.assign(nb, 0.0);
            hh.assign(nb, 0.0);
            for (auto i : rows) {
                hg[binned.bin[f][i]] += g[i];
                hh[binned.bin[f][i]] += h[i];
            }
            double GL = 0, HL = 0;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                GL += hg[b];
                HL += hh[b];
                const double GR = G - GL;
                const double HR = H - HL;
                if (HL < hp.min_child_weight || HR < hp.min_child_weight) continue;
                const double gain =
                    0.5 * (GL * GL / (HL + hp.l2) + GR * GR / (HR + hp.l2) - parent) - hp.gamma;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = static_cast<int>(f);
                    best_bin = b;
                }
            }
        }
        if (best_f < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto i : rows) {
            (binned.bin[best_f][i] <= best_bin ? left : right).push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        auto& node = tree.nodes[id];
        node.feature = best_f;
        node.threshold = binned.cuts[best_f][best_bin];
        node.left = l;
        node.right = r;
        return id;
    }
};

double tree_value(const Tree& t, const std::vector<double>& x) {
    int id = 0;
    while (t.nodes[id].feature >= 0) {
        const auto& n = t.nodes[id];
        id = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return t.nodes[id].value;
}

void train_trees(TrainedModel& m, const std::vector<LabeledExample>& ex) {
    const auto& hp = m.hyperparams;
    const std::size_t n = ex.size();
    const std::size_t d = m.schema.dim();
    std::mt19937_64 rng(m.seed);
    const Binned binned = bin_features(ex, d);

    double pos = 0;
    for (const auto& e : ex) pos += e.label;
    const double prior = pos / static_cast<double>(n);
    m.bias = std::log(prior / (1.0 - prior));

    std::vector<double> margin(n, m.bias), g(n), h(n);
    std::vector<std::size_t> all_features(d);
    std::iota(all_features.begin(), all_features.end(), 0);
    const std::size_t n_features =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(hp.colsample * static_cast<double>(d) + 1e-9)));

    for (int round = 0; round < hp.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            g[i] = p - ex[i].label;
            h[i] = std::max(p * (1.0 - p), 1e-16);
        }
        std::vector<std::size_t> rows;
        if (hp.subsample < 1.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (uniform01(rng) < hp.subsample) rows.push_back(i);
            }
            if (rows.empty()) rows.push_back(bounded(rng, n));
        } else {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), 0);
        }
        std::vector<std::size_t> features = all_features;
        if (n_features < d) {
            fisher_yates(features, rng);
            features.resize(n_features);
            std::sort(features.begin(), features.end());
        }
        TreeBuilder builder{binned, g, h, features, hp, {}};
        builder.build(rows, 0);
        for (std::size_t i = 0; i < n; ++i) margin[i] += tree_value(builder.tree, ex[i].features);
        m.trees.push_back(std::move(builder.tree));
    }
}

}  // namespace

std::string_view to_string(FeatureKind k) { return k == FeatureKind::Embedding ? "embedding" : "categorical_onehot"; }

std::string_view to_string(ModelKind k) { return k == ModelKind::BoostedTrees ? "boosted_trees" : "logistic"; }

ModelKind model_kind_from_string(std::string_view s) {
    if (s == "logistic") return ModelKind::Logistic;
    if (s == "boosted_trees") return ModelKind::BoostedTrees;
    throw ConfigError("model kind must be 'logistic' or 'boosted_trees', got '" + std::string(s) + "'");
}

FeatureSchema categorical_schema() {
    FeatureSchema s;
    s.kind = FeatureKind::CategoricalOneHot;
    for (Topic t : kAllTopics) s.names.push_back("topic=" + std::string(to_string(t)));
    for (WorldType w : kAllWorlds) s.names.push_back("world_type=" + std::string(to_string(w)));
    for (ActorType a : kAllActors) s.names.push_back("actor_type=" + std::string(to_string(a)));
    s.names.emplace_back("cooperate_first");
    return s;
}

FeatureSchema embedding_schema(std::size_t dim, bool with_order) {
    FeatureSchema s;
    s.kind = FeatureKind::Embedding;
    for (std::size_t i = 0; i < dim; ++i) s.names.push_back(fmt::format("e{}", i));
    if (with_order) s.names.emplace_back("cooperate_first");
    return s;
}

std::vector<double> encode_features(const ContextCell& cell, eval::PresentationOrder order) {
    std::vector<double> x(kCategoricalDim, 0.0);
    x[static_cast<std::size_t>(cell.topic)] = 1.0;
    x[kAllTopics.size() + static_cast<std::size_t>(cell.world)] = 1.0;
    x[kAllTopics.size() + kAllWorlds.size() + static_cast<std::size_t>(cell.actor)] = 1.0;
    x[kCategoricalDim - 1] = order == eval::PresentationOrder::CooperateIsA ? 1.0 : 0.0;
    return x;
}

std::vector<double> encode_features(const analysis::Row& row) { return encode_features(row.cell, row.order); }

Dataset categorical_dataset(const std::vector<analysis::Row>& rows) {
    Dataset d;
    d.schema = categorical_schema();
    for (const auto& r : rows) {
        d.examples.push_back({encode_features(r), r.cooperated() ? 1 : 0, r.record_id, r.vignette_id});
    }
    return d;
}

Hyperparams Hyperparams::logistic_defaults() { return {}; }

Hyperparams Hyperparams::tree_defaults() {
    Hyperparams h;
    h.learning_rate = 0.1;
    h.rounds = 100;
    h.max_depth = 3;
    h.l2 = 1.0;
    return h;
}

void TrainConfig::validate() const {
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie strictly between 0 and 1");
    const auto& h = hyperparams;
    if (!(h.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (h.rounds < 1) throw ConfigError("rounds must be at least 1");
    if (h.l2 < 0 || h.gamma < 0 || h.min_child_weight < 0) throw ConfigError("penalties must be nonnegative");
    if (kind == ModelKind::BoostedTrees) {
        if (h.max_depth < 1) throw ConfigError("max_depth must be at least 1");
        if (!(h.subsample > 0 && h.subsample <= 1)) throw ConfigError("subsample must lie in (0, 1]");
        if (!(h.colsample > 0 && h.colsample <= 1)) throw ConfigError("colsample must lie in (0, 1]");
    }
}

void shuffle_labels(std::vector<LabeledExample>& examples, std::uint64_t seed) {
    std::vector<int> labels;
    for (const auto& e : examples) labels.push_back(e.label);
    std::mt19937_64 rng(seed);
    fisher_yates(labels, rng);
    for (std::size_t i = 0; i < examples.size(); ++i) examples[i].label = labels[i];
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_dataset(
    const std::vector<LabeledExample>& examples, double split_ratio, std::uint64_t seed) {
    if (examples.size() < 10) {
        throw DomainError(fmt::format("a train/test split needs at least 10 examples, got {}", examples.size()));
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie strictly between 0 and 1");
    std::vector<std::size_t> idx(examples.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    fisher_yates(idx, rng);
    const auto cut = static_cast<std::size_t>(std::floor(split_ratio * static_cast<double>(examples.size())));
    std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        (k < cut ? out.first : out.second).push_back(examples[idx[k]]);
    }
    return out;
}

TrainedModel train(const Dataset& data, const TrainConfig& config) { return train(data.schema, data.examples, config); }

TrainedModel train(const FeatureSchema& schema, const std::vector<LabeledExample>& examples,
                   const TrainConfig& config) {
    config.validate();
    check_examples(schema, examples);
    std::size_t pos = 0;
    for (const auto& e : examples) pos += static_cast<std::size_t>(e.label);
    if (pos == 0 || pos == examples.size()) {
        throw DegenerateDataError(fmt::format("training labels hold a single class ({} examples, {} Cooperate)",
                                              examples.size(), pos));
    }
    TrainedModel m;
    m.kind = config.kind;
    m.schema = schema;
    m.seed = config.seed;
    m.hyperparams = config.hyperparams;
    if (config.kind == ModelKind::Logistic) {
        train_logistic(m, examples);
    } else {
        train_trees(m, examples);
    }
    return m;
}

double predict_proba(const TrainedModel& model, const std::vector<double>& features) {
    if (features.size() != model.schema.dim()) {
        throw SchemaError(fmt::format("model expects {} features, got {}", model.schema.dim(), features.size()));
    }
    double z = model.bias;
    if (model.kind == ModelKind::Logistic) {
        for (std::size_t j = 0; j < features.size(); ++j) z += model.weights[j] * features[j];
    } else {
        for (const auto& t : model.trees) z += tree_value(t, features);
    }
    return sigmoid(z);
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DomainError("scores and labels differ in length");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum = 0;
    double pos = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) {
                rank_sum += avg_rank;
                pos += 1;
            }
        }
        i = j;
    }
    const double neg = static_cast<double>(scores.size()) - pos;
    if (pos == 0 || neg == 0) throw DegenerateDataError("AUROC is undefined when the labels hold a single class");
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

Metrics score(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (probs.empty()) throw DomainError("cannot score an empty test set");
    if (probs.size() != labels.size()) throw DomainError("probabilities and labels differ in length");
    Metrics m;
    m.n = probs.size();
    std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
    double brier = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int pred = probs[i] >= 0.5 ? 1 : 0;
        correct += pred == labels[i] ? 1 : 0;
        tp += pred == 1 && labels[i] == 1;
        fp += pred == 1 && labels[i] == 0;
        fn += pred == 0 && labels[i] == 1;
        brier += (probs[i] - labels[i]) * (probs[i] - labels[i]);
    }
    const double n = static_cast<double>(m.n);
    m.accuracy = static_cast<double>(correct) / n;
    m.brier = brier / n;
    const std::size_t denom = 2 * tp + fp + fn;
    m.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    try {
        m.auroc = auroc(probs, labels);
    } catch (const DegenerateDataError&) {
        m.auroc.reset();
    }
    return m;
}

Metrics evaluate(const TrainedModel& model, const std::vector<LabeledExample>& test) {
    std::vector<double> probs;
    std::vector<int> labels;
    for (const auto& e : test) {
        probs.push_back(predict_proba(model, e.features));
        labels.push_back(e.label);
    }
    return score(probs, labels);
}

EmbeddingLoad load_embeddings(const std::filesystem::path& file, const std::vector<analysis::Row>& rows,
                              bool with_order) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot open embeddings file " + file.string());
    std::unordered_map<std::string, std::vector<double>> vectors;
    std::optional<std::size_t> dim;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError(fmt::format("{}:{}: not JSON ({})", file.string(), lineno, e.what()));
        }
        if (!j.is_object() || !j.contains("vignette_id")) {
            throw FormatError(fmt::format("{}:{}: expected an object with vignette_id", file.string(), lineno));
        }
        const json& v = j.contains("vector") ? j.at("vector") : j.value("embedding", json());
        if (!v.is_array()) throw FormatError(fmt::format("{}:{}: missing vector", file.string(), lineno));
        std::vector<double> vec;
        for (const auto& x : v) {
            if (!x.is_number()) throw FormatError(fmt::format("{}:{}: non-numeric component", file.string(), lineno));
            vec.push_back(x.get<double>());
        }
        if (!dim) dim = vec.size();
        if (vec.size() != *dim || vec.empty()) {
            throw FormatError(fmt::format("{}:{}: vector has dimension {}, expected {}", file.string(), lineno,
                                          vec.size(), *dim));
        }
        vectors[j.at("vignette_id").get<std::string>()] = std::move(vec);
    }
    if (!dim) throw FormatError("embeddings file " + file.string() + " is empty");

    EmbeddingLoad out;
    out.data.schema = embedding_schema(*dim, with_order);
    for (const auto& r : rows) {
        const auto it = vectors.find(r.vignette_id);
        if (it == vectors.end()) {
            ++out.skipped;
            continue;
        }
        std::vector<double> x = it->second;
        if (with_order) x.push_back(r.order == eval::PresentationOrder::CooperateIsA ? 1.0 : 0.0);
        out.data.examples.push_back({std::move(x), r.cooperated() ? 1 : 0, r.record_id, r.vignette_id});
    }
    return out;
}

std::size_t SearchGrid::size() const noexcept {
    return max_depth.size() * learning_rate.size() * rounds.size() * subsample.size() * colsample.size() *
           gamma.size();
}

std::vector<Hyperparams> SearchGrid::configs() const {
    std::vector<Hyperparams> out;
    for (int d : max_depth)
        for (double lr : learning_rate)
            for (int r : rounds)
                for (double ss : subsample)
                    for (double cs : colsample)
                        for (double g : gamma) {
                            Hyperparams h = Hyperparams::tree_defaults();
                            h.max_depth = d;
                            h.learning_rate = lr;
                            h.rounds = r;
                            h.subsample = ss;
                            h.colsample = cs;
                            h.gamma = g;
                            out.push_back(h);
                        }
    return out;
}

SearchResult hyperparam_search(const Dataset& data, const SearchGrid& grid, std::uint64_t seed, int folds,
                               std::size_t budget, std::size_t max_parallel) {
    const std::size_t size = grid.size();
    if (size == 0) throw ConfigError("hyperparameter grid is empty");
    if (size > budget) {
        throw ConfigError(fmt::format("hyperparameter grid has {} configurations, over the budget of {}", size, budget));
    }
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    const auto& ex = data.examples;
    if (ex.size() < static_cast<std::size_t>(folds)) throw DomainError("fewer examples than folds");

    std::vector<std::size_t> idx(ex.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    fisher_yates(idx, rng);
    std::vector<int> fold_of(ex.size());
    for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));

    const auto configs = grid.configs();
    std::vector<double> cv(configs.size(), 0.0);
    bounded_for_each(configs.size(), max_parallel, [&](std::size_t c) {
        double total = 0;
        int used = 0;
        for (int f = 0; f < folds; ++f) {
            std::vector<LabeledExample> tr, te;
            for (std::size_t i = 0; i < ex.size(); ++i) (fold_of[i] == f ? te : tr).push_back(ex[i]);
            try {
                const auto model = train(data.schema, tr, {0.8, seed, ModelKind::BoostedTrees, configs[c]});
                std::vector<double> p;
                std::vector<int> y;
                for (const auto& e : te) {
                    p.push_back(predict_proba(model, e.features));
                    y.push_back(e.label);
                }
                total += auroc(p, y);
                ++used;
            } catch (const DegenerateDataError&) {
                // one-class fold: contributes nothing
            }
        }
        cv[c] = used == 0 ? std::numeric_limits<double>::quiet_NaN() : total / used;
    });

    SearchResult out;
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        out.scores.emplace_back(configs[c], cv[c]);
        if (std::isnan(cv[c])) continue;
        if (!best) {
            best = c;
            continue;
        }
        const auto& b = configs[*best];
        const auto& h = configs[c];
        if (cv[c] > cv[*best] ||
            (cv[c] == cv[*best] &&
             (h.rounds < b.rounds || (h.rounds == b.rounds && h.max_depth < b.max_depth)))) {
            best = c;
        }
    }
    if (!best) throw DegenerateDataError("no fold held both classes; cross-validated AUROC is undefined");
    out.best = configs[*best];
    out.cv_auroc = cv[*best];
    return out;
}

json to_json(const Hyperparams& h) {
    return {{"learning_rate", h.learning_rate}, {"rounds", h.rounds},       {"max_depth", h.max_depth},
            {"l2", h.l2},                       {"subsample", h.subsample}, {"colsample", h.colsample},
            {"gamma", h.gamma},                 {"min_child_weight", h.min_child_weight}};
}

Hyperparams hyperparams_from_json(const json& j, const Hyperparams& defaults) {
    Hyperparams h = defaults;
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.rounds = j.value("rounds", h.rounds);
    h.max_depth = j.value("max_depth", h.max_depth);
    h.l2 = j.value("l2", h.l2);
    h.subsample = j.value("subsample", h.subsample);
    h.colsample = j.value("colsample", h.colsample);
    h.gamma = j.value("gamma", h.gamma);
    h.min_child_weight = j.value("min_child_weight", h.min_child_weight);
    return h;
}

json to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"f1", m.f1},
            {"brier", m.brier},
            {"auroc", m.auroc ? json(*m.auroc) : json(nullptr)},
            {"n", m.n}};
}

json to_json(const TrainedModel& m) {
    json trees = json::array();
    for (const auto& t : m.trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        trees.push_back(std::move(nodes));
    }
    return {{"model_kind", to_string(m.kind)},
            {"schema", {{"feature_kind", to_string(m.schema.kind)}, {"names", m.schema.names}}},
            {"seed", m.seed},
            {"hyperparams", to_json(m.hyperparams)},
            {"weights", m.weights},
            {"bias", m.bias},
            {"trees", std::move(trees)}};
}

TrainedModel model_from_json(const json& j) {
    try {
        TrainedModel m;
        m.kind = model_kind_from_string(j.at("model_kind").get<std::string>());
        const auto& s = j.at("schema");
        m.schema.kind = s.at("feature_kind").get<std::string>() == "embedding" ? FeatureKind::Embedding
                                                                              : FeatureKind::CategoricalOneHot;
        m.schema.names = s.at("names").get<std::vector<std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.hyperparams = hyperparams_from_json(j.at("hyperparams"), {});
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        for (const auto& t : j.at("trees")) {
            Tree tree;
            for (const auto& n : t) {
                tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                      n.at(3).get<int>(), n.at(4).get<double>()});
            }
            m.trees.push_back(std::move(tree));
        }
        if (m.kind == ModelKind::Logistic && m.weights.size() != m.schema.dim()) {
            throw SchemaError("stored weights do not match the stored feature schema");
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write model file " + path.string());
    out << to_json(m).dump(2) << "\n";
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file " + path.string());
    try {
        return model_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError("model file " + path.string() + " is not JSON: " + e.what());
    }
}

}  // namespace framebench::predictor
