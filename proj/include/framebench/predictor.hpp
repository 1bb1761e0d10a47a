#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "framebench/analysis.hpp"

namespace framebench::predictor {

enum class FeatureKind { CategoricalOneHot, Embedding };
enum class ModelKind { Logistic, BoostedTrees };

[[nodiscard]] std::string_view to_string(FeatureKind k);
[[nodiscard]] std::string_view to_string(ModelKind k);
[[nodiscard]] ModelKind model_kind_from_string(std::string_view s);

/// topic (10) + world (2) + actor (3) + order bit.
inline constexpr std::size_t kCategoricalDim = 16;

struct FeatureSchema {
    FeatureKind kind = FeatureKind::CategoricalOneHot;
    std::vector<std::string> names;

    [[nodiscard]] std::size_t dim() const noexcept { return names.size(); }
    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// Names follow the canonical enum order; the last is "cooperate_first".
[[nodiscard]] FeatureSchema categorical_schema();
[[nodiscard]] FeatureSchema embedding_schema(std::size_t dim, bool with_order);

struct LabeledExample {
    std::vector<double> features;
    int label = 0;  ///< 1 = Cooperate, 0 = Defect
    std::string record_id;
    std::string vignette_id;
};

struct Dataset {
    FeatureSchema schema;
    std::vector<LabeledExample> examples;
};

/// One-hot topic, world and actor blocks plus 1 when Cooperate is option A.
[[nodiscard]] std::vector<double> encode_features(const ContextCell& cell, eval::PresentationOrder order);
[[nodiscard]] std::vector<double> encode_features(const analysis::Row& row);

/// Categorical dataset over the given rows (one model's records, typically).
[[nodiscard]] Dataset categorical_dataset(const std::vector<analysis::Row>& rows);

struct Hyperparams {
    /// Logistic: multiplier on the step 1/L, where L bounds the loss
    /// curvature. Trees: shrinkage per round.
    double learning_rate = 1.0;
    int rounds = 1000;       ///< gradient steps or boosting rounds
    int max_depth = 3;       ///< trees only
    double l2 = 1e-4;        ///< weight penalty (logistic) or leaf penalty lambda (trees)
    double subsample = 1.0;  ///< row fraction per tree
    double colsample = 1.0;  ///< feature fraction per tree
    double gamma = 0.0;      ///< minimum split gain
    double min_child_weight = 1.0;

    [[nodiscard]] static Hyperparams logistic_defaults();
    [[nodiscard]] static Hyperparams tree_defaults();
    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct TrainConfig {
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
    ModelKind kind = ModelKind::Logistic;
    Hyperparams hyperparams = Hyperparams::logistic_defaults();

    void validate() const;
};

/// Seeded permutation of the labels across examples; a no-signal control.
void shuffle_labels(std::vector<LabeledExample>& examples, std::uint64_t seed);

/// Seeded Fisher-Yates shuffle, split at floor(ratio * n). Needs >= 10 examples.
[[nodiscard]] std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_dataset(
    const std::vector<LabeledExample>& examples, double split_ratio, std::uint64_t seed);

struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;  ///< x <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  ///< leaf margin contribution
};

struct Tree {
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root
};

struct TrainedModel {
    ModelKind kind = ModelKind::Logistic;
    FeatureSchema schema;
    std::uint64_t seed = 0;
    Hyperparams hyperparams;
    std::vector<double> weights;  ///< logistic
    double bias = 0.0;            ///< logistic intercept or tree base margin
    std::vector<Tree> trees;
};

/// Throws DegenerateDataError when the training labels hold one class.
[[nodiscard]] TrainedModel train(const Dataset& data, const TrainConfig& config);
[[nodiscard]] TrainedModel train(const FeatureSchema& schema, const std::vector<LabeledExample>& examples,
                                 const TrainConfig& config);

/// P(Cooperate). Throws SchemaError on a dimension mismatch.
[[nodiscard]] double predict_proba(const TrainedModel& model, const std::vector<double>& features);

struct Metrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    double brier = 0.0;
    std::optional<double> auroc;  ///< unset for a one-class test set
    std::size_t n = 0;
};

/// Rank-sum AUROC with ties counted one half. Throws DegenerateDataError
/// unless both classes occur.
[[nodiscard]] double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Threshold 0.5; F1 treats Cooperate as positive.
[[nodiscard]] Metrics score(const std::vector<double>& probs, const std::vector<int>& labels);
[[nodiscard]] Metrics evaluate(const TrainedModel& model, const std::vector<LabeledExample>& test);

struct EmbeddingLoad {
    Dataset data;
    std::size_t skipped = 0;  ///< rows whose vignette has no vector
};

/// Line-delimited {"vignette_id": ..., "vector": [...]}. Throws FormatError on
/// ragged dimensions or malformed lines.
[[nodiscard]] EmbeddingLoad load_embeddings(const std::filesystem::path& file, const std::vector<analysis::Row>& rows,
                                            bool with_order = true);

struct SearchGrid {
    std::vector<int> max_depth{3, 5, 7, 9};
    std::vector<double> learning_rate{0.01, 0.05, 0.1};
    std::vector<int> rounds{50, 100, 200, 500};
    std::vector<double> subsample{0.8, 1.0};
    std::vector<double> colsample{0.8, 1.0};
    std::vector<double> gamma{0.0, 1.0};

    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] std::vector<Hyperparams> configs() const;
};

struct SearchResult {
    Hyperparams best;
    double cv_auroc = 0.0;
    std::vector<std::pair<Hyperparams, double>> scores;  ///< grid order
};

/// Exhaustive boosted-tree search scored by k-fold mean AUROC. Ties go to
/// fewer rounds, then smaller depth, then grid order. Refuses grids larger
/// than `budget` with a ConfigError that reports the size.
[[nodiscard]] SearchResult hyperparam_search(const Dataset& data, const SearchGrid& grid, std::uint64_t seed,
                                             int folds = 5, std::size_t budget = 512, std::size_t max_parallel = 1);

[[nodiscard]] nlohmann::json to_json(const TrainedModel& m);
[[nodiscard]] TrainedModel model_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const Metrics& m);
[[nodiscard]] nlohmann::json to_json(const Hyperparams& h);
[[nodiscard]] Hyperparams hyperparams_from_json(const nlohmann::json& j, const Hyperparams& defaults);

void save_model(const TrainedModel& m, const std::filesystem::path& path);
[[nodiscard]] TrainedModel load_model(const std::filesystem::path& path);

}  // namespace framebench::predictor
