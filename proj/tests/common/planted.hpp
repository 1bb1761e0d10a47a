#pragma once

// Synthetic decision data with a known logistic ground truth over the
// categorical feature layout (topic, world, actor one-hot blocks plus the
// order bit).

#include <cmath>
#include <random>
#include <vector>

#include "framebench/analysis.hpp"
#include "framebench/context.hpp"
#include "framebench/predictor.hpp"

namespace planted {

using namespace framebench;

struct Truth {
    std::vector<double> topic;
    std::vector<double> world;
    std::vector<double> actor;
    double order = 0.0;
    double bias = 0.0;

    [[nodiscard]] double logit(const ContextCell& c, eval::PresentationOrder o) const {
        return bias + topic[static_cast<int>(c.topic)] + world[static_cast<int>(c.world)] +
               actor[static_cast<int>(c.actor)] + (o == eval::PresentationOrder::CooperateIsA ? order : 0.0);
    }
    [[nodiscard]] double prob(const ContextCell& c, eval::PresentationOrder o) const {
        return 1.0 / (1.0 + std::exp(-logit(c, o)));
    }
};

/// Each block sums to zero, so the one-hot weights are identifiable up to the
/// shared intercept.
inline Truth strong_truth(double scale = 2.0) {
    Truth t;
    for (double x : {-4.5, -3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5, 4.5}) t.topic.push_back(scale * x);
    t.world = {-1.5 * scale, 1.5 * scale};
    t.actor = {-2.5 * scale, 0.0, 2.5 * scale};
    t.order = scale;
    t.bias = -0.5 * scale;
    return t;
}

/// Rows drawn uniformly over the full grid and both orders; labels are
/// Bernoulli(sigmoid(logit)).
inline std::vector<analysis::Row> rows(const Truth& truth, std::size_t n, std::uint64_t seed,
                                       const std::string& model = "planted") {
    std::mt19937_64 rng(seed);
    const auto grid = full_grid();
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<analysis::Row> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        analysis::Row r;
        r.cell = grid[pick(rng)];
        r.order = (rng() & 1) != 0 ? eval::PresentationOrder::CooperateIsA : eval::PresentationOrder::CooperateIsB;
        r.decision = u(rng) < truth.prob(r.cell, r.order) ? eval::Decision::Cooperate : eval::Decision::Defect;
        r.model_id = model;
        r.vignette_id = "v" + std::to_string(i);
        r.record_id = r.vignette_id + "|" + model;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace planted
