#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace mock_config {

using nlohmann::json;

/// Offline run configuration: a policy storyteller, two stochastic decision
/// models with different context sensitivities, and a policy judge.
inline json pipeline(const std::filesystem::path& storage, int per_cell = 4, int batch = 2) {
    return json::parse(R"({
      "providers": {
        "storyteller": {"kind": "mock", "model_id": "mock-storyteller", "max_tokens": 16000,
                        "mock": {"mode": "policy", "seed": 7}},
        "alpha": {"kind": "mock", "model_id": "mock-alpha",
                  "mock": {"mode": "policy", "seed": 11, "bias": 0.2, "stochastic": true, "order_weight": 0.8,
                           "game_theory_rate": 0.3,
                           "features": [{"contains": "allies", "weight": 2.0},
                                        {"contains": "bitter enemies", "weight": -2.5},
                                        {"contains": "imaginary world", "weight": 0.7}]}},
        "beta": {"kind": "mock", "model_id": "mock-beta",
                 "mock": {"mode": "policy", "seed": 23, "bias": -0.4, "stochastic": true, "order_weight": 0.3,
                          "game_theory_rate": 0.1,
                          "features": [{"contains": "allies", "weight": 1.5},
                                       {"contains": "bitter enemies", "weight": -1.5}]}},
        "referee": {"kind": "mock", "model_id": "mock-judge", "mock": {"mode": "policy", "seed": 5}}
      },
      "generator": "storyteller",
      "models": ["alpha", "beta"],
      "judge": "referee",
      "plan": {"topics": ["business", "sporting_events"], "world_types": "all", "actor_types": "all",
               "seed": 2024, "payoff": "canonical_pd"},
      "retry": {"max_retries": 10, "base_wait_seconds": 3.0, "jitter_low": 1.0, "jitter_high": 5.0},
      "concurrency": {"max_in_flight": 4, "max_parallel_cells": 2},
      "analysis": {"unit": "vignette", "ci": "wald"},
      "predictor": {"model_kind": "logistic", "seed": 99}
    })")
        .patch(json::array({{{"op", "add"}, {"path", "/plan/per_cell_count"}, {"value", per_cell}},
                            {{"op", "add"}, {"path", "/plan/batch_size"}, {"value", batch}},
                            {{"op", "add"}, {"path", "/storage"}, {"value", {{"dir", storage.string()}}}}}));
}

}  // namespace mock_config
