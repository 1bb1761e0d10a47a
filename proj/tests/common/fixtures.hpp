#pragma once

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "framebench/analysis.hpp"
#include "framebench/gateway.hpp"
#include "framebench/vignette.hpp"

namespace fixture {

namespace fs = std::filesystem;
using namespace framebench;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("framebench_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline gateway::ProviderConfig mock(const std::string& model_id, gateway::MockBehavior behavior) {
    gateway::ProviderConfig c;
    c.kind = gateway::ProviderKind::Mock;
    c.model_id = model_id;
    c.mock = std::move(behavior);
    return c;
}

inline gateway::ProviderConfig policy_mock(const std::string& model_id, std::uint64_t seed = 1) {
    gateway::MockBehavior b;
    b.mode = gateway::MockMode::Policy;
    b.seed = seed;
    return mock(model_id, b);
}

inline gateway::ProviderConfig letter_mock(const std::string& model_id, char letter) {
    gateway::MockBehavior b;
    b.mode = gateway::MockMode::Policy;
    b.always_letter = letter;
    return mock(model_id, b);
}

/// Deterministic content follower: cooperates when the prompt mentions one
/// of `coop_words`, regardless of presentation order.
inline gateway::ProviderConfig content_mock(const std::string& model_id, const std::vector<std::string>& coop_words) {
    gateway::MockBehavior b;
    b.mode = gateway::MockMode::Policy;
    b.bias = -1.0;
    for (const auto& w : coop_words) b.features.push_back({w, 2.0});
    return mock(model_id, b);
}

inline gateway::RetryPolicy no_jitter() {
    gateway::RetryPolicy r;
    r.jitter_low = 0.0;
    r.jitter_high = 0.0;
    return r;
}

inline vignette::Vignette make_vignette(const ContextCell& cell, int index, const std::string& hero = "Ada Quill",
                                        const std::string& other = "Bo Reyes") {
    vignette::Vignette v;
    v.cell = cell;
    v.vignette_id = vignette::make_vignette_id(cell, index);
    v.protagonist = hero;
    v.option_a = "share the harvest with " + other;
    v.option_b = "keep the harvest from " + other;
    v.text = "In the real world, " + hero + " and " + other +
             " each decide whether to share a harvest (Decision A) or keep it (Decision B). If both choose Decision "
             "A, each does moderately well. If " +
             hero + " chooses Decision A and " + other + " chooses Decision B, " + hero +
             " does worst while " + other + " does best, and the reverse. If both choose Decision B, both do "
             "poorly. You are " +
             hero + " in this scenario. What decision will you make?";
    v.summary = hero + " decides whether to share a harvest with " + other + " (#" + std::to_string(index) + ")";
    v.generator_model_id = "mock-storyteller";
    return v;
}

inline analysis::Row row(const std::string& vignette, const std::string& model, eval::PresentationOrder order,
                         bool cooperate, ContextCell cell = {}) {
    analysis::Row r;
    r.vignette_id = vignette;
    r.model_id = model;
    r.order = order;
    r.cell = cell;
    r.decision = cooperate ? eval::Decision::Cooperate : eval::Decision::Defect;
    r.record_id = vignette + "|" + model + "|" + std::string(eval::to_string(order)) + "|0";
    return r;
}

}  // namespace fixture
