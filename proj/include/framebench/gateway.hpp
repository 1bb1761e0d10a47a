#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace framebench::gateway {

enum class ProviderKind { Live, Mock };

/// Wire format of a live endpoint. Prompts are sent as a single user turn
/// (or raw prompt for completions); no system prompt is ever added.
enum class ApiStyle { OpenAIChat, AnthropicMessages, Completions };

enum class MockMode { FixedText, ScriptedSequence, Policy };

/// Policy rule: when the prompt contains `contains`, answer `response`.
struct MockRule {
    std::string contains;
    std::string response;
};

struct FeatureWeight {
    std::string contains;
    double weight = 0.0;
};

/// Deterministic offline provider. In Policy mode the mock recognises the
/// pipeline's own prompt kinds (story generation, summaries, decisions,
/// recognition judging) and answers each one in a plausible format; see
/// mock_provider.cpp.
struct MockBehavior {
    MockMode mode = MockMode::FixedText;
    std::uint64_t seed = 0;
    std::string fixed_text;
    std::vector<std::string> script;
    std::vector<MockRule> rules;

    // Decision model for Policy mode: logit = bias + sum(weights of matched
    // features) + order_weight if the cooperative option is listed as A.
    double bias = 0.0;
    std::vector<FeatureWeight> features;
    double order_weight = 0.0;
    bool stochastic = false;  ///< draw from sigmoid(logit) instead of thresholding at 0
    std::string cooperative_marker = "Decision A in the story";
    std::optional<char> always_letter;  ///< answer this letter regardless of content
    double game_theory_rate = 0.0;      ///< fraction of justifications naming the game

    std::vector<int> failure_schedule;  ///< 1-based attempt indices that fail, per request
    std::vector<std::string> fail_when_contains;
    int latency_ms = 0;
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Mock;
    ApiStyle api_style = ApiStyle::OpenAIChat;
    std::string endpoint_url;
    std::string model_id;
    std::string api_key_env;  ///< empty: no auth header (local endpoints)
    int max_tokens = 4096;
    double temperature = 0.0;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    double timeout_seconds = 120.0;
    double requests_per_minute = 0.0;  ///< 0 disables rate limiting
    std::optional<std::uint64_t> seed;
    std::optional<MockBehavior> mock;
    std::vector<ProviderConfig> fallbacks;  ///< tried in order within one attempt

    /// Throws ConfigError on a structurally invalid config. Does not look at
    /// the environment.
    void validate() const;
};

struct RetryPolicy {
    int max_retries = 10;
    double base_wait_seconds = 3.0;
    double jitter_low = 1.0;
    double jitter_high = 5.0;

    void validate() const;
};

struct ChatExchange {
    std::string prompt;
    std::string response_text;
    std::string model_id;
    int attempt_count = 1;
    std::int64_t latency_ms = 0;
    std::chrono::system_clock::time_point timestamp;
};

/// A single failed attempt. `status` is the HTTP status, 0 for connection
/// level failures and 408 for timeouts.
class AttemptFailure : public std::runtime_error {
public:
    AttemptFailure(const std::string& what, int status) : std::runtime_error(what), status_(status) {}
    [[nodiscard]] int status() const noexcept { return status_; }

private:
    int status_;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// One attempt. `attempt` is 1-based. Throws AttemptFailure.
    virtual std::string send(const ProviderConfig& config, std::string_view prompt, int attempt) = 0;
};

class Sleeper {
public:
    virtual ~Sleeper() = default;
    virtual void sleep(double seconds) = 0;
};

class RealSleeper final : public Sleeper {
public:
    void sleep(double seconds) override;
};

/// Simulated clock: records requested delays without waiting.
class RecordingSleeper final : public Sleeper {
public:
    void sleep(double seconds) override;
    [[nodiscard]] std::vector<double> delays() const;
    [[nodiscard]] double total() const;

private:
    mutable std::mutex mutex_;
    std::vector<double> delays_;
};

/// base_wait^(n+1) + U(jitter_low, jitter_high). `n` is the 0-based retry
/// index, so the first delay is base_wait seconds plus jitter.
[[nodiscard]] double backoff_delay(int n, const RetryPolicy& policy, std::mt19937_64& rng);

struct PoolResult {
    std::optional<ChatExchange> exchange;
    std::string error;
    int last_status = 0;

    [[nodiscard]] bool ok() const noexcept { return exchange.has_value(); }
};

/// Shareable client. All mutable state is internally synchronized.
class Gateway {
public:
    explicit Gateway(std::uint64_t backoff_seed = 0);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    void set_transport(ProviderKind kind, std::shared_ptr<Transport> transport);
    /// Live providers default to RealSleeper, mocks to a RecordingSleeper.
    void set_sleeper(ProviderKind kind, std::shared_ptr<Sleeper> sleeper);
    [[nodiscard]] std::shared_ptr<Sleeper> sleeper(ProviderKind kind) const;

    /// Appends every attempt (prompt, response or error) to a JSONL file.
    void set_audit_log(std::filesystem::path path);

    /// Throws ConfigError (invalid config, missing key) or TransportError
    /// once max_retries + 1 attempts have failed.
    ChatExchange complete(std::string_view prompt, const ProviderConfig& config, const RetryPolicy& retry);

    /// Results in request order; each request fails independently.
    std::vector<PoolResult> run_pool(const std::vector<std::string>& prompts, const ProviderConfig& config,
                                     const RetryPolicy& retry, std::size_t max_in_flight);

    /// Attempts sent to any transport since construction.
    [[nodiscard]] std::size_t attempts_sent() const noexcept;
    [[nodiscard]] std::size_t peak_in_flight() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

[[nodiscard]] std::string to_string(ProviderKind kind);
[[nodiscard]] std::string to_string(ApiStyle style);
[[nodiscard]] std::string to_string(MockMode mode);

[[nodiscard]] nlohmann::json to_json(const ProviderConfig& config);
[[nodiscard]] ProviderConfig provider_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const RetryPolicy& policy);
[[nodiscard]] RetryPolicy retry_from_json(const nlohmann::json& j);

/// Request body and response extraction for live endpoints. Exposed so the
/// wire formats can be tested without a network.
[[nodiscard]] nlohmann::json build_request_body(const ProviderConfig& config, std::string_view prompt);
[[nodiscard]] std::string extract_response_text(ApiStyle style, const nlohmann::json& body);

[[nodiscard]] std::shared_ptr<Transport> make_http_transport();
[[nodiscard]] std::shared_ptr<Transport> make_mock_transport();

}  // namespace framebench::gateway
