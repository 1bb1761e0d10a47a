#include "framebench/gateway.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "framebench/error.hpp"
#include "framebench/hash.hpp"
#include "framebench/parallel.hpp"
#include "framebench/timefmt.hpp"

namespace framebench::gateway {

using nlohmann::json;

void ProviderConfig::validate() const {
    if (model_id.empty()) {
        throw ConfigError("provider config has an empty model_id");
    }
    if (max_tokens <= 0) {
        throw ConfigError("max_tokens must be positive for " + model_id);
    }
    if (temperature < 0.0) {
        throw ConfigError("temperature must be nonnegative for " + model_id);
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw ConfigError("top_p must lie in (0, 1] for " + model_id);
    }
    if (timeout_seconds <= 0.0) {
        throw ConfigError("timeout_seconds must be positive for " + model_id);
    }
    if (kind == ProviderKind::Live) {
        if (endpoint_url.empty()) {
            throw ConfigError("live provider " + model_id + " needs an endpoint_url");
        }
    } else if (!mock) {
        throw ConfigError("mock provider " + model_id + " needs a mock behavior");
    }
    for (const auto& f : fallbacks) {
        f.validate();
    }
}

void RetryPolicy::validate() const {
    if (max_retries < 0) {
        throw ConfigError("max_retries must be nonnegative");
    }
    if (base_wait_seconds <= 0.0) {
        throw ConfigError("base_wait_seconds must be positive");
    }
    // (0, 0) is allowed: it pins jitter for deterministic schedules.
    if (jitter_low > jitter_high) {
        throw ConfigError("jitter_low must not exceed jitter_high");
    }
}

void RealSleeper::sleep(double seconds) {
    if (seconds > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
}

void RecordingSleeper::sleep(double seconds) {
    std::lock_guard lock(mutex_);
    delays_.push_back(seconds);
}

std::vector<double> RecordingSleeper::delays() const {
    std::lock_guard lock(mutex_);
    return delays_;
}

double RecordingSleeper::total() const {
    std::lock_guard lock(mutex_);
    double t = 0.0;
    for (double d : delays_) {
        t += d;
    }
    return t;
}

double backoff_delay(int n, const RetryPolicy& policy, std::mt19937_64& rng) {
    const double base = std::pow(policy.base_wait_seconds, static_cast<double>(n + 1));
    const double u = unit_interval(rng());
    return base + policy.jitter_low + (policy.jitter_high - policy.jitter_low) * u;
}

namespace {

class RateLimiter {
public:
    void acquire(const std::string& key, double per_minute) {
        if (per_minute <= 0.0) {
            return;
        }
        const double rate = per_minute / 60.0;
        const double capacity = std::max(1.0, rate);
        for (;;) {
            double wait = 0.0;
            {
                std::lock_guard lock(mutex_);
                auto now = std::chrono::steady_clock::now();
                auto [it, inserted] = buckets_.try_emplace(key, Bucket{capacity, now});
                Bucket& b = it->second;
                const double elapsed = std::chrono::duration<double>(now - b.last).count();
                b.tokens = std::min(capacity, b.tokens + elapsed * rate);
                b.last = now;
                if (b.tokens >= 1.0) {
                    b.tokens -= 1.0;
                    return;
                }
                wait = (1.0 - b.tokens) / rate;
            }
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
    }

private:
    struct Bucket {
        double tokens;
        std::chrono::steady_clock::time_point last;
    };
    std::mutex mutex_;
    std::map<std::string, Bucket> buckets_;
};

void require_key(const ProviderConfig& config) {
    if (config.kind != ProviderKind::Live || config.api_key_env.empty()) {
        return;
    }
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("environment variable " + config.api_key_env + " (API key for " + config.model_id +
                          ") is not set");
    }
}

}  // namespace

struct Gateway::Impl {
    std::mutex mutex;  // guards transports, sleepers, rng
    std::shared_ptr<Transport> live_transport;
    std::shared_ptr<Transport> mock_transport;
    std::shared_ptr<Sleeper> live_sleeper = std::make_shared<RealSleeper>();
    std::shared_ptr<Sleeper> mock_sleeper = std::make_shared<RecordingSleeper>();
    std::mt19937_64 rng;
    RateLimiter limiter;

    std::atomic<std::size_t> attempts{0};
    std::atomic<std::size_t> in_flight{0};
    std::atomic<std::size_t> peak{0};

    std::mutex audit_mutex;
    std::optional<std::ofstream> audit;

    std::shared_ptr<Transport> transport(ProviderKind kind) {
        std::lock_guard lock(mutex);
        if (kind == ProviderKind::Live) {
            if (!live_transport) {
                live_transport = make_http_transport();
            }
            return live_transport;
        }
        if (!mock_transport) {
            mock_transport = make_mock_transport();
        }
        return mock_transport;
    }

    double next_delay(int n, const RetryPolicy& retry) {
        std::lock_guard lock(mutex);
        return backoff_delay(n, retry, rng);
    }

    void record(const ProviderConfig& p, std::string_view prompt, int attempt, const std::string* response,
                const std::string* error, int status) {
        std::lock_guard lock(audit_mutex);
        if (!audit) {
            return;
        }
        json j;
        j["timestamp"] = format_utc(std::chrono::system_clock::now());
        j["model_id"] = p.model_id;
        j["attempt"] = attempt;
        j["prompt"] = std::string(prompt);
        if (response != nullptr) {
            j["response"] = *response;
        } else {
            j["error"] = error != nullptr ? *error : "";
            j["status"] = status;
        }
        *audit << j.dump() << '\n';
        audit->flush();
    }
};

Gateway::Gateway(std::uint64_t backoff_seed) : impl_(std::make_unique<Impl>()) { impl_->rng.seed(backoff_seed); }

Gateway::~Gateway() = default;

void Gateway::set_transport(ProviderKind kind, std::shared_ptr<Transport> transport) {
    std::lock_guard lock(impl_->mutex);
    (kind == ProviderKind::Live ? impl_->live_transport : impl_->mock_transport) = std::move(transport);
}

void Gateway::set_sleeper(ProviderKind kind, std::shared_ptr<Sleeper> sleeper) {
    std::lock_guard lock(impl_->mutex);
    (kind == ProviderKind::Live ? impl_->live_sleeper : impl_->mock_sleeper) = std::move(sleeper);
}

std::shared_ptr<Sleeper> Gateway::sleeper(ProviderKind kind) const {
    std::lock_guard lock(impl_->mutex);
    return kind == ProviderKind::Live ? impl_->live_sleeper : impl_->mock_sleeper;
}

void Gateway::set_audit_log(std::filesystem::path path) {
    std::lock_guard lock(impl_->audit_mutex);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    impl_->audit.emplace(path, std::ios::app);
    if (!*impl_->audit) {
        throw ConfigError("cannot open audit log " + path.string());
    }
}

ChatExchange Gateway::complete(std::string_view prompt, const ProviderConfig& config, const RetryPolicy& retry) {
    config.validate();
    retry.validate();
    require_key(config);
    for (const auto& f : config.fallbacks) {
        require_key(f);
    }

    std::vector<const ProviderConfig*> chain{&config};
    for (const auto& f : config.fallbacks) {
        chain.push_back(&f);
    }

    const auto started = std::chrono::steady_clock::now();
    int last_status = 0;
    std::string last_error;
    const int total_attempts = retry.max_retries + 1;
    for (int attempt = 1; attempt <= total_attempts; ++attempt) {
        for (const ProviderConfig* p : chain) {
            impl_->limiter.acquire(p->endpoint_url + "|" + p->model_id, p->requests_per_minute);
            auto transport = impl_->transport(p->kind);
            impl_->attempts.fetch_add(1);
            const std::size_t now_in_flight = impl_->in_flight.fetch_add(1) + 1;
            std::size_t seen = impl_->peak.load();
            while (now_in_flight > seen && !impl_->peak.compare_exchange_weak(seen, now_in_flight)) {
            }
            struct InFlight {
                std::atomic<std::size_t>& n;
                ~InFlight() { n.fetch_sub(1); }
            };
            try {
                std::string text;
                {
                    InFlight guard{impl_->in_flight};
                    text = transport->send(*p, prompt, attempt);
                }
                impl_->record(*p, prompt, attempt, &text, nullptr, 200);
                ChatExchange ex;
                ex.prompt = std::string(prompt);
                ex.response_text = std::move(text);
                ex.model_id = p->model_id;
                ex.attempt_count = attempt;
                ex.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - started)
                                    .count();
                ex.timestamp = std::chrono::system_clock::now();
                return ex;
            } catch (const AttemptFailure& e) {
                last_status = e.status();
                last_error = e.what();
                impl_->record(*p, prompt, attempt, nullptr, &last_error, last_status);
            }
        }
        if (attempt < total_attempts) {
            sleeper(config.kind)->sleep(impl_->next_delay(attempt - 1, retry));
        }
    }
    throw TransportError("all " + std::to_string(total_attempts) + " attempts to " + config.model_id +
                             " failed; last error: " + last_error,
                         last_status, total_attempts);
}

std::vector<PoolResult> Gateway::run_pool(const std::vector<std::string>& prompts, const ProviderConfig& config,
                                          const RetryPolicy& retry, std::size_t max_in_flight) {
    if (max_in_flight == 0) {
        throw ConfigError("max_in_flight must be at least 1");
    }
    std::vector<PoolResult> out(prompts.size());
    bounded_for_each(prompts.size(), max_in_flight, [&](std::size_t i) {
        try {
            out[i].exchange = complete(prompts[i], config, retry);
        } catch (const TransportError& e) {
            out[i].error = e.what();
            out[i].last_status = e.last_status();
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

std::size_t Gateway::attempts_sent() const noexcept { return impl_->attempts.load(); }

std::size_t Gateway::peak_in_flight() const noexcept { return impl_->peak.load(); }

// --- serialization -------------------------------------------------------

std::string to_string(ProviderKind kind) { return kind == ProviderKind::Live ? "live" : "mock"; }

std::string to_string(ApiStyle style) {
    switch (style) {
        case ApiStyle::OpenAIChat:
            return "openai_chat";
        case ApiStyle::AnthropicMessages:
            return "anthropic_messages";
        case ApiStyle::Completions:
            return "completions";
    }
    return "openai_chat";
}

std::string to_string(MockMode mode) {
    switch (mode) {
        case MockMode::FixedText:
            return "fixed_text";
        case MockMode::ScriptedSequence:
            return "scripted_sequence";
        case MockMode::Policy:
            return "policy";
    }
    return "fixed_text";
}

namespace {

ProviderKind kind_from(const std::string& s) {
    if (s == "live") return ProviderKind::Live;
    if (s == "mock") return ProviderKind::Mock;
    throw ConfigError("unknown provider kind '" + s + "' (expected live or mock)");
}

ApiStyle style_from(const std::string& s) {
    if (s == "openai_chat") return ApiStyle::OpenAIChat;
    if (s == "anthropic_messages") return ApiStyle::AnthropicMessages;
    if (s == "completions") return ApiStyle::Completions;
    throw ConfigError("unknown api_style '" + s + "'");
}

MockMode mode_from(const std::string& s) {
    if (s == "fixed_text") return MockMode::FixedText;
    if (s == "scripted_sequence") return MockMode::ScriptedSequence;
    if (s == "policy") return MockMode::Policy;
    throw ConfigError("unknown mock mode '" + s + "'");
}

json mock_to_json(const MockBehavior& m) {
    json j;
    j["mode"] = to_string(m.mode);
    j["seed"] = m.seed;
    if (!m.fixed_text.empty()) j["fixed_text"] = m.fixed_text;
    if (!m.script.empty()) j["script"] = m.script;
    if (!m.rules.empty()) {
        json rules = json::array();
        for (const auto& r : m.rules) rules.push_back({{"contains", r.contains}, {"response", r.response}});
        j["rules"] = rules;
    }
    j["bias"] = m.bias;
    if (!m.features.empty()) {
        json fs = json::array();
        for (const auto& f : m.features) fs.push_back({{"contains", f.contains}, {"weight", f.weight}});
        j["features"] = fs;
    }
    j["order_weight"] = m.order_weight;
    j["stochastic"] = m.stochastic;
    j["cooperative_marker"] = m.cooperative_marker;
    if (m.always_letter) j["always_letter"] = std::string(1, *m.always_letter);
    j["game_theory_rate"] = m.game_theory_rate;
    if (!m.failure_schedule.empty()) j["failure_schedule"] = m.failure_schedule;
    if (!m.fail_when_contains.empty()) j["fail_when_contains"] = m.fail_when_contains;
    if (m.latency_ms != 0) j["latency_ms"] = m.latency_ms;
    return j;
}

MockBehavior mock_from_json(const json& j) {
    MockBehavior m;
    m.mode = mode_from(j.value("mode", std::string("fixed_text")));
    m.seed = j.value("seed", std::uint64_t{0});
    m.fixed_text = j.value("fixed_text", std::string());
    m.script = j.value("script", std::vector<std::string>{});
    for (const auto& r : j.value("rules", json::array())) {
        m.rules.push_back({r.at("contains").get<std::string>(), r.at("response").get<std::string>()});
    }
    m.bias = j.value("bias", 0.0);
    for (const auto& f : j.value("features", json::array())) {
        m.features.push_back({f.at("contains").get<std::string>(), f.at("weight").get<double>()});
    }
    m.order_weight = j.value("order_weight", 0.0);
    m.stochastic = j.value("stochastic", false);
    m.cooperative_marker = j.value("cooperative_marker", m.cooperative_marker);
    if (j.contains("always_letter")) {
        const auto s = j.at("always_letter").get<std::string>();
        if (s != "A" && s != "B") {
            throw ConfigError("always_letter must be \"A\" or \"B\"");
        }
        m.always_letter = s[0];
    }
    m.game_theory_rate = j.value("game_theory_rate", 0.0);
    m.failure_schedule = j.value("failure_schedule", std::vector<int>{});
    m.fail_when_contains = j.value("fail_when_contains", std::vector<std::string>{});
    m.latency_ms = j.value("latency_ms", 0);
    return m;
}

}  // namespace

json to_json(const ProviderConfig& c) {
    json j;
    j["kind"] = to_string(c.kind);
    j["api_style"] = to_string(c.api_style);
    j["endpoint_url"] = c.endpoint_url;
    j["model_id"] = c.model_id;
    j["api_key_env"] = c.api_key_env;
    j["max_tokens"] = c.max_tokens;
    j["temperature"] = c.temperature;
    j["top_p"] = c.top_p;
    j["frequency_penalty"] = c.frequency_penalty;
    j["presence_penalty"] = c.presence_penalty;
    j["timeout_seconds"] = c.timeout_seconds;
    j["requests_per_minute"] = c.requests_per_minute;
    if (c.seed) j["seed"] = *c.seed;
    if (c.mock) j["mock"] = mock_to_json(*c.mock);
    if (!c.fallbacks.empty()) {
        json fb = json::array();
        for (const auto& f : c.fallbacks) fb.push_back(to_json(f));
        j["fallbacks"] = fb;
    }
    return j;
}

ProviderConfig provider_from_json(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("provider config must be an object");
    }
    ProviderConfig c;
    c.kind = kind_from(j.value("kind", std::string("mock")));
    c.api_style = style_from(j.value("api_style", std::string("openai_chat")));
    c.endpoint_url = j.value("endpoint_url", std::string());
    c.model_id = j.value("model_id", std::string());
    c.api_key_env = j.value("api_key_env", std::string());
    c.max_tokens = j.value("max_tokens", 4096);
    c.temperature = j.value("temperature", 0.0);
    c.top_p = j.value("top_p", 1.0);
    c.frequency_penalty = j.value("frequency_penalty", 0.0);
    c.presence_penalty = j.value("presence_penalty", 0.0);
    c.timeout_seconds = j.value("timeout_seconds", 120.0);
    c.requests_per_minute = j.value("requests_per_minute", 0.0);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mock")) c.mock = mock_from_json(j.at("mock"));
    for (const auto& f : j.value("fallbacks", json::array())) {
        c.fallbacks.push_back(provider_from_json(f));
    }
    return c;
}

json to_json(const RetryPolicy& p) {
    return {{"max_retries", p.max_retries},
            {"base_wait_seconds", p.base_wait_seconds},
            {"jitter_low", p.jitter_low},
            {"jitter_high", p.jitter_high}};
}

RetryPolicy retry_from_json(const json& j) {
    RetryPolicy p;
    p.max_retries = j.value("max_retries", p.max_retries);
    p.base_wait_seconds = j.value("base_wait_seconds", p.base_wait_seconds);
    p.jitter_low = j.value("jitter_low", p.jitter_low);
    p.jitter_high = j.value("jitter_high", p.jitter_high);
    p.validate();
    return p;
}

}  // namespace framebench::gateway
