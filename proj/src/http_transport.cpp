#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "framebench/error.hpp"
#include "framebench/gateway.hpp"

namespace framebench::gateway {

using nlohmann::json;

json build_request_body(const ProviderConfig& c, std::string_view prompt) {
    json body;
    body["model"] = c.model_id;
    body["max_tokens"] = c.max_tokens;
    body["temperature"] = c.temperature;
    body["top_p"] = c.top_p;
    switch (c.api_style) {
        case ApiStyle::OpenAIChat:
            body["messages"] = json::array({{{"role", "user"}, {"content", std::string(prompt)}}});
            body["frequency_penalty"] = c.frequency_penalty;
            body["presence_penalty"] = c.presence_penalty;
            if (c.seed) body["seed"] = *c.seed;
            break;
        case ApiStyle::AnthropicMessages:
            // The messages API has no frequency/presence penalties.
            body["messages"] = json::array({{{"role", "user"}, {"content", std::string(prompt)}}});
            break;
        case ApiStyle::Completions:
            body["prompt"] = std::string(prompt);
            body["frequency_penalty"] = c.frequency_penalty;
            body["presence_penalty"] = c.presence_penalty;
            if (c.seed) body["seed"] = *c.seed;
            break;
    }
    return body;
}

std::string extract_response_text(ApiStyle style, const json& body) {
    try {
        switch (style) {
            case ApiStyle::OpenAIChat:
                return body.at("choices").at(0).at("message").at("content").get<std::string>();
            case ApiStyle::Completions:
                return body.at("choices").at(0).at("text").get<std::string>();
            case ApiStyle::AnthropicMessages: {
                std::string out;
                for (const auto& block : body.at("content")) {
                    if (block.value("type", std::string("text")) == "text") {
                        out += block.at("text").get<std::string>();
                    }
                }
                return out;
            }
        }
    } catch (const json::exception& e) {
        throw AttemptFailure(std::string("unexpected response shape: ") + e.what(), 502);
    }
    return {};
}

namespace {

class HttpTransport final : public Transport {
public:
    std::string send(const ProviderConfig& c, std::string_view prompt, int /*attempt*/) override {
        const auto scheme = c.endpoint_url.find("://");
        if (scheme == std::string::npos) {
            throw ConfigError("endpoint_url '" + c.endpoint_url + "' has no scheme");
        }
        const auto slash = c.endpoint_url.find('/', scheme + 3);
        const std::string origin = c.endpoint_url.substr(0, slash);
        const std::string path = slash == std::string::npos ? "/" : c.endpoint_url.substr(slash);

        // No api_key_env means an unauthenticated (local) endpoint.
        const char* key = c.api_key_env.empty() ? nullptr : std::getenv(c.api_key_env.c_str());
        httplib::Headers headers;
        if (c.api_style == ApiStyle::AnthropicMessages) {
            headers.emplace("anthropic-version", "2023-06-01");
            if (key) headers.emplace("x-api-key", key);
        } else if (key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        httplib::Client client(origin);
        const auto timeout = std::chrono::duration<double>(c.timeout_seconds);
        const auto whole = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
        client.set_connection_timeout(whole);
        client.set_read_timeout(whole);
        client.set_write_timeout(whole);

        const std::string body = build_request_body(c, prompt).dump();
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            const auto err = res.error();
            const int status = err == httplib::Error::Read || err == httplib::Error::Write ? 408 : 0;
            throw AttemptFailure("request to " + c.endpoint_url + " failed: " + httplib::to_string(err), status);
        }
        if (res->status < 200 || res->status >= 300) {
            throw AttemptFailure("HTTP " + std::to_string(res->status) + " from " + c.endpoint_url + ": " +
                                     res->body.substr(0, 300),
                                 res->status);
        }
        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::exception& e) {
            throw AttemptFailure(std::string("response is not JSON: ") + e.what(), 502);
        }
        return extract_response_text(c.api_style, parsed);
    }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }

}  // namespace framebench::gateway
