#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mrceval/backend.hpp"

namespace mrceval {

struct LiveEndpointConfig {
    std::string base_url = "http://localhost:8080";  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 120;
};

// OpenAI-compatible chat-completions client. The rendered prompt is sent as a
// single user message; no system message.
class LiveBackend : public Backend {
public:
    explicit LiveBackend(LiveEndpointConfig cfg) : cfg_(std::move(cfg)) {}

    CompletionResponse complete(const CompletionRequest& req) override {
        nlohmann::json body{
            {"model", req.params.model_id},
            {"messages", nlohmann::json::array(
                             {{{"role", "user"}, {"content", req.prompt.text}}})},
            {"temperature", req.params.temperature},
            {"frequency_penalty", req.params.frequency_penalty},
            {"presence_penalty", req.params.presence_penalty},
            {"max_tokens", req.params.max_tokens},
        };

        httplib::Client client(cfg_.base_url);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();

        if (!res)
            throw BackendError("transport failure: " + httplib::to_string(res.error()), true);
        if (res->status == 429 || res->status >= 500)
            throw BackendError("endpoint status " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200),
                               true);
        if (res->status != 200)
            throw BackendError("endpoint status " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200),
                               false);

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const std::exception& e) {
            throw BackendError(std::string("unparseable response body: ") + e.what(), false);
        }
        if (!j.contains("choices") || j["choices"].empty() ||
            !j["choices"][0].contains("message") ||
            !j["choices"][0]["message"].contains("content"))
            throw BackendError("response missing completion text: " + res->body.substr(0, 200),
                               false);

        CompletionResponse resp;
        resp.text = j["choices"][0]["message"]["content"].get<std::string>();
        resp.prompt_words = req.prompt.word_count;
        resp.completion_words = text::word_count(resp.text);
        resp.latency_ms = elapsed;
        return resp;
    }

    std::string name() const override { return "live"; }

private:
    LiveEndpointConfig cfg_;
};

}  // namespace mrceval
