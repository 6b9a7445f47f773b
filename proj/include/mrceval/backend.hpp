#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "mrceval/core.hpp"
#include "mrceval/eval.hpp"
#include "mrceval/prompt.hpp"
#include "mrceval/text.hpp"

namespace mrceval {

struct DecodingParams {
    double temperature = 0.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    int max_tokens = 1000;
    std::string model_id = "gpt-4-32k";
};

struct CompletionRequest {
    PromptText prompt;
    DecodingParams params;
    std::string request_tag;  // "<instance id>|<strategy>|<call index>"
};

struct CompletionResponse {
    std::string text;
    size_t prompt_words = 0;
    size_t completion_words = 0;
    int64_t latency_ms = 0;
    bool from_cache = false;
};

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
    bool transient = false;
    BackendError(const std::string& msg, bool transient_) : std::runtime_error(msg), transient(transient_) {}
};

inline std::string request_digest(const std::string& model_id, const DecodingParams& p,
                                  const std::string& prompt_text) {
    std::ostringstream key;
    key << model_id << '\x1f' << p.temperature << '\x1f' << p.frequency_penalty << '\x1f'
        << p.presence_penalty << '\x1f' << p.max_tokens << '\x1f' << prompt_text;
    return text::sha256_hex(key.str());
}

// Content-addressed response cache: one JSON file per digest, written via
// temp-file rename so concurrent same-key stores are idempotent.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    std::optional<std::string> lookup(const std::string& key) const {
        std::ifstream in(entry_path(key));
        if (!in) return std::nullopt;
        nlohmann::json j;
        in >> j;
        return j.at("text").get<std::string>();
    }

    void store(const std::string& key, const std::string& model_id, const DecodingParams& p,
               const std::string& prompt, const std::string& completion_text) const {
        nlohmann::json j{{"key", key},
                         {"model_id", model_id},
                         {"params",
                          {{"temperature", p.temperature},
                           {"frequency_penalty", p.frequency_penalty},
                           {"presence_penalty", p.presence_penalty},
                           {"max_tokens", p.max_tokens}}},
                         {"prompt", prompt},
                         {"text", completion_text},
                         {"timestamp", now_iso8601()}};
        auto final_path = entry_path(key);
        auto tmp = final_path;
        tmp += "." + std::to_string(
                         std::hash<std::thread::id>{}(std::this_thread::get_id())) +
               ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw std::runtime_error("cache: cannot write " + tmp.string());
            out << j.dump(2) << '\n';
        }
        std::filesystem::rename(tmp, final_path);
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path entry_path(const std::string& key) const {
        return dir_ / (key + ".json");
    }
    static std::string now_iso8601() {
        auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof buf, "%FT%TZ", &tm);
        return buf;
    }
    std::filesystem::path dir_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;
    virtual std::string name() const = 0;
};

// Deterministic backend: explicit prompt-digest -> text mapping, with an
// optional digest-derived fallback so unmapped prompts still answer.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::map<std::string, std::string> responses = {},
                             bool digest_fallback = true)
        : responses_(std::move(responses)), digest_fallback_(digest_fallback) {}

    CompletionResponse complete(const CompletionRequest& req) override {
        ++calls_;
        const std::string digest =
            request_digest(req.params.model_id, req.params, req.prompt.text);
        std::string txt;
        if (auto it = responses_.find(digest); it != responses_.end())
            txt = it->second;
        else if (auto it2 = responses_.find(req.prompt.text); it2 != responses_.end())
            txt = it2->second;
        else if (digest_fallback_)
            txt = "Answer: scripted-" + digest.substr(0, 12);
        else
            throw BackendError("scripted backend has no response for digest " + digest, false);
        CompletionResponse resp;
        resp.text = txt;
        resp.prompt_words = req.prompt.word_count;
        resp.completion_words = text::word_count(txt);
        return resp;
    }

    std::string name() const override { return "scripted"; }
    size_t calls() const { return calls_; }

private:
    std::map<std::string, std::string> responses_;
    bool digest_fallback_;
    std::atomic<size_t> calls_{0};
};

// Gold-emitting backend for end-to-end oracle tests. Resolves the instance
// from the request tag and always produces a grounded section plus the gold
// answer under the output markers.
class OracleBackend : public Backend {
public:
    explicit OracleBackend(const std::vector<MrcInstance>& corpus) {
        for (const auto& inst : corpus) by_id_.emplace(inst.id, inst);
    }

    CompletionResponse complete(const CompletionRequest& req) override {
        ++calls_;
        const std::string id = req.request_tag.substr(0, req.request_tag.find('|'));
        auto it = by_id_.find(id);
        if (it == by_id_.end())
            throw BackendError("oracle: unknown instance in tag: " + req.request_tag, false);
        const MrcInstance& inst = it->second;
        const std::string gold = gold_text(inst);
        const std::string body = fenced_context(req.prompt.text);
        std::string out = "Section 1: " + pick_section(body, gold) + "\nAnswer: " + gold + "\n";
        CompletionResponse resp;
        resp.text = std::move(out);
        resp.prompt_words = req.prompt.word_count;
        resp.completion_words = text::word_count(resp.text);
        return resp;
    }

    std::string name() const override { return "oracle"; }
    size_t calls() const { return calls_; }

    static std::string gold_text(const MrcInstance& inst) {
        switch (inst.gold.kind) {
            case GoldAnswer::Kind::text_variants:
                return inst.gold.text_variants.front();
            case GoldAnswer::Kind::option_ref:
                for (const auto& c : inst.candidates)
                    if (c.id == inst.gold.option_ref) return c.surface_forms.front();
                return inst.gold.option_ref;
            case GoldAnswer::Kind::span_set:
                return mashqa_gold_text(inst);
        }
        throw std::logic_error("bad gold kind");
    }

private:
    // The prompt embeds its context between ### fences; that is all the oracle
    // may read from.
    static std::string fenced_context(const std::string& prompt) {
        size_t open = prompt.find("###");
        if (open == std::string::npos) return prompt;
        size_t begin = open + 3;
        size_t close = prompt.find("###", begin);
        if (close == std::string::npos) return prompt.substr(begin);
        return prompt.substr(begin, close - begin);
    }

    // A verbatim substring of the fenced text, containing the gold answer when
    // one exists there.
    static std::string pick_section(const std::string& body, const std::string& gold) {
        size_t pos = body.find(gold);
        if (pos != std::string::npos) {
            size_t lo = pos > 60 ? pos - 60 : 0;
            size_t hi = std::min(body.size(), pos + gold.size() + 60);
            return text::collapse_ws(body.substr(lo, hi - lo));
        }
        auto ws = text::words(body);
        if (ws.empty()) return "none";
        size_t n = std::min<size_t>(ws.size(), 40);
        std::string out;
        for (size_t i = 0; i < n; ++i) {
            if (i) out.push_back(' ');
            out.append(ws[i]);
        }
        return out;
    }

    std::map<std::string, MrcInstance> by_id_;
    std::atomic<size_t> calls_{0};
};

struct RetryPolicy {
    int max_attempts = 4;
    int base_delay_ms = 250;
};

// Adds the persistent cache and retry/backoff loop around any inner backend.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache,
                   RetryPolicy retry = {})
        : inner_(std::move(inner)), cache_(std::move(cache)), retry_(retry) {}

    CompletionResponse complete(const CompletionRequest& req) override {
        const std::string key =
            request_digest(req.params.model_id, req.params, req.prompt.text);
        if (auto hit = cache_->lookup(key)) {
            CompletionResponse resp;
            resp.text = *hit;
            resp.prompt_words = req.prompt.word_count;
            resp.completion_words = text::word_count(resp.text);
            resp.from_cache = true;
            return resp;
        }
        CompletionResponse resp = complete_with_retry(req);
        cache_->store(key, req.params.model_id, req.params, req.prompt.text, resp.text);
        return resp;
    }

    std::string name() const override { return inner_->name() + "+cache"; }

private:
    CompletionResponse complete_with_retry(const CompletionRequest& req) {
        int attempt = 0;
        for (;;) {
            try {
                return inner_->complete(req);
            } catch (const BackendError& e) {
                ++attempt;
                if (!e.transient || attempt >= retry_.max_attempts) throw;
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(retry_.base_delay_ms << (attempt - 1)));
            }
        }
    }

    std::shared_ptr<Backend> inner_;
    std::shared_ptr<ResponseCache> cache_;
    RetryPolicy retry_;
};

}  // namespace mrceval
