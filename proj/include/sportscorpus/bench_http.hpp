#pragma once
#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sportscorpus/bench_run.hpp"
#include "sportscorpus/util.hpp"

namespace sportscorpus::bench {

// HTTP adapters for real model/judge endpoints. Request and response
// schemas are documented in docs/wire-protocol.md:
//   generation: POST <path> {"model","prompt","max_tokens","temperature",
//               "top_p","seed"} -> {"text": "..."}
//   judging:    POST <path> {"model","system","user"} -> {"reply": "..."}
// Credentials come from the environment variable named in the config, never
// from the command line.

namespace detail {

struct Endpoint {
    std::string host;
    int port = 80;
    std::string path = "/";
};

inline Endpoint parse_endpoint(const std::string& url) {
    std::string rest = url;
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    else if (rest.rfind("https://", 0) == 0)
        throw Error("config", "https endpoints are not supported by this build: " + url);
    Endpoint ep;
    std::size_t slash = rest.find('/');
    std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    ep.path = slash == std::string::npos ? "/" : rest.substr(slash);
    std::size_t colon = authority.rfind(':');
    if (colon == std::string::npos) {
        ep.host = authority;
    } else {
        ep.host = authority.substr(0, colon);
        ep.port = 0;
        for (char c : authority.substr(colon + 1)) {
            if (c < '0' || c > '9') throw Error("config", "bad port in endpoint \"" + url + "\"");
            ep.port = ep.port * 10 + (c - '0');
        }
    }
    if (ep.host.empty()) throw Error("config", "bad endpoint \"" + url + "\"");
    return ep;
}

inline std::string auth_token_from_env(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* value = std::getenv(env_name.c_str());
    if (!value || !*value)
        throw Error("config", "environment variable " + env_name + " is not set");
    return value;
}

// Spaces successive calls at least min_interval apart (per-judge queue).
class RateLimiter {
public:
    explicit RateLimiter(int per_minute) {
        if (per_minute > 0)
            min_interval_ = std::chrono::milliseconds(60'000 / per_minute);
    }

    void acquire() {
        std::lock_guard lock(mu_);
        if (min_interval_.count() == 0) return;
        auto now = std::chrono::steady_clock::now();
        if (last_.time_since_epoch().count() != 0 && now - last_ < min_interval_)
            std::this_thread::sleep_for(min_interval_ - (now - last_));
        last_ = std::chrono::steady_clock::now();
    }

private:
    std::mutex mu_;
    std::chrono::milliseconds min_interval_{0};
    std::chrono::steady_clock::time_point last_;
};

inline json post_json(const Endpoint& ep, const std::string& auth_token, const json& body,
                      int timeout_secs) {
    httplib::Client client(ep.host, ep.port);
    client.set_read_timeout(timeout_secs, 0);
    client.set_connection_timeout(timeout_secs, 0);
    httplib::Headers headers;
    if (!auth_token.empty()) headers.emplace("Authorization", "Bearer " + auth_token);
    auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) throw Error("io", "endpoint unreachable: " + ep.host + ":" + std::to_string(ep.port));
    if (res->status >= 400)
        throw Error("protocol",
                    "endpoint replied " + std::to_string(res->status) + ": " + res->body);
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw Error("format", "endpoint returned malformed JSON");
    return parsed;
}

}  // namespace detail

class HttpGenerator : public GeneratorAdapter {
public:
    HttpGenerator(std::string id, const std::string& endpoint, std::string model_name,
                  const std::string& auth_env, int timeout_secs = 60)
        : id_(std::move(id)),
          endpoint_(detail::parse_endpoint(endpoint)),
          model_name_(std::move(model_name)),
          auth_token_(detail::auth_token_from_env(auth_env)),
          timeout_secs_(timeout_secs) {}

    const std::string& id() const override { return id_; }

    std::string generate(const PromptEntry& prompt, const GenerationConfig& cfg) override {
        json reply = detail::post_json(endpoint_, auth_token_,
                                       json{{"model", model_name_},
                                            {"prompt", prompt.prompt},
                                            {"max_tokens", cfg.max_tokens},
                                            {"temperature", cfg.temperature},
                                            {"top_p", cfg.top_p},
                                            {"seed", cfg.seed}},
                                       timeout_secs_);
        if (!reply.contains("text") || !reply["text"].is_string())
            throw Error("format", "generation endpoint reply lacks a string \"text\" field");
        return reply["text"].get<std::string>();
    }

private:
    std::string id_;
    detail::Endpoint endpoint_;
    std::string model_name_;
    std::string auth_token_;
    int timeout_secs_;
};

class HttpJudge : public JudgeAdapter {
public:
    HttpJudge(std::string id, const std::string& endpoint, std::string model_name,
              const std::string& auth_env, int per_minute = 0, int timeout_secs = 60)
        : id_(std::move(id)),
          endpoint_(detail::parse_endpoint(endpoint)),
          model_name_(std::move(model_name)),
          auth_token_(detail::auth_token_from_env(auth_env)),
          limiter_(per_minute),
          timeout_secs_(timeout_secs) {}

    const std::string& id() const override { return id_; }

    std::string judge(const JudgeRequest& request) override {
        limiter_.acquire();
        json reply = detail::post_json(endpoint_, auth_token_,
                                       json{{"model", model_name_},
                                            {"system", request.system_message},
                                            {"user", request.user_message}},
                                       timeout_secs_);
        if (!reply.contains("reply") || !reply["reply"].is_string())
            throw Error("format", "judge endpoint reply lacks a string \"reply\" field");
        return reply["reply"].get<std::string>();
    }

private:
    std::string id_;
    detail::Endpoint endpoint_;
    std::string model_name_;
    std::string auth_token_;
    detail::RateLimiter limiter_;
    int timeout_secs_;
};

// Extends the local factories with the "http" adapter type.
inline std::vector<std::unique_ptr<GeneratorAdapter>> make_generators_with_http(
    const json& config, const std::string& where) {
    if (!config.is_array()) throw Error("format", where + ": models config must be a JSON array");
    json local = json::array();
    std::vector<std::pair<std::size_t, json>> http_entries;
    for (std::size_t i = 0; i < config.size(); ++i) {
        if (config[i].value("type", std::string{}) == "http")
            http_entries.emplace_back(i, config[i]);
        else
            local.push_back(config[i]);
    }
    auto out = make_generators(local, where);
    for (auto& [pos, e] : http_entries) {
        auto adapter = std::make_unique<HttpGenerator>(
            e.value("id", std::string{}), e.at("endpoint").get<std::string>(),
            e.value("model", e.value("id", std::string{})), e.value("auth_env", std::string{}),
            e.value("timeout_secs", 60));
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(std::min(pos, out.size())),
                   std::move(adapter));
    }
    return out;
}

inline std::vector<std::unique_ptr<JudgeAdapter>> make_judges_with_http(const json& config,
                                                                        const std::string& where) {
    if (!config.is_array()) throw Error("format", where + ": judges config must be a JSON array");
    json local = json::array();
    std::vector<std::pair<std::size_t, json>> http_entries;
    for (std::size_t i = 0; i < config.size(); ++i) {
        if (config[i].value("type", std::string{}) == "http")
            http_entries.emplace_back(i, config[i]);
        else
            local.push_back(config[i]);
    }
    auto out = make_judges(local, where);
    for (auto& [pos, e] : http_entries) {
        auto adapter = std::make_unique<HttpJudge>(
            e.value("id", std::string{}), e.at("endpoint").get<std::string>(),
            e.value("model", e.value("id", std::string{})), e.value("auth_env", std::string{}),
            e.value("per_minute", 0), e.value("timeout_secs", 60));
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(std::min(pos, out.size())),
                   std::move(adapter));
    }
    return out;
}

}  // namespace sportscorpus::bench
