#include "patchbench/gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "patchbench/util.hpp"

using nlohmann::json;

namespace patchbench {

std::string to_string(ChatRole r) {
    switch (r) {
        case ChatRole::System: return "system";
        case ChatRole::User: return "user";
        case ChatRole::Assistant: return "assistant";
        case ChatRole::Tool: return "tool";
    }
    return "user";
}

namespace {

ChatRole role_from_string(const std::string& s) {
    if (s == "system") return ChatRole::System;
    if (s == "user") return ChatRole::User;
    if (s == "assistant") return ChatRole::Assistant;
    if (s == "tool") return ChatRole::Tool;
    throw ProtocolError("unknown chat role: " + s);
}

}  // namespace

long count_tokens(std::string_view text) {
    long count = 0;
    size_t i = 0;
    auto is_word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (is_word(c)) {
            ++count;
            while (i < text.size() && is_word(text[i])) ++i;
        } else {
            ++count;  // each punctuation character is one token
            ++i;
        }
    }
    return count;
}

long count_tokens(const ChatRequest& req) {
    long total = 0;
    for (const auto& m : req.messages) {
        total += count_tokens(m.content);
        for (const auto& tc : m.tool_calls) total += count_tokens(tc.name) + count_tokens(tc.arguments.dump());
    }
    return total;
}

json message_to_json(const ChatMessage& m) {
    json j{{"role", to_string(m.role)}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& tc : m.tool_calls) {
            calls.push_back({{"id", tc.call_id},
                             {"type", "function"},
                             {"function", {{"name", tc.name}, {"arguments", tc.arguments.dump()}}}});
        }
        j["tool_calls"] = calls;
    }
    if (!m.tool_call_id.empty()) j["tool_call_id"] = m.tool_call_id;
    return j;
}

ChatMessage message_from_json(const json& j) {
    ChatMessage m;
    m.role = role_from_string(j.at("role").get<std::string>());
    if (j.contains("content") && j["content"].is_string()) m.content = j["content"];
    if (j.contains("tool_calls")) {
        for (const auto& tc : j["tool_calls"]) {
            ToolCall call;
            call.call_id = tc.value("id", "");
            call.name = tc.at("function").at("name").get<std::string>();
            const json& args = tc.at("function").at("arguments");
            if (args.is_string()) {
                call.arguments = json::parse(args.get<std::string>(), nullptr, false);
                if (call.arguments.is_discarded())
                    throw ProtocolError("tool call arguments are not valid JSON");
            } else {
                call.arguments = args;
            }
            m.tool_calls.push_back(std::move(call));
        }
    }
    m.tool_call_id = j.value("tool_call_id", "");
    return m;
}

// --- scripted backend -------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::string id, std::vector<ScriptEntry> entries)
    : id_(std::move(id)), entries_(std::move(entries)), used_(entries_.size(), false) {}

std::vector<ScriptEntry> ScriptedBackend::parse_script(const std::string& text) {
    std::vector<ScriptEntry> out;
    long lineno = 0;
    for (const auto& line : split_lines(text).lines) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("script entry is not valid JSON: " + std::string(e.what()), lineno);
        }
        if (!j.is_object()) throw ParseError("script entry must be a JSON object", lineno);
        ScriptEntry entry;
        if (j.contains("match")) entry.match = j["match"].get<std::string>();
        entry.content = j.value("content", "");
        if (j.contains("tool_calls")) {
            for (const auto& tc : j["tool_calls"]) {
                ToolCall call;
                call.name = tc.at("name").get<std::string>();
                call.arguments = tc.value("arguments", json::object());
                if (!call.arguments.is_object())
                    throw ParseError("tool call arguments must be an object", lineno);
                entry.tool_calls.push_back(std::move(call));
            }
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(std::string id,
                                                            const std::filesystem::path& script) {
    return std::make_shared<ScriptedBackend>(std::move(id), parse_script(read_file(script)));
}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
    std::string request_text;
    for (const auto& m : req.messages) {
        request_text += m.content;
        request_text.push_back('\n');
    }
    requests_seen_.push_back(request_text);

    for (size_t i = 0; i < entries_.size(); ++i) {
        if (used_[i]) continue;
        const ScriptEntry& e = entries_[i];
        if (e.match && request_text.find(*e.match) == std::string::npos) continue;
        used_[i] = true;
        consumed_.push_back(i);

        ChatResponse resp;
        resp.content = e.content;
        for (const auto& tc : e.tool_calls) {
            ToolCall call = tc;
            call.call_id = "call_" + std::to_string(next_call_id_++);
            resp.tool_calls.push_back(std::move(call));
        }
        resp.backend_id = id_;
        resp.usage.prompt_tokens = count_tokens(req);
        resp.usage.completion_tokens = count_tokens(resp.content);
        for (const auto& tc : resp.tool_calls)
            resp.usage.completion_tokens += count_tokens(tc.name) + count_tokens(tc.arguments.dump());
        resp.usage.total_tokens = resp.usage.prompt_tokens + resp.usage.completion_tokens;
        return resp;
    }
    throw ScriptExhaustedError("scripted backend '" + id_ + "' has no entry for this request (" +
                               std::to_string(consumed_.size()) + " consumed)");
}

// --- HTTP backend ------------------------------------------------------------

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {}

ChatResponse HttpBackend::complete(const ChatRequest& req) {
    json body;
    body["model"] = config_.model.empty() ? req.model_id : config_.model;
    body["temperature"] = req.temperature;
    json msgs = json::array();
    for (const auto& m : req.messages) msgs.push_back(message_to_json(m));
    body["messages"] = msgs;
    if (!req.tools.empty()) {
        json tools = json::array();
        for (const auto& t : req.tools) tools.push_back(descriptor_to_json(t));
        body["tools"] = tools;
    }

    // Split base_url into host part and path prefix.
    std::string base = config_.base_url;
    std::string prefix;
    size_t scheme = base.find("://");
    size_t slash = scheme == std::string::npos ? base.find('/') : base.find('/', scheme + 3);
    if (slash != std::string::npos) {
        prefix = base.substr(slash);
        base = base.substr(0, slash);
        if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }

    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw TransientBackendError("backend '" + config_.id + "' is unreachable");
    if (res->status == 429 || res->status >= 500)
        throw TransientBackendError("backend '" + config_.id + "' returned HTTP " +
                                    std::to_string(res->status));
    if (res->status != 200)
        throw ProtocolError("backend '" + config_.id + "' returned HTTP " +
                            std::to_string(res->status) + ": " + res->body);

    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::exception& e) {
        throw ProtocolError("backend '" + config_.id + "' sent malformed JSON: " + e.what());
    }

    try {
        const json& message = reply.at("choices").at(0).at("message");
        ChatMessage parsed = message_from_json(message);
        ChatResponse resp;
        resp.content = parsed.content;
        resp.tool_calls = parsed.tool_calls;
        resp.backend_id = config_.id;
        if (reply.contains("usage")) {
            const json& u = reply["usage"];
            resp.usage.prompt_tokens = u.value("prompt_tokens", 0L);
            resp.usage.completion_tokens = u.value("completion_tokens", 0L);
            resp.usage.total_tokens =
                u.value("total_tokens", resp.usage.prompt_tokens + resp.usage.completion_tokens);
        } else {
            resp.usage.prompt_tokens = count_tokens(req);
            resp.usage.completion_tokens = count_tokens(resp.content);
            resp.usage.total_tokens = resp.usage.prompt_tokens + resp.usage.completion_tokens;
        }
        return resp;
    } catch (const json::exception& e) {
        throw ProtocolError("backend '" + config_.id + "' reply missing fields: " + e.what());
    }
}

// --- gateway -----------------------------------------------------------------

RoutingPolicy::Strategy strategy_from_string(const std::string& s) {
    if (s == "round_robin" || s == "round-robin") return RoutingPolicy::Strategy::RoundRobin;
    if (s == "priority") return RoutingPolicy::Strategy::Priority;
    throw SchemaError("unknown routing strategy: " + s);
}

Gateway::Gateway(std::vector<std::shared_ptr<Backend>> backends,
                 RoutingPolicy::Strategy strategy, int max_retries, bool enable_cache)
    : backends_(std::move(backends)),
      strategy_(strategy),
      max_retries_(max_retries),
      cache_enabled_(enable_cache) {
    if (backends_.empty()) throw ConfigError("routing policy requires at least one backend");
}

ChatResponse Gateway::complete(const ChatRequest& req, Recorder* recorder,
                               const std::string& label) {
    std::string cache_key;
    if (cache_enabled_) {
        json key{{"model", req.model_id}, {"temperature", req.temperature}};
        json msgs = json::array();
        for (const auto& m : req.messages) msgs.push_back(message_to_json(m));
        key["messages"] = msgs;
        json tools = json::array();
        for (const auto& t : req.tools) tools.push_back(descriptor_to_json(t));
        key["tools"] = tools;
        cache_key = sha256_hex(key.dump());
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = cache_.find(cache_key);
        if (it != cache_.end()) {
            if (recorder)
                recorder->model_call(it->second.backend_id, it->second.usage, 0,
                                     label.empty() ? "cached" : label);
            return it->second;
        }
    }

    const size_t n = backends_.size();
    const size_t start =
        strategy_ == RoutingPolicy::Strategy::RoundRobin ? cursor_.fetch_add(1) % n : 0;

    const int max_attempts = max_retries_ + 1;
    int attempts = 0;
    std::string last_cause;
    for (size_t k = 0; attempts < max_attempts; ++k) {
        Backend& backend = *backends_[(start + k) % n];
        ++attempts;
        int64_t t0 = now_ms();
        try {
            ChatResponse resp = backend.complete(req);
            if (recorder)
                recorder->model_call(resp.backend_id, resp.usage,
                                     static_cast<long>(now_ms() - t0), label);
            if (cache_enabled_) {
                std::lock_guard<std::mutex> lock(cache_mutex_);
                cache_[cache_key] = resp;
            }
            return resp;
        } catch (const TransientBackendError& e) {
            last_cause = e.what();
        }
    }
    throw GatewayError("all backends exhausted after " + std::to_string(attempts) +
                       " attempts; last cause: " + last_cause);
}

std::shared_ptr<Gateway> make_gateway(const RoutingPolicy& policy, bool enable_cache) {
    std::vector<std::shared_ptr<Backend>> backends;
    for (const auto& cfg : policy.backends) {
        if (cfg.kind == BackendConfig::Kind::Scripted) {
            if (cfg.script_file.empty())
                throw ConfigError("scripted backend '" + cfg.id + "' needs a script_file");
            backends.push_back(ScriptedBackend::from_file(cfg.id, cfg.script_file));
        } else {
            if (cfg.base_url.empty())
                throw ConfigError("http backend '" + cfg.id + "' needs a base_url");
            backends.push_back(std::make_shared<HttpBackend>(cfg));
        }
    }
    return std::make_shared<Gateway>(backends, policy.strategy, policy.max_retries, enable_cache);
}

}  // namespace patchbench
