// Provider-agnostic chat-completion layer: routing across backends with
// retries, optional response caching, token accounting, and a deterministic
// scripted backend for offline reproduction.
#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "patchbench/errors.hpp"
#include "patchbench/telemetry.hpp"
#include "patchbench/tool_schema.hpp"

namespace patchbench {

enum class ChatRole { System, User, Assistant, Tool };
std::string to_string(ChatRole r);

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;
    std::vector<ToolCall> tool_calls;  // assistant messages only
    std::string tool_call_id;          // tool messages only
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    std::vector<ToolDescriptor> tools;
    double temperature = 0.0;
};

struct ChatResponse {
    std::string content;
    std::vector<ToolCall> tool_calls;
    TokenUsage usage;
    std::string backend_id;
};

// Deterministic monotone token estimate: alphanumeric runs and individual
// punctuation characters each count as one token.
long count_tokens(std::string_view text);
long count_tokens(const ChatRequest& req);

// Retryable backend failure (network, 5xx, 429). Anything else is fatal.
class TransientBackendError : public Error {
public:
    explicit TransientBackendError(const std::string& what) : Error(what) {}
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

// One pre-authored response. Entries with a `match` substring are served
// only to requests whose rendered text contains it; entries without one are
// consumed strictly in script order.
struct ScriptEntry {
    std::optional<std::string> match;
    std::string content;
    std::vector<ToolCall> tool_calls;
};

class ScriptedBackend : public Backend {
public:
    ScriptedBackend(std::string id, std::vector<ScriptEntry> entries);
    static std::shared_ptr<ScriptedBackend> from_file(std::string id,
                                                      const std::filesystem::path& script);
    // JSON lines: {"match"?: substring, "content"?: text,
    //              "tool_calls"?: [{"name":..., "arguments": {...}}]}
    static std::vector<ScriptEntry> parse_script(const std::string& text);

    std::string id() const override { return id_; }
    ChatResponse complete(const ChatRequest& req) override;

    size_t consumed_count() const { return consumed_.size(); }
    const std::vector<size_t>& consumed() const { return consumed_; }
    const std::vector<std::string>& requests_seen() const { return requests_seen_; }

private:
    std::string id_;
    std::vector<ScriptEntry> entries_;
    std::vector<bool> used_;
    std::vector<size_t> consumed_;
    std::vector<std::string> requests_seen_;
    uint64_t next_call_id_ = 1;
};

struct BackendConfig {
    enum class Kind { Http, Scripted };
    std::string id;
    Kind kind = Kind::Scripted;
    std::string base_url;     // http
    std::string api_key_env;  // http: env var holding the key
    std::string model;        // http: overrides request model when set
    std::string script_file;  // scripted
};

// Chat-completions HTTP backend (POST {base_url}/chat/completions).
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig config);
    std::string id() const override { return config_.id; }
    ChatResponse complete(const ChatRequest& req) override;

private:
    BackendConfig config_;
};

struct RoutingPolicy {
    enum class Strategy { RoundRobin, Priority };
    Strategy strategy = Strategy::Priority;
    std::vector<BackendConfig> backends;
    int max_retries = 2;
};

RoutingPolicy::Strategy strategy_from_string(const std::string& s);

class Gateway {
public:
    Gateway(std::vector<std::shared_ptr<Backend>> backends,
            RoutingPolicy::Strategy strategy = RoutingPolicy::Strategy::Priority,
            int max_retries = 2, bool enable_cache = false);

    // Routes per strategy, moving to the next backend on transient failures
    // until max_retries+1 attempts are spent. Fatal errors propagate.
    ChatResponse complete(const ChatRequest& req, Recorder* recorder = nullptr,
                          const std::string& label = "");

    size_t backend_count() const { return backends_.size(); }

private:
    std::vector<std::shared_ptr<Backend>> backends_;
    RoutingPolicy::Strategy strategy_;
    int max_retries_;
    bool cache_enabled_;
    std::atomic<uint64_t> cursor_{0};
    std::mutex cache_mutex_;
    std::map<std::string, ChatResponse> cache_;
};

// Instantiates backends from configs (scripted files are loaded eagerly).
std::shared_ptr<Gateway> make_gateway(const RoutingPolicy& policy, bool enable_cache = false);

nlohmann::json message_to_json(const ChatMessage& m);
ChatMessage message_from_json(const nlohmann::json& j);

}  // namespace patchbench
