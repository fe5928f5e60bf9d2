// Per-run telemetry: every model call, tool dispatch, agent transition, edit
// and validation becomes an Event. Analysis tables (agent call counts, tool
// usage, transition graphs, token/time summaries) are pure functions over
// persisted RunRecords.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "patchbench/task.hpp"

namespace patchbench {

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long total_tokens = 0;
};

enum class EngineKind { Workflow, SingleAgent, MultiAgent };
std::string to_string(EngineKind e);
EngineKind engine_kind_from_string(const std::string& s);

enum class EventKind { ModelCall, ToolCall, AgentEnter, Validation, Edit, Note };
std::string to_string(EventKind k);

struct Event {
    EventKind kind;
    long t_ms = 0;  // monotonic offset from run start
    nlohmann::json payload;
};

struct RunRecord {
    std::string task_id;
    EngineKind engine = EngineKind::Workflow;
    std::string model_id;
    std::vector<Event> events;
    RunVerdict verdict;
    struct Totals {
        TokenUsage tokens;
        long wall_ms = 0;
        long model_calls = 0;
        long tool_calls = 0;
    } totals;
    std::vector<std::string> registered_tools;  // registry snapshot, optional
    std::vector<std::string> execution_path;    // multi-agent role sequence
};

class Recorder {
public:
    Recorder(std::string task_id, EngineKind engine, std::string model_id,
             std::optional<std::filesystem::path> jsonl_path = std::nullopt);

    void model_call(const std::string& backend_id, const TokenUsage& usage, long duration_ms,
                    const std::string& label = "");
    void tool_call(const std::string& name, bool ok, long duration_ms);
    void agent_enter(const std::string& role);
    void validation(bool passed, const std::string& stage_summary,
                    const std::string& failed_stage);
    void edit(uint64_t edit_id, const std::string& path, const std::string& action);
    void note(const std::string& text);
    void set_registered_tools(std::vector<std::string> names);

    long elapsed_ms() const;
    const std::vector<Event>& events() const { return events_; }

    // Seals the record: computes totals from events and the wall clock.
    RunRecord finish(RunVerdict verdict);

private:
    void append(EventKind kind, nlohmann::json payload);

    std::string task_id_;
    EngineKind engine_;
    std::string model_id_;
    int64_t start_ms_;
    std::vector<Event> events_;
    std::vector<std::string> registered_tools_;
    std::optional<std::ofstream> jsonl_;
};

// Aggregations of events; finish() uses this and analyses re-derive it.
RunRecord::Totals recompute_totals(const RunRecord& record);

// Row of the multi-agent call-count table. Strat/Sum count the SWE agent's
// strategy-draft and plan-summary model calls; the other columns count role
// entries. Throws ContractError for non-multi-agent or empty records.
struct AgentCallRow {
    long ctx = 0, refl = 0, rca = 0, swe = 0, strat = 0, sum = 0, tot = 0;
};
AgentCallRow agent_call_table(const RunRecord& record);

// Tool-call counts by name; registered-but-unused tools appear with 0 when
// the record carries a registry snapshot.
std::map<std::string, long> tool_usage_table(const RunRecord& record);

struct TransitionGraph {
    std::vector<std::string> nodes;                                // sorted
    std::vector<std::tuple<std::string, std::string, long>> edges;  // sorted (from, to), weight
};
TransitionGraph transition_graph(const RunRecord& record);
std::string to_dot(const TransitionGraph& g);
TransitionGraph parse_dot(const std::string& text);

// CSV header `task,engine,model,outcome,tokens,seconds`; token and time
// cells render `x` for unpatched runs.
std::string summary_csv(const std::vector<RunRecord>& records);

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);
void save_run_record(const RunRecord& record, const std::filesystem::path& path);
RunRecord load_run_record(const std::filesystem::path& path);

}  // namespace patchbench
