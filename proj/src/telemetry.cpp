#include "patchbench/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace patchbench {

std::string to_string(EngineKind e) {
    switch (e) {
        case EngineKind::Workflow: return "workflow";
        case EngineKind::SingleAgent: return "single_agent";
        case EngineKind::MultiAgent: return "multi_agent";
    }
    return "workflow";
}

EngineKind engine_kind_from_string(const std::string& s) {
    if (s == "workflow") return EngineKind::Workflow;
    if (s == "single_agent" || s == "single-agent") return EngineKind::SingleAgent;
    if (s == "multi_agent" || s == "multi-agent") return EngineKind::MultiAgent;
    throw SchemaError("unknown engine: " + s);
}

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::ModelCall: return "model_call";
        case EventKind::ToolCall: return "tool_call";
        case EventKind::AgentEnter: return "agent_enter";
        case EventKind::Validation: return "validation";
        case EventKind::Edit: return "edit";
        case EventKind::Note: return "note";
    }
    return "note";
}

namespace {

EventKind event_kind_from_string(const std::string& s) {
    if (s == "model_call") return EventKind::ModelCall;
    if (s == "tool_call") return EventKind::ToolCall;
    if (s == "agent_enter") return EventKind::AgentEnter;
    if (s == "validation") return EventKind::Validation;
    if (s == "edit") return EventKind::Edit;
    if (s == "note") return EventKind::Note;
    throw SchemaError("unknown event kind: " + s);
}

}  // namespace

Recorder::Recorder(std::string task_id, EngineKind engine, std::string model_id,
                   std::optional<fs::path> jsonl_path)
    : task_id_(std::move(task_id)),
      engine_(engine),
      model_id_(std::move(model_id)),
      start_ms_(now_ms()) {
    if (jsonl_path) {
        fs::create_directories(jsonl_path->parent_path());
        jsonl_.emplace(*jsonl_path, std::ios::trunc);
    }
}

long Recorder::elapsed_ms() const { return static_cast<long>(now_ms() - start_ms_); }

void Recorder::append(EventKind kind, json payload) {
    Event ev{kind, elapsed_ms(), std::move(payload)};
    if (jsonl_ && jsonl_->is_open()) {
        json line{{"kind", to_string(kind)}, {"t_ms", ev.t_ms}, {"payload", ev.payload}};
        *jsonl_ << line.dump() << "\n";
        jsonl_->flush();
    }
    events_.push_back(std::move(ev));
}

void Recorder::model_call(const std::string& backend_id, const TokenUsage& usage,
                          long duration_ms, const std::string& label) {
    json p{{"backend_id", backend_id},
           {"prompt_tokens", usage.prompt_tokens},
           {"completion_tokens", usage.completion_tokens},
           {"total_tokens", usage.total_tokens},
           {"duration_ms", duration_ms}};
    if (!label.empty()) p["label"] = label;
    append(EventKind::ModelCall, std::move(p));
}

void Recorder::tool_call(const std::string& name, bool ok, long duration_ms) {
    append(EventKind::ToolCall, json{{"name", name}, {"ok", ok}, {"duration_ms", duration_ms}});
}

void Recorder::agent_enter(const std::string& role) {
    append(EventKind::AgentEnter, json{{"role", role}});
}

void Recorder::validation(bool passed, const std::string& stage_summary,
                          const std::string& failed_stage) {
    json p{{"passed", passed}, {"stages", stage_summary}};
    if (!failed_stage.empty()) p["failed_stage"] = failed_stage;
    append(EventKind::Validation, std::move(p));
}

void Recorder::edit(uint64_t edit_id, const std::string& path, const std::string& action) {
    append(EventKind::Edit, json{{"edit_id", edit_id}, {"path", path}, {"action", action}});
}

void Recorder::note(const std::string& text) { append(EventKind::Note, json{{"text", text}}); }

void Recorder::set_registered_tools(std::vector<std::string> names) {
    registered_tools_ = std::move(names);
}

RunRecord Recorder::finish(RunVerdict verdict) {
    RunRecord rec;
    rec.task_id = task_id_;
    rec.engine = engine_;
    rec.model_id = model_id_;
    rec.events = events_;
    rec.verdict = std::move(verdict);
    rec.registered_tools = registered_tools_;
    for (const auto& ev : events_)
        if (ev.kind == EventKind::AgentEnter)
            rec.execution_path.push_back(ev.payload.at("role").get<std::string>());
    rec.totals = recompute_totals(rec);
    rec.totals.wall_ms = elapsed_ms();
    return rec;
}

RunRecord::Totals recompute_totals(const RunRecord& record) {
    RunRecord::Totals t;
    t.wall_ms = record.totals.wall_ms;
    for (const auto& ev : record.events) {
        if (ev.kind == EventKind::ModelCall) {
            ++t.model_calls;
            t.tokens.prompt_tokens += ev.payload.value("prompt_tokens", 0L);
            t.tokens.completion_tokens += ev.payload.value("completion_tokens", 0L);
            t.tokens.total_tokens += ev.payload.value("total_tokens", 0L);
        } else if (ev.kind == EventKind::ToolCall) {
            ++t.tool_calls;
        }
    }
    return t;
}

AgentCallRow agent_call_table(const RunRecord& record) {
    if (record.engine != EngineKind::MultiAgent)
        throw ContractError("agent_call_table requires a multi-agent record");
    bool any = false;
    AgentCallRow row;
    for (const auto& ev : record.events) {
        if (ev.kind == EventKind::AgentEnter) {
            any = true;
            const std::string role = ev.payload.at("role").get<std::string>();
            if (role == "ContextRetriever") ++row.ctx;
            else if (role == "Reflection") ++row.refl;
            else if (role == "RootCause") ++row.rca;
            else if (role == "SWE") ++row.swe;
        } else if (ev.kind == EventKind::ModelCall) {
            const std::string label = ev.payload.value("label", "");
            if (label == "strategy") ++row.strat;
            else if (label == "summary") ++row.sum;
        }
    }
    if (!any) throw ContractError("record contains no agent events");
    row.tot = row.ctx + row.refl + row.rca + row.swe + row.strat + row.sum;
    return row;
}

std::map<std::string, long> tool_usage_table(const RunRecord& record) {
    std::map<std::string, long> out;
    for (const auto& name : record.registered_tools) out[name] = 0;
    for (const auto& ev : record.events)
        if (ev.kind == EventKind::ToolCall) ++out[ev.payload.at("name").get<std::string>()];
    return out;
}

TransitionGraph transition_graph(const RunRecord& record) {
    TransitionGraph g;
    const auto& path = record.execution_path;
    std::map<std::string, bool> nodes;
    std::map<std::pair<std::string, std::string>, long> weights;
    for (size_t i = 0; i < path.size(); ++i) {
        nodes[path[i]] = true;
        if (i + 1 < path.size()) ++weights[{path[i], path[i + 1]}];
    }
    for (const auto& [n, _] : nodes) g.nodes.push_back(n);
    for (const auto& [e, w] : weights) g.edges.emplace_back(e.first, e.second, w);
    return g;
}

std::string to_dot(const TransitionGraph& g) {
    std::string out = "digraph transitions {\n";
    for (const auto& n : g.nodes) out += "  \"" + n + "\";\n";
    for (const auto& [from, to, w] : g.edges)
        out += "  \"" + from + "\" -> \"" + to + "\" [label=\"" + std::to_string(w) + "\"];\n";
    out += "}\n";
    return out;
}

TransitionGraph parse_dot(const std::string& text) {
    TransitionGraph g;
    static const std::regex edge_re(
        R"x(^\s*"([^"]+)"\s*->\s*"([^"]+)"\s*\[label="(\d+)"\];\s*$)x");
    static const std::regex node_re(R"x(^\s*"([^"]+)";\s*$)x");
    for (const auto& line : split_lines(text).lines) {
        std::smatch m;
        if (std::regex_match(line, m, edge_re))
            g.edges.emplace_back(m[1], m[2], std::stol(m[3]));
        else if (std::regex_match(line, m, node_re))
            g.nodes.push_back(m[1]);
    }
    std::sort(g.nodes.begin(), g.nodes.end());
    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

std::string summary_csv(const std::vector<RunRecord>& records) {
    std::vector<const RunRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const RunRecord* a, const RunRecord* b) {
        return std::tie(a->task_id, a->engine, a->model_id) <
               std::tie(b->task_id, b->engine, b->model_id);
    });
    std::string out = "task,engine,model,outcome,tokens,seconds\n";
    for (const RunRecord* r : sorted) {
        out += r->task_id + "," + to_string(r->engine) + "," + r->model_id + "," +
               to_string(r->verdict.outcome) + ",";
        if (r->verdict.patched()) {
            out += std::to_string(r->totals.tokens.total_tokens) + "," +
                   std::to_string(std::lround(static_cast<double>(r->totals.wall_ms) / 1000.0));
        } else {
            out += "x,x";  // unpatched convention
        }
        out += "\n";
    }
    return out;
}

json run_record_to_json(const RunRecord& record) {
    json events = json::array();
    for (const auto& ev : record.events)
        events.push_back({{"kind", to_string(ev.kind)}, {"t_ms", ev.t_ms}, {"payload", ev.payload}});

    json verdict{{"outcome", to_string(record.verdict.outcome)}};
    if (record.verdict.final_diff) verdict["final_diff"] = *record.verdict.final_diff;
    if (record.verdict.failure_stage)
        verdict["failure_stage"] = to_string(*record.verdict.failure_stage);
    if (!record.verdict.detail.empty()) verdict["detail"] = record.verdict.detail;

    return json{{"schema", "runrecord-v1"},
                {"task_id", record.task_id},
                {"engine", to_string(record.engine)},
                {"model_id", record.model_id},
                {"verdict", verdict},
                {"totals",
                 {{"prompt_tokens", record.totals.tokens.prompt_tokens},
                  {"completion_tokens", record.totals.tokens.completion_tokens},
                  {"total_tokens", record.totals.tokens.total_tokens},
                  {"wall_ms", record.totals.wall_ms},
                  {"model_calls", record.totals.model_calls},
                  {"tool_calls", record.totals.tool_calls}}},
                {"registered_tools", record.registered_tools},
                {"execution_path", record.execution_path},
                {"events", events}};
}

RunRecord run_record_from_json(const json& j) {
    if (j.value("schema", "") != "runrecord-v1")
        throw SchemaError("not a runrecord-v1 document");
    RunRecord rec;
    rec.task_id = j.at("task_id").get<std::string>();
    rec.engine = engine_kind_from_string(j.at("engine").get<std::string>());
    rec.model_id = j.at("model_id").get<std::string>();

    const json& verdict = j.at("verdict");
    const std::string outcome = verdict.at("outcome").get<std::string>();
    if (outcome == "patched") {
        rec.verdict = RunVerdict::make_patched(verdict.value("final_diff", ""));
    } else {
        Outcome o = outcome == "failed_max_iterations" ? Outcome::FailedMaxIterations
                    : outcome == "failed_timeout"      ? Outcome::FailedTimeout
                                                       : Outcome::FailedError;
        std::optional<FailureStage> stage;
        if (verdict.contains("failure_stage")) {
            const std::string s = verdict["failure_stage"].get<std::string>();
            stage = s == "apply"   ? FailureStage::Apply
                    : s == "build" ? FailureStage::Build
                    : s == "pov"   ? FailureStage::Pov
                                   : FailureStage::Tests;
        }
        rec.verdict = RunVerdict::make_failed(o, stage, verdict.value("detail", ""));
    }

    const json& totals = j.at("totals");
    rec.totals.tokens.prompt_tokens = totals.value("prompt_tokens", 0L);
    rec.totals.tokens.completion_tokens = totals.value("completion_tokens", 0L);
    rec.totals.tokens.total_tokens = totals.value("total_tokens", 0L);
    rec.totals.wall_ms = totals.value("wall_ms", 0L);
    rec.totals.model_calls = totals.value("model_calls", 0L);
    rec.totals.tool_calls = totals.value("tool_calls", 0L);

    rec.registered_tools = j.value("registered_tools", std::vector<std::string>{});
    rec.execution_path = j.value("execution_path", std::vector<std::string>{});
    for (const auto& ev : j.at("events"))
        rec.events.push_back(Event{event_kind_from_string(ev.at("kind").get<std::string>()),
                                   ev.at("t_ms").get<long>(), ev.at("payload")});
    return rec;
}

void save_run_record(const RunRecord& record, const fs::path& path) {
    write_file(path, run_record_to_json(record).dump(2) + "\n");
}

RunRecord load_run_record(const fs::path& path) {
    try {
        return run_record_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw SchemaError("malformed run record " + path.string() + ": " + e.what());
    }
}

}  // namespace patchbench
