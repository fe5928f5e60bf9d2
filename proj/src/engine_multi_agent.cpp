#include "patchbench/engine_multi_agent.hpp"

#include <algorithm>
#include <regex>

#include "patchbench/diff.hpp"
#include "patchbench/engine_workflow.hpp"  // truncate_middle_out
#include "patchbench/util.hpp"

namespace patchbench {

std::string role_name(AgentRole r) {
    switch (r) {
        case AgentRole::ContextRetriever: return "ContextRetriever";
        case AgentRole::RootCause: return "RootCause";
        case AgentRole::SWE: return "SWE";
        case AgentRole::Patch: return "Patch";
        case AgentRole::QE: return "QE";
        case AgentRole::Reflection: return "Reflection";
        case AgentRole::Summary: return "Summary";
    }
    return "Summary";
}

std::optional<AgentRole> role_from_token(const std::string& token) {
    std::string t = trim(token);
    if (t == "Ctx" || t == "Context" || t == "ContextRetriever") return AgentRole::ContextRetriever;
    if (t == "RCA" || t == "RootCause") return AgentRole::RootCause;
    if (t == "SWE" || t == "Strat" || t == "Strategy") return AgentRole::SWE;
    if (t == "Patch" || t == "Patcher") return AgentRole::Patch;
    if (t == "QE" || t == "Validation") return AgentRole::QE;
    if (t == "Refl" || t == "Reflection") return AgentRole::Reflection;
    if (t == "Sum" || t == "Summary") return AgentRole::Summary;
    return std::nullopt;
}

TransitionRelation permissible_transitions() {
    using R = AgentRole;
    TransitionRelation rel;
    // Core progress path.
    rel.insert({R::ContextRetriever, R::RootCause});
    rel.insert({R::RootCause, R::SWE});
    rel.insert({R::SWE, R::Patch});
    rel.insert({R::Patch, R::QE});
    rel.insert({R::QE, R::Summary});
    // Reflection is reachable from every stage that can fail. The empty
    // context edge (Ctx -> Reflection) is required for the zero-snippet
    // route even though the core chain never takes it.
    for (R from : {R::ContextRetriever, R::RootCause, R::SWE, R::Patch, R::QE})
        rel.insert({from, R::Reflection});
    for (R to : {R::ContextRetriever, R::RootCause, R::SWE, R::Patch})
        rel.insert({R::Reflection, to});
    return rel;
}

namespace {

std::string render_snippets(const std::vector<Snippet>& snippets) {
    if (snippets.empty()) return "(none)\n";
    std::string out;
    for (const auto& s : snippets) {
        out += "<< " + s.path + " :: " + s.identifier + " >>\n" + s.text;
        if (!out.empty() && out.back() != '\n') out += "\n";
    }
    return out;
}

void append_shared(SharedState& state, ChatRole role, std::string content) {
    state.messages.push_back({role, std::move(content), {}, {}});
}

ChatResponse call_model(SharedState& state, Gateway& gateway, const std::string& model_id,
                        Recorder& recorder, const std::string& system_prompt,
                        const std::string& user_prompt, const std::string& label) {
    ChatRequest req;
    req.model_id = model_id;
    req.messages.push_back({ChatRole::System, system_prompt, {}, {}});
    // Every model-driven role resumes from the shared history.
    for (const auto& m : state.messages) req.messages.push_back(m);
    req.messages.push_back({ChatRole::User, user_prompt, {}, {}});
    ChatResponse resp = gateway.complete(req, &recorder, label);
    append_shared(state, ChatRole::User, user_prompt);
    append_shared(state, ChatRole::Assistant, resp.content);
    return resp;
}

// First <tag>...</tag> block, trimmed of padding.
std::optional<std::string> extract_block(const std::string& text, const std::string& tag) {
    const std::string open = "<" + tag + ">", close = "</" + tag + ">";
    size_t b = text.find(open);
    if (b == std::string::npos) return std::nullopt;
    size_t e = text.find(close, b + open.size());
    if (e == std::string::npos) return std::nullopt;
    std::string body = trim(text.substr(b + open.size(), e - b - open.size()));
    if (body.empty()) return std::nullopt;
    return body;
}

// Strips one leading and one trailing newline (plus surrounding indent-only
// runs) so block payloads match file text exactly.
std::string strip_block_padding(std::string s) {
    size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i < s.size() && s[i] == '\n') s.erase(0, i + 1);
    size_t j = s.size();
    while (j > 0 && (s[j - 1] == ' ' || s[j - 1] == '\t')) --j;
    if (j > 0 && s[j - 1] == '\n') s.erase(j - 1);
    return s;
}

}  // namespace

std::vector<PatchBlock> parse_patch_blocks(const std::string& text) {
    std::vector<PatchBlock> out;
    size_t pos = 0;
    while (true) {
        size_t b = text.find("<patch>", pos);
        if (b == std::string::npos) break;
        size_t e = text.find("</patch>", b);
        if (e == std::string::npos) break;
        std::string body = text.substr(b + 7, e - b - 7);
        pos = e + 8;

        auto field = [&](const char* tag) -> std::optional<std::string> {
            const std::string open = std::string("<") + tag + ">";
            const std::string close = std::string("</") + tag + ">";
            size_t fb = body.find(open);
            if (fb == std::string::npos) return std::nullopt;
            size_t fe = body.find(close, fb + open.size());
            if (fe == std::string::npos) return std::nullopt;
            return body.substr(fb + open.size(), fe - fb - open.size());
        };

        auto file_path = field("file_path");
        auto identifier = field("identifier");
        auto old_code = field("old_code");
        auto new_code = field("new_code");
        if (!file_path || !old_code || !new_code) continue;  // malformed block dropped

        PatchBlock block;
        block.file_path = trim(*file_path);
        block.identifier = identifier ? trim(*identifier) : "";
        block.old_code = strip_block_padding(*old_code);
        block.new_code = strip_block_padding(*new_code);
        if (block.file_path.empty() || block.old_code.empty()) continue;
        out.push_back(std::move(block));
    }
    return out;
}

void context_retriever_step(SharedState& state, const Index& idx, const PatchTask& task) {
    SnippetManagerState mgr;
    for (const auto& name : Index::frame_names(task.crash_report, idx.profile()))
        mgr.pending_queries.push_back({SnippetManagerState::QueryKind::Function, name});

    // Functions overlapping the commit diff's hunks.
    try {
        diff::UnifiedDiff parsed = diff::parse_diff(state.diff_context);
        for (const auto& fd : parsed.files) {
            for (const auto& hunk : fd.hunks) {
                for (const auto& s : idx.functions()) {
                    if (s.path != fd.path()) continue;
                    long hunk_end = hunk.old_start + std::max(0L, hunk.old_count - 1);
                    if (s.start_line <= hunk_end && s.end_line >= hunk.old_start)
                        mgr.pending_queries.push_back(
                            {SnippetManagerState::QueryKind::Function, s.name});
                }
            }
        }
    } catch (const ParseError&) {
        // Unparseable diff context contributes no queries.
    }

    size_t added = 0;
    for (const auto& [kind, name] : mgr.pending_queries) {
        (void)kind;
        for (const auto& s : idx.lookup_functions(name)) {
            std::string key = s.path + ":" + s.name;
            if (!mgr.fetched.insert(key).second) continue;  // deduplicated
            state.code_snippets.push_back({s.path, s.name, idx.symbol_source(s)});
            ++added;
        }
    }

    append_shared(state, ChatRole::User,
                  "[ContextRetriever] collected " + std::to_string(added) +
                      " code snippet(s) from crash frames and the commit diff.");
    if (state.code_snippets.empty()) {
        state.failure_note = "context retrieval resolved no code snippets";
        state.next_agent = AgentRole::Reflection;
    } else {
        state.next_agent = AgentRole::RootCause;
    }
}

void root_cause_step(SharedState& state, Gateway& gateway, const std::string& model_id,
                     Recorder& recorder) {
    const std::string system =
        "You are a root-cause analysis agent. Perform a precise root-cause analysis for the "
        "vulnerability.";
    const std::string user =
        "PROJECT: " + state.project_name + "\n" +
        "DIFF CONTEXT (truncated): " + truncate_middle_out(state.diff_context, 4000) + "\n" +
        "RELEVANT CODE SNIPPETS:\n" + render_snippets(state.code_snippets) +
        "OUTPUT ONLY:\n<root_cause> ...technical explanation tied to exact code logic/locations... "
        "</root_cause>";

    ChatResponse resp = call_model(state, gateway, model_id, recorder, system, user, "rca");
    auto block = extract_block(resp.content, "root_cause");
    if (!block) {
        // One re-ask before falling through to reflection.
        ChatResponse retry = call_model(
            state, gateway, model_id, recorder, system,
            "Your previous reply did not contain the required block. OUTPUT ONLY:\n"
            "<root_cause> ... </root_cause>",
            "rca_retry");
        block = extract_block(retry.content, "root_cause");
    }
    if (block) {
        state.root_cause = *block;
        state.next_agent = AgentRole::SWE;
    } else {
        state.failure_note = "root-cause analysis failed to produce a <root_cause> block";
        state.next_agent = AgentRole::Reflection;
    }
}

void swe_strategy_step(SharedState& state, Gateway& gateway, const std::string& model_id,
                       Recorder& recorder) {
    const std::string system =
        "You are a software engineer drafting a high-level patch strategy in natural language.";
    std::string user = "PROJECT: " + state.project_name + "\n";
    if (state.root_cause) user += "ROOT CAUSE: " + *state.root_cause + "\n";
    if (state.reflection_guidance) user += "REFLECTION: " + *state.reflection_guidance + "\n";
    user += "RELEVANT CODE SNIPPETS:\n" + render_snippets(state.code_snippets);
    user += "Describe the intended changes; do not write code yet.";

    ChatResponse strategy = call_model(state, gateway, model_id, recorder, system, user, "strategy");
    if (trim(strategy.content).empty()) {
        state.failure_note = "strategy draft was empty";
        state.next_agent = AgentRole::Reflection;
        return;
    }

    ChatResponse summary = call_model(
        state, gateway, model_id, recorder,
        "You summarize patch strategies into implementation-ready plans.",
        "Summarize the strategy above into an implementation-ready plan for the patch agent.",
        "summary");
    if (trim(summary.content).empty()) {
        state.failure_note = "strategy summary was empty";
        state.next_agent = AgentRole::Reflection;
        return;
    }
    state.patch_strategy = summary.content;
    state.next_agent = AgentRole::Patch;
}

void patch_step(SharedState& state, Gateway& gateway, const std::string& model_id, Workspace& ws,
                Recorder& recorder, const std::vector<std::string>& protected_globs) {
    const std::string system =
        "You are a skilled software engineer generating minimal patch changes.\n"
        "Return ONLY <patch> blocks in the required format; no prose.\n"
        "CONSTRAINTS:\n"
        "- Only modify files under the project source directory (SRC).\n"
        "- Do NOT modify oss-fuzz / infra / pov / harness directories.\n"
        "- <file_path> must be relative to the source root.";
    std::string user = "PROJECT: " + state.project_name + "\n";
    user += "ROOT CAUSE (if available): " + state.root_cause.value_or("(none)") + "\n";
    user += "REFLECTION (if available): " + state.reflection_guidance.value_or("(none)") + "\n";
    user += "PATCH STRATEGY (optional): " + state.patch_strategy.value_or("(none)") + "\n";
    user += "EDITABLE SNIPPETS (edit ONLY these regions):\n" + render_snippets(state.code_snippets);
    user += "\nOUTPUT FORMAT (one or more blocks):\n"
            "<patch>\n  <file_path>relative/path/from/source/root</file_path>\n"
            "  <identifier>function_or_method_name</identifier>\n"
            "  <old_code> ...exact region to replace with context... </old_code>\n"
            "  <new_code> ...same region with fix applied... </new_code>\n</patch>";

    ChatResponse resp = call_model(state, gateway, model_id, recorder, system, user, "patch");
    std::vector<PatchBlock> blocks = parse_patch_blocks(resp.content);
    if (blocks.empty()) {
        state.failure_note = "patch reply contained no parseable <patch> blocks";
        append_shared(state, ChatRole::User, "[Patch] no parseable <patch> blocks in reply.");
        state.next_agent = AgentRole::Reflection;
        return;
    }

    size_t applied = 0;
    std::vector<std::string> notes;
    for (const auto& block : blocks) {
        if (matches_any_glob(protected_globs, block.file_path)) {
            notes.push_back("rejected block for protected path " + block.file_path);
            continue;
        }
        // "edit ONLY these regions": old_code must sit inside a listed snippet.
        bool inside = false;
        for (const auto& s : state.code_snippets)
            if (s.path == block.file_path && s.text.find(block.old_code) != std::string::npos)
                inside = true;
        if (!inside) {
            notes.push_back("rejected block for " + block.file_path +
                            ": old_code is not inside an editable snippet");
            continue;
        }
        try {
            ApplyPayload payload;
            payload.old_code = block.old_code;
            payload.new_code = block.new_code;
            const EditRecord& rec = ws.apply_patch(block.file_path, payload);
            recorder.edit(rec.edit_id, rec.path, "apply");
            ++applied;
        } catch (const Error& e) {
            notes.push_back("block for " + block.file_path + " failed to apply: " + e.what());
        }
    }
    for (const auto& n : notes) {
        recorder.note(n);
        append_shared(state, ChatRole::User, "[Patch] " + n);
    }

    if (applied == 0) {
        state.failure_note = "all patch blocks were rejected:\n" + join_lines(notes, true);
        state.next_agent = AgentRole::Reflection;
        return;
    }
    state.patch_attempts.push_back({ws.emit_final_diff(), std::nullopt});
    append_shared(state, ChatRole::User,
                  "[Patch] applied " + std::to_string(applied) + " block(s); attempt " +
                      std::to_string(state.patch_attempts.size()) + " recorded.");
    state.next_agent = AgentRole::QE;
}

void qe_step(SharedState& state, Validator& validator, Workspace& ws, const PatchTask& task,
             Recorder& recorder) {
    if (state.patch_attempts.empty() || state.patch_attempts.back().report.has_value())
        throw ContractError("qe_step requires an unvalidated patch attempt");

    ValidationReport report = validator.validate(task, ws);
    state.patch_attempts.back().report = report;
    if (report.passed) {
        append_shared(state, ChatRole::User, "[QE] validation passed.");
        state.next_agent = AgentRole::Summary;
        return;
    }
    state.failure_note = make_feedback(report);
    append_shared(state, ChatRole::User, "[QE] validation failed.\n" + state.failure_note);
    // Restore the workspace before the next attempt.
    while (ws.active_edit_count() > 0) {
        const EditRecord& rec = ws.undo_last();
        recorder.edit(rec.edit_id, rec.path, "undo");
    }
    state.next_agent = AgentRole::Reflection;
}

void reflection_step(SharedState& state, Gateway& gateway, const std::string& model_id,
                     Recorder& recorder) {
    const std::string system =
        "You are a reflection agent. Analyze the failure evidence and produce focused guidance "
        "for the next step. End your reply with a line of the form 'NEXT: <role>' where <role> "
        "is one of Ctx, RCA, SWE, Patch.";
    std::string user = "FAILURE EVIDENCE:\n" +
                       (state.failure_note.empty() ? "(none recorded)" : state.failure_note) +
                       "\nAttempts so far: " + std::to_string(state.patch_attempts.size());

    ChatResponse resp = call_model(state, gateway, model_id, recorder, system, user, "reflection");
    state.reflection_guidance = resp.content;

    // Mandatory routing token; absent or invalid targets default to Patch.
    std::optional<AgentRole> target;
    static const std::regex next_re(R"(^\s*NEXT:\s*(\S+)\s*$)");
    for (const auto& line : split_lines(resp.content).lines) {
        std::smatch m;
        if (std::regex_match(line, m, next_re)) {
            auto role = role_from_token(m[1]);
            if (role && (*role == AgentRole::ContextRetriever || *role == AgentRole::RootCause ||
                         *role == AgentRole::SWE || *role == AgentRole::Patch)) {
                target = role;
            } else {
                recorder.note("reflection named invalid NEXT target '" + std::string(m[1]) +
                              "'; defaulting to Patch");
            }
        }
    }
    state.next_agent = target.value_or(AgentRole::Patch);
}

RunVerdict run_multi_agent(const PatchTask& task, Workspace& ws, Validator& validator,
                           Gateway& gateway, const std::string& model_id, Recorder& recorder,
                           const MultiAgentOptions& options) {
    Index idx = Index::build(ws, task.language_profile);
    for (const auto& w : idx.warnings()) recorder.note(w);

    SharedState state;
    state.project_name = task.task_id;
    state.diff_context = task.commit_diff;

    const double wall_budget_ms = task.budgets.total_wall_clock * 1000.0;
    AgentRole current = AgentRole::ContextRetriever;
    state.execution_path.push_back(current);
    recorder.agent_enter(role_name(current));

    auto last_failed_stage = [&]() -> std::optional<FailureStage> {
        for (auto it = state.patch_attempts.rbegin(); it != state.patch_attempts.rend(); ++it)
            if (it->report && !it->report->passed) return it->report->failed_stage();
        return std::nullopt;
    };

    int steps = 0;
    while (true) {
        if (++steps > task.budgets.max_agent_steps)
            return RunVerdict::make_failed(Outcome::FailedMaxIterations, last_failed_stage(),
                                           "agent step budget exhausted");
        if (recorder.elapsed_ms() >= wall_budget_ms)
            return RunVerdict::make_failed(Outcome::FailedTimeout, last_failed_stage(),
                                           "total wall clock budget exceeded");
        if (current == AgentRole::Patch &&
            static_cast<int>(state.patch_attempts.size()) >= task.budgets.max_iterations)
            return RunVerdict::make_failed(
                Outcome::FailedMaxIterations, last_failed_stage(),
                "patch attempt budget exhausted after " +
                    std::to_string(state.patch_attempts.size()) + " attempts");

        state.next_agent.reset();
        try {
            switch (current) {
                case AgentRole::ContextRetriever: context_retriever_step(state, idx, task); break;
                case AgentRole::RootCause:
                    root_cause_step(state, gateway, model_id, recorder);
                    break;
                case AgentRole::SWE: swe_strategy_step(state, gateway, model_id, recorder); break;
                case AgentRole::Patch:
                    patch_step(state, gateway, model_id, ws, recorder, options.protected_globs);
                    break;
                case AgentRole::QE: qe_step(state, validator, ws, task, recorder); break;
                case AgentRole::Reflection:
                    reflection_step(state, gateway, model_id, recorder);
                    break;
                case AgentRole::Summary:
                    throw ContractError("Summary is terminal and has no handler");
            }
        } catch (const Error& e) {
            return RunVerdict::make_failed(Outcome::FailedError, last_failed_stage(),
                                           std::string("agent handler failed: ") + e.what());
        }

        if (!state.next_agent)
            return RunVerdict::make_failed(Outcome::FailedError, last_failed_stage(),
                                           role_name(current) + " set no next_agent");
        AgentRole next = *state.next_agent;
        if (!options.relation.count({current, next}))
            return RunVerdict::make_failed(Outcome::FailedError, last_failed_stage(),
                                           "orchestration error: illegal transition " +
                                               role_name(current) + " -> " + role_name(next));
        state.execution_path.push_back(next);
        recorder.agent_enter(role_name(next));
        current = next;

        if (current == AgentRole::Summary) {
            append_shared(state, ChatRole::User, "[Summary] patch validated; run complete.");
            return RunVerdict::make_patched(ws.emit_final_diff());
        }
    }
}

}  // namespace patchbench
