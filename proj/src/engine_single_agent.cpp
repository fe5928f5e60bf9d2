#include "patchbench/engine_single_agent.hpp"

#include "patchbench/util.hpp"

namespace patchbench {

std::vector<ChatMessage> render_single_agent_prompt(const PatchTask& task, const Workspace& ws) {
    std::string system =
        "You are responsible for fixing vulnerability by editing source code.\n"
        "The fix must preserve intended behavior and be validated with PoVs.\n"
        "\n"
        "Rules:\n"
        "- Only modify " + to_string(task.language_profile) + " source files under " +
        ws.source_root().string() + "\n"
        "- Do NOT modify the fuzzing harness\n"
        "- Fix the root cause of the vulnerability\n"
        "\n"
        "The agent must interact with the codebase exclusively via tools.\n"
        "\n"
        "Use SearchReadSource, SearchReadDefinition, and SearchFindReferences to inspect the "
        "code.\n"
        "Use GeneratePatch to generate patches.\n"
        "Use EditorApplyPatch to modify files (absolute path required) and EditorUndoLastPatch "
        "to revert edits.\n"
        "Use EditorListEdits to review accumulated changes.\n"
        "Use TestPatch to validate fixes; if validation fails, revise and retry.\n"
        "When the patch is correct, call Terminate.";

    std::string user =
        "<pov>\n"
        "  <harness>" + task.harness_name + "</harness>\n"
        "  <fuzzer_data>\n" + task.crash_report + "\n  </fuzzer_data>\n"
        "</pov>\n";
    if (!trim(task.commit_diff).empty())
        user += "\nThe vulnerability was introduced by this commit:\n" + task.commit_diff;

    return {{ChatRole::System, system, {}, {}}, {ChatRole::User, user, {}, {}}};
}

SingleAgentResult run_single_agent(const PatchTask& task, Workspace& ws, Validator& validator,
                                   Gateway& gateway, const std::string& model_id,
                                   Recorder& recorder, ToolRegistryOptions options) {
    StandardTools tools(ws, task, validator, &gateway, model_id, &recorder, options);
    ToolRegistry& registry = tools.registry();

    SingleAgentResult result;
    AgentTranscript& transcript = result.transcript;
    transcript.messages = render_single_agent_prompt(task, ws);

    const double wall_budget_ms = task.budgets.total_wall_clock * 1000.0;
    const auto descriptors = registry.descriptors();

    auto fail = [&](Outcome outcome, std::optional<FailureStage> stage, std::string detail) {
        result.verdict = RunVerdict::make_failed(outcome, stage, std::move(detail));
        return result;
    };

    while (transcript.step_count < task.budgets.max_agent_steps) {
        if (recorder.elapsed_ms() >= wall_budget_ms)
            return fail(Outcome::FailedTimeout, std::nullopt, "total wall clock budget exceeded");

        ChatRequest req{model_id, transcript.messages, descriptors, 0.0};
        if (count_tokens(req) > task.budgets.max_prompt_tokens)
            return fail(Outcome::FailedError, std::nullopt,
                        "context exceeded max_prompt_tokens; this engine performs no compaction");

        ChatResponse resp;
        try {
            resp = gateway.complete(req, &recorder, "agent");
        } catch (const Error& e) {
            return fail(Outcome::FailedError, std::nullopt,
                        std::string("model gateway failed: ") + e.what());
        }
        ++transcript.step_count;
        transcript.messages.push_back({ChatRole::Assistant, resp.content, resp.tool_calls, {}});

        if (resp.tool_calls.empty()) {
            if (trim(resp.content).empty()) {
                // Keep scripted and live loops total.
                transcript.messages.push_back(
                    {ChatRole::User, "Use a tool or call terminate.", {}, {}});
            }
            continue;
        }

        for (const auto& call : resp.tool_calls) {
            ToolResult tool_result;
            if (registry.terminate_requested()) {
                tool_result = {call.call_id, false, "skipped: agent already terminated"};
                recorder.tool_call(call.name, false, 0);
            } else {
                tool_result = registry.validate_and_dispatch(call, &recorder);
            }
            transcript.messages.push_back(
                {ChatRole::Tool, tool_result.payload, {}, tool_result.call_id});
        }
        if (registry.terminate_requested()) {
            transcript.terminated = true;
            break;
        }
    }

    if (!transcript.terminated) {
        if (recorder.elapsed_ms() >= wall_budget_ms)
            return fail(Outcome::FailedTimeout, std::nullopt, "total wall clock budget exceeded");
        return fail(Outcome::FailedMaxIterations, std::nullopt,
                    "agent did not terminate within " +
                        std::to_string(task.budgets.max_agent_steps) + " steps");
    }

    // Guard against premature termination: the patch counts only if the
    // latest TestPatch passed and the workspace actually changed.
    const auto& last = registry.last_validation();
    const std::string final_diff = ws.emit_final_diff();
    if (last && last->passed && !final_diff.empty()) {
        result.verdict = RunVerdict::make_patched(final_diff);
        return result;
    }
    std::optional<FailureStage> stage;
    if (last && !last->passed) stage = last->failed_stage();
    return fail(Outcome::FailedError, stage, "terminated without validated patch");
}

}  // namespace patchbench
