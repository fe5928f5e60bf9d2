// Autonomous tool loop: one model plans, calls tools, observes results, and
// terminates when it judges the patch correct. Validation failures are
// observations inside the trajectory, never restarts.
#pragma once

#include "patchbench/gateway.hpp"
#include "patchbench/task.hpp"
#include "patchbench/telemetry.hpp"
#include "patchbench/tool_registry.hpp"
#include "patchbench/validation.hpp"
#include "patchbench/workspace.hpp"

namespace patchbench {

struct AgentTranscript {
    std::vector<ChatMessage> messages;
    int step_count = 0;  // assistant turns
    bool terminated = false;
};

struct SingleAgentResult {
    RunVerdict verdict;
    AgentTranscript transcript;
};

std::vector<ChatMessage> render_single_agent_prompt(const PatchTask& task, const Workspace& ws);

SingleAgentResult run_single_agent(const PatchTask& task, Workspace& ws, Validator& validator,
                                   Gateway& gateway, const std::string& model_id,
                                   Recorder& recorder, ToolRegistryOptions options = {});

}  // namespace patchbench
