// Shared-state multi-agent orchestration: six specialized roles coordinate
// through one state object under a constrained transition relation, with
// reflection as the convergence point after failures.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "patchbench/code_index.hpp"
#include "patchbench/gateway.hpp"
#include "patchbench/task.hpp"
#include "patchbench/telemetry.hpp"
#include "patchbench/validation.hpp"
#include "patchbench/workspace.hpp"

namespace patchbench {

enum class AgentRole { ContextRetriever, RootCause, SWE, Patch, QE, Reflection, Summary };

std::string role_name(AgentRole r);
// Accepts full role names and the table mnemonics (Ctx, RCA, Refl, Sum...).
std::optional<AgentRole> role_from_token(const std::string& token);

using TransitionRelation = std::set<std::pair<AgentRole, AgentRole>>;

// Default relation: the core chain Ctx->RCA->SWE->Patch->QE, reflection
// reachable from every stage that can fail (including empty-context Ctx),
// Reflection->{Ctx,RCA,SWE,Patch}, QE->Summary on pass. Summary is terminal.
TransitionRelation permissible_transitions();

struct Snippet {
    std::string path;
    std::string identifier;
    std::string text;
};

struct PatchAttempt {
    std::string diff_text;
    std::optional<ValidationReport> report;
};

struct SharedState {
    std::vector<ChatMessage> messages;  // append-only shared history
    std::string project_name;
    std::string diff_context;
    std::vector<Snippet> code_snippets;
    std::optional<std::string> root_cause;
    std::optional<std::string> patch_strategy;
    std::optional<std::string> reflection_guidance;
    std::vector<PatchAttempt> patch_attempts;
    std::optional<AgentRole> next_agent;
    std::vector<AgentRole> execution_path;
    std::string failure_note;  // evidence handed to reflection
};

// Private working state of the context retriever, merged into the shared
// state only on completion.
struct SnippetManagerState {
    enum class QueryKind { Function, Type, Callers, Callees };
    std::vector<std::pair<QueryKind, std::string>> pending_queries;
    std::set<std::string> fetched;  // "path:identifier" keys
};

struct PatchBlock {
    std::string file_path;
    std::string identifier;
    std::string old_code;
    std::string new_code;
};

// All well-formed <patch> blocks in the reply; malformed blocks are dropped.
std::vector<PatchBlock> parse_patch_blocks(const std::string& text);

// Individual role handlers; each appends to state.messages, updates its
// fields, and sets state.next_agent.
void context_retriever_step(SharedState& state, const Index& idx, const PatchTask& task);
void root_cause_step(SharedState& state, Gateway& gateway, const std::string& model_id,
                     Recorder& recorder);
void swe_strategy_step(SharedState& state, Gateway& gateway, const std::string& model_id,
                       Recorder& recorder);
void patch_step(SharedState& state, Gateway& gateway, const std::string& model_id,
                Workspace& ws, Recorder& recorder,
                const std::vector<std::string>& protected_globs);
void qe_step(SharedState& state, Validator& validator, Workspace& ws, const PatchTask& task,
             Recorder& recorder);
void reflection_step(SharedState& state, Gateway& gateway, const std::string& model_id,
                     Recorder& recorder);

struct MultiAgentOptions {
    TransitionRelation relation = permissible_transitions();
    std::vector<std::string> protected_globs = HarnessOptions{}.protected_globs;
};

// Runs the orchestrator from ContextRetriever to Summary or a budget limit.
// A handler routing outside the relation fails the run; it is never patched
// up silently.
RunVerdict run_multi_agent(const PatchTask& task, Workspace& ws, Validator& validator,
                           Gateway& gateway, const std::string& model_id, Recorder& recorder,
                           const MultiAgentOptions& options = {});

}  // namespace patchbench
