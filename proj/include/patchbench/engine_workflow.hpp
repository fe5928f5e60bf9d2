// Fixed deterministic pipeline: static context -> prompt -> JSON function-map
// patch -> apply -> validate -> feedback, repeated until success or the
// iteration budget runs out. No dynamic planning; every iteration runs the
// same stage sequence.
#pragma once

#include "patchbench/code_index.hpp"
#include "patchbench/gateway.hpp"
#include "patchbench/task.hpp"
#include "patchbench/telemetry.hpp"
#include "patchbench/validation.hpp"
#include "patchbench/workspace.hpp"

namespace patchbench {

struct FunctionMeta {
    std::string name;
    std::string path;
    std::string source;
    bool from_trace = false;  // trace-resolved functions outrank diff-derived ones
};

struct PromptContext {
    std::string stacktrace;
    std::string commit_diff;  // possibly middle-out truncated
    std::vector<FunctionMeta> functions;
    std::vector<std::string> prior_feedback;
};

// Gathers stack-trace and commit-diff functions, then drops content in
// priority order until the rendered prompt fits max_prompt_tokens:
// diff-derived functions first, then trace-derived ones, then the commit
// diff is truncated middle-out. The stack trace is never truncated.
PromptContext build_context(const PatchTask& task, const Index& idx, long max_prompt_tokens);

// System + user messages for one iteration (prior feedback appended).
std::vector<ChatMessage> render_workflow_prompt(const PromptContext& ctx);

// Thrown when model output does not conform to the required JSON dictionary;
// the attempt is discarded but still consumes an iteration.
class FormatRejectionError : public Error {
public:
    explicit FormatRejectionError(const std::string& what) : Error(what) {}
};
class ResolutionError : public Error {
public:
    explicit ResolutionError(const std::string& what) : Error(what) {}
};

// Strict parse of the model's function map: a JSON object from function name
// to full replacement source, one optional code fence tolerated. Every key
// must resolve to exactly one indexed function.
std::vector<std::pair<std::string, std::string>> parse_function_map(const std::string& model_output,
                                                                    const Index& idx);

// Middle-out truncation to roughly `max_tokens`, marked with a literal
// `[... truncated ...]` line. Used for commit-diff budgeting.
std::string truncate_middle_out(const std::string& text, long max_tokens);

RunVerdict run_workflow(const PatchTask& task, Workspace& ws, Validator& validator,
                        Gateway& gateway, const std::string& model_id, Recorder& recorder);

}  // namespace patchbench
