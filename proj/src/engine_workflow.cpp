#include "patchbench/engine_workflow.hpp"

#include <algorithm>
#include <set>

#include "patchbench/diff.hpp"
#include "patchbench/util.hpp"

using nlohmann::json;

namespace patchbench {

namespace {

const char* kWorkflowSystemPrompt =
    "You are a world-leading security engineer tasked with fixing a vulnerability in code.\n"
    "Your goal is to generate minimal, precise patches that address only the vulnerability "
    "without changing other functionality.\n"
    "Do not apologize when you are wrong. Just keep optimizing the result directly and proceed "
    "with the process. Do not lie or guess when you are unsure about the answer.";

std::string render_functions_metadata(const std::vector<FunctionMeta>& functions) {
    if (functions.empty()) return "(no function context available)\n";
    std::string out;
    for (const auto& f : functions) {
        out += "Function: " + f.name + "\n";
        out += "File: " + f.path + "\n";
        out += "Source:\n" + f.source;
        if (!out.empty() && out.back() != '\n') out += "\n";
        out += "\n";
    }
    return out;
}

}  // namespace

std::vector<ChatMessage> render_workflow_prompt(const PromptContext& ctx) {
    std::string user = "# Vulnerability Patching Task\n\n";
    user += "## Input Information\n";
    user += "### Vulnerability Stacktrace\n" + ctx.stacktrace + "\n\n";
    user += "### Context Information\n";
    user += "The vulnerability is introduced by the following commit:\n" + ctx.commit_diff + "\n\n";
    user += "### Relevant Functions\n" + render_functions_metadata(ctx.functions) + "\n";
    user += "Please return the fixed functions to patch the vulnerability.\n\n";
    user += "## Requirements\n";
    user += "1. Fix ONLY the vulnerability--do not add features or refactor code\n";
    user += "2. Preserve all existing functionality and logic\n";
    user += "3. Make minimal changes (fewest lines of code possible)\n";
    user += "4. Focus on security best practices\n\n";
    user += "## Output Format\n";
    user += "Return ONLY a JSON dictionary where keys are function names and values are code "
            "blocks:\n";
    user += "{\n  \"function_name1\": \"function_content_with_fix\",\n"
            "  \"function_name2\": \"function_content_with_fix\"\n}\n\n";
    user += "IMPORTANT:\n";
    user += "- Return the fixed content for each changed function\n";
    user += "- Do NOT return diffs or partial code snippets\n";
    user += "- Do NOT include explanations or comments outside the JSON\n";
    user += "- Include ALL lines of the original function in your response, with your fixes "
            "applied\n\n";
    for (size_t i = 0; i < ctx.prior_feedback.size(); ++i) {
        user += "## Previous Attempt " + std::to_string(i + 1) + " Feedback\n" +
                ctx.prior_feedback[i];
        if (user.back() != '\n') user += "\n";
        user += "\n";
    }
    user += "Return ONLY the JSON dictionary described above.\n";

    return {{ChatRole::System, kWorkflowSystemPrompt, {}, {}},
            {ChatRole::User, user, {}, {}}};
}

std::string truncate_middle_out(const std::string& text, long max_tokens) {
    if (count_tokens(text) <= max_tokens) return text;
    auto split = split_lines(text);
    const auto& lines = split.lines;
    size_t keep_head = lines.size() / 2, keep_tail = lines.size() - keep_head;
    std::string result = text;
    while (keep_head + keep_tail > 0) {
        std::vector<std::string> kept(lines.begin(), lines.begin() + static_cast<long>(keep_head));
        kept.push_back("[... truncated ...]");
        kept.insert(kept.end(), lines.end() - static_cast<long>(keep_tail), lines.end());
        result = join_lines(kept, true);
        if (count_tokens(result) <= max_tokens) return result;
        if (keep_head >= keep_tail && keep_head > 0)
            --keep_head;
        else if (keep_tail > 0)
            --keep_tail;
    }
    return "[... truncated ...]\n";
}

PromptContext build_context(const PatchTask& task, const Index& idx, long max_prompt_tokens) {
    PromptContext ctx;
    ctx.stacktrace = task.crash_report;
    ctx.commit_diff = task.commit_diff;

    std::set<std::pair<std::string, int>> seen;
    auto add_function = [&](const SymbolEntry& s, bool from_trace) {
        if (!seen.insert({s.path, s.start_line}).second) return;
        ctx.functions.push_back({s.name, s.path, idx.symbol_source(s), from_trace});
    };

    for (const auto& s : idx.functions_from_stacktrace(task.crash_report)) add_function(s, true);

    // Functions named in commit-diff hunk section headers or overlapping
    // the hunks' old-line ranges.
    try {
        diff::UnifiedDiff parsed = diff::parse_diff(task.commit_diff);
        for (const auto& fd : parsed.files) {
            for (const auto& hunk : fd.hunks) {
                if (!hunk.section.empty()) {
                    for (const auto& s : idx.functions())
                        if (hunk.section.find(s.name) != std::string::npos &&
                            s.path == fd.path())
                            add_function(s, false);
                }
                for (const auto& s : idx.functions()) {
                    if (s.path != fd.path()) continue;
                    long hunk_end = hunk.old_start + std::max(0L, hunk.old_count - 1);
                    if (s.start_line <= hunk_end && s.end_line >= hunk.old_start)
                        add_function(s, false);
                }
            }
        }
    } catch (const ParseError&) {
        // Tasks validate their diff at load; a non-parsing diff here means a
        // synthetic task, which simply contributes no diff functions.
    }

    auto fits = [&]() { return count_tokens(render_workflow_prompt(ctx)[1].content) +
                               count_tokens(kWorkflowSystemPrompt) <= max_prompt_tokens; };
    if (fits()) return ctx;

    // Drop diff-derived functions from the back, then trace-derived ones.
    auto drop_functions = [&](bool from_trace) {
        while (!fits()) {
            auto it = std::find_if(ctx.functions.rbegin(), ctx.functions.rend(),
                                   [&](const FunctionMeta& f) { return f.from_trace == from_trace; });
            if (it == ctx.functions.rend()) return;
            ctx.functions.erase(std::next(it).base());
        }
    };
    drop_functions(false);
    drop_functions(true);

    long diff_budget = count_tokens(ctx.commit_diff);
    while (!fits() && diff_budget > 1) {
        diff_budget /= 2;
        ctx.commit_diff = truncate_middle_out(task.commit_diff, diff_budget);
    }
    return ctx;  // the stack trace is never truncated
}

std::vector<std::pair<std::string, std::string>> parse_function_map(
    const std::string& model_output, const Index& idx) {
    std::string body = trim(model_output);
    if (starts_with(body, "```")) {
        size_t first_nl = body.find('\n');
        size_t last_fence = body.rfind("```");
        if (first_nl == std::string::npos || last_fence <= first_nl)
            throw FormatRejectionError("unterminated code fence");
        body = trim(body.substr(first_nl + 1, last_fence - first_nl - 1));
    }

    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded())
        throw FormatRejectionError("output is not valid JSON");
    if (!parsed.is_object())
        throw FormatRejectionError("output is not a JSON object");
    if (parsed.empty())
        throw FormatRejectionError("output is an empty JSON object (no-op patch)");

    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, value] : parsed.items()) {
        if (!value.is_string())
            throw FormatRejectionError("value for '" + name + "' is not a string");
        if (value.get<std::string>().empty())
            throw FormatRejectionError("replacement for '" + name + "' is empty");
        auto symbols = idx.lookup_functions(name);
        if (symbols.empty()) throw ResolutionError("unknown function: " + name);
        if (symbols.size() > 1) throw ResolutionError("ambiguous function name: " + name);
        out.emplace_back(name, value.get<std::string>());
    }
    return out;
}

RunVerdict run_workflow(const PatchTask& task, Workspace& ws, Validator& validator,
                        Gateway& gateway, const std::string& model_id, Recorder& recorder) {
    Index idx = Index::build(ws, task.language_profile);
    for (const auto& w : idx.warnings()) recorder.note(w);

    std::vector<std::string> prior_feedback;
    std::optional<FailureStage> last_stage;
    const double wall_budget_ms = task.budgets.total_wall_clock * 1000.0;

    auto undo_all = [&]() {
        while (ws.active_edit_count() > 0) {
            const EditRecord& rec = ws.undo_last();
            recorder.edit(rec.edit_id, rec.path, "undo");
        }
    };

    for (int iteration = 1; iteration <= task.budgets.max_iterations; ++iteration) {
        if (recorder.elapsed_ms() >= wall_budget_ms)
            return RunVerdict::make_failed(Outcome::FailedTimeout, last_stage,
                                           "total wall clock budget exceeded");
        recorder.note("iteration_start " + std::to_string(iteration) +
                      " overlay_digest=" + ws.overlay_digest());

        recorder.note("stage:context");
        PromptContext ctx = build_context(task, idx, task.budgets.max_prompt_tokens);
        ctx.prior_feedback = prior_feedback;

        recorder.note("stage:generate");
        ChatRequest req{model_id, render_workflow_prompt(ctx), {}, 0.0};
        ChatResponse resp;
        try {
            resp = gateway.complete(req, &recorder, "workflow");
        } catch (const Error& e) {
            return RunVerdict::make_failed(Outcome::FailedError, last_stage,
                                           std::string("model gateway failed: ") + e.what());
        }

        recorder.note("stage:apply");
        std::vector<std::pair<std::string, std::string>> patches;
        try {
            patches = parse_function_map(resp.content, idx);
        } catch (const Error& e) {
            recorder.note(std::string("attempt discarded: ") + e.what());
            prior_feedback.push_back("Attempt " + std::to_string(iteration) +
                                     " was discarded: " + e.what() +
                                     ". Return ONLY the JSON dictionary.");
            last_stage = FailureStage::Apply;
            continue;
        }

        bool apply_failed = false;
        for (const auto& [name, replacement] : patches) {
            const SymbolEntry symbol = idx.lookup_functions(name).front();
            ApplyPayload payload;
            payload.old_code = idx.symbol_source(symbol);
            payload.new_code = replacement;
            try {
                const EditRecord& rec = ws.apply_patch(symbol.path, payload);
                recorder.edit(rec.edit_id, rec.path, "apply");
            } catch (const Error& e) {
                recorder.note("apply failed for " + name + ": " + e.what());
                prior_feedback.push_back("Attempt " + std::to_string(iteration) +
                                         " failed to apply on function '" + name + "': " + e.what());
                last_stage = FailureStage::Apply;
                apply_failed = true;
                break;
            }
        }
        if (apply_failed) {
            undo_all();
            continue;
        }

        const std::string attempt_diff = ws.emit_final_diff();
        recorder.note("stage:validate");
        ValidationReport report = validator.validate(task, ws);
        if (report.passed) {
            return RunVerdict::make_patched(attempt_diff);
        }

        recorder.note("stage:feedback");
        last_stage = report.failed_stage().value_or(FailureStage::Tests);
        prior_feedback.push_back(make_feedback(report) + "--- failed patch ---\n" + attempt_diff);
        undo_all();
    }
    return RunVerdict::make_failed(Outcome::FailedMaxIterations, last_stage,
                                   "no validated patch within " +
                                       std::to_string(task.budgets.max_iterations) + " iterations");
}

}  // namespace patchbench
