// Task model: one vulnerability-repair job and the verdict vocabulary every
// engine shares. Tasks are immutable after load.
#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace patchbench {

enum class LanguageProfile { Java, CLike, Generic };

std::string to_string(LanguageProfile p);
LanguageProfile language_profile_from_string(const std::string& s);

struct Budgets {
    int max_iterations = 10;
    int max_agent_steps = 60;
    double per_command_timeout = 300;  // seconds
    double total_wall_clock = 3600;    // seconds
    long max_prompt_tokens = 100000;
};

struct PatchTask {
    std::string task_id;
    std::filesystem::path source_root;  // absolute
    std::filesystem::path task_dir;     // manifest directory, absolute
    std::string commit_diff;            // unified diff text, may be empty
    std::string crash_report;           // stored verbatim
    std::string pov_command;
    std::string build_command;
    std::string functional_test_command;
    std::string harness_name;
    LanguageProfile language_profile = LanguageProfile::Generic;
    Budgets budgets;
    std::optional<std::filesystem::path> pov_blob;  // absolute, when declared
};

enum class Outcome { Patched, FailedMaxIterations, FailedTimeout, FailedError };
enum class FailureStage { Apply, Build, Pov, Tests };

std::string to_string(Outcome o);
std::string to_string(FailureStage s);

struct RunVerdict {
    Outcome outcome = Outcome::FailedError;
    std::optional<std::string> final_diff;       // present iff patched
    std::optional<FailureStage> failure_stage;   // absent when patched
    std::string detail;

    bool patched() const { return outcome == Outcome::Patched; }

    static RunVerdict make_patched(std::string diff);
    static RunVerdict make_failed(Outcome o, std::optional<FailureStage> stage, std::string detail);
};

// Loads and validates a task manifest (JSON). Relative paths inside the
// manifest resolve against its directory. Throws SchemaError naming the
// offending field, or PathError for a missing source root.
PatchTask load_task(const std::filesystem::path& manifest_path);

// Writes a manifest plus commit-diff/crash-report side files such that
// load_task on the result reproduces every manifest field of `task`.
void write_manifest(const PatchTask& task, const std::filesystem::path& manifest_path);

}  // namespace patchbench
