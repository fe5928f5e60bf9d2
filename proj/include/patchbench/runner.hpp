// Command-line orchestration core: execute one task under one engine,
// run a benchmark directory, and regenerate reports from persisted records.
#pragma once

#include <filesystem>
#include <optional>

#include "patchbench/gateway.hpp"
#include "patchbench/task.hpp"
#include "patchbench/telemetry.hpp"
#include "patchbench/validation.hpp"

namespace patchbench {

struct RunConfig {
    EngineKind engine = EngineKind::Workflow;
    RoutingPolicy policy;  // backends; empty means a --mock script is required
    std::optional<std::filesystem::path> mock_script;  // file, or directory of <task_id>.jsonl
    std::filesystem::path out_dir = "out";
    std::string model_id = "scripted-model";
    std::optional<int> max_iterations_override;
    std::optional<double> timeout_override;  // per-command seconds
    std::vector<std::string> crash_patterns = HarnessOptions{}.crash_patterns;
    std::vector<std::string> protected_globs = HarnessOptions{}.protected_globs;
    int jobs = 1;
    bool enable_cache = false;
};

// Backend configs and options from a JSON config file:
// {"engine":..., "model":..., "strategy":..., "max_retries":...,
//  "backends":[{"id","kind":"http"|"scripted","base_url"?,"api_key_env"?,
//               "model"?,"script_file"?}],
//  "crash_patterns":[...], "protected_globs":[...]}
RunConfig load_run_config(const std::filesystem::path& config_file, RunConfig base = {});

// Runs one loaded task and returns its sealed record. Output files
// (runrecord.json, events.jsonl, final.diff, summary.txt) land under
// out_dir/<task_id>-<engine>/.
RunRecord execute_task(const PatchTask& task, const RunConfig& config);

int cmd_run(const std::filesystem::path& manifest, const RunConfig& config);
int cmd_bench(const std::filesystem::path& tasks_dir, const RunConfig& config);
int cmd_report(const std::filesystem::path& records_dir, const std::filesystem::path& out_dir);

// The manifests a bench over `tasks_dir` would run, sorted.
std::vector<std::filesystem::path> discover_manifests(const std::filesystem::path& tasks_dir);

}  // namespace patchbench
