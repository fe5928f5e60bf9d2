// patchbench CLI: run one patching task, bench a directory of tasks, or
// regenerate reports from persisted run records.
#include <CLI11.hpp>

#include <iostream>

#include "patchbench/errors.hpp"
#include "patchbench/runner.hpp"

using namespace patchbench;

int main(int argc, char** argv) {
    CLI::App app{"patchbench - LLM patching architectures over a common task model"};
    app.require_subcommand(1);

    std::string manifest, tasks_dir, records_dir;
    std::string engine = "workflow", model, mock, config_file, out = "out";
    int max_iters = 0, jobs = 1;
    double timeout = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--engine", engine, "workflow | single-agent | multi-agent");
        cmd->add_option("--model", model, "Model id passed to backends");
        cmd->add_option("--mock", mock, "Scripted backend: script file or directory of <task_id>.jsonl");
        cmd->add_option("--config", config_file, "Run config JSON with backend definitions");
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--max-iters", max_iters, "Override budgets.max_iterations");
        cmd->add_option("--timeout", timeout, "Override budgets.per_command_timeout (seconds)");
    };

    CLI::App* run = app.add_subcommand("run", "Run one task manifest");
    run->add_option("manifest", manifest, "Path to the task manifest")->required();
    add_common(run);

    CLI::App* bench = app.add_subcommand("bench", "Run every task in a directory");
    bench->add_option("tasks_dir", tasks_dir, "Directory of task manifests")->required();
    bench->add_option("--jobs", jobs, "Tasks to run in parallel");
    add_common(bench);

    CLI::App* report = app.add_subcommand("report", "Regenerate tables and graphs from records");
    report->add_option("records_dir", records_dir, "Directory containing runrecord.json files")
        ->required();
    report->add_option("--out", out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_file.empty()) cfg = load_run_config(config_file);
        cfg.engine = engine_kind_from_string(engine);
        if (!model.empty()) cfg.model_id = model;
        if (!mock.empty()) cfg.mock_script = mock;
        cfg.out_dir = out;
        if (max_iters > 0) cfg.max_iterations_override = max_iters;
        if (timeout > 0) cfg.timeout_override = timeout;
        cfg.jobs = jobs;

        if (run->parsed()) return cmd_run(manifest, cfg);
        if (bench->parsed()) return cmd_bench(tasks_dir, cfg);
        if (report->parsed()) return cmd_report(records_dir, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
