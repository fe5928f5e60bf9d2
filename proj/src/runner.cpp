#include "patchbench/runner.hpp"

#include <algorithm>
#include <iostream>
#include <mutex>
#include <thread>

#include "patchbench/engine_multi_agent.hpp"
#include "patchbench/engine_single_agent.hpp"
#include "patchbench/engine_workflow.hpp"
#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace patchbench {

RunConfig load_run_config(const fs::path& config_file, RunConfig base) {
    json j;
    try {
        j = json::parse(read_file(config_file));
    } catch (const json::exception& e) {
        throw ConfigError("run config is not valid JSON: " + std::string(e.what()));
    }
    if (j.contains("engine")) base.engine = engine_kind_from_string(j["engine"]);
    if (j.contains("model")) base.model_id = j["model"].get<std::string>();
    if (j.contains("strategy")) base.policy.strategy = strategy_from_string(j["strategy"]);
    if (j.contains("max_retries")) base.policy.max_retries = j["max_retries"].get<int>();
    if (j.contains("enable_cache")) base.enable_cache = j["enable_cache"].get<bool>();
    if (j.contains("crash_patterns"))
        base.crash_patterns = j["crash_patterns"].get<std::vector<std::string>>();
    if (j.contains("protected_globs"))
        base.protected_globs = j["protected_globs"].get<std::vector<std::string>>();
    if (j.contains("backends")) {
        const fs::path dir = fs::absolute(config_file).parent_path();
        for (const auto& b : j["backends"]) {
            BackendConfig cfg;
            cfg.id = b.at("id").get<std::string>();
            const std::string kind = b.at("kind").get<std::string>();
            if (kind == "http")
                cfg.kind = BackendConfig::Kind::Http;
            else if (kind == "scripted")
                cfg.kind = BackendConfig::Kind::Scripted;
            else
                throw ConfigError("backend kind must be http or scripted: " + kind);
            cfg.base_url = b.value("base_url", "");
            cfg.api_key_env = b.value("api_key_env", "");
            cfg.model = b.value("model", "");
            if (b.contains("script_file"))
                cfg.script_file = (dir / b["script_file"].get<std::string>()).string();
            base.policy.backends.push_back(std::move(cfg));
        }
    }
    return base;
}

namespace {

RoutingPolicy effective_policy(const PatchTask& task, const RunConfig& config) {
    RoutingPolicy policy = config.policy;
    if (config.mock_script) {
        fs::path script = *config.mock_script;
        if (fs::is_directory(script)) script /= task.task_id + ".jsonl";
        if (!fs::is_regular_file(script))
            throw ConfigError("mock script not found: " + script.string());
        BackendConfig cfg;
        cfg.id = "scripted";
        cfg.kind = BackendConfig::Kind::Scripted;
        cfg.script_file = script.string();
        policy.backends.insert(policy.backends.begin(), std::move(cfg));
    }
    if (policy.backends.empty())
        throw ConfigError(
            "no backends configured: pass --mock <script> or a config file with backends");
    return policy;
}

std::string engine_dir_name(EngineKind e) { return to_string(e); }

}  // namespace

RunRecord execute_task(const PatchTask& task_in, const RunConfig& config) {
    PatchTask task = task_in;
    if (config.max_iterations_override) task.budgets.max_iterations = *config.max_iterations_override;
    if (config.timeout_override) task.budgets.per_command_timeout = *config.timeout_override;

    const fs::path run_dir = config.out_dir / (task.task_id + "-" + engine_dir_name(config.engine));
    fs::create_directories(run_dir);

    Recorder recorder(task.task_id, config.engine, config.model_id, run_dir / "events.jsonl");

    RunVerdict verdict = RunVerdict::make_failed(Outcome::FailedError, std::nullopt, "not started");
    try {
        auto gateway = make_gateway(effective_policy(task, config), config.enable_cache);
        Workspace ws(task.source_root, run_dir / "work");

        HarnessOptions harness_options;
        harness_options.crash_patterns = config.crash_patterns;
        harness_options.protected_globs = config.protected_globs;
        CommandValidator validator(harness_options, &recorder);

        ToolRegistryOptions tool_options;
        tool_options.protected_globs = config.protected_globs;

        switch (config.engine) {
            case EngineKind::Workflow:
                verdict = run_workflow(task, ws, validator, *gateway, config.model_id, recorder);
                break;
            case EngineKind::SingleAgent:
                verdict = run_single_agent(task, ws, validator, *gateway, config.model_id,
                                           recorder, tool_options)
                              .verdict;
                break;
            case EngineKind::MultiAgent: {
                MultiAgentOptions options;
                options.protected_globs = config.protected_globs;
                verdict =
                    run_multi_agent(task, ws, validator, *gateway, config.model_id, recorder, options);
                break;
            }
        }
    } catch (const std::exception& e) {
        verdict = RunVerdict::make_failed(Outcome::FailedError, std::nullopt,
                                          std::string("engine crashed: ") + e.what());
    }

    RunRecord record = recorder.finish(verdict);
    save_run_record(record, run_dir / "runrecord.json");
    if (record.verdict.final_diff) write_file(run_dir / "final.diff", *record.verdict.final_diff);

    std::string summary = "task: " + record.task_id + "\n";
    summary += "engine: " + to_string(record.engine) + "\n";
    summary += "model: " + record.model_id + "\n";
    summary += "outcome: " + to_string(record.verdict.outcome) + "\n";
    if (record.verdict.failure_stage)
        summary += "failure_stage: " + to_string(*record.verdict.failure_stage) + "\n";
    if (!record.verdict.detail.empty()) summary += "detail: " + record.verdict.detail + "\n";
    summary += "model_calls: " + std::to_string(record.totals.model_calls) + "\n";
    summary += "tool_calls: " + std::to_string(record.totals.tool_calls) + "\n";
    summary += "total_tokens: " + std::to_string(record.totals.tokens.total_tokens) + "\n";
    summary += "wall_ms: " + std::to_string(record.totals.wall_ms) + "\n";
    write_file(run_dir / "summary.txt", summary);
    return record;
}

int cmd_run(const fs::path& manifest, const RunConfig& config) {
    PatchTask task;
    try {
        task = load_task(manifest);
        if (config.mock_script) effective_policy(task, config);  // config validation up front
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    RunRecord record = execute_task(task, config);
    std::cout << task.task_id << ": " << to_string(record.verdict.outcome) << "\n";
    if (!record.verdict.detail.empty()) std::cout << "  " << record.verdict.detail << "\n";
    return record.verdict.patched() ? 0 : 1;
}

std::vector<fs::path> discover_manifests(const fs::path& tasks_dir) {
    std::vector<fs::path> manifests;
    if (!fs::is_directory(tasks_dir)) return manifests;
    for (const auto& entry : fs::directory_iterator(tasks_dir)) {
        if (entry.is_directory() && fs::is_regular_file(entry.path() / "manifest.json"))
            manifests.push_back(entry.path() / "manifest.json");
        else if (entry.is_regular_file() && entry.path().extension() == ".json")
            manifests.push_back(entry.path());
    }
    std::sort(manifests.begin(), manifests.end());
    return manifests;
}

int cmd_bench(const fs::path& tasks_dir, const RunConfig& config) {
    if (!fs::is_directory(tasks_dir)) {
        std::cerr << "error: tasks directory not found: " << tasks_dir << "\n";
        return 2;
    }
    const auto manifests = discover_manifests(tasks_dir);

    std::vector<RunRecord> records(manifests.size());
    std::vector<bool> valid(manifests.size(), false);
    std::mutex io_mutex;
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= manifests.size()) return;
            try {
                PatchTask task = load_task(manifests[i]);
                records[i] = execute_task(task, config);
                valid[i] = true;
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cout << task.task_id << ": " << to_string(records[i].verdict.outcome) << "\n";
            } catch (const std::exception& e) {
                // One task's failure never aborts the batch.
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "task " << manifests[i] << " failed: " << e.what() << "\n";
            }
        }
    };
    const int jobs = std::max(1, config.jobs);
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<RunRecord> ok_records;
    bool all_patched = true;
    for (size_t i = 0; i < manifests.size(); ++i) {
        if (!valid[i]) {
            all_patched = false;
            continue;
        }
        if (!records[i].verdict.patched()) all_patched = false;
        ok_records.push_back(records[i]);
    }

    fs::create_directories(config.out_dir);
    write_file(config.out_dir / "summary.csv", summary_csv(ok_records));
    for (const auto& record : ok_records) {
        if (record.engine != EngineKind::MultiAgent) continue;
        write_file(config.out_dir / (record.task_id + "-" + to_string(record.engine) + ".dot"),
                   to_dot(transition_graph(record)));
    }
    return all_patched ? 0 : 1;
}

int cmd_report(const fs::path& records_dir, const fs::path& out_dir) {
    if (!fs::is_directory(records_dir)) {
        std::cerr << "error: records directory not found: " << records_dir << "\n";
        return 2;
    }
    std::vector<RunRecord> records;
    for (auto it = fs::recursive_directory_iterator(records_dir);
         it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file() || it->path().filename() != "runrecord.json") continue;
        try {
            records.push_back(load_run_record(it->path()));
        } catch (const Error& e) {
            std::cerr << "warning: skipped " << it->path() << ": " << e.what() << "\n";
        }
    }
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.task_id, a.engine, a.model_id) <
               std::tie(b.task_id, b.engine, b.model_id);
    });

    fs::create_directories(out_dir);
    write_file(out_dir / "summary.csv", summary_csv(records));

    std::string tool_csv = "task,engine,tool,count\n";
    for (const auto& record : records) {
        for (const auto& [name, count] : tool_usage_table(record))
            tool_csv += record.task_id + "," + to_string(record.engine) + "," + name + "," +
                        std::to_string(count) + "\n";
        if (record.engine == EngineKind::MultiAgent) {
            write_file(out_dir / (record.task_id + "-" + to_string(record.engine) + ".dot"),
                       to_dot(transition_graph(record)));
            AgentCallRow row = agent_call_table(record);
            std::string agents = "task,ctx,refl,rca,swe,strat,sum,tot\n";
            agents += record.task_id + "," + std::to_string(row.ctx) + "," +
                      std::to_string(row.refl) + "," + std::to_string(row.rca) + "," +
                      std::to_string(row.swe) + "," + std::to_string(row.strat) + "," +
                      std::to_string(row.sum) + "," + std::to_string(row.tot) + "\n";
            write_file(out_dir / (record.task_id + "-agent-calls.csv"), agents);
        }
    }
    write_file(out_dir / "tool_usage.csv", tool_csv);
    std::cout << "report written to " << out_dir.string() << " (" << records.size()
              << " records)\n";
    return 0;
}

}  // namespace patchbench
