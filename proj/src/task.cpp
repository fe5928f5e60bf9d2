#include "patchbench/task.hpp"

#include <json.hpp>

#include "patchbench/diff.hpp"
#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace patchbench {

std::string to_string(LanguageProfile p) {
    switch (p) {
        case LanguageProfile::Java: return "java";
        case LanguageProfile::CLike: return "c_like";
        case LanguageProfile::Generic: return "generic";
    }
    return "generic";
}

LanguageProfile language_profile_from_string(const std::string& s) {
    if (s == "java") return LanguageProfile::Java;
    if (s == "c_like") return LanguageProfile::CLike;
    if (s == "generic") return LanguageProfile::Generic;
    throw SchemaError("language_profile must be one of java, c_like, generic (got '" + s + "')");
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Patched: return "patched";
        case Outcome::FailedMaxIterations: return "failed_max_iterations";
        case Outcome::FailedTimeout: return "failed_timeout";
        case Outcome::FailedError: return "failed_error";
    }
    return "failed_error";
}

std::string to_string(FailureStage s) {
    switch (s) {
        case FailureStage::Apply: return "apply";
        case FailureStage::Build: return "build";
        case FailureStage::Pov: return "pov";
        case FailureStage::Tests: return "tests";
    }
    return "apply";
}

RunVerdict RunVerdict::make_patched(std::string diff) {
    RunVerdict v;
    v.outcome = Outcome::Patched;
    v.final_diff = std::move(diff);
    return v;
}

RunVerdict RunVerdict::make_failed(Outcome o, std::optional<FailureStage> stage,
                                   std::string detail) {
    if (o == Outcome::Patched) throw ContractError("make_failed called with patched outcome");
    RunVerdict v;
    v.outcome = o;
    v.failure_stage = stage;
    v.detail = std::move(detail);
    return v;
}

namespace {

const json& require_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string("manifest is missing field: ") + key);
    return *it;
}

std::string require_string(const json& obj, const char* key) {
    const json& v = require_field(obj, key);
    if (!v.is_string()) throw SchemaError(std::string("manifest field must be a string: ") + key);
    return v.get<std::string>();
}

std::string require_command(const json& obj, const char* key) {
    std::string s = require_string(obj, key);
    if (trim(s).empty()) throw SchemaError(std::string("command must be non-empty: ") + key);
    return s;
}

template <typename T>
void read_positive(const json& budgets, const char* key, T& out) {
    auto it = budgets.find(key);
    if (it == budgets.end()) return;
    if (!it->is_number()) throw SchemaError(std::string("budgets.") + key + " must be a number");
    double v = it->get<double>();
    if (v <= 0) throw SchemaError(std::string("budgets.") + key + " must be strictly positive");
    out = static_cast<T>(v);
}

}  // namespace

PatchTask load_task(const fs::path& manifest_path) {
    if (!fs::is_regular_file(manifest_path))
        throw PathError("manifest not found: " + manifest_path.string());

    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw SchemaError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!m.is_object()) throw SchemaError("manifest must be a JSON object");

    const fs::path dir = fs::absolute(manifest_path).parent_path().lexically_normal();
    auto resolve = [&](const std::string& rel) { return (dir / rel).lexically_normal(); };

    PatchTask t;
    t.task_dir = dir;
    t.task_id = require_string(m, "task_id");
    if (t.task_id.empty()) throw SchemaError("task_id must be non-empty");

    t.source_root = resolve(require_string(m, "source_root"));
    if (!fs::is_directory(t.source_root))
        throw PathError("source_root is not a directory: " + t.source_root.string());

    fs::path diff_file = resolve(require_string(m, "commit_diff_file"));
    if (!fs::is_regular_file(diff_file))
        throw PathError("commit_diff_file not found: " + diff_file.string());
    t.commit_diff = read_file(diff_file);
    try {
        diff::parse_diff(t.commit_diff);
    } catch (const ParseError& e) {
        throw SchemaError("commit_diff_file does not parse as a unified diff: " +
                          std::string(e.what()));
    }

    fs::path crash_file = resolve(require_string(m, "crash_report_file"));
    if (!fs::is_regular_file(crash_file))
        throw PathError("crash_report_file not found: " + crash_file.string());
    t.crash_report = read_file(crash_file);

    t.pov_command = require_command(m, "pov_command");
    t.build_command = require_command(m, "build_command");
    t.functional_test_command = require_command(m, "functional_test_command");
    t.harness_name = require_string(m, "harness_name");
    t.language_profile = language_profile_from_string(require_string(m, "language_profile"));

    if (auto it = m.find("pov_blob_file"); it != m.end()) {
        if (!it->is_string()) throw SchemaError("pov_blob_file must be a string");
        t.pov_blob = resolve(it->get<std::string>());
    }

    if (auto it = m.find("budgets"); it != m.end()) {
        if (!it->is_object()) throw SchemaError("budgets must be an object");
        read_positive(*it, "max_iterations", t.budgets.max_iterations);
        read_positive(*it, "max_agent_steps", t.budgets.max_agent_steps);
        read_positive(*it, "per_command_timeout", t.budgets.per_command_timeout);
        read_positive(*it, "total_wall_clock", t.budgets.total_wall_clock);
        read_positive(*it, "max_prompt_tokens", t.budgets.max_prompt_tokens);
    }
    return t;
}

void write_manifest(const PatchTask& task, const fs::path& manifest_path) {
    const fs::path dir = fs::absolute(manifest_path).parent_path();
    fs::create_directories(dir);
    write_file(dir / "commit_diff.txt", task.commit_diff);
    write_file(dir / "crash_report.txt", task.crash_report);

    json m;
    m["task_id"] = task.task_id;
    m["source_root"] = task.source_root.string();
    m["commit_diff_file"] = "commit_diff.txt";
    m["crash_report_file"] = "crash_report.txt";
    m["pov_command"] = task.pov_command;
    m["build_command"] = task.build_command;
    m["functional_test_command"] = task.functional_test_command;
    m["harness_name"] = task.harness_name;
    m["language_profile"] = to_string(task.language_profile);
    if (task.pov_blob) m["pov_blob_file"] = task.pov_blob->string();
    m["budgets"] = {
        {"max_iterations", task.budgets.max_iterations},
        {"max_agent_steps", task.budgets.max_agent_steps},
        {"per_command_timeout", task.budgets.per_command_timeout},
        {"total_wall_clock", task.budgets.total_wall_clock},
        {"max_prompt_tokens", task.budgets.max_prompt_tokens},
    };
    write_file(manifest_path, m.dump(2) + "\n");
}

}  // namespace patchbench
