// Sandboxed execution of build, PoV, and functional-test commands inside the
// workspace's run-private copy. Stage order is build -> pov -> tests with
// short-circuiting; the PoV stage passes only when the crash signal is gone.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "patchbench/task.hpp"
#include "patchbench/telemetry.hpp"
#include "patchbench/workspace.hpp"

namespace patchbench {

enum class StageStatus { Ok, Failed, Skipped, Timeout };
std::string to_string(StageStatus s);

struct StageResult {
    StageStatus status = StageStatus::Skipped;
    std::optional<int> exit_code;
    std::string log_excerpt;  // tail-capped
    double duration_s = 0;
};

struct ValidationReport {
    StageResult build;
    StageResult pov;
    StageResult tests;
    bool passed = false;
    std::string feedback;  // non-empty when not passed

    std::optional<FailureStage> failed_stage() const;
};

// Deterministic failure text: failing stage, exit code, log tail. Throws
// ContractError when called on a passing report.
std::string make_feedback(const ValidationReport& report);

// TestPatch's observation text: the agent loop treats failures as
// intermediate observations, so this never throws.
std::string feedback_as_observation(const ValidationReport& report);

class Validator {
public:
    virtual ~Validator() = default;
    virtual ValidationReport validate(const PatchTask& task, Workspace& ws) = 0;
};

struct HarnessOptions {
    // PoV output matching any of these marks the crash as still present.
    std::vector<std::string> crash_patterns = {"FuzzerSecurityIssue", "== Java Exception",
                                               "timeout"};
    // Globs of paths a patch may never touch (harness/test protection).
    std::vector<std::string> protected_globs = {"*oss-fuzz*", "*infra/*", "*pov*", "*harness*",
                                                "*/test/*", "*/tests/*", "*Test.java",
                                                "*Fuzzer.java"};
    int log_tail_lines = 100;
};

class CommandValidator : public Validator {
public:
    explicit CommandValidator(HarnessOptions options = {}, Recorder* recorder = nullptr);
    ValidationReport validate(const PatchTask& task, Workspace& ws) override;

private:
    StageResult run_stage(const PatchTask& task, const Workspace& ws,
                          const std::string& command_template) const;

    HarnessOptions options_;
    Recorder* recorder_;
};

// Runs `command` under /bin/sh in `cwd`, stdout+stderr merged, environment
// stripped of API-key variables, killed (whole process group) on timeout.
struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;
    double duration_s = 0;
};
CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                          double timeout_s);

}  // namespace patchbench
