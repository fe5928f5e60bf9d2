#include "patchbench/validation.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

extern char** environ;

namespace patchbench {

std::string to_string(StageStatus s) {
    switch (s) {
        case StageStatus::Ok: return "ok";
        case StageStatus::Failed: return "failed";
        case StageStatus::Skipped: return "skipped";
        case StageStatus::Timeout: return "timeout";
    }
    return "skipped";
}

std::optional<FailureStage> ValidationReport::failed_stage() const {
    auto bad = [](const StageResult& r) {
        return r.status == StageStatus::Failed || r.status == StageStatus::Timeout;
    };
    if (bad(build)) return FailureStage::Build;
    if (bad(pov)) return FailureStage::Pov;
    if (bad(tests)) return FailureStage::Tests;
    return std::nullopt;
}

CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                          double timeout_s) {
    int pipefd[2];
    if (pipe(pipefd) != 0) throw Error("pipe failed: " + std::string(strerror(errno)));

    const int64_t t0 = now_ms();
    pid_t pid = fork();
    if (pid < 0) {
        close(pipefd[0]);
        close(pipefd[1]);
        throw Error("fork failed: " + std::string(strerror(errno)));
    }

    if (pid == 0) {
        // Child: own process group so the whole command tree can be killed.
        setpgid(0, 0);
        close(pipefd[0]);
        dup2(pipefd[1], STDOUT_FILENO);
        dup2(pipefd[1], STDERR_FILENO);
        close(pipefd[1]);
        if (chdir(cwd.c_str()) != 0) _exit(127);
        // API keys never reach task commands.
        for (char** e = environ; *e; ++e) {
            std::string entry(*e);
            size_t eq = entry.find('=');
            if (eq == std::string::npos) continue;
            std::string name = entry.substr(0, eq);
            if (name.find("API_KEY") != std::string::npos) unsetenv(name.c_str());
        }
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    close(pipefd[1]);
    fcntl(pipefd[0], F_SETFL, O_NONBLOCK);

    CommandResult result;
    std::string out;
    const int64_t deadline = t0 + static_cast<int64_t>(timeout_s * 1000.0);
    bool killed = false;
    char buf[4096];

    while (true) {
        int wait_ms = static_cast<int>(std::max<int64_t>(0, deadline - now_ms()));
        struct pollfd pfd{pipefd[0], POLLIN, 0};
        int pr = poll(&pfd, 1, killed ? 1000 : std::min(wait_ms, 200));

        if (pr > 0) {
            ssize_t n;
            bool eof = false;
            while ((n = ::read(pipefd[0], buf, sizeof(buf))) != 0) {
                if (n < 0) {
                    if (errno == EAGAIN || errno == EWOULDBLOCK) break;
                    eof = true;
                    break;
                }
                out.append(buf, static_cast<size_t>(n));
                // Keep memory bounded for chatty commands.
                if (out.size() > 4 * 1024 * 1024) out.erase(0, out.size() - 1024 * 1024);
            }
            if (n == 0 || eof) break;
        }

        if (!killed && now_ms() >= deadline) {
            kill(-pid, SIGKILL);
            killed = true;
            result.timed_out = true;
        }
        if (killed && pr == 0) break;  // no more output after the kill
    }
    close(pipefd[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    result.output = std::move(out);
    result.duration_s = static_cast<double>(now_ms() - t0) / 1000.0;
    return result;
}

CommandValidator::CommandValidator(HarnessOptions options, Recorder* recorder)
    : options_(std::move(options)), recorder_(recorder) {}

StageResult CommandValidator::run_stage(const PatchTask& task, const Workspace& ws,
                                        const std::string& command_template) const {
    StageResult r;
    std::string command = substitute_placeholders(
        command_template, {{"workspace", ws.exec_root().string()},
                           {"task_dir", task.task_dir.string()},
                           {"pov_blob", task.pov_blob ? task.pov_blob->string() : ""}});
    if (command_template.find("{pov_blob}") != std::string::npos && !task.pov_blob) {
        r.status = StageStatus::Failed;
        r.log_excerpt = "command references {pov_blob} but the manifest declares no pov_blob_file";
        return r;
    }

    CommandResult cmd = run_command(command, ws.exec_root(), task.budgets.per_command_timeout);
    r.exit_code = cmd.exit_code;
    r.duration_s = cmd.duration_s;
    r.log_excerpt = join_lines(tail_lines(cmd.output, static_cast<size_t>(options_.log_tail_lines)),
                               true);
    if (cmd.timed_out)
        r.status = StageStatus::Timeout;
    else
        r.status = cmd.exit_code == 0 ? StageStatus::Ok : StageStatus::Failed;
    return r;
}

ValidationReport CommandValidator::validate(const PatchTask& task, Workspace& ws) {
    ValidationReport report;

    // A patch that touches protected paths fails validation outright.
    for (const auto& path : ws.changed_paths()) {
        if (matches_any_glob(options_.protected_globs, path)) {
            report.passed = false;
            report.feedback = "Validation rejected: the patch modifies protected path '" + path +
                              "' (harness and test files may not be changed).";
            if (recorder_) recorder_->validation(false, "protected-path", "tests");
            return report;
        }
    }

    ws.sync_exec_tree();

    report.build = run_stage(task, ws, task.build_command);
    if (report.build.status == StageStatus::Ok) {
        report.pov = run_stage(task, ws, task.pov_command);
        // The crash signal may surface in output even with a zero exit code.
        if (report.pov.status == StageStatus::Ok) {
            for (const auto& pattern : options_.crash_patterns) {
                if (report.pov.log_excerpt.find(pattern) != std::string::npos) {
                    report.pov.status = StageStatus::Failed;
                    break;
                }
            }
        }
        if (report.pov.status == StageStatus::Ok)
            report.tests = run_stage(task, ws, task.functional_test_command);
    }

    report.passed = report.build.status == StageStatus::Ok &&
                    report.pov.status == StageStatus::Ok &&
                    report.tests.status == StageStatus::Ok;
    if (!report.passed) report.feedback = make_feedback(report);

    if (recorder_) {
        std::string summary = "build=" + to_string(report.build.status) +
                              " pov=" + to_string(report.pov.status) +
                              " tests=" + to_string(report.tests.status);
        auto stage = report.failed_stage();
        recorder_->validation(report.passed, summary, stage ? to_string(*stage) : "");
    }
    return report;
}

std::string make_feedback(const ValidationReport& report) {
    if (report.passed) throw ContractError("make_feedback called on a passing report");
    if (!report.failed_stage()) return report.feedback;  // policy rejection, pre-rendered

    struct Named {
        const char* label;
        const StageResult* result;
    };
    const Named stages[] = {{"build", &report.build}, {"PoV", &report.pov}, {"tests", &report.tests}};
    for (const auto& [label, result] : stages) {
        if (result->status != StageStatus::Failed && result->status != StageStatus::Timeout)
            continue;
        std::string text = "Validation failed at stage: " + std::string(label) + "\n";
        text += "Status: " + to_string(result->status) + "\n";
        if (result->exit_code) text += "Exit code: " + std::to_string(*result->exit_code) + "\n";
        text += "--- log tail (" + std::string(label) + ") ---\n";
        text += result->log_excerpt;
        if (!text.empty() && text.back() != '\n') text += "\n";
        return text;
    }
    throw ContractError("report not passed but no failing stage found");
}

std::string feedback_as_observation(const ValidationReport& report) {
    if (report.passed) {
        return "ALL CHECKS PASSED\nbuild: ok\nPoV: crash no longer reproduces\ntests: ok\n";
    }
    return make_feedback(report);
}

}  // namespace patchbench
