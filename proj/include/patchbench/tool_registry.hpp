// Tool surface exposed to the model: search, editor, patch-generation,
// validation, and terminate tools. Dispatch validates calls against their
// schemas and never lets a tool failure escape the loop.
#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "patchbench/code_index.hpp"
#include "patchbench/gateway.hpp"
#include "patchbench/tool_schema.hpp"
#include "patchbench/validation.hpp"

namespace patchbench {

struct ToolRegistryOptions {
    size_t payload_cap = 32 * 1024;  // bytes, truncation marker appended beyond this
    std::vector<std::string> protected_globs = HarnessOptions{}.protected_globs;
};

class ToolRegistry {
public:
    explicit ToolRegistry(ToolRegistryOptions options = {});

    using ToolFn = std::function<std::string(const nlohmann::json& args)>;
    void register_tool(ToolDescriptor descriptor, ToolFn fn);  // throws on duplicate name
    std::vector<ToolDescriptor> descriptors() const;
    std::vector<std::string> tool_names() const;
    size_t size() const { return tools_.size(); }

    // Unknown tools, schema violations, and tool errors all come back as
    // ok=false results; the loop decides what to do with them.
    ToolResult validate_and_dispatch(const ToolCall& call, Recorder* recorder = nullptr);

    bool terminate_requested() const { return terminate_requested_; }
    const std::string& terminate_summary() const { return terminate_summary_; }
    const std::optional<ValidationReport>& last_validation() const { return last_validation_; }

    void request_terminate(const std::string& summary);
    void set_last_validation(ValidationReport report);

private:
    struct Entry {
        ToolDescriptor descriptor;
        ToolFn fn;
    };
    std::vector<Entry> tools_;  // registration order
    ToolRegistryOptions options_;
    bool terminate_requested_ = false;
    std::string terminate_summary_;
    std::optional<ValidationReport> last_validation_;
};

// Wires the standard thirteen tools against one run's workspace, index,
// validator, and (for GeneratePatch) gateway. The registry keeps its own
// index and rebuilds it after editor calls.
class StandardTools {
public:
    StandardTools(Workspace& ws, const PatchTask& task, Validator& validator, Gateway* gateway,
                  std::string model_id, Recorder* recorder, ToolRegistryOptions options = {});

    ToolRegistry& registry() { return registry_; }
    const Index& index();  // rebuilt lazily after edits

private:
    void register_standard_tools();
    std::string generate_patch(const nlohmann::json& args);

    Workspace& ws_;
    const PatchTask& task_;
    Validator& validator_;
    Gateway* gateway_;
    std::string model_id_;
    Recorder* recorder_;
    ToolRegistryOptions options_;
    ToolRegistry registry_;
    std::unique_ptr<Index> index_;
    bool index_dirty_ = true;
};

}  // namespace patchbench
