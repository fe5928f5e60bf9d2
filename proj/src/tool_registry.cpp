#include "patchbench/tool_registry.hpp"

#include <algorithm>

#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

using nlohmann::json;

namespace patchbench {

ToolRegistry::ToolRegistry(ToolRegistryOptions options) : options_(std::move(options)) {}

void ToolRegistry::register_tool(ToolDescriptor descriptor, ToolFn fn) {
    for (const auto& req : descriptor.required)
        if (!descriptor.properties.count(req))
            throw ContractError("tool '" + descriptor.name + "' requires unknown parameter '" +
                                req + "'");
    for (const auto& e : tools_)
        if (e.descriptor.name == descriptor.name)
            throw ContractError("tool already registered: " + descriptor.name);
    tools_.push_back({std::move(descriptor), std::move(fn)});
}

std::vector<ToolDescriptor> ToolRegistry::descriptors() const {
    std::vector<ToolDescriptor> out;
    for (const auto& e : tools_) out.push_back(e.descriptor);
    return out;
}

std::vector<std::string> ToolRegistry::tool_names() const {
    std::vector<std::string> out;
    for (const auto& e : tools_) out.push_back(e.descriptor.name);
    return out;
}

void ToolRegistry::request_terminate(const std::string& summary) {
    terminate_requested_ = true;
    terminate_summary_ = summary;
}

void ToolRegistry::set_last_validation(ValidationReport report) {
    last_validation_ = std::move(report);
}

namespace {

bool type_matches(const std::string& schema_type, const json& value) {
    if (schema_type == "string") return value.is_string();
    if (schema_type == "boolean") return value.is_boolean();
    if (schema_type == "integer") return value.is_number_integer();
    if (schema_type == "number") return value.is_number();
    if (schema_type == "array") return value.is_array();
    if (schema_type == "object") return value.is_object();
    return true;
}

}  // namespace

ToolResult ToolRegistry::validate_and_dispatch(const ToolCall& call, Recorder* recorder) {
    ToolResult result;
    result.call_id = call.call_id;
    result.ok = false;

    const Entry* entry = nullptr;
    for (const auto& e : tools_)
        if (e.descriptor.name == call.name) entry = &e;

    int64_t t0 = now_ms();
    if (!entry) {
        result.payload = "unknown tool: " + call.name;
    } else if (!call.arguments.is_object()) {
        result.payload = "tool arguments must be a JSON object";
    } else {
        std::string problem;
        for (const auto& req : entry->descriptor.required) {
            if (!call.arguments.contains(req)) {
                problem = "missing required argument: " + req;
                break;
            }
        }
        if (problem.empty()) {
            for (const auto& [key, value] : call.arguments.items()) {
                auto it = entry->descriptor.properties.find(key);
                if (it == entry->descriptor.properties.end()) {
                    // Models add stray fields; ignore them but leave a trace.
                    if (recorder)
                        recorder->note("tool " + call.name + ": ignored unknown argument '" + key +
                                       "'");
                    continue;
                }
                if (!type_matches(it->second.type, value)) {
                    problem = "argument '" + key + "' must have type " + it->second.type;
                    break;
                }
            }
        }
        if (!problem.empty()) {
            result.payload = problem;
        } else {
            try {
                result.payload = entry->fn(call.arguments);
                result.ok = true;
            } catch (const std::exception& e) {
                result.payload = e.what();
            }
        }
    }

    if (result.payload.size() > options_.payload_cap) {
        result.payload.resize(options_.payload_cap);
        result.payload += "\n[...output truncated...]";
    }
    if (!result.ok && result.payload.empty()) result.payload = "tool failed without a message";
    if (recorder) recorder->tool_call(call.name, result.ok, static_cast<long>(now_ms() - t0));
    return result;
}

// --- standard tool set -------------------------------------------------------

StandardTools::StandardTools(Workspace& ws, const PatchTask& task, Validator& validator,
                             Gateway* gateway, std::string model_id, Recorder* recorder,
                             ToolRegistryOptions options)
    : ws_(ws),
      task_(task),
      validator_(validator),
      gateway_(gateway),
      model_id_(std::move(model_id)),
      recorder_(recorder),
      options_(options),
      registry_(options) {
    register_standard_tools();
    if (recorder_) recorder_->set_registered_tools(registry_.tool_names());
}

const Index& StandardTools::index() {
    if (index_dirty_) {
        index_ = std::make_unique<Index>(Index::build(ws_, task_.language_profile));
        if (recorder_)
            for (const auto& w : index_->warnings()) recorder_->note(w);
        index_dirty_ = false;
    }
    return *index_;
}

namespace {

std::string render_symbols(const std::vector<SymbolEntry>& symbols) {
    if (symbols.empty()) return "no matches";
    std::string out;
    for (const auto& s : symbols) {
        out += (s.kind == SymbolKind::Function ? "function " : "type ") + s.name + "  " + s.path +
               ":" + std::to_string(s.start_line) + "-" + std::to_string(s.end_line) + "  " +
               s.signature + "\n";
    }
    return out;
}

std::string render_edges(const std::vector<CallEdge>& edges) {
    if (edges.empty()) return "no matches";
    std::string out;
    for (const auto& e : edges)
        out += e.caller.name + " (" + e.caller.path + ":" + std::to_string(e.site_line) +
               ") -> " + e.callee_name + "\n";
    return out;
}

}  // namespace

void StandardTools::register_standard_tools() {
    auto prop = [](const char* type, const char* desc) { return ParamSpec{type, desc}; };

    registry_.register_tool(
        {"SearchReadSource",
         "Read a slice of a source file from the workspace (reflects applied edits).",
         {{"path", prop("string", "File path relative to the source root")},
          {"start_line", prop("integer", "First line to read (1-based, default 1)")},
          {"end_line", prop("integer", "Last line to read (default: end of file)")}},
         {"path"}},
        [this](const json& args) {
            long start = args.value("start_line", 1L);
            long end = args.value("end_line", static_cast<long>(1L << 30));
            return index().read_source(args.at("path").get<std::string>(), start, end);
        });

    registry_.register_tool(
        {"SearchReadDefinition",
         "Read the full definition of a named function or type.",
         {{"name", prop("string", "Symbol name to look up")}},
         {"name"}},
        [this](const json& args) {
            auto symbols = index().lookup(args.at("name").get<std::string>());
            if (symbols.empty()) return std::string("no definition found");
            std::string out;
            for (const auto& s : symbols) {
                out += "// " + s.path + ":" + std::to_string(s.start_line) + "-" +
                       std::to_string(s.end_line) + "\n";
                out += index().symbol_source(s);
                if (!out.empty() && out.back() != '\n') out += "\n";
            }
            return out;
        });

    registry_.register_tool(
        {"SearchFindReferences",
         "List whole-token occurrences of a name across the workspace.",
         {{"name", prop("string", "Identifier to search for")}},
         {"name"}},
        [this](const json& args) {
            auto refs = index().find_references(args.at("name").get<std::string>());
            if (refs.empty()) return std::string("no references found");
            std::string out;
            for (const auto& r : refs)
                out += r.path + ":" + std::to_string(r.line) + ": " + r.excerpt + "\n";
            return out;
        });

    registry_.register_tool(
        {"SearchListFunctions",
         "List indexed function definitions, optionally filtered by path.",
         {{"path", prop("string", "Only list functions defined in this file")}},
         {}},
        [this](const json& args) {
            auto fns = index().functions();
            if (args.contains("path")) {
                const std::string path = args["path"].get<std::string>();
                std::erase_if(fns, [&](const SymbolEntry& s) { return s.path != path; });
            }
            return render_symbols(fns);
        });

    registry_.register_tool(
        {"SearchListTypes",
         "List indexed type definitions, optionally filtered by path.",
         {{"path", prop("string", "Only list types defined in this file")}},
         {}},
        [this](const json& args) {
            auto types = index().types();
            if (args.contains("path")) {
                const std::string path = args["path"].get<std::string>();
                std::erase_if(types, [&](const SymbolEntry& s) { return s.path != path; });
            }
            return render_symbols(types);
        });

    registry_.register_tool(
        {"SearchGetCallers",
         "List call sites that invoke the named function.",
         {{"name", prop("string", "Callee function name")}},
         {"name"}},
        [this](const json& args) {
            return render_edges(index().callers(args.at("name").get<std::string>()));
        });

    registry_.register_tool(
        {"SearchGetCallees",
         "List functions invoked from within the named function.",
         {{"name", prop("string", "Caller function name")}},
         {"name"}},
        [this](const json& args) {
            return render_edges(index().callees(args.at("name").get<std::string>()));
        });

    // Descriptor mirrors the editor tool's published function-calling schema.
    registry_.register_tool(
        {"EditorApplyPatch",
         "Apply a change to 'path' using ONE of two modes: unified diff mode (provide 'patch' "
         "as a unified diff with @@ hunks) or snippet mode (provide 'old_code' and 'new_code'; "
         "the tool computes a diff and applies it). The applied change is tracked and can be "
         "undone via EditorUndoLastPatch.",
         {{"path", prop("string", "Absolute path of the file to modify")},
          {"patch", prop("string", "Unified diff to apply (optional)")},
          {"old_code", prop("string", "Original code snippet to be replaced (optional)")},
          {"new_code", prop("string", "Replacement code snippet (optional)")},
          {"replace_all", prop("boolean", "Whether to replace all occurrences of old_code")}},
         {"path"}},
        [this](const json& args) {
            const std::string path = args.at("path").get<std::string>();
            const std::string rel = ws_.normalize_path(path);
            if (matches_any_glob(options_.protected_globs, rel))
                throw SandboxError("protected path may not be modified: " + rel);
            ApplyPayload payload;
            if (args.contains("patch")) payload.patch = args["patch"].get<std::string>();
            if (args.contains("old_code")) payload.old_code = args["old_code"].get<std::string>();
            if (args.contains("new_code")) payload.new_code = args["new_code"].get<std::string>();
            payload.replace_all = args.value("replace_all", false);
            const EditRecord& rec = ws_.apply_patch(path, payload);
            if (recorder_) recorder_->edit(rec.edit_id, rec.path, "apply");
            index_dirty_ = true;
            return "applied edit " + std::to_string(rec.edit_id) + " to " + rec.path;
        });

    registry_.register_tool(
        {"EditorUndoLastPatch",
         "Revert the most recent edit that has not already been undone.",
         {},
         {}},
        [this](const json&) {
            const EditRecord& rec = ws_.undo_last();
            if (recorder_) recorder_->edit(rec.edit_id, rec.path, "undo");
            index_dirty_ = true;
            return "undid edit " + std::to_string(rec.edit_id) + " on " + rec.path;
        });

    registry_.register_tool(
        {"EditorListEdits",
         "List the edits currently applied to the workspace, in application order.",
         {},
         {}},
        [this](const json&) {
            auto edits = ws_.list_edits();
            if (edits.empty()) return std::string("no edits applied");
            std::string out;
            for (const auto& e : edits)
                out += "#" + std::to_string(e.edit_id) + " " +
                       (e.mode == EditRecord::Mode::Snippet ? "snippet" : "diff") + " " + e.path +
                       "\n";
            return out;
        });

    registry_.register_tool(
        {"GeneratePatch",
         "Generate snippet edits for the named symbols from natural-language instructions "
         "(performs a nested model call) and apply them.",
         {{"instructions", prop("string", "What the patch should change and why")},
          {"target_symbols", prop("array", "Function or type names the patch should touch")}},
         {"instructions"}},
        [this](const json& args) { return generate_patch(args); });

    registry_.register_tool(
        {"TestPatch",
         "Validate the current workspace: build, re-run the PoV, then run functional tests.",
         {},
         {}},
        [this](const json&) {
            ValidationReport report = validator_.validate(task_, ws_);
            registry_.set_last_validation(report);
            return feedback_as_observation(report);
        });

    registry_.register_tool(
        {"Terminate",
         "Finish the run. Call only after TestPatch reports that all checks passed.",
         {{"summary", prop("string", "One-paragraph description of the fix (optional)")}},
         {}},
        [this](const json& args) {
            registry_.request_terminate(args.value("summary", ""));
            return std::string("terminating");
        });
}

std::string StandardTools::generate_patch(const json& args) {
    if (!gateway_) throw Error("GeneratePatch is unavailable: no model gateway configured");

    std::string sources;
    if (args.contains("target_symbols")) {
        for (const auto& name : args["target_symbols"]) {
            for (const auto& s : index().lookup(name.get<std::string>())) {
                sources += "// " + s.path + ":" + std::to_string(s.start_line) + "-" +
                           std::to_string(s.end_line) + "\n" + index().symbol_source(s) + "\n";
            }
        }
    }

    ChatRequest req;
    req.model_id = model_id_;
    req.messages.push_back(
        {ChatRole::System,
         "You convert patch instructions into snippet edits. Return ONLY a JSON array of "
         "objects with keys \"path\", \"old_code\", \"new_code\". old_code must match the "
         "current file content exactly.",
         {},
         ""});
    req.messages.push_back({ChatRole::User,
                            "INSTRUCTIONS:\n" + args.at("instructions").get<std::string>() +
                                "\n\nCURRENT SOURCE:\n" + sources,
                            {},
                            ""});
    ChatResponse resp = gateway_->complete(req, recorder_, "generate_patch");

    std::string body = trim(resp.content);
    if (starts_with(body, "```")) {
        size_t first_nl = body.find('\n');
        size_t last_fence = body.rfind("```");
        if (first_nl != std::string::npos && last_fence > first_nl)
            body = trim(body.substr(first_nl + 1, last_fence - first_nl - 1));
    }
    json edits = json::parse(body, nullptr, false);
    if (edits.is_discarded() || !edits.is_array() || edits.empty())
        throw Error("patch generation did not return a JSON array of snippet edits");

    std::string out;
    size_t applied = 0;
    for (const auto& e : edits) {
        if (!e.is_object() || !e.contains("path") || !e.contains("old_code") ||
            !e.contains("new_code")) {
            out += "skipped malformed edit entry\n";
            continue;
        }
        try {
            ApplyPayload payload;
            payload.old_code = e["old_code"].get<std::string>();
            payload.new_code = e["new_code"].get<std::string>();
            const std::string rel = ws_.normalize_path(e["path"].get<std::string>());
            if (matches_any_glob(options_.protected_globs, rel))
                throw SandboxError("protected path may not be modified: " + rel);
            const EditRecord& rec = ws_.apply_patch(rel, payload);
            if (recorder_) recorder_->edit(rec.edit_id, rec.path, "apply");
            index_dirty_ = true;
            out += "applied edit " + std::to_string(rec.edit_id) + " to " + rec.path + "\n";
            ++applied;
        } catch (const Error& err) {
            out += std::string("failed edit: ") + err.what() + "\n";
        }
    }
    if (applied == 0) throw Error("no snippet edit could be applied:\n" + out);
    return out;
}

}  // namespace patchbench
