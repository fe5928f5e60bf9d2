// Heuristic symbol index over a workspace: function/type definitions found
// by regex-and-brace scanning, token-level references and call edges, and
// stack-trace frame resolution. Deliberately imprecise (comments and string
// literals count as references); precise enough to navigate the fixtures.
#pragma once

#include <string>
#include <vector>

#include "patchbench/task.hpp"
#include "patchbench/workspace.hpp"

namespace patchbench {

enum class SymbolKind { Function, Type };

struct SymbolEntry {
    std::string name;
    SymbolKind kind = SymbolKind::Function;
    std::string path;
    int start_line = 0;  // 1-based, inclusive
    int end_line = 0;
    std::string signature;
    bool operator==(const SymbolEntry&) const = default;
};

struct CallEdge {
    SymbolEntry caller;
    std::string callee_name;
    int site_line = 0;
};

struct Reference {
    std::string path;
    int line = 0;
    std::string excerpt;
};

class Index {
public:
    // Scans every overlay-visible source file matching the profile's
    // extensions. Unreadable files are skipped and reported via warnings().
    static Index build(const Workspace& ws, LanguageProfile profile);

    const std::vector<SymbolEntry>& symbols() const { return symbols_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    LanguageProfile profile() const { return profile_; }

    std::vector<SymbolEntry> functions() const;
    std::vector<SymbolEntry> types() const;
    std::vector<SymbolEntry> lookup(const std::string& name) const;
    std::vector<SymbolEntry> lookup_functions(const std::string& name) const;

    // Current overlay content, so reads reflect applied edits.
    std::string read_file(const std::string& path) const;
    std::string read_source(const std::string& path, long start_line, long end_line) const;
    std::string symbol_source(const SymbolEntry& s) const;

    // Whole-token occurrences of `name` outside its own definition header
    // lines, ordered by (path, line). Comments and strings included.
    std::vector<Reference> find_references(const std::string& name) const;

    std::vector<CallEdge> callers(const std::string& name) const;
    std::vector<CallEdge> callees(const std::string& name) const;

    // Resolves recognizable stack frames to symbols, preserving frame order
    // and dropping duplicates; unresolvable frames are skipped.
    std::vector<SymbolEntry> functions_from_stacktrace(const std::string& crash_report) const;

    // Method names mentioned by the crash report's frames, resolved or not.
    static std::vector<std::string> frame_names(const std::string& crash_report,
                                                LanguageProfile profile);

private:
    const Workspace* ws_ = nullptr;
    LanguageProfile profile_ = LanguageProfile::Generic;
    std::vector<SymbolEntry> symbols_;
    std::vector<CallEdge> edges_;
    std::vector<std::string> warnings_;
};

}  // namespace patchbench
