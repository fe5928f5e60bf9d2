// Unified diff parsing, application, computation, and rendering.
//
// Dialect: `---`/`+++` headers with optional a/ b/ prefixes, `@@ -l,c +l,c @@`
// hunks (count may be omitted for 1), `diff --git`/`index`/mode lines are
// tolerated and ignored. `\ No newline at end of file` is honored on both
// sides so emitted diffs round-trip byte-exactly.
#pragma once

#include <string>
#include <vector>

namespace patchbench::diff {

enum class LineTag { Context, Remove, Add };

struct DiffLine {
    LineTag tag;
    std::string text;
    // False only when this line is the final line of its file and that file
    // does not end with a newline.
    bool eol = true;
};

struct Hunk {
    long old_start = 0;
    long old_count = 0;
    long new_start = 0;
    long new_count = 0;
    std::string section;  // text after the trailing @@, informational
    std::vector<DiffLine> lines;
};

struct FileDiff {
    std::string old_path;
    std::string new_path;
    std::vector<Hunk> hunks;

    // Canonical relative path of the target file.
    const std::string& path() const { return new_path == "/dev/null" ? old_path : new_path; }
};

struct UnifiedDiff {
    std::vector<FileDiff> files;
};

// Throws ParseError with a 1-based line number on malformed input.
UnifiedDiff parse_diff(const std::string& text);

// Canonical rendering: a/ and b/ prefixes, explicit counts on every hunk.
std::string render_diff(const UnifiedDiff& d);
std::string render_file_diff(const FileDiff& fd);

// Applies one file's hunks to `content`. Placement: exact position, then a
// +/-`fuzz_window` line scan, then the same scan with per-line whitespace
// trimmed. Throws ApplyError when a hunk cannot be placed.
std::string apply_file_diff(const std::string& content, const FileDiff& fd, int fuzz_window = 20);

// Minimal line diff between two versions of a file (3 lines of context,
// hunks merged when their context would overlap). Empty result when equal.
FileDiff compute_file_diff(const std::string& rel_path, const std::string& old_content,
                           const std::string& new_content, int context = 3);

}  // namespace patchbench::diff
