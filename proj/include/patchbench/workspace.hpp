// Copy-on-write view over a task's source tree with an undoable edit ledger.
//
// The original tree is never written. A workspace opened with a work
// directory copies the tree there at construction; commands run against that
// copy and sync_exec_tree() materializes the overlay into it before each
// validation. Edits live in memory until then.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace patchbench {

struct ApplyPayload {
    std::optional<std::string> patch;     // unified diff mode
    std::optional<std::string> old_code;  // snippet mode
    std::optional<std::string> new_code;
    bool replace_all = false;
};

struct EditRecord {
    enum class Mode { UnifiedDiff, Snippet };

    uint64_t edit_id = 0;
    Mode mode = Mode::Snippet;
    std::string path;  // normalized, relative to the source root
    std::string before_hash;
    std::string after_hash;
    // Payload: exactly one mode's fields are populated.
    std::string patch_text;
    std::string old_code;
    std::string new_code;
    bool replace_all = false;
    bool undone = false;
};

class Workspace {
public:
    // In-memory overlay only; no command execution possible.
    explicit Workspace(std::filesystem::path source_root);
    // Copies the tree into `work_dir` for sandboxed command execution.
    Workspace(std::filesystem::path source_root, std::filesystem::path work_dir);

    const std::filesystem::path& source_root() const { return source_root_; }
    bool has_exec_root() const { return !work_dir_.empty(); }
    const std::filesystem::path& exec_root() const;

    bool exists(const std::string& path) const;
    std::string read(const std::string& path) const;   // overlay, else pristine
    std::vector<std::string> list_files() const;       // sorted relative paths

    const EditRecord& apply_patch(const std::string& path, const ApplyPayload& payload);
    const EditRecord& undo_last();
    std::vector<EditRecord> list_edits() const;  // active edits, application order
    size_t active_edit_count() const;
    const std::vector<EditRecord>& ledger() const { return ledger_; }

    std::string emit_final_diff() const;
    std::vector<std::string> changed_paths() const;  // overlay entries differing from pristine

    // Digest of the full current content (pristine plus overlay). Equals
    // pristine_digest() exactly when no effective change is present.
    std::string overlay_digest() const;
    std::string pristine_digest() const;

    // Writes every overlay entry into the work directory.
    void sync_exec_tree() const;

    // Relative /-separated path inside the root; throws SandboxError on escape.
    std::string normalize_path(const std::string& path) const;

private:
    const std::string& pristine(const std::string& rel) const;
    std::string current(const std::string& rel) const;

    std::filesystem::path source_root_;
    std::filesystem::path work_dir_;
    mutable std::map<std::string, std::string> pristine_cache_;
    mutable std::optional<std::string> pristine_digest_;
    std::map<std::string, std::string> overlay_;
    std::vector<EditRecord> ledger_;
    // Full content snapshots per ledger entry, for O(1) undo restoration.
    std::vector<std::pair<std::string, std::string>> snapshots_;  // (before, after)
    uint64_t next_edit_id_ = 1;
};

}  // namespace patchbench
