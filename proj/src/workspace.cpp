#include "patchbench/workspace.hpp"

#include <algorithm>
#include <set>

#include "patchbench/diff.hpp"
#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

namespace fs = std::filesystem;

namespace patchbench {

namespace {

bool looks_binary(const std::string& content) {
    return content.find('\0') != std::string::npos;
}

std::vector<size_t> find_occurrences(const std::string& haystack, const std::string& needle) {
    std::vector<size_t> out;
    size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        out.push_back(pos);
        pos += needle.size();  // non-overlapping
    }
    return out;
}

}  // namespace

Workspace::Workspace(fs::path source_root)
    : source_root_(fs::absolute(std::move(source_root)).lexically_normal()) {
    if (!fs::is_directory(source_root_))
        throw PathError("source root is not a directory: " + source_root_.string());
}

Workspace::Workspace(fs::path source_root, fs::path work_dir)
    : Workspace(std::move(source_root)) {
    work_dir_ = std::move(work_dir);
    copy_tree(source_root_, work_dir_);
}

const fs::path& Workspace::exec_root() const {
    if (work_dir_.empty()) throw ContractError("workspace has no execution directory");
    return work_dir_;
}

std::string Workspace::normalize_path(const std::string& path) const {
    fs::path p(path);
    if (p.is_absolute()) {
        // Absolute paths are accepted when they point inside the root.
        p = p.lexically_normal().lexically_relative(source_root_);
    }
    fs::path norm = p.lexically_normal();
    std::string rel = norm.generic_string();
    if (rel.empty() || rel == "." || rel == ".." || starts_with(rel, "../") || norm.is_absolute())
        throw SandboxError("path escapes the source root: " + path);
    return rel;
}

const std::string& Workspace::pristine(const std::string& rel) const {
    auto it = pristine_cache_.find(rel);
    if (it != pristine_cache_.end()) return it->second;
    fs::path full = source_root_ / rel;
    if (!fs::is_regular_file(full)) throw NotFoundError("no such file in workspace: " + rel);
    auto [ins, _] = pristine_cache_.emplace(rel, read_file(full));
    return ins->second;
}

std::string Workspace::current(const std::string& rel) const {
    auto it = overlay_.find(rel);
    if (it != overlay_.end()) return it->second;
    return pristine(rel);
}

bool Workspace::exists(const std::string& path) const {
    std::string rel;
    try {
        rel = normalize_path(path);
    } catch (const SandboxError&) {
        return false;
    }
    if (overlay_.count(rel)) return true;
    return fs::is_regular_file(source_root_ / rel);
}

std::string Workspace::read(const std::string& path) const {
    return current(normalize_path(path));
}

std::vector<std::string> Workspace::list_files() const {
    return list_tree(source_root_);
}

const EditRecord& Workspace::apply_patch(const std::string& path, const ApplyPayload& payload) {
    const std::string rel = normalize_path(path);

    const bool diff_mode = payload.patch.has_value();
    const bool snippet_mode = payload.old_code.has_value() || payload.new_code.has_value();
    if (diff_mode == snippet_mode)
        throw ApplyError("provide exactly one of 'patch' or 'old_code'/'new_code'");
    if (snippet_mode && (!payload.old_code || !payload.new_code))
        throw ApplyError("snippet mode requires both 'old_code' and 'new_code'");

    if (!exists(rel)) throw NotFoundError("no such file in workspace: " + rel);
    const std::string before = current(rel);
    if (looks_binary(before)) throw ApplyError("refusing to edit binary file: " + rel);

    EditRecord rec;
    rec.edit_id = next_edit_id_++;
    rec.path = rel;
    rec.before_hash = sha256_hex(before);

    std::string after;
    if (diff_mode) {
        rec.mode = EditRecord::Mode::UnifiedDiff;
        rec.patch_text = *payload.patch;
        diff::UnifiedDiff parsed = diff::parse_diff(*payload.patch);
        if (parsed.files.empty()) throw ApplyError("patch contains no file entries");
        const diff::FileDiff* target = nullptr;
        if (parsed.files.size() == 1) {
            target = &parsed.files.front();
        } else {
            for (const auto& fd : parsed.files)
                if (fd.path() == rel) target = &fd;
            if (!target)
                throw ApplyError("patch contains multiple files and none matches " + rel);
        }
        after = diff::apply_file_diff(before, *target);
    } else {
        rec.mode = EditRecord::Mode::Snippet;
        rec.old_code = *payload.old_code;
        rec.new_code = *payload.new_code;
        rec.replace_all = payload.replace_all;
        if (rec.old_code.empty()) throw ApplyError("old_code must be non-empty");
        if (rec.old_code == rec.new_code)
            throw ApplyError("old_code and new_code are identical; nothing to change");
        auto sites = find_occurrences(before, rec.old_code);
        if (sites.empty()) throw ApplyError("old_code not found in " + rel);
        if (sites.size() > 1 && !rec.replace_all)
            throw ApplyError("old_code matches " + std::to_string(sites.size()) +
                             " sites in " + rel + "; pass replace_all or add context");
        after = before;
        for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
            if (!rec.replace_all && it + 1 != sites.rend()) continue;
            after.replace(*it, rec.old_code.size(), rec.new_code);
        }
    }

    if (after == before) throw ApplyError("patch is a no-op on " + rel);
    rec.after_hash = sha256_hex(after);
    overlay_[rel] = after;
    snapshots_.emplace_back(before, after);
    ledger_.push_back(std::move(rec));
    return ledger_.back();
}

const EditRecord& Workspace::undo_last() {
    for (auto it = ledger_.rbegin(); it != ledger_.rend(); ++it) {
        if (it->undone) continue;
        it->undone = true;
        size_t idx = static_cast<size_t>(std::distance(it, ledger_.rend())) - 1;
        overlay_[it->path] = snapshots_[idx].first;
        return *it;
    }
    throw NothingToUndoError("edit ledger has no active edits to undo");
}

std::vector<EditRecord> Workspace::list_edits() const {
    std::vector<EditRecord> out;
    for (const auto& rec : ledger_)
        if (!rec.undone) out.push_back(rec);
    return out;
}

size_t Workspace::active_edit_count() const {
    size_t n = 0;
    for (const auto& rec : ledger_)
        if (!rec.undone) ++n;
    return n;
}

std::vector<std::string> Workspace::changed_paths() const {
    std::vector<std::string> out;
    for (const auto& [rel, content] : overlay_)
        if (content != pristine(rel)) out.push_back(rel);
    return out;
}

std::string Workspace::emit_final_diff() const {
    std::string out;
    for (const auto& rel : changed_paths()) {
        diff::FileDiff fd = diff::compute_file_diff(rel, pristine(rel), overlay_.at(rel));
        if (!fd.hunks.empty()) out += diff::render_file_diff(fd);
    }
    return out;
}

std::string Workspace::overlay_digest() const {
    if (overlay_.empty()) return pristine_digest();
    std::string acc;
    for (const auto& rel : list_files()) {
        acc += rel;
        acc.push_back('\0');
        acc += sha256_hex(current(rel));
        acc.push_back('\n');
    }
    return sha256_hex(acc);
}

std::string Workspace::pristine_digest() const {
    if (!pristine_digest_) {
        std::string acc;
        for (const auto& rel : list_files()) {
            acc += rel;
            acc.push_back('\0');
            acc += sha256_hex(pristine(rel));
            acc.push_back('\n');
        }
        pristine_digest_ = sha256_hex(acc);
    }
    return *pristine_digest_;
}

void Workspace::sync_exec_tree() const {
    const fs::path& root = exec_root();
    for (const auto& [rel, content] : overlay_) write_file(root / rel, content);
}

}  // namespace patchbench
