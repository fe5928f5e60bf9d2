#include "patchbench/diff.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <regex>

#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

namespace patchbench::diff {

namespace {

// A physical file line. `eol` is false only for a final line that is not
// terminated by a newline; it participates in equality so that diffs against
// newline-less files round-trip exactly.
struct Line {
    std::string text;
    bool eol = true;
    bool operator==(const Line& o) const { return eol == o.eol && text == o.text; }
};

std::vector<Line> to_lines(const std::string& content) {
    auto split = split_lines(content);
    std::vector<Line> out;
    out.reserve(split.lines.size());
    for (size_t i = 0; i < split.lines.size(); ++i) {
        bool last = i + 1 == split.lines.size();
        out.push_back({split.lines[i], last ? split.final_newline : true});
    }
    return out;
}

std::string from_lines(const std::vector<Line>& lines) {
    std::string out;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (!lines[i].eol && i + 1 != lines.size())
            throw ApplyError("no-newline marker would land in the middle of the file");
        out += lines[i].text;
        if (lines[i].eol) out.push_back('\n');
    }
    return out;
}

std::string strip_diff_path(std::string p) {
    // Paths may carry a tab-separated timestamp.
    size_t tab = p.find('\t');
    if (tab != std::string::npos) p.resize(tab);
    if (p == "/dev/null") return p;
    if (starts_with(p, "a/") || starts_with(p, "b/")) return p.substr(2);
    return p;
}

bool ignorable_outside_hunk(const std::string& line) {
    static const char* prefixes[] = {"diff ",       "index ",        "old mode",
                                     "new mode",    "new file mode", "deleted file mode",
                                     "similarity ", "rename ",       "Binary files"};
    for (const char* p : prefixes) {
        if (starts_with(line, p)) return true;
    }
    return line.empty();
}

}  // namespace

UnifiedDiff parse_diff(const std::string& text) {
    UnifiedDiff out;
    auto split = split_lines(text);
    const auto& lines = split.lines;

    FileDiff* file = nullptr;
    Hunk* hunk = nullptr;
    long old_needed = 0, new_needed = 0;
    DiffLine* last_line = nullptr;

    static const std::regex hunk_re(R"(^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$)");

    for (size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        const long lineno = static_cast<long>(i) + 1;
        const bool hunk_open = hunk != nullptr && (old_needed > 0 || new_needed > 0);

        if (starts_with(line, "--- ") && !hunk_open) {
            if (hunk && (old_needed > 0 || new_needed > 0))
                throw ParseError("truncated hunk before new file header", lineno);
            if (i + 1 >= lines.size() || !starts_with(lines[i + 1], "+++ "))
                throw ParseError("'---' header not followed by '+++'", lineno);
            out.files.emplace_back();
            file = &out.files.back();
            file->old_path = strip_diff_path(line.substr(4));
            file->new_path = strip_diff_path(lines[i + 1].substr(4));
            hunk = nullptr;
            last_line = nullptr;
            ++i;
            continue;
        }

        std::smatch m;
        if (starts_with(line, "@@")) {
            if (!std::regex_match(line, m, hunk_re))
                throw ParseError("malformed hunk header: " + line, lineno);
            if (!file) throw ParseError("hunk header outside a file section", lineno);
            if (hunk_open) throw ParseError("truncated hunk before new hunk header", lineno);
            file->hunks.emplace_back();
            hunk = &file->hunks.back();
            hunk->old_start = std::stol(m[1]);
            hunk->old_count = m[2].matched ? std::stol(m[2]) : 1;
            hunk->new_start = std::stol(m[3]);
            hunk->new_count = m[4].matched ? std::stol(m[4]) : 1;
            hunk->section = trim(m[5].str());
            old_needed = hunk->old_count;
            new_needed = hunk->new_count;
            last_line = nullptr;
            continue;
        }

        if (starts_with(line, "\\")) {
            if (!last_line) throw ParseError("no-newline marker without a preceding line", lineno);
            last_line->eol = false;
            continue;
        }

        if (hunk_open) {
            LineTag tag;
            if (line.empty()) {
                tag = LineTag::Context;  // tolerated: blank context line with the marker stripped
            } else {
                switch (line[0]) {
                    case ' ': tag = LineTag::Context; break;
                    case '-': tag = LineTag::Remove; break;
                    case '+': tag = LineTag::Add; break;
                    default: throw ParseError("unexpected line inside hunk: " + line, lineno);
                }
            }
            std::string body = line.empty() ? "" : line.substr(1);
            if (tag != LineTag::Add) {
                if (old_needed == 0) throw ParseError("hunk old side overflows its count", lineno);
                --old_needed;
            }
            if (tag != LineTag::Remove) {
                if (new_needed == 0) throw ParseError("hunk new side overflows its count", lineno);
                --new_needed;
            }
            hunk->lines.push_back({tag, std::move(body), true});
            last_line = &hunk->lines.back();
            continue;
        }

        if (ignorable_outside_hunk(line)) continue;
        if (!line.empty() && (line[0] == '+' || line[0] == '-' || line[0] == ' '))
            throw ParseError("diff content outside a hunk: " + line, lineno);
        throw ParseError("unrecognized line: " + line, lineno);
    }

    if (hunk && (old_needed > 0 || new_needed > 0))
        throw ParseError("diff ends inside a hunk", static_cast<long>(lines.size()));
    return out;
}

std::string render_file_diff(const FileDiff& fd) {
    std::string out;
    auto header_path = [](const std::string& p, const char* prefix) {
        return p == "/dev/null" ? p : prefix + p;
    };
    out += "--- " + header_path(fd.old_path, "a/") + "\n";
    out += "+++ " + header_path(fd.new_path, "b/") + "\n";
    for (const auto& h : fd.hunks) {
        out += "@@ -" + std::to_string(h.old_start) + "," + std::to_string(h.old_count) + " +" +
               std::to_string(h.new_start) + "," + std::to_string(h.new_count) + " @@";
        if (!h.section.empty()) out += " " + h.section;
        out += "\n";
        for (const auto& l : h.lines) {
            char tag = l.tag == LineTag::Context ? ' ' : (l.tag == LineTag::Remove ? '-' : '+');
            out += tag + l.text + "\n";
            if (!l.eol) out += "\\ No newline at end of file\n";
        }
    }
    return out;
}

std::string render_diff(const UnifiedDiff& d) {
    std::string out;
    for (const auto& fd : d.files) out += render_file_diff(fd);
    return out;
}

namespace {

std::vector<Line> hunk_side(const Hunk& h, bool old_side) {
    std::vector<Line> out;
    for (const auto& l : h.lines) {
        if (old_side && l.tag != LineTag::Add) out.push_back({l.text, l.eol});
        if (!old_side && l.tag != LineTag::Remove) out.push_back({l.text, l.eol});
    }
    return out;
}

bool region_matches(const std::vector<Line>& file, long pos, const std::vector<Line>& want,
                    bool normalize_ws) {
    if (pos < 1 || pos - 1 + static_cast<long>(want.size()) > static_cast<long>(file.size()))
        return false;
    for (size_t k = 0; k < want.size(); ++k) {
        const Line& have = file[static_cast<size_t>(pos - 1) + k];
        if (normalize_ws) {
            if (trim(have.text) != trim(want[k].text)) return false;
        } else {
            if (!(have == want[k])) return false;
        }
    }
    return true;
}

std::optional<long> find_hunk_position(const std::vector<Line>& file, const std::vector<Line>& want,
                                        long expected, int fuzz_window) {
    for (int pass = 0; pass < 2; ++pass) {
        bool normalize = pass == 1;
        if (region_matches(file, expected, want, normalize)) return expected;
        for (int off = 1; off <= fuzz_window; ++off) {
            if (region_matches(file, expected + off, want, normalize)) return expected + off;
            if (region_matches(file, expected - off, want, normalize)) return expected - off;
        }
    }
    return std::nullopt;
}

}  // namespace

std::string apply_file_diff(const std::string& content, const FileDiff& fd, int fuzz_window) {
    std::vector<Line> cur = to_lines(content);
    long shift = 0;
    for (const auto& h : fd.hunks) {
        std::vector<Line> olds = hunk_side(h, true);
        std::vector<Line> news = hunk_side(h, false);

        if (olds.empty()) {
            // Pure insertion: old_start names the line the insertion follows.
            long after = h.old_start + shift;
            after = std::max(0L, std::min(after, static_cast<long>(cur.size())));
            cur.insert(cur.begin() + after, news.begin(), news.end());
            shift += static_cast<long>(news.size());
            continue;
        }

        long expected = h.old_start + shift;
        auto found = find_hunk_position(cur, olds, expected, fuzz_window);
        if (!found)
            throw ApplyError("hunk @@ -" + std::to_string(h.old_start) + "," +
                             std::to_string(h.old_count) +
                             " @@ does not match file content near line " +
                             std::to_string(expected));
        cur.erase(cur.begin() + (*found - 1), cur.begin() + (*found - 1) + static_cast<long>(olds.size()));
        cur.insert(cur.begin() + (*found - 1), news.begin(), news.end());
        shift += static_cast<long>(news.size()) - static_cast<long>(olds.size()) + (*found - expected);
    }
    return from_lines(cur);
}

namespace {

enum class OpTag { Keep, Remove, Add };
struct Op {
    OpTag tag;
    Line line;
};

// Line-level edit script, removes emitted before adds within each change run.
std::vector<Op> diff_ops(const std::vector<Line>& a, const std::vector<Line>& b) {
    size_t pre = 0;
    while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) ++pre;
    size_t suf = 0;
    while (suf < a.size() - pre && suf < b.size() - pre &&
           a[a.size() - 1 - suf] == b[b.size() - 1 - suf])
        ++suf;

    const size_t m = a.size() - pre - suf;
    const size_t n = b.size() - pre - suf;

    std::vector<Op> mid;
    if (m != 0 && n != 0 && m * n <= size_t(16) * 1024 * 1024) {
        // LCS table over the trimmed middle.
        std::vector<int32_t> dp((m + 1) * (n + 1), 0);
        auto at = [&](size_t i, size_t j) -> int32_t& { return dp[i * (n + 1) + j]; };
        for (size_t i = 1; i <= m; ++i) {
            for (size_t j = 1; j <= n; ++j) {
                if (a[pre + i - 1] == b[pre + j - 1])
                    at(i, j) = at(i - 1, j - 1) + 1;
                else
                    at(i, j) = std::max(at(i - 1, j), at(i, j - 1));
            }
        }
        size_t i = m, j = n;
        std::vector<Op> rev;
        while (i > 0 || j > 0) {
            if (i > 0 && j > 0 && a[pre + i - 1] == b[pre + j - 1]) {
                rev.push_back({OpTag::Keep, a[pre + i - 1]});
                --i;
                --j;
            } else if (j > 0 && (i == 0 || at(i, j - 1) >= at(i - 1, j))) {
                rev.push_back({OpTag::Add, b[pre + j - 1]});
                --j;
            } else {
                rev.push_back({OpTag::Remove, a[pre + i - 1]});
                --i;
            }
        }
        mid.assign(rev.rbegin(), rev.rend());
    } else {
        // Degenerate or oversized middle: replace it wholesale.
        for (size_t i = 0; i < m; ++i) mid.push_back({OpTag::Remove, a[pre + i]});
        for (size_t j = 0; j < n; ++j) mid.push_back({OpTag::Add, b[pre + j]});
    }

    std::vector<Op> ops;
    ops.reserve(pre + mid.size() + suf);
    for (size_t i = 0; i < pre; ++i) ops.push_back({OpTag::Keep, a[i]});
    // Normalize each change run to removes-then-adds.
    for (size_t i = 0; i < mid.size();) {
        if (mid[i].tag == OpTag::Keep) {
            ops.push_back(mid[i++]);
            continue;
        }
        size_t j = i;
        while (j < mid.size() && mid[j].tag != OpTag::Keep) ++j;
        for (size_t k = i; k < j; ++k)
            if (mid[k].tag == OpTag::Remove) ops.push_back(mid[k]);
        for (size_t k = i; k < j; ++k)
            if (mid[k].tag == OpTag::Add) ops.push_back(mid[k]);
        i = j;
    }
    for (size_t i = 0; i < suf; ++i) ops.push_back({OpTag::Keep, a[a.size() - suf + i]});
    return ops;
}

}  // namespace

FileDiff compute_file_diff(const std::string& rel_path, const std::string& old_content,
                           const std::string& new_content, int context) {
    FileDiff fd;
    fd.old_path = rel_path;
    fd.new_path = rel_path;
    if (old_content == new_content) return fd;

    std::vector<Op> ops = diff_ops(to_lines(old_content), to_lines(new_content));

    // Indices of ops that are changes, for hunk grouping.
    std::vector<size_t> changes;
    for (size_t i = 0; i < ops.size(); ++i)
        if (ops[i].tag != OpTag::Keep) changes.push_back(i);

    // Old/new line numbers *before* each op.
    std::vector<long> old_before(ops.size() + 1, 0), new_before(ops.size() + 1, 0);
    for (size_t i = 0; i < ops.size(); ++i) {
        old_before[i + 1] = old_before[i] + (ops[i].tag != OpTag::Add ? 1 : 0);
        new_before[i + 1] = new_before[i] + (ops[i].tag != OpTag::Remove ? 1 : 0);
    }

    size_t gi = 0;
    while (gi < changes.size()) {
        size_t gj = gi;
        // Merge change groups separated by at most 2*context kept lines.
        while (gj + 1 < changes.size() &&
               changes[gj + 1] - changes[gj] - 1 <= static_cast<size_t>(2 * context))
            ++gj;

        size_t first = changes[gi], last = changes[gj];
        size_t lo = first >= static_cast<size_t>(context) ? first - context : 0;
        size_t hi = std::min(ops.size() - 1, last + static_cast<size_t>(context));

        Hunk h;
        for (size_t i = lo; i <= hi; ++i) {
            LineTag tag = ops[i].tag == OpTag::Keep
                              ? LineTag::Context
                              : (ops[i].tag == OpTag::Remove ? LineTag::Remove : LineTag::Add);
            h.lines.push_back({tag, ops[i].line.text, ops[i].line.eol});
            if (tag != LineTag::Add) ++h.old_count;
            if (tag != LineTag::Remove) ++h.new_count;
        }
        // Empty ranges use the "line before" convention.
        h.old_start = h.old_count > 0 ? old_before[lo] + 1 : old_before[lo];
        h.new_start = h.new_count > 0 ? new_before[lo] + 1 : new_before[lo];
        fd.hunks.push_back(std::move(h));
        gi = gj + 1;
    }
    return fd;
}

}  // namespace patchbench::diff
