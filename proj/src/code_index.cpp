#include "patchbench/code_index.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <regex>
#include <set>

#include "patchbench/errors.hpp"
#include "patchbench/util.hpp"

namespace patchbench {

namespace {

const std::set<std::string>& brace_keywords() {
    static const std::set<std::string> kw = {
        "if",     "for",  "while",  "switch", "catch",        "return", "new",
        "else",   "do",   "try",    "throw",  "synchronized", "assert",
        "sizeof", "case", "default"};
    return kw;
}

bool profile_matches(LanguageProfile profile, const std::string& path) {
    auto has_ext = [&](std::initializer_list<const char*> exts) {
        for (const char* e : exts)
            if (path.size() > strlen(e) && path.compare(path.size() - strlen(e), strlen(e), e) == 0)
                return true;
        return false;
    };
    switch (profile) {
        case LanguageProfile::Java:
            return has_ext({".java"});
        case LanguageProfile::CLike:
            return has_ext({".c", ".h", ".cc", ".hh", ".cpp", ".hpp", ".cxx", ".hxx"});
        case LanguageProfile::Generic:
            return has_ext({".java", ".c", ".h", ".cc", ".hh", ".cpp", ".hpp", ".cxx", ".hxx", ".py"});
    }
    return false;
}

bool is_python(const std::string& path) {
    return path.size() > 3 && path.compare(path.size() - 3, 3, ".py") == 0;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Offset of the start of each line, plus a final sentinel.
std::vector<size_t> line_offsets(const std::string& content) {
    std::vector<size_t> offs{0};
    for (size_t i = 0; i < content.size(); ++i)
        if (content[i] == '\n') offs.push_back(i + 1);
    offs.push_back(content.size() + 1);
    return offs;
}

int line_of(const std::vector<size_t>& offs, size_t pos) {
    auto it = std::upper_bound(offs.begin(), offs.end(), pos);
    return static_cast<int>(it - offs.begin());  // 1-based
}

// Walks content from `pos`, skipping comments and string/char literals, and
// returns the offset just past the point where `depth` for `open`/`close`
// returns to zero. `pos` must point at the opening character.
size_t skip_balanced(const std::string& s, size_t pos, char open, char close) {
    int depth = 0;
    enum { Code, Line, Block, Str, Chr } state = Code;
    for (size_t i = pos; i < s.size(); ++i) {
        char c = s[i];
        char next = i + 1 < s.size() ? s[i + 1] : '\0';
        switch (state) {
            case Code:
                if (c == '/' && next == '/') state = Line;
                else if (c == '/' && next == '*') state = Block, ++i;
                else if (c == '"') state = Str;
                else if (c == '\'') state = Chr;
                else if (c == open) ++depth;
                else if (c == close) {
                    if (--depth == 0) return i + 1;
                }
                break;
            case Line:
                if (c == '\n') state = Code;
                break;
            case Block:
                if (c == '*' && next == '/') state = Code, ++i;
                break;
            case Str:
                if (c == '\\') ++i;
                else if (c == '"') state = Code;
                break;
            case Chr:
                if (c == '\\') ++i;
                else if (c == '\'') state = Code;
                break;
        }
    }
    return std::string::npos;
}

void scan_brace_file(const std::string& path, const std::string& content,
                     std::vector<SymbolEntry>& out) {
    const auto offs = line_offsets(content);
    auto split = split_lines(content);

    static const std::regex type_re(R"(^\s*(?:[\w@]+\s+)*(class|interface|enum|record|struct)\s+(\w+))");
    static const std::regex fn_re(R"(^\s*(?:([\w<>\[\],\.\s\*&:~@]*?)\s+)?([A-Za-z_]\w*)\s*\()");

    for (size_t li = 0; li < split.lines.size(); ++li) {
        const std::string& line = split.lines[li];
        std::smatch m;
        if (std::regex_search(line, m, type_re)) {
            size_t line_start = offs[li];
            size_t brace = content.find('{', line_start + static_cast<size_t>(m.position(2)));
            if (brace != std::string::npos) {
                size_t end = skip_balanced(content, brace, '{', '}');
                if (end != std::string::npos) {
                    out.push_back({m[2], SymbolKind::Type, path, static_cast<int>(li) + 1,
                                   line_of(offs, end - 1), trim(line)});
                }
            }
            continue;
        }
        if (!std::regex_search(line, m, fn_re)) continue;
        const std::string name = m[2];
        if (brace_keywords().count(name)) continue;
        // Reject calls that happen to start a line (`new Foo(`, `return f(`).
        bool banned_prefix = false;
        if (m[1].matched) {
            std::string prefix = m[1];
            static const std::regex word_re(R"(\w+)");
            for (auto it = std::sregex_iterator(prefix.begin(), prefix.end(), word_re);
                 it != std::sregex_iterator(); ++it)
                if (brace_keywords().count(it->str())) banned_prefix = true;
        }
        if (banned_prefix) continue;

        size_t paren = offs[li] + static_cast<size_t>(m.position(0)) + m.str(0).size() - 1;
        size_t after_params = skip_balanced(content, paren, '(', ')');
        if (after_params == std::string::npos) continue;

        // A definition continues with '{' (possibly after a throws clause).
        size_t cursor = after_params;
        while (cursor < content.size()) {
            char c = content[cursor];
            if (std::isspace(static_cast<unsigned char>(c)) || std::isalnum(static_cast<unsigned char>(c)) ||
                c == '_' || c == ',' || c == '.')
                ++cursor;
            else
                break;
        }
        if (cursor >= content.size() || content[cursor] != '{') continue;
        size_t end = skip_balanced(content, cursor, '{', '}');
        if (end == std::string::npos) continue;
        out.push_back({name, SymbolKind::Function, path, static_cast<int>(li) + 1,
                       line_of(offs, end - 1), trim(line)});
    }
}

void scan_python_file(const std::string& path, const std::string& content,
                      std::vector<SymbolEntry>& out) {
    auto split = split_lines(content);
    static const std::regex def_re(R"(^([ \t]*)def\s+(\w+)\s*\()");
    static const std::regex class_re(R"(^([ \t]*)class\s+(\w+))");

    auto indent_width = [](const std::string& ws) {
        size_t w = 0;
        for (char c : ws) w += c == '\t' ? 8 : 1;
        return w;
    };
    auto line_indent = [&](const std::string& line) {
        size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        return indent_width(line.substr(0, i));
    };
    auto block_end = [&](size_t def_line, size_t indent) {
        size_t last = def_line;
        for (size_t j = def_line + 1; j < split.lines.size(); ++j) {
            const std::string& l = split.lines[j];
            if (trim(l).empty()) continue;
            if (line_indent(l) <= indent) break;
            last = j;
        }
        return static_cast<int>(last) + 1;
    };

    for (size_t li = 0; li < split.lines.size(); ++li) {
        const std::string& line = split.lines[li];
        std::smatch m;
        if (std::regex_search(line, m, def_re)) {
            out.push_back({m[2], SymbolKind::Function, path, static_cast<int>(li) + 1,
                           block_end(li, indent_width(m[1])), trim(line)});
        } else if (std::regex_search(line, m, class_re)) {
            out.push_back({m[2], SymbolKind::Type, path, static_cast<int>(li) + 1,
                           block_end(li, indent_width(m[1])), trim(line)});
        }
    }
}

// Whole-token occurrences of `name` in `line`, as byte offsets.
std::vector<size_t> token_occurrences(const std::string& line, const std::string& name) {
    std::vector<size_t> out;
    size_t pos = 0;
    while ((pos = line.find(name, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_char(line[pos - 1]);
        size_t end = pos + name.size();
        bool right_ok = end >= line.size() || !is_word_char(line[end]);
        if (left_ok && right_ok) out.push_back(pos);
        pos = end;
    }
    return out;
}

struct Frame {
    std::string name;
    std::string file_hint;  // may be empty
    int line_hint = 0;      // 0 when unknown
};

std::vector<Frame> parse_frames(const std::string& text, LanguageProfile profile) {
    static const std::regex java_re(R"(\bat\s+[\w$.]+\.([\w$]+)\(([\w$.]+)(?::(\d+))?\))");
    static const std::regex python_re(R"x(File "([^"]+)", line (\d+), in (\w+))x");
    static const std::regex c_re(R"(#\d+\s+(?:0x[0-9a-fA-F]+\s+)?in\s+(\w+).*?([\w./-]+):(\d+))");

    std::vector<Frame> frames;
    for (const auto& line : split_lines(text).lines) {
        std::smatch m;
        if ((profile == LanguageProfile::Java || profile == LanguageProfile::Generic) &&
            std::regex_search(line, m, java_re)) {
            frames.push_back({m[1], m[2], m[3].matched ? std::stoi(m[3]) : 0});
            continue;
        }
        if (profile == LanguageProfile::Generic && std::regex_search(line, m, python_re)) {
            frames.push_back({m[3], m[1], std::stoi(m[2])});
            continue;
        }
        if ((profile == LanguageProfile::CLike || profile == LanguageProfile::Generic) &&
            std::regex_search(line, m, c_re)) {
            frames.push_back({m[1], m[2], std::stoi(m[3])});
        }
    }
    return frames;
}

std::string basename_of(const std::string& path) {
    size_t slash = path.find_last_of('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace

Index Index::build(const Workspace& ws, LanguageProfile profile) {
    Index idx;
    idx.ws_ = &ws;
    idx.profile_ = profile;

    for (const auto& path : ws.list_files()) {
        if (!profile_matches(profile, path)) continue;
        std::string content;
        try {
            content = ws.read(path);
        } catch (const Error& e) {
            idx.warnings_.push_back("index: skipped unreadable file " + path + ": " + e.what());
            continue;
        }
        if (content.find('\0') != std::string::npos) {
            idx.warnings_.push_back("index: skipped binary file " + path);
            continue;
        }
        if (is_python(path))
            scan_python_file(path, content, idx.symbols_);
        else
            scan_brace_file(path, content, idx.symbols_);
    }

    // Call edges: `ident(` tokens inside each function span, keywords and
    // the definition's own header occurrence excluded.
    static const std::regex call_re(R"(([A-Za-z_]\w*)\s*\()");
    for (const auto& sym : idx.symbols_) {
        if (sym.kind != SymbolKind::Function) continue;
        auto body = split_lines(idx.ws_->read(sym.path));
        for (int ln = sym.start_line; ln <= sym.end_line && ln <= static_cast<int>(body.lines.size());
             ++ln) {
            const std::string& line = body.lines[static_cast<size_t>(ln) - 1];
            for (auto it = std::sregex_iterator(line.begin(), line.end(), call_re);
                 it != std::sregex_iterator(); ++it) {
                const std::string callee = (*it)[1];
                if (brace_keywords().count(callee) || callee == "def") continue;
                if (ln == sym.start_line && callee == sym.name) continue;
                idx.edges_.push_back({sym, callee, ln});
            }
        }
    }
    return idx;
}

std::vector<SymbolEntry> Index::functions() const {
    std::vector<SymbolEntry> out;
    for (const auto& s : symbols_)
        if (s.kind == SymbolKind::Function) out.push_back(s);
    return out;
}

std::vector<SymbolEntry> Index::types() const {
    std::vector<SymbolEntry> out;
    for (const auto& s : symbols_)
        if (s.kind == SymbolKind::Type) out.push_back(s);
    return out;
}

std::vector<SymbolEntry> Index::lookup(const std::string& name) const {
    std::vector<SymbolEntry> out;
    for (const auto& s : symbols_)
        if (s.name == name) out.push_back(s);
    return out;
}

std::vector<SymbolEntry> Index::lookup_functions(const std::string& name) const {
    std::vector<SymbolEntry> out;
    for (const auto& s : symbols_)
        if (s.kind == SymbolKind::Function && s.name == name) out.push_back(s);
    return out;
}

std::string Index::read_file(const std::string& path) const { return ws_->read(path); }

std::string Index::read_source(const std::string& path, long start_line, long end_line) const {
    auto split = split_lines(ws_->read(path));
    long n = static_cast<long>(split.lines.size());
    start_line = std::max(1L, start_line);
    end_line = std::min(end_line, n);
    if (start_line > end_line) return "";
    std::vector<std::string> slice(split.lines.begin() + (start_line - 1),
                                   split.lines.begin() + end_line);
    bool final_nl = end_line < n || split.final_newline;
    return join_lines(slice, final_nl);
}

std::string Index::symbol_source(const SymbolEntry& s) const {
    return read_source(s.path, s.start_line, s.end_line);
}

std::vector<Reference> Index::find_references(const std::string& name) const {
    std::set<std::pair<std::string, int>> definition_headers;
    for (const auto& s : symbols_)
        if (s.name == name) definition_headers.insert({s.path, s.start_line});

    std::vector<Reference> out;
    for (const auto& path : ws_->list_files()) {
        if (!profile_matches(profile_, path)) continue;
        std::string content;
        try {
            content = ws_->read(path);
        } catch (const Error&) {
            continue;
        }
        auto split = split_lines(content);
        for (size_t li = 0; li < split.lines.size(); ++li) {
            int lineno = static_cast<int>(li) + 1;
            if (definition_headers.count({path, lineno})) continue;
            for (size_t occ = 0; occ < token_occurrences(split.lines[li], name).size(); ++occ)
                out.push_back({path, lineno, trim(split.lines[li])});
        }
    }
    return out;
}

std::vector<CallEdge> Index::callers(const std::string& name) const {
    std::vector<CallEdge> out;
    for (const auto& e : edges_)
        if (e.callee_name == name) out.push_back(e);
    return out;
}

std::vector<CallEdge> Index::callees(const std::string& name) const {
    std::vector<CallEdge> out;
    for (const auto& e : edges_)
        if (e.caller.name == name) out.push_back(e);
    return out;
}

std::vector<std::string> Index::frame_names(const std::string& crash_report,
                                            LanguageProfile profile) {
    std::vector<std::string> out;
    for (const auto& f : parse_frames(crash_report, profile)) out.push_back(f.name);
    return out;
}

std::vector<SymbolEntry> Index::functions_from_stacktrace(const std::string& crash_report) const {
    std::vector<SymbolEntry> out;
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& frame : parse_frames(crash_report, profile_)) {
        auto cands = lookup_functions(frame.name);
        if (cands.empty()) continue;  // e.g. a JDK class outside the workspace
        auto score = [&](const SymbolEntry& s) {
            int sc = 0;
            if (!frame.file_hint.empty() && basename_of(s.path) == basename_of(frame.file_hint))
                sc += 2;
            if (frame.line_hint >= s.start_line && frame.line_hint <= s.end_line) sc += 1;
            return sc;
        };
        std::stable_sort(cands.begin(), cands.end(), [&](const SymbolEntry& a, const SymbolEntry& b) {
            int sa = score(a), sb = score(b);
            return sa != sb ? sa > sb : a.path < b.path;
        });
        const SymbolEntry& best = cands.front();
        auto key = std::make_tuple(best.path, best.name, best.start_line);
        if (seen.insert(key).second) out.push_back(best);
    }
    return out;
}

}  // namespace patchbench
