#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace tapp {

// All configuration files (TAPP scripts, topologies, timelines, workloads,
// campaign configs) share one line-oriented, indentation-sensitive markup:
// a strict subset of YAML. This header holds the common line scanner and a
// small document model used by everything except the TAPP script parser,
// which works on the raw lines for exact error reporting.

struct SourceLoc {
    int line = 0; // 1-based
    int col = 0;  // 1-based
};

struct ParseError {
    enum class Kind { Syntax, UnknownKeyword, BadValue, Semantic };
    Kind kind = Kind::Syntax;
    SourceLoc loc;
    std::string message;
};

inline const char* to_string(ParseError::Kind k) {
    switch (k) {
        case ParseError::Kind::Syntax: return "syntax";
        case ParseError::Kind::UnknownKeyword: return "unknown-keyword";
        case ParseError::Kind::BadValue: return "bad-value";
        case ParseError::Kind::Semantic: return "semantic";
    }
    return "?";
}

// Result carrier for parse-style operations. Exceptions are reserved for
// configuration errors detected after parsing.
template <typename T>
class Expected {
public:
    Expected(T value) : data_(std::move(value)) {}
    Expected(ParseError err) : data_(std::move(err)) {}

    bool ok() const { return std::holds_alternative<T>(data_); }
    explicit operator bool() const { return ok(); }

    T& value() { return std::get<T>(data_); }
    const T& value() const { return std::get<T>(data_); }
    const ParseError& error() const { return std::get<ParseError>(data_); }

private:
    std::variant<T, ParseError> data_;
};

struct Line {
    int number = 0; // 1-based
    int indent = 0; // leading spaces
    std::string text; // content without indentation or trailing comment
};

// Splits source text into logical lines: comments stripped, blanks dropped,
// tabs rejected (indentation must be spaces only).
inline Expected<std::vector<Line>> scan_lines(std::string_view src) {
    std::vector<Line> out;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= src.size()) {
        std::size_t eol = src.find('\n', pos);
        std::string_view raw = src.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        ++lineno;
        pos = (eol == std::string_view::npos) ? src.size() + 1 : eol + 1;

        int indent = 0;
        std::size_t i = 0;
        while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t')) {
            if (raw[i] == '\t')
                return ParseError{ParseError::Kind::Syntax, {lineno, static_cast<int>(i) + 1},
                                  "tab character in indentation; use spaces"};
            ++indent;
            ++i;
        }
        // comment starts at '#' when at line start or preceded by whitespace
        std::size_t cut = raw.size();
        for (std::size_t j = i; j < raw.size(); ++j) {
            if (raw[j] == '#' && (j == 0 || raw[j - 1] == ' ' || raw[j - 1] == '\t')) {
                cut = j;
                break;
            }
        }
        std::string_view body = raw.substr(i, cut - i);
        while (!body.empty() && (body.back() == ' ' || body.back() == '\r' || body.back() == '\t'))
            body.remove_suffix(1);
        if (body.empty()) continue;
        out.push_back(Line{lineno, indent, std::string(body)});
    }
    return out;
}

// Generic document node: scalar, ordered mapping, or sequence. Sequence
// items may carry both a scalar head and mapping entries, which covers the
// `- name` / `- key: value` item styles used by the fixture formats.
struct DocNode {
    SourceLoc loc;
    std::optional<std::string> scalar;
    std::vector<std::pair<std::string, DocNode>> entries; // mapping, in file order
    std::vector<DocNode> items;                           // sequence

    bool is_scalar() const { return scalar.has_value() && entries.empty() && items.empty(); }

    const DocNode* find(std::string_view key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
};

namespace detail {

inline bool valid_key(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

// "key: value" | "key:" -> (key, value?); returns false when the line has
// no top-level colon.
inline bool split_key(std::string_view text, std::string& key, std::string& value) {
    std::size_t colon = text.find(':');
    if (colon == std::string_view::npos) return false;
    key = std::string(text.substr(0, colon));
    while (!key.empty() && key.back() == ' ') key.pop_back();
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    value = std::string(rest);
    return true;
}

// "[a, b, c]" -> items; empty brackets allowed.
inline std::optional<std::vector<std::string>> parse_inline_list(std::string_view v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') return std::nullopt;
    std::vector<std::string> out;
    std::string_view inner = v.substr(1, v.size() - 2);
    std::size_t start = 0;
    while (start <= inner.size()) {
        std::size_t comma = inner.find(',', start);
        std::string_view tok = inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (!tok.empty()) out.push_back(std::string(tok));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

class DocParser {
public:
    explicit DocParser(const std::vector<Line>& lines) : lines_(lines) {}

    Expected<DocNode> parse() {
        DocNode root;
        if (lines_.empty()) return root;
        if (auto err = parse_block(root, 0, lines_[0].indent)) return *err;
        if (pos_ < lines_.size())
            return ParseError{ParseError::Kind::Syntax, {lines_[pos_].number, lines_[pos_].indent + 1},
                              "unexpected indentation"};
        return root;
    }

private:
    // Parses siblings at exactly `indent` into `node` (mapping entries or
    // sequence items; mixing the two at one level is an error).
    std::optional<ParseError> parse_block(DocNode& node, std::size_t from, int indent) {
        pos_ = from;
        while (pos_ < lines_.size() && lines_[pos_].indent == indent) {
            const Line& ln = lines_[pos_];
            if (ln.text[0] == '-' && (ln.text.size() == 1 || ln.text[1] == ' ')) {
                if (!node.entries.empty())
                    return ParseError{ParseError::Kind::Syntax, {ln.number, indent + 1},
                                      "sequence item in a mapping block"};
                DocNode item;
                item.loc = {ln.number, indent + 1};
                if (auto err = parse_item(item, ln)) return err;
                node.items.push_back(std::move(item));
            } else {
                if (!node.items.empty())
                    return ParseError{ParseError::Kind::Syntax, {ln.number, indent + 1},
                                      "mapping key in a sequence block"};
                std::string key, value;
                if (!split_key(ln.text, key, value) || !valid_key(key))
                    return ParseError{ParseError::Kind::Syntax, {ln.number, indent + 1},
                                      "expected `key: value` or list item"};
                DocNode child;
                child.loc = {ln.number, indent + 1};
                ++pos_;
                if (!value.empty()) {
                    if (auto err = scalar_or_list(child, value)) return err;
                } else if (pos_ < lines_.size() && lines_[pos_].indent > indent) {
                    if (auto err = parse_block(child, pos_, lines_[pos_].indent)) return err;
                }
                node.entries.emplace_back(std::move(key), std::move(child));
                continue;
            }
        }
        return std::nullopt;
    }

    // One `- ...` item: inline scalar or key, plus continuation lines
    // indented deeper than the dash.
    std::optional<ParseError> parse_item(DocNode& item, const Line& ln) {
        int dash_indent = ln.indent;
        std::string_view rest = std::string_view(ln.text).substr(1);
        while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        ++pos_;

        std::string key, value;
        if (!rest.empty()) {
            if (auto list = parse_inline_list(rest)) {
                for (const auto& s : *list) {
                    DocNode el;
                    el.loc = item.loc;
                    el.scalar = s;
                    item.items.push_back(std::move(el));
                }
            } else if (split_key(rest, key, value) && valid_key(key)) {
                DocNode child;
                child.loc = {ln.number, dash_indent + 3};
                if (!value.empty()) {
                    if (auto err = scalar_or_list(child, value)) return err;
                    item.entries.emplace_back(std::move(key), std::move(child));
                } else {
                    if (pos_ < lines_.size() && lines_[pos_].indent > dash_indent + 2) {
                        if (auto err = parse_block(child, pos_, lines_[pos_].indent)) return err;
                    }
                    item.entries.emplace_back(std::move(key), std::move(child));
                }
            } else {
                item.scalar = std::string(rest);
            }
        }
        // continuation entries aligned deeper than the dash
        while (pos_ < lines_.size() && lines_[pos_].indent > dash_indent) {
            const Line& cont = lines_[pos_];
            if (cont.text[0] == '-' && (cont.text.size() == 1 || cont.text[1] == ' ')) {
                return ParseError{ParseError::Kind::Syntax, {cont.number, cont.indent + 1},
                                  "nested sequence requires a key"};
            }
            std::string k, v;
            if (!split_key(cont.text, k, v) || !valid_key(k))
                return ParseError{ParseError::Kind::Syntax, {cont.number, cont.indent + 1},
                                  "expected `key: value`"};
            DocNode child;
            child.loc = {cont.number, cont.indent + 1};
            int cindent = cont.indent;
            ++pos_;
            if (!v.empty()) {
                if (auto err = scalar_or_list(child, v)) return err;
            } else if (pos_ < lines_.size() && lines_[pos_].indent > cindent) {
                if (auto err = parse_block(child, pos_, lines_[pos_].indent)) return err;
            }
            item.entries.emplace_back(std::move(k), std::move(child));
        }
        return std::nullopt;
    }

    std::optional<ParseError> scalar_or_list(DocNode& node, const std::string& value) {
        if (auto list = parse_inline_list(value)) {
            for (const auto& s : *list) {
                DocNode el;
                el.loc = node.loc;
                el.scalar = s;
                node.items.push_back(std::move(el));
            }
        } else {
            node.scalar = value;
        }
        return std::nullopt;
    }

    const std::vector<Line>& lines_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline Expected<DocNode> parse_document(std::string_view src) {
    auto lines = scan_lines(src);
    if (!lines.ok()) return lines.error();
    return detail::DocParser(lines.value()).parse();
}

} // namespace tapp
