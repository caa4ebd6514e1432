#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "tapp/ast.hpp"
#include "tapp/markup.hpp"

namespace tapp {

// Parser for the TAPP policy language. The concrete syntax is the strict
// YAML subset used by the language reference: policy tags at the left
// margin, `- ` blocks beneath them, tag-level options (`strategy`,
// `followup`) aligned with the block dashes after the last block. Only the
// closed TAPP keyword vocabulary is accepted; anything else is a located
// parse error. The first error wins.

namespace detail {

inline bool valid_ident(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

inline bool parse_strategy(std::string_view v, Strategy& out) {
    if (v == "random") out = Strategy::Random;
    else if (v == "platform") out = Strategy::Platform;
    else if (v == "best_first") out = Strategy::BestFirst;
    else return false;
    return true;
}

inline bool parse_followup(std::string_view v, Followup& out) {
    if (v == "default") out = Followup::Default;
    else if (v == "fail") out = Followup::Fail;
    else return false;
    return true;
}

inline bool parse_tolerance(std::string_view v, TopologyTolerance& out) {
    if (v == "all") out = TopologyTolerance::All;
    else if (v == "same") out = TopologyTolerance::Same;
    else if (v == "none") out = TopologyTolerance::None;
    else return false;
    return true;
}

inline bool parse_positive_int(std::string_view v, int& out) {
    if (v.empty() || v.size() > 9) return false;
    long n = 0;
    for (char c : v) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        n = n * 10 + (c - '0');
    }
    out = static_cast<int>(n);
    return true;
}

class ScriptParser {
public:
    explicit ScriptParser(const std::vector<Line>& lines) : lines_(lines) {}

    Expected<AppScript> parse() {
        AppScript script;
        if (lines_.empty())
            return ParseError{ParseError::Kind::Syntax, {1, 1}, "empty script: expected at least one policy tag"};
        base_indent_ = lines_[0].indent;
        while (pos_ < lines_.size()) {
            const Line& ln = lines_[pos_];
            if (ln.indent != base_indent_)
                return err(ParseError::Kind::Syntax, ln, ln.indent + 1, "expected a policy tag at the left margin");
            std::string key, value;
            if (is_dash(ln) || !split_key(ln.text, key, value) || !value.empty())
                return err(ParseError::Kind::Syntax, ln, ln.indent + 1, "expected `tag_name:`");
            if (!valid_ident(key))
                return err(ParseError::Kind::BadValue, ln, ln.indent + 1, "invalid tag name `" + key + "`");
            if (script.find_tag(key))
                return err(ParseError::Kind::Semantic, ln, ln.indent + 1, "duplicate tag `" + key + "`");
            ++pos_;
            TagPolicy tag;
            if (auto e = parse_tag_body(tag)) return *e;
            script.tags.emplace_back(std::move(key), std::move(tag));
        }
        return script;
    }

private:
    static bool is_dash(const Line& ln) {
        return ln.text[0] == '-' && (ln.text.size() == 1 || ln.text[1] == ' ');
    }

    static bool split_key(std::string_view text, std::string& key, std::string& value) {
        std::size_t colon = text.find(':');
        if (colon == std::string_view::npos) return false;
        key = std::string(text.substr(0, colon));
        while (!key.empty() && key.back() == ' ') key.pop_back();
        if (key.find(' ') != std::string::npos) return false;
        std::string_view rest = text.substr(colon + 1);
        while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        value = std::string(rest);
        return true;
    }

    ParseError err(ParseError::Kind kind, const Line& ln, int col, std::string msg) const {
        return ParseError{kind, {ln.number, col}, std::move(msg)};
    }

    std::optional<ParseError> parse_tag_body(TagPolicy& tag) {
        int block_indent = -1;
        bool options_started = false;
        bool have_strategy = false, have_followup = false;
        while (pos_ < lines_.size() && lines_[pos_].indent > base_indent_) {
            const Line& ln = lines_[pos_];
            if (is_dash(ln)) {
                if (options_started)
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1,
                               "policy block after tag-level options");
                if (block_indent == -1) block_indent = ln.indent;
                else if (ln.indent != block_indent)
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1, "inconsistent block indentation");
                Block block;
                if (auto e = parse_block(block, block_indent)) return e;
                tag.blocks.push_back(std::move(block));
            } else {
                if (block_indent == -1)
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1,
                               "expected a `- ` policy block");
                if (ln.indent != block_indent)
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1,
                               "tag options must align with the policy blocks");
                std::string key, value;
                if (!split_key(ln.text, key, value))
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1, "expected `key: value`");
                options_started = true;
                int vcol = ln.indent + static_cast<int>(ln.text.size() - value.size()) + 1;
                if (key == "strategy") {
                    if (have_strategy)
                        return err(ParseError::Kind::Semantic, ln, ln.indent + 1, "duplicate tag strategy");
                    Strategy s;
                    if (!parse_strategy(value, s))
                        return err(ParseError::Kind::BadValue, ln, vcol,
                                   "unknown strategy `" + value + "` (random | platform | best_first)");
                    tag.block_strategy = s;
                    have_strategy = true;
                } else if (key == "followup") {
                    if (have_followup)
                        return err(ParseError::Kind::Semantic, ln, ln.indent + 1, "duplicate followup");
                    Followup f;
                    if (!parse_followup(value, f))
                        return err(ParseError::Kind::BadValue, ln, vcol,
                                   "unknown followup `" + value + "` (default | fail)");
                    tag.followup = f;
                    tag.followup_explicit = true;
                    have_followup = true;
                } else {
                    return err(ParseError::Kind::UnknownKeyword, ln, ln.indent + 1,
                               "unknown tag option `" + key + "`");
                }
                ++pos_;
            }
        }
        if (tag.blocks.empty()) {
            const Line& at = pos_ < lines_.size() ? lines_[pos_] : lines_.back();
            return err(ParseError::Kind::Syntax, at, 1, "tag must contain at least one policy block");
        }
        return std::nullopt;
    }

    std::optional<ParseError> parse_block(Block& block, int block_indent) {
        const Line& first = lines_[pos_];
        std::string_view rest = std::string_view(first.text).substr(1);
        int rest_col = first.indent + 2;
        while (!rest.empty() && rest.front() == ' ') {
            rest.remove_prefix(1);
            ++rest_col;
        }
        if (rest.empty())
            return err(ParseError::Kind::Syntax, first, first.indent + 1, "empty policy block item");
        ++pos_;
        int key_indent = block_indent + 2;
        bool seen[5] = {false, false, false, false, false}; // controller, tolerance, workers, strategy, invalidate
        if (auto e = block_key(block, first, std::string(rest), rest_col, key_indent, seen)) return e;
        while (pos_ < lines_.size() && lines_[pos_].indent == key_indent && !is_dash(lines_[pos_])) {
            const Line& ln = lines_[pos_];
            ++pos_;
            if (auto e = block_key(block, ln, ln.text, ln.indent + 1, key_indent, seen)) return e;
        }
        if (pos_ < lines_.size() && lines_[pos_].indent > key_indent)
            return err(ParseError::Kind::Syntax, lines_[pos_], lines_[pos_].indent + 1, "unexpected indentation");
        if (!seen[2])
            return err(ParseError::Kind::Syntax, first, first.indent + 1, "policy block has no `workers:` list");
        return std::nullopt;
    }

    std::optional<ParseError> block_key(Block& block, const Line& ln, const std::string& text, int col,
                                        int key_indent, bool seen[5]) {
        std::string key, value;
        if (!split_key(text, key, value))
            return ParseError{ParseError::Kind::Syntax, {ln.number, col}, "expected `key: value`"};
        int vcol = col + static_cast<int>(text.size() - value.size());
        if (key == "controller") {
            if (seen[0]) return ParseError{ParseError::Kind::Semantic, {ln.number, col}, "duplicate controller clause"};
            if (!valid_ident(value))
                return ParseError{ParseError::Kind::BadValue, {ln.number, vcol}, "controller requires a label"};
            block.controller = ControllerClause{value, std::nullopt};
            seen[0] = true;
        } else if (key == "topology_tolerance") {
            if (!seen[0])
                return ParseError{ParseError::Kind::Semantic, {ln.number, col},
                                  "topology_tolerance requires a controller clause"};
            if (seen[1]) return ParseError{ParseError::Kind::Semantic, {ln.number, col}, "duplicate topology_tolerance"};
            TopologyTolerance t;
            if (!parse_tolerance(value, t))
                return ParseError{ParseError::Kind::BadValue, {ln.number, vcol},
                                  "unknown topology_tolerance `" + value + "` (all | same | none)"};
            block.controller->tolerance = t;
            seen[1] = true;
        } else if (key == "workers") {
            if (seen[2]) return ParseError{ParseError::Kind::Semantic, {ln.number, col}, "duplicate workers list"};
            seen[2] = true;
            if (value == "[]")
                return ParseError{ParseError::Kind::Syntax, {ln.number, vcol}, "workers list must not be empty"};
            if (!value.empty())
                return ParseError{ParseError::Kind::Syntax, {ln.number, vcol},
                                  "workers takes a list of `- ` items"};
            return parse_worker_items(block, ln, key_indent);
        } else if (key == "strategy") {
            if (seen[3]) return ParseError{ParseError::Kind::Semantic, {ln.number, col}, "duplicate block strategy"};
            Strategy s;
            if (!parse_strategy(value, s))
                return ParseError{ParseError::Kind::BadValue, {ln.number, vcol},
                                  "unknown strategy `" + value + "` (random | platform | best_first)"};
            block.strategy = s;
            seen[3] = true;
        } else if (key == "invalidate") {
            if (seen[4]) return ParseError{ParseError::Kind::Semantic, {ln.number, col}, "duplicate invalidate rule"};
            InvalidateRule rule;
            if (auto e = parse_invalidate(value, ln, vcol, rule)) return e;
            block.invalidate = rule;
            seen[4] = true;
        } else {
            return ParseError{ParseError::Kind::UnknownKeyword, {ln.number, col},
                              "unknown block option `" + key + "`"};
        }
        return std::nullopt;
    }

    std::optional<ParseError> parse_invalidate(const std::string& value, const Line& ln, int vcol,
                                               InvalidateRule& out) {
        std::string key, rest;
        if (value == "overload") {
            out = InvalidateRule::overload();
            return std::nullopt;
        }
        if (split_key(value, key, rest)) {
            int rcol = vcol + static_cast<int>(value.size() - rest.size());
            if (key == "capacity_used") {
                if (rest.empty() || rest.back() != '%')
                    return ParseError{ParseError::Kind::BadValue, {ln.number, rcol},
                                      "capacity_used takes an integer percentage, e.g. `50%`"};
                int pct = 0;
                if (!parse_positive_int(std::string_view(rest).substr(0, rest.size() - 1), pct) || pct < 1 ||
                    pct > 100)
                    return ParseError{ParseError::Kind::BadValue, {ln.number, rcol},
                                      "capacity_used percentage must be an integer in 1..100"};
                out = InvalidateRule::capacity_used(pct);
                return std::nullopt;
            }
            if (key == "max_concurrent_invocations") {
                int n = 0;
                if (!parse_positive_int(rest, n) || n < 1)
                    return ParseError{ParseError::Kind::BadValue, {ln.number, rcol},
                                      "max_concurrent_invocations must be a positive integer"};
                out = InvalidateRule::max_concurrent(n);
                return std::nullopt;
            }
        }
        return ParseError{ParseError::Kind::BadValue, {ln.number, vcol},
                          "unknown invalidate rule `" + value +
                              "` (capacity_used: n% | max_concurrent_invocations: n | overload)"};
    }

    // Items live deeper than the block's key column; the list ends when the
    // indentation falls back to it (e.g. a trailing block-level `strategy:`).
    std::optional<ParseError> parse_worker_items(Block& block, const Line& wline, int key_indent) {
        int item_indent = -1;
        while (pos_ < lines_.size() && lines_[pos_].indent > key_indent) {
            const Line& ln = lines_[pos_];
            if (is_dash(ln)) {
                if (item_indent == -1) item_indent = ln.indent;
                else if (ln.indent != item_indent) {
                    if (ln.indent < item_indent) break; // belongs to an outer list
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1,
                               "inconsistent worker list indentation");
                }
                std::string_view rest = std::string_view(ln.text).substr(1);
                int rcol = ln.indent + 2;
                while (!rest.empty() && rest.front() == ' ') {
                    rest.remove_prefix(1);
                    ++rcol;
                }
                if (rest.empty())
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1, "empty worker item");
                WorkerClause clause;
                if (rest[0] == '*') {
                    std::string_view scope = rest.substr(1);
                    if (scope.empty()) {
                        clause = WorkerClause::set();
                    } else {
                        if (!valid_ident(scope))
                            return err(ParseError::Kind::BadValue, ln, rcol + 1,
                                       "invalid worker-set scope `" + std::string(scope) + "`");
                        clause = WorkerClause::set(std::string(scope));
                    }
                } else {
                    if (!valid_ident(rest))
                        return err(ParseError::Kind::BadValue, ln, rcol,
                                   "invalid worker label `" + std::string(rest) + "`");
                    clause = WorkerClause::named(std::string(rest));
                }
                block.workers.push_back(clause);
                ++pos_;
            } else {
                if (item_indent == -1 || ln.indent <= item_indent)
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1, "expected a `- ` worker item");
                // option line attached to the previous worker-set item
                WorkerClause& last = block.workers.back();
                std::string key, value;
                if (!split_key(ln.text, key, value))
                    return err(ParseError::Kind::Syntax, ln, ln.indent + 1, "expected `key: value`");
                if (last.kind != WorkerClause::Kind::Set)
                    return err(ParseError::Kind::Semantic, ln, ln.indent + 1,
                               "options are only allowed on `*` worker sets");
                int vcol = ln.indent + static_cast<int>(ln.text.size() - value.size()) + 1;
                if (key == "strategy") {
                    if (last.strategy)
                        return err(ParseError::Kind::Semantic, ln, ln.indent + 1, "duplicate set strategy");
                    Strategy s;
                    if (!parse_strategy(value, s))
                        return err(ParseError::Kind::BadValue, ln, vcol,
                                   "unknown strategy `" + value + "` (random | platform | best_first)");
                    last.strategy = s;
                } else if (key == "invalidate") {
                    if (last.invalidate)
                        return err(ParseError::Kind::Semantic, ln, ln.indent + 1, "duplicate set invalidate");
                    InvalidateRule rule;
                    if (auto e = parse_invalidate(value, ln, vcol, rule)) return *e;
                    last.invalidate = rule;
                } else {
                    return err(ParseError::Kind::UnknownKeyword, ln, ln.indent + 1,
                               "unknown worker-set option `" + key + "`");
                }
                ++pos_;
            }
        }
        if (block.workers.empty()) {
            return err(ParseError::Kind::Syntax, wline, wline.indent + 1, "workers list must not be empty");
        }
        return std::nullopt;
    }

    const std::vector<Line>& lines_;
    std::size_t pos_ = 0;
    int base_indent_ = 0;
};

} // namespace detail

inline Expected<AppScript> parse_script(std::string_view text) {
    auto lines = scan_lines(text);
    if (!lines.ok()) return lines.error();
    return detail::ScriptParser(lines.value()).parse();
}

// Fills every omitted option with its documented default: strategies
// default to best_first, topology_tolerance to all, followup to default,
// and worker sets inherit strategy/invalidate from their enclosing block.
// Explicitly written values are never touched; idempotent.
inline AppScript canonicalize(AppScript script) {
    for (auto& [name, tag] : script.tags) {
        if (!tag.block_strategy) tag.block_strategy = Strategy::BestFirst;
        if (!tag.followup) tag.followup = Followup::Default;
        for (Block& block : tag.blocks) {
            if (!block.strategy) block.strategy = Strategy::BestFirst;
            if (block.controller && !block.controller->tolerance)
                block.controller->tolerance = TopologyTolerance::All;
            for (WorkerClause& clause : block.workers) {
                if (clause.kind != WorkerClause::Kind::Set) continue;
                if (!clause.strategy) clause.strategy = block.strategy;
                if (!clause.invalidate && block.invalidate) clause.invalidate = block.invalidate;
            }
        }
    }
    return script;
}

inline std::string render_invalidate(const InvalidateRule& rule) {
    switch (rule.kind) {
        case InvalidateRule::Kind::CapacityUsed:
            return "capacity_used: " + std::to_string(rule.value) + "%";
        case InvalidateRule::Kind::MaxConcurrentInvocations:
            return "max_concurrent_invocations: " + std::to_string(rule.value);
        case InvalidateRule::Kind::Overload:
            return "overload";
    }
    return "?";
}

// Renders an AST back to source text. Omitted optional fields stay
// omitted, so render/parse round-trips are structure-preserving.
inline std::string render_script(const AppScript& script) {
    std::string out;
    for (const auto& [name, tag] : script.tags) {
        out += name;
        out += ":\n";
        for (const Block& block : tag.blocks) {
            bool first = true;
            auto emit = [&](const std::string& text) {
                out += first ? "  - " : "    ";
                out += text;
                out += '\n';
                first = false;
            };
            if (block.controller) {
                emit("controller: " + block.controller->label);
                if (block.controller->tolerance)
                    emit(std::string("topology_tolerance: ") + to_string(*block.controller->tolerance));
            }
            emit("workers:");
            for (const WorkerClause& clause : block.workers) {
                if (clause.kind == WorkerClause::Kind::Named) {
                    out += "      - " + *clause.label + "\n";
                } else {
                    out += "      - *" + (clause.label ? *clause.label : "") + "\n";
                    if (clause.strategy)
                        out += std::string("        strategy: ") + to_string(*clause.strategy) + "\n";
                    if (clause.invalidate)
                        out += "        invalidate: " + render_invalidate(*clause.invalidate) + "\n";
                }
            }
            if (block.strategy) emit(std::string("strategy: ") + to_string(*block.strategy));
            if (block.invalidate) emit("invalidate: " + render_invalidate(*block.invalidate));
        }
        if (tag.block_strategy) out += std::string("  strategy: ") + to_string(*tag.block_strategy) + "\n";
        if (tag.followup) out += std::string("  followup: ") + to_string(*tag.followup) + "\n";
    }
    return out;
}

} // namespace tapp
