#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tapp {

using Label = std::string;
using PolicyTagName = std::string;

enum class Strategy { Random, Platform, BestFirst };
enum class Followup { Default, Fail };
enum class TopologyTolerance { All, Same, None };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Platform: return "platform";
        case Strategy::BestFirst: return "best_first";
    }
    return "?";
}

inline const char* to_string(Followup f) {
    return f == Followup::Default ? "default" : "fail";
}

inline const char* to_string(TopologyTolerance t) {
    switch (t) {
        case TopologyTolerance::All: return "all";
        case TopologyTolerance::Same: return "same";
        case TopologyTolerance::None: return "none";
    }
    return "?";
}

struct InvalidateRule {
    enum class Kind { CapacityUsed, MaxConcurrentInvocations, Overload };
    Kind kind = Kind::Overload;
    int value = 0; // percent (1..100) or max invocations (>=1)

    static InvalidateRule capacity_used(int percent) { return {Kind::CapacityUsed, percent}; }
    static InvalidateRule max_concurrent(int n) { return {Kind::MaxConcurrentInvocations, n}; }
    static InvalidateRule overload() { return {Kind::Overload, 0}; }

    bool operator==(const InvalidateRule&) const = default;
};

struct ControllerClause {
    Label label;
    std::optional<TopologyTolerance> tolerance; // canonical default: all

    bool operator==(const ControllerClause&) const = default;
};

// One entry of a block's worker list: a plain label, or a `*`-set
// optionally scoped by a label with its own selection options.
struct WorkerClause {
    enum class Kind { Named, Set };
    Kind kind = Kind::Named;
    std::optional<Label> label; // Named: required; Set: the scope, absent = all workers
    std::optional<Strategy> strategy;         // Set only; canonical: inherits block
    std::optional<InvalidateRule> invalidate; // Set only; canonical: inherits block

    static WorkerClause named(Label l) {
        WorkerClause c;
        c.kind = Kind::Named;
        c.label = std::move(l);
        return c;
    }
    static WorkerClause set(std::optional<Label> scope = std::nullopt,
                            std::optional<Strategy> strat = std::nullopt,
                            std::optional<InvalidateRule> inval = std::nullopt) {
        WorkerClause c;
        c.kind = Kind::Set;
        c.label = std::move(scope);
        c.strategy = strat;
        c.invalidate = inval;
        return c;
    }

    bool operator==(const WorkerClause&) const = default;
};

struct Block {
    std::optional<ControllerClause> controller;
    std::vector<WorkerClause> workers; // non-empty
    std::optional<Strategy> strategy;           // canonical default: best_first
    std::optional<InvalidateRule> invalidate;   // no default

    bool operator==(const Block&) const = default;
};

struct TagPolicy {
    std::vector<Block> blocks; // non-empty
    std::optional<Strategy> block_strategy; // canonical default: best_first
    std::optional<Followup> followup;       // canonical default: default
    // Whether `followup` was written in the source (canonicalize fills the
    // value but preserves this); validation needs the distinction, equality
    // and rendering do not use it.
    bool followup_explicit = false;

    bool operator==(const TagPolicy& o) const {
        return blocks == o.blocks && block_strategy == o.block_strategy && followup == o.followup;
    }
};

struct AppScript {
    std::vector<std::pair<PolicyTagName, TagPolicy>> tags; // unique names, file order
    std::int64_t source_version = 0;

    const TagPolicy* find_tag(const std::string& name) const {
        for (const auto& [n, t] : tags)
            if (n == name) return &t;
        return nullptr;
    }

    bool operator==(const AppScript& o) const { return tags == o.tags; }
};

} // namespace tapp
