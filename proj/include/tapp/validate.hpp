#pragma once

#include <string>
#include <vector>

#include "tapp/ast.hpp"
#include "tapp/topology.hpp"

namespace tapp {

struct Diagnostic {
    enum class Severity { Error, Warning };
    Severity severity = Severity::Error;
    std::string message;

    bool is_error() const { return severity == Severity::Error; }
};

// Static checks over a canonicalized script. Unlike parsing, validation
// collects everything it finds. With a topology it also resolves every
// controller label, worker label, and set scope; dangling references are
// errors, the rest are warnings.
inline std::vector<Diagnostic> validate_script(const AppScript& script, const ClusterTopology* topology = nullptr) {
    std::vector<Diagnostic> out;
    const bool has_default = script.find_tag("default") != nullptr;

    for (const auto& [name, tag] : script.tags) {
        if (name == "default" && tag.followup_explicit && tag.followup == Followup::Default)
            out.push_back({Diagnostic::Severity::Warning,
                           "tag `default` declares followup: default, which refers to itself"});
        if (name != "default" && tag.followup == Followup::Default && !has_default)
            out.push_back({Diagnostic::Severity::Warning,
                           "tag `" + name + "` falls back to the default tag, but no `default` tag exists"});

        if (!topology) continue;
        for (std::size_t bi = 0; bi < tag.blocks.size(); ++bi) {
            const Block& block = tag.blocks[bi];
            const std::string where = "tag `" + name + "` block " + std::to_string(bi + 1);
            if (block.controller && !topology->find_controller_by_label(block.controller->label))
                out.push_back({Diagnostic::Severity::Error,
                               where + ": controller label `" + block.controller->label +
                                   "` does not match any controller"});
            for (const WorkerClause& clause : block.workers) {
                if (clause.kind == WorkerClause::Kind::Named) {
                    if (topology->workers_with_label(*clause.label).empty())
                        out.push_back({Diagnostic::Severity::Error,
                                       where + ": worker label `" + *clause.label +
                                           "` does not match any worker"});
                } else if (clause.label) {
                    if (topology->workers_with_label(*clause.label).empty())
                        out.push_back({Diagnostic::Severity::Error,
                                       where + ": worker-set scope `" + *clause.label +
                                           "` does not match any worker"});
                }
            }
        }
    }
    return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.is_error()) return true;
    return false;
}

} // namespace tapp
