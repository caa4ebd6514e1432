#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tapp/topology.hpp"

namespace tapp {

enum class DistributionPolicy { Default, MinMemory, Isolated, Shared };

inline const char* to_string(DistributionPolicy p) {
    switch (p) {
        case DistributionPolicy::Default: return "default";
        case DistributionPolicy::MinMemory: return "min_memory";
        case DistributionPolicy::Isolated: return "isolated";
        case DistributionPolicy::Shared: return "shared";
    }
    return "?";
}

inline std::optional<DistributionPolicy> parse_policy(std::string_view s) {
    if (s == "default") return DistributionPolicy::Default;
    if (s == "min_memory") return DistributionPolicy::MinMemory;
    if (s == "isolated") return DistributionPolicy::Isolated;
    if (s == "shared") return DistributionPolicy::Shared;
    return std::nullopt;
}

enum class AccessTier { Primary, Overflow, Denied };

struct AccessGrant {
    int memory_share_mb = 0; // static share; overflow shares are dynamic and stay 0 here
    AccessTier tier = AccessTier::Denied;

    bool eligible() const { return tier != AccessTier::Denied; }
};

// Deployment-time division of worker memory among controllers, one grant
// per (controller, worker) pair. Values depend only on zone membership, so
// the result is invariant under reordering of the node lists.
struct Allotment {
    DistributionPolicy policy = DistributionPolicy::Default;
    std::map<std::pair<NodeId, NodeId>, AccessGrant> grants; // (controller, worker) -> grant

    const AccessGrant& grant(const NodeId& controller, const NodeId& worker) const {
        static const AccessGrant denied{};
        auto it = grants.find({controller, worker});
        return it == grants.end() ? denied : it->second;
    }
};

struct AllotmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Splits each worker's memory among the controllers under one of the four
// deployment policies:
//   default    - every controller gets an equal fraction of every worker;
//   min_memory - co-located controllers share the worker minus one
//                invocation slot per foreign controller, which is all a
//                foreign controller gets; workers with no co-located
//                controller fall back to the default split;
//   isolated   - only co-located controllers may use a worker;
//   shared     - co-located controllers own the worker, foreign ones may
//                overflow into whatever is free once their own primary
//                workers are exhausted.
inline Allotment compute_allotment(const ClusterTopology& topology, DistributionPolicy policy) {
    Allotment out;
    out.policy = policy;
    const int total_controllers = static_cast<int>(topology.controllers.size());
    if (total_controllers == 0) return out;

    for (const WorkerNode& w : topology.workers) {
        std::vector<const ControllerNode*> local;
        for (const ControllerNode& c : topology.controllers)
            if (w.zone && c.zone && *c.zone == *w.zone) local.push_back(&c);
        const int n_local = static_cast<int>(local.size());
        const int n_foreign = total_controllers - n_local;

        auto is_local = [&](const ControllerNode& c) {
            return w.zone && c.zone && *c.zone == *w.zone;
        };

        for (const ControllerNode& c : topology.controllers) {
            AccessGrant grant;
            switch (policy) {
                case DistributionPolicy::Default:
                    grant = {w.memory_capacity_mb / total_controllers, AccessTier::Primary};
                    break;
                case DistributionPolicy::MinMemory:
                    if (n_local == 0) {
                        grant = {w.memory_capacity_mb / total_controllers, AccessTier::Primary};
                    } else if (is_local(c)) {
                        int pool = w.memory_capacity_mb - w.invocation_slot_mb * n_foreign;
                        if (pool < 0)
                            throw AllotmentError("min_memory: foreign invocation slots exceed capacity of worker `" +
                                                 w.id + "`");
                        grant = {pool / n_local, AccessTier::Primary};
                    } else {
                        grant = {w.invocation_slot_mb, AccessTier::Primary};
                    }
                    break;
                case DistributionPolicy::Isolated:
                    if (n_local > 0 && is_local(c))
                        grant = {w.memory_capacity_mb / n_local, AccessTier::Primary};
                    else
                        grant = {0, AccessTier::Denied};
                    break;
                case DistributionPolicy::Shared:
                    if (n_local > 0 && is_local(c))
                        grant = {w.memory_capacity_mb / n_local, AccessTier::Primary};
                    else
                        grant = {0, AccessTier::Overflow}; // dynamic share, resolved at admission
                    break;
            }
            out.grants[{c.id, w.id}] = grant;
        }
    }
    return out;
}

} // namespace tapp
