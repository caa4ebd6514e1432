#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tapp/allotment.hpp"
#include "tapp/ast.hpp"
#include "tapp/rng.hpp"
#include "tapp/topology.hpp"
#include "tapp/watcher.hpp"

namespace tapp {

struct InvocationRequest {
    std::string request_id;
    std::string function_id;
    std::optional<PolicyTagName> tag;
    int memory_demand_mb = 256; // one invocation slot unless the workload says otherwise
    std::int64_t arrival_us = 0;
};

struct WorkerRuntimeState {
    std::map<NodeId, int> committed_mb; // per controller grant
    int queued_invocations = 0;
    std::map<std::string, std::int64_t> warm_since; // function -> last completion time (us)

    int committed_for(const NodeId& controller) const {
        auto it = committed_mb.find(controller);
        return it == committed_mb.end() ? 0 : it->second;
    }
    int total_committed() const {
        int sum = 0;
        for (const auto& [_, mb] : committed_mb) sum += mb;
        return sum;
    }
};

// Mutable side of scheduling: per-worker runtime accounting plus the
// round-robin cursors. Copyable, so tests can snapshot and replay.
struct ClusterState {
    std::map<NodeId, WorkerRuntimeState> workers;
    std::size_t gateway_rr_cursor = 0;
    std::size_t failover_rr_cursor = 0;

    WorkerRuntimeState& worker(const NodeId& id) { return workers[id]; }
    const WorkerRuntimeState* find_worker(const NodeId& id) const {
        auto it = workers.find(id);
        return it == workers.end() ? nullptr : &it->second;
    }

    void commit(const NodeId& controller, const NodeId& worker_id, int mb) {
        auto& ws = workers[worker_id];
        ws.committed_mb[controller] += mb;
        ws.queued_invocations += 1;
    }
    void release(const NodeId& controller, const NodeId& worker_id, int mb) {
        auto& ws = workers[worker_id];
        ws.committed_mb[controller] -= mb;
        ws.queued_invocations -= 1;
    }
};

struct TraceStep {
    enum class Kind {
        TagMatched,
        FallbackPath,
        BlockTried,
        Failover,
        ClauseTried,
        WorkerRejected,
        WorkerAccepted,
        BlockExhausted,
        FollowupTransition,
        GatewayRetry,
        Failed
    };
    Kind kind;
    std::string detail;
    std::string tag;
    int block_index = -1;  // 0-based where applicable
    int clause_index = -1;
    NodeId controller;
    NodeId worker;
};

inline const char* to_string(TraceStep::Kind k) {
    switch (k) {
        case TraceStep::Kind::TagMatched: return "tag_matched";
        case TraceStep::Kind::FallbackPath: return "fallback_path";
        case TraceStep::Kind::BlockTried: return "block_tried";
        case TraceStep::Kind::Failover: return "failover";
        case TraceStep::Kind::ClauseTried: return "clause_tried";
        case TraceStep::Kind::WorkerRejected: return "worker_rejected";
        case TraceStep::Kind::WorkerAccepted: return "worker_accepted";
        case TraceStep::Kind::BlockExhausted: return "block_exhausted";
        case TraceStep::Kind::FollowupTransition: return "followup";
        case TraceStep::Kind::GatewayRetry: return "gateway_retry";
        case TraceStep::Kind::Failed: return "failed";
    }
    return "?";
}

struct ScheduleDecision {
    NodeId controller;
    NodeId worker;
    std::vector<TraceStep> trace;
    std::int64_t script_version = 0;
    std::int64_t snapshot_version = 0;
};

struct SchedulingFailure {
    enum class Reason {
        TagFailedWithFail,
        DefaultExhausted,
        ControllerUnavailableToleranceNone,
        NoEligibleWorkers
    };
    Reason reason = Reason::NoEligibleWorkers;
    std::vector<TraceStep> trace;
    std::int64_t script_version = 0;
    std::int64_t snapshot_version = 0;
};

inline const char* to_string(SchedulingFailure::Reason r) {
    switch (r) {
        case SchedulingFailure::Reason::TagFailedWithFail: return "tag_failed_with_fail";
        case SchedulingFailure::Reason::DefaultExhausted: return "default_exhausted";
        case SchedulingFailure::Reason::ControllerUnavailableToleranceNone:
            return "controller_unavailable_tolerance_none";
        case SchedulingFailure::Reason::NoEligibleWorkers: return "no_eligible_workers";
    }
    return "?";
}

using ScheduleOutcome = std::variant<ScheduleDecision, SchedulingFailure>;

inline bool accepted(const ScheduleOutcome& o) { return std::holds_alternative<ScheduleDecision>(o); }
inline const std::vector<TraceStep>& trace_of(const ScheduleOutcome& o) {
    return accepted(o) ? std::get<ScheduleDecision>(o).trace : std::get<SchedulingFailure>(o).trace;
}
inline int gateway_retries(const ScheduleOutcome& o) {
    int n = 0;
    for (const TraceStep& s : trace_of(o))
        if (s.kind == TraceStep::Kind::GatewayRetry) ++n;
    return n;
}

struct SchedulerConfig {
    int overload_threshold = 16; // queued invocations at which `overload` fires
    bool vanilla = false;        // baseline platform: ignore zones in the fallback path
};

// Everything a scheduling decision reads; all pointers are borrowed and
// must outlive the call. `script` may be null (fallback-only operation).
struct SchedulerEnv {
    const ClusterTopology* topology = nullptr;
    const TopologySnapshot* snapshot = nullptr;
    const Allotment* allotment = nullptr;
    const AppScript* script = nullptr; // canonicalized
    std::int64_t script_version = 0;
    std::uint64_t coprime_salt = 0;
    SchedulerConfig config;
};

// ---------------------------------------------------------------------------
// Co-prime scheduling (the platform's native fallback policy)

// Step sizes valid for n workers: every k < n co-prime with n. n=1 has no
// valid step; callers special-case it.
inline std::vector<std::size_t> coprime_steps(std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t k = 1; k < n; ++k)
        if (std::gcd(k, n) == 1) out.push_back(k);
    return out;
}

// The preference sequence [(h + i*s) mod n]. With gcd(s, n) = 1 this visits
// every index exactly once.
inline std::vector<std::size_t> coprime_order(std::size_t h, std::size_t s, std::size_t n) {
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back((h + i * s) % n);
    return out;
}

// Orders `items` the way the platform's co-prime policy would try them: a
// function hash picks the primary item, a second hash picks the co-prime
// step. The salt changes per (re)deployment.
template <typename T>
std::vector<T> coprime_fallback(const std::string& function_id, std::vector<T> items, std::uint64_t salt = 0) {
    const std::size_t n = items.size();
    if (n <= 1) return items;
    const std::size_t h = static_cast<std::size_t>(fnv1a(function_id, 0xcbf29ce484222325ULL ^ salt) % n);
    const std::vector<std::size_t> steps = coprime_steps(n);
    const std::size_t s = steps[static_cast<std::size_t>(
        fnv1a(function_id, 0x9e3779b97f4a7c15ULL ^ salt) % steps.size())];
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t idx : coprime_order(h, s, n)) out.push_back(std::move(items[idx]));
    return out;
}

// ---------------------------------------------------------------------------
// Invalidation

// Whether a worker is invalid for a controller holding `grant_share_mb` of
// it. A zero share is always invalid; with no rule only the share matters.
inline bool check_invalid(const WorkerRuntimeState& state, const NodeId& controller, int grant_share_mb,
                          const std::optional<InvalidateRule>& rule, int overload_threshold) {
    if (grant_share_mb <= 0) return true;
    if (!rule) return false;
    switch (rule->kind) {
        case InvalidateRule::Kind::CapacityUsed:
            // committed / share >= percent/100, in integer arithmetic
            return state.committed_for(controller) * 100 >= rule->value * grant_share_mb;
        case InvalidateRule::Kind::MaxConcurrentInvocations:
            return state.queued_invocations >= rule->value;
        case InvalidateRule::Kind::Overload:
            return state.queued_invocations >= overload_threshold;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Routing

struct ZoneRestriction {
    bool active = false;
    std::optional<ZoneName> zone; // restriction value; empty = only zone-less workers

    bool admits(const std::optional<ZoneName>& worker_zone) const {
        return !active || worker_zone == zone;
    }
};

struct RoutePlan {
    bool fallback = false;          // no script, or no tag matched and no default tag
    std::string tag;                // tag whose policy runs
    std::vector<std::size_t> block_order; // blocks in the order the tag strategy tries them
};

namespace detail {

// Workers a clause selects, in snapshot declaration order, restricted to
// nodes the topology can actually schedule on (capacity is defined there).
inline std::vector<NodeId> clause_members(const SchedulerEnv& env, const WorkerClause& clause) {
    std::vector<NodeId> out;
    for (const NodeId& id : env.snapshot->worker_order) {
        if (!env.topology->find_worker(id)) continue;
        if (clause.kind == WorkerClause::Kind::Named || clause.label) {
            if (env.snapshot->node_has_label(id, *clause.label)) out.push_back(id);
        } else {
            out.push_back(id);
        }
    }
    return out;
}

inline bool block_has_members(const SchedulerEnv& env, const Block& block) {
    for (const WorkerClause& c : block.workers)
        if (!clause_members(env, c).empty()) return true;
    return false;
}

inline std::vector<std::size_t> order_indices(Strategy strategy, std::vector<std::size_t> indices,
                                              const std::string& function_id, std::uint64_t salt, Rng& rng) {
    switch (strategy) {
        case Strategy::BestFirst: return indices;
        case Strategy::Random: rng.shuffle(indices); return indices;
        case Strategy::Platform: return coprime_fallback(function_id, std::move(indices), salt);
    }
    return indices;
}

} // namespace detail

// Gateway-level resolution: find the policy tag for the request and decide
// the order in which its blocks are tried. Blocks whose controller is
// currently alive (or unpinned) come before blocks needing failover;
// blocks with no matching workers at all are skipped.
inline RoutePlan route(const InvocationRequest& req, const SchedulerEnv& env, Rng& rng) {
    RoutePlan plan;
    const AppScript* script = env.script;
    if (!script) {
        plan.fallback = true;
        return plan;
    }
    const TagPolicy* tag = nullptr;
    if (req.tag) tag = script->find_tag(*req.tag);
    if (tag) {
        plan.tag = *req.tag;
    } else if (const TagPolicy* def = script->find_tag("default")) {
        tag = def;
        plan.tag = "default";
    } else {
        plan.fallback = true;
        return plan;
    }

    std::vector<std::size_t> ready, needs_failover;
    for (std::size_t i = 0; i < tag->blocks.size(); ++i) {
        const Block& block = tag->blocks[i];
        if (!detail::block_has_members(env, block)) continue;
        bool controller_ok = true;
        if (block.controller) {
            const NodeId* ctl = env.snapshot->controller_with_label(block.controller->label);
            controller_ok = ctl && env.snapshot->alive(*ctl);
        }
        (controller_ok ? ready : needs_failover).push_back(i);
    }
    Strategy strategy = tag->block_strategy.value_or(Strategy::BestFirst);
    plan.block_order = detail::order_indices(strategy, std::move(ready), req.function_id, env.coprime_salt, rng);
    for (std::size_t i : detail::order_indices(strategy, std::move(needs_failover), req.function_id,
                                               env.coprime_salt, rng))
        plan.block_order.push_back(i);
    return plan;
}

// ---------------------------------------------------------------------------
// Failover

struct FailoverResult {
    std::optional<NodeId> controller;                   // empty on failure
    ZoneRestriction restriction;                        // possibly activated
    std::optional<SchedulingFailure::Reason> failure;
};

// Resolves a block's controller when the designated one is missing or
// dead. tolerance=all hands the block to any alive controller; same does
// too but pins workers to the faulty controller's zone; none gives up.
inline FailoverResult failover(const Block& block, const TopologySnapshot& snap,
                               ZoneRestriction current_restriction, std::size_t& rr_cursor) {
    FailoverResult out;
    out.restriction = current_restriction;
    const Label& label = block.controller->label;
    const NodeId* faulty = snap.controller_with_label(label);
    TopologyTolerance tol = block.controller->tolerance.value_or(TopologyTolerance::All);
    if (tol == TopologyTolerance::None) {
        out.failure = SchedulingFailure::Reason::ControllerUnavailableToleranceNone;
        return out;
    }
    std::vector<NodeId> alive;
    for (const NodeId& id : snap.controller_order)
        if (snap.alive(id) && (!faulty || id != *faulty)) alive.push_back(id);
    if (alive.empty()) {
        out.failure = SchedulingFailure::Reason::NoEligibleWorkers;
        return out;
    }
    out.controller = alive[rr_cursor % alive.size()];
    rr_cursor += 1;
    if (tol == TopologyTolerance::Same) {
        out.restriction.active = true;
        out.restriction.zone = faulty ? snap.zone_of(*faulty) : std::nullopt;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Worker selection

namespace detail {

enum class Verdict { Eligible, Dead, ZoneMismatch, Denied, Invalid, NoHeadroom, OverflowDeferred };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Eligible: return "eligible";
        case Verdict::Dead: return "dead";
        case Verdict::ZoneMismatch: return "zone_mismatch";
        case Verdict::Denied: return "denied";
        case Verdict::Invalid: return "invalid";
        case Verdict::NoHeadroom: return "no_headroom";
        case Verdict::OverflowDeferred: return "overflow_deferred";
    }
    return "?";
}

// Evaluates one worker for one controller. `overflow_pass` switches the
// share to the dynamic remainder a shared-policy foreign controller may
// use once its primary workers are exhausted.
inline Verdict evaluate_worker(const SchedulerEnv& env, const ClusterState& state, const NodeId& ctl,
                               const NodeId& worker_id, const ZoneRestriction& zr,
                               const std::optional<InvalidateRule>& rule, int demand_mb, bool overflow_pass) {
    if (!env.snapshot->alive(worker_id)) return Verdict::Dead;
    const WorkerNode* wn = env.topology->find_worker(worker_id);
    if (!zr.admits(wn->zone)) return Verdict::ZoneMismatch;
    const AccessGrant& grant = env.allotment->grant(ctl, worker_id);
    if (grant.tier == AccessTier::Denied) return Verdict::Denied;
    if (grant.tier == AccessTier::Overflow && !overflow_pass) return Verdict::OverflowDeferred;
    static const WorkerRuntimeState kFresh{};
    const WorkerRuntimeState& ws = state.find_worker(worker_id) ? *state.find_worker(worker_id) : kFresh;
    const int capacity = wn->memory_capacity_mb;
    const int share = grant.tier == AccessTier::Overflow ? capacity - ws.total_committed()
                                                         : grant.memory_share_mb;
    if (check_invalid(ws, ctl, share, rule, env.config.overload_threshold)) return Verdict::Invalid;
    if (ws.committed_for(ctl) + demand_mb > share) return Verdict::NoHeadroom;
    if (ws.total_committed() + demand_mb > capacity) return Verdict::NoHeadroom;
    return Verdict::Eligible;
}

} // namespace detail

// Walks the block's worker clauses under the block strategy, each set
// under its own strategy, skipping dead / denied / zone-restricted /
// invalidated / full workers. Overflow-tier workers are considered only
// after every primary worker in the block has been ruled out. Returns the
// first eligible worker, or nothing when the block is exhausted.
inline std::optional<NodeId> select_worker(const SchedulerEnv& env, const ClusterState& state,
                                           const Block& block, const NodeId& controller,
                                           const ZoneRestriction& zr, const InvocationRequest& req,
                                           Rng& rng, std::vector<TraceStep>* trace = nullptr) {
    using detail::Verdict;
    auto note = [&](TraceStep::Kind kind, int clause, const NodeId& worker, const std::string& detail_text) {
        if (trace) trace->push_back({kind, detail_text, "", -1, clause, controller, worker});
    };

    std::vector<std::size_t> clause_idx(block.workers.size());
    std::iota(clause_idx.begin(), clause_idx.end(), std::size_t{0});
    clause_idx = detail::order_indices(block.strategy.value_or(Strategy::BestFirst), std::move(clause_idx),
                                       req.function_id, env.coprime_salt, rng);

    struct Deferred {
        std::size_t clause;
        NodeId worker;
        std::optional<InvalidateRule> rule;
    };
    std::vector<Deferred> overflow;

    for (std::size_t ci : clause_idx) {
        const WorkerClause& clause = block.workers[ci];
        std::vector<NodeId> members = detail::clause_members(env, clause);
        std::optional<InvalidateRule> rule;
        if (clause.kind == WorkerClause::Kind::Set) {
            rule = clause.invalidate ? clause.invalidate : block.invalidate;
            Strategy s = clause.strategy.value_or(block.strategy.value_or(Strategy::BestFirst));
            if (s == Strategy::Random) {
                rng.shuffle(members);
            } else if (s == Strategy::Platform) {
                members = coprime_fallback(req.function_id, std::move(members), env.coprime_salt);
            }
        } else {
            rule = block.invalidate;
        }
        note(TraceStep::Kind::ClauseTried, static_cast<int>(ci), "",
             clause.kind == WorkerClause::Kind::Named
                 ? "named `" + *clause.label + "`"
                 : (clause.label ? "set *" + *clause.label : "set *"));
        for (const NodeId& w : members) {
            Verdict v = detail::evaluate_worker(env, state, controller, w, zr, rule, req.memory_demand_mb,
                                                /*overflow_pass=*/false);
            if (v == Verdict::Eligible) {
                note(TraceStep::Kind::WorkerAccepted, static_cast<int>(ci), w, "primary");
                return w;
            }
            if (v == Verdict::OverflowDeferred) {
                overflow.push_back({ci, w, rule});
                note(TraceStep::Kind::WorkerRejected, static_cast<int>(ci), w, detail::to_string(v));
            } else {
                note(TraceStep::Kind::WorkerRejected, static_cast<int>(ci), w, detail::to_string(v));
            }
        }
    }
    for (const Deferred& d : overflow) {
        Verdict v = detail::evaluate_worker(env, state, controller, d.worker, zr, d.rule,
                                            req.memory_demand_mb, /*overflow_pass=*/true);
        if (v == Verdict::Eligible) {
            note(TraceStep::Kind::WorkerAccepted, static_cast<int>(d.clause), d.worker, "overflow");
            return d.worker;
        }
        note(TraceStep::Kind::WorkerRejected, static_cast<int>(d.clause), d.worker,
             std::string("overflow ") + detail::to_string(v));
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Full pipeline

namespace detail {

inline ScheduleOutcome fallback_schedule(const SchedulerEnv& env, ClusterState& state,
                                         const InvocationRequest& req, std::vector<TraceStep> trace) {
    trace.push_back({TraceStep::Kind::FallbackPath, env.config.vanilla ? "vanilla round-robin + co-prime"
                                                                       : "round-robin + co-prime, co-located first",
                     "", -1, -1, "", ""});
    std::vector<NodeId> alive_controllers;
    for (const NodeId& id : env.snapshot->controller_order)
        if (env.snapshot->alive(id)) alive_controllers.push_back(id);
    if (alive_controllers.empty()) {
        trace.push_back({TraceStep::Kind::Failed, "no alive controller", "", -1, -1, "", ""});
        return SchedulingFailure{SchedulingFailure::Reason::NoEligibleWorkers, std::move(trace),
                                 env.script_version, env.snapshot->version};
    }
    const std::size_t start = state.gateway_rr_cursor % alive_controllers.size();
    state.gateway_rr_cursor += 1;

    for (std::size_t attempt = 0; attempt < alive_controllers.size(); ++attempt) {
        const NodeId& ctl = alive_controllers[(start + attempt) % alive_controllers.size()];
        if (attempt > 0)
            trace.push_back({TraceStep::Kind::GatewayRetry, "retry on next controller", "", -1, -1, ctl, ""});
        const std::optional<ZoneName> ctl_zone = env.snapshot->zone_of(ctl);

        std::vector<NodeId> colocated, foreign;
        for (const NodeId& id : env.snapshot->worker_order) {
            if (!env.topology->find_worker(id)) continue;
            if (!env.config.vanilla && env.snapshot->zone_of(id) == ctl_zone && ctl_zone)
                colocated.push_back(id);
            else
                foreign.push_back(id);
        }
        std::vector<NodeId> order = coprime_fallback(req.function_id, std::move(colocated), env.coprime_salt);
        for (NodeId& id : coprime_fallback(req.function_id, std::move(foreign), env.coprime_salt))
            order.push_back(std::move(id));

        const std::optional<InvalidateRule> overload_rule = InvalidateRule::overload();
        ZoneRestriction no_restriction;
        // primary pass first, then shared-policy overflow grants
        for (bool overflow_pass : {false, true}) {
            for (const NodeId& w : order) {
                bool is_overflow = env.allotment->grant(ctl, w).tier == AccessTier::Overflow;
                if (is_overflow != overflow_pass) continue;
                Verdict v = evaluate_worker(env, state, ctl, w, no_restriction, overload_rule,
                                            req.memory_demand_mb, overflow_pass);
                if (v == Verdict::Eligible) {
                    trace.push_back({TraceStep::Kind::WorkerAccepted,
                                     overflow_pass ? "overflow" : "primary", "", -1, -1, ctl, w});
                    state.commit(ctl, w, req.memory_demand_mb);
                    return ScheduleDecision{ctl, w, std::move(trace), env.script_version,
                                            env.snapshot->version};
                }
                trace.push_back({TraceStep::Kind::WorkerRejected, to_string(v), "", -1, -1, ctl, w});
            }
        }
    }
    trace.push_back({TraceStep::Kind::Failed, "all controllers exhausted", "", -1, -1, "", ""});
    return SchedulingFailure{SchedulingFailure::Reason::NoEligibleWorkers, std::move(trace),
                             env.script_version, env.snapshot->version};
}

} // namespace detail

// One end-to-end scheduling decision: route to a tag, try its blocks with
// controller failover, select a worker, then follow the tag's followup
// rule (the default tag is entered at most once). On acceptance the memory
// demand is committed to the chosen grant.
inline ScheduleOutcome schedule(const SchedulerEnv& env, ClusterState& state, const InvocationRequest& req,
                                Rng& rng) {
    std::vector<TraceStep> trace;
    RoutePlan plan = route(req, env, rng);
    if (plan.fallback) return detail::fallback_schedule(env, state, req, std::move(trace));

    auto fail = [&](SchedulingFailure::Reason reason) -> ScheduleOutcome {
        trace.push_back({TraceStep::Kind::Failed, to_string(reason), plan.tag, -1, -1, "", ""});
        return SchedulingFailure{reason, std::move(trace), env.script_version, env.snapshot->version};
    };

    ZoneRestriction restriction; // survives followup transitions (topology_tolerance: same)
    for (int round = 0;; ++round) {
        const TagPolicy* tag = env.script->find_tag(plan.tag);
        trace.push_back({TraceStep::Kind::TagMatched,
                         req.tag && *req.tag == plan.tag ? "request tag" : "default policy", plan.tag, -1,
                         -1, "", ""});
        for (std::size_t bi : plan.block_order) {
            const Block& block = tag->blocks[bi];
            trace.push_back({TraceStep::Kind::BlockTried, "", plan.tag, static_cast<int>(bi), -1, "", ""});

            NodeId controller;
            ZoneRestriction block_restriction = restriction;
            if (block.controller) {
                const NodeId* ctl = env.snapshot->controller_with_label(block.controller->label);
                if (ctl && env.snapshot->alive(*ctl)) {
                    controller = *ctl;
                } else {
                    FailoverResult fo = failover(block, *env.snapshot, restriction, state.failover_rr_cursor);
                    if (fo.failure) {
                        trace.push_back({TraceStep::Kind::Failover,
                                         std::string("controller `") + block.controller->label +
                                             "` unavailable: " + to_string(*fo.failure),
                                         plan.tag, static_cast<int>(bi), -1, "", ""});
                        return fail(*fo.failure);
                    }
                    controller = *fo.controller;
                    block_restriction = fo.restriction;
                    restriction = fo.restriction; // a same-zone restriction persists for this request
                    trace.push_back({TraceStep::Kind::Failover,
                                     std::string("controller `") + block.controller->label + "` down, using `" +
                                         controller + "`" +
                                         (fo.restriction.active ? " restricted to faulty controller's zone"
                                                                : ""),
                                     plan.tag, static_cast<int>(bi), -1, controller, ""});
                }
            } else {
                std::vector<NodeId> alive;
                for (const NodeId& id : env.snapshot->controller_order)
                    if (env.snapshot->alive(id)) alive.push_back(id);
                if (alive.empty()) return fail(SchedulingFailure::Reason::NoEligibleWorkers);
                controller = alive[state.gateway_rr_cursor % alive.size()];
                state.gateway_rr_cursor += 1;
            }

            std::optional<NodeId> chosen =
                select_worker(env, state, block, controller, block_restriction, req, rng, &trace);
            if (chosen) {
                state.commit(controller, *chosen, req.memory_demand_mb);
                return ScheduleDecision{controller, *chosen, std::move(trace), env.script_version,
                                        env.snapshot->version};
            }
            trace.push_back(
                {TraceStep::Kind::BlockExhausted, "", plan.tag, static_cast<int>(bi), -1, controller, ""});
        }

        // every block exhausted: the followup rule decides what happens
        Followup fu = tag->followup.value_or(Followup::Default);
        if (fu == Followup::Fail) return fail(SchedulingFailure::Reason::TagFailedWithFail);
        if (plan.tag == "default" || round > 0) return fail(SchedulingFailure::Reason::DefaultExhausted);
        if (!env.script->find_tag("default")) return fail(SchedulingFailure::Reason::NoEligibleWorkers);
        trace.push_back({TraceStep::Kind::FollowupTransition, "falling through to `default`", plan.tag, -1,
                         -1, "", ""});
        InvocationRequest default_req = req;
        default_req.tag = "default";
        plan = route(default_req, env, rng);
        if (plan.fallback) return fail(SchedulingFailure::Reason::NoEligibleWorkers);
    }
}

} // namespace tapp
