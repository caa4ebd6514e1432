#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tapp/allotment.hpp"
#include "tapp/markup.hpp"
#include "tapp/metrics.hpp"
#include "tapp/parser.hpp"
#include "tapp/rng.hpp"
#include "tapp/scheduler.hpp"
#include "tapp/topology.hpp"
#include "tapp/watcher.hpp"

namespace tapp::sim {

inline constexpr std::uint64_t kDefaultSeed = 42;

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FunctionSpec {
    double exec_ms = 5.0;      // mean execution time
    double exec_jitter = 0.1;  // relative half-width of the per-request jitter
    int memory_mb = 256;
    double init_ms = 200.0; // cold-start initialisation
    std::int64_t payload_bytes = 1024;
    std::optional<std::string> data_service;
    std::int64_t data_bytes = 0;
};

struct WorkloadProfile {
    std::string name;
    int users = 1;
    double ramp_up_s = 0.0;
    int repetitions = 1;
    double pause_s = 0.0; // between a response and the user's next request
    FunctionSpec function;
    int runs_override = 0; // campaign runs for this profile; 0 = campaign default
};

// Everything that turns a schedule into time: zone latencies come from the
// topology, transfer times from the configured bandwidths (1 MB = 1e6
// bytes), cold starts from the cache TTL.
struct SimKnobs {
    double intra_zone_bw_mbps = 100.0;
    double cross_zone_bw_mbps = 20.0;
    double cold_cache_ttl_s = 600.0; // the platform's container cache timeout
    double vanilla_sched_overhead_ms = 0.5;
    double tapp_sched_overhead_ms = 1.0;
    int overload_threshold = 16;
    std::int64_t policy_staleness_ms = 0; // delay before an updated script becomes visible
};

struct SimulationInput {
    const ClusterTopology* topology = nullptr;
    DistributionPolicy policy = DistributionPolicy::Default;
    std::optional<std::string> script_text; // parsed+canonicalized at start when present
    const WorkloadProfile* workload = nullptr;
    const std::vector<TimedEvent>* timeline = nullptr;
    std::optional<std::string> request_tag; // attached to every request
    bool vanilla = false;                   // baseline platform behaviour in the fallback path
    std::uint64_t seed = kDefaultSeed;
    std::uint64_t coprime_salt = 0;
    SimKnobs knobs;
};

struct RequestRecord {
    std::string request_id;
    std::string function_id;
    std::int64_t arrival_us = 0;
    std::int64_t response_us = 0;
    bool failed = false;
    std::string failure_reason;
    std::int64_t dispatch_us = 0; // when the worker starts on it
    // latency decomposition (microseconds); their sum is the latency
    std::int64_t sched_us = 0, net_us = 0, cold_us = 0, data_us = 0, exec_us = 0;
    NodeId controller, worker;
    std::int64_t script_version = 0;
    std::int64_t snapshot_version = 0;
    int retries = 0;
    std::vector<TraceStep> trace;

    std::int64_t latency_us() const { return response_us - arrival_us; }
};

struct RunResult {
    RunMetrics metrics;
    std::vector<RequestRecord> records;
    // (time_us, version) changepoints of the active script, for stale-read checks
    std::vector<std::pair<std::int64_t, std::int64_t>> script_versions;
};

namespace detail {

inline std::int64_t ms_to_us(double ms) { return static_cast<std::int64_t>(ms * 1000.0 + 0.5); }

inline double bw_mbps(const SimKnobs& k, const std::optional<ZoneName>& a,
                      const std::optional<ZoneName>& b) {
    if (a && b && *a == *b) return k.intra_zone_bw_mbps;
    return k.cross_zone_bw_mbps;
}

inline std::int64_t transfer_us(std::int64_t bytes, double mbps) {
    if (bytes <= 0) return 0;
    // bytes / (mbps * 1e6 bytes/s) seconds = bytes / mbps microseconds
    return static_cast<std::int64_t>(static_cast<double>(bytes) / mbps + 0.5);
}

} // namespace detail

// Deterministic discrete-event run of one workload against one deployment.
// Events are processed in (time, kind, sequence) order; identical inputs
// and seed give identical results, including every trace.
inline RunResult run_simulation(const SimulationInput& in) {
    if (!in.topology || !in.workload) throw SimError("simulation requires a topology and a workload");
    const ClusterTopology& topo = *in.topology;
    const WorkloadProfile& wl = *in.workload;
    const SimKnobs& knobs = in.knobs;

    const ExternalService* service = nullptr;
    if (wl.function.data_service) {
        service = topo.find_service(*wl.function.data_service);
        if (!service)
            throw SimError("workload references unknown service `" + *wl.function.data_service + "`");
    }

    Allotment allotment = compute_allotment(topo, in.policy);
    Watcher watcher(topo);
    TopologySnapshot snapshot = watcher.snapshot();

    PolicyStore store;
    std::vector<std::pair<std::int64_t, std::int64_t>> script_versions; // visible-from changepoints
    std::vector<std::shared_ptr<const PolicyStore::Versioned>> script_history;
    if (in.script_text) {
        auto v = store.update(*in.script_text);
        if (!v.ok())
            throw SimError("script rejected: " + v.error().message + " (line " +
                           std::to_string(v.error().loc.line) + ")");
        script_versions.emplace_back(0, v.value());
        script_history.push_back(store.current());
    }

    Rng rng(in.seed);
    ClusterState state;

    struct Event {
        std::int64_t at_us;
        int kind; // 0 = cluster/timeline event, 1 = completion, 2 = request fire
        std::uint64_t seq;
        std::size_t index; // timeline index / record index / user index
        int rep = 0;
        bool operator>(const Event& o) const {
            if (at_us != o.at_us) return at_us > o.at_us;
            if (kind != o.kind) return kind > o.kind;
            return seq > o.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;
    std::uint64_t seq = 0;

    if (in.timeline)
        for (std::size_t i = 0; i < in.timeline->size(); ++i)
            queue.push({(*in.timeline)[i].at_ms * 1000, 0, seq++, i});

    const std::int64_t ramp_step_us =
        wl.users > 0 ? detail::ms_to_us(wl.ramp_up_s * 1000.0 / wl.users) : 0;
    for (int u = 0; u < wl.users; ++u)
        queue.push({ramp_step_us * u, 2, seq++, static_cast<std::size_t>(u), 0});

    std::vector<RequestRecord> records;
    struct Pending {
        std::size_t record;
        NodeId controller, worker;
        int demand_mb = 0;
        std::int64_t completion_us = 0;
        std::size_t user = 0;
        int rep = 0;
    };
    std::vector<Pending> pending; // indexed by completion event index

    // The gateway sees version i once its changepoint time has passed
    // (changepoints already include the staleness window).
    auto active_script = [&](std::int64_t now_us) -> std::shared_ptr<const PolicyStore::Versioned> {
        std::shared_ptr<const PolicyStore::Versioned> active;
        for (std::size_t i = 0; i < script_versions.size(); ++i)
            if (script_versions[i].first <= now_us) active = script_history[i];
        return active;
    };

    while (!queue.empty()) {
        Event ev = queue.top();
        queue.pop();
        if (ev.kind == 0) {
            const TimedEvent& te = (*in.timeline)[ev.index];
            if (te.event.kind == ClusterEvent::Kind::PolicyUpdated) {
                auto v = store.update(te.event.script_text);
                if (v.ok()) {
                    script_versions.emplace_back(ev.at_us + knobs.policy_staleness_ms * 1000, v.value());
                    script_history.push_back(store.current());
                }
                // a rejected update leaves the active script untouched
            } else {
                auto next = apply_event(snapshot, te.event);
                if (!next.ok()) throw SimError("timeline event failed: " + next.error().message);
                snapshot = std::move(next.value());
            }
            continue;
        }
        if (ev.kind == 1) {
            Pending& p = pending[ev.index];
            state.release(p.controller, p.worker, p.demand_mb);
            state.worker(p.worker).warm_since[records[p.record].function_id] = ev.at_us;
            continue;
        }

        // request fire
        const std::size_t user = ev.index;
        const int rep = ev.rep;
        const std::int64_t now = ev.at_us;

        RequestRecord rec;
        rec.request_id = wl.name + "-u" + std::to_string(user) + "-r" + std::to_string(rep);
        rec.function_id = wl.name;
        rec.arrival_us = now;

        auto script = active_script(now);

        InvocationRequest req;
        req.request_id = rec.request_id;
        req.function_id = rec.function_id;
        req.tag = in.request_tag;
        req.memory_demand_mb = wl.function.memory_mb;
        req.arrival_us = now;

        SchedulerEnv env;
        env.topology = &topo;
        env.snapshot = &snapshot;
        env.allotment = &allotment;
        env.script = script ? &script->script : nullptr;
        env.script_version = script ? script->version : 0;
        env.coprime_salt = in.coprime_salt;
        env.config.overload_threshold = knobs.overload_threshold;
        env.config.vanilla = in.vanilla;

        ScheduleOutcome outcome = schedule(env, state, req, rng);
        rec.sched_us = detail::ms_to_us(script ? knobs.tapp_sched_overhead_ms
                                               : knobs.vanilla_sched_overhead_ms);
        rec.script_version = env.script_version;
        rec.snapshot_version = snapshot.version;
        rec.retries = gateway_retries(outcome);

        std::int64_t response_us = 0;
        if (!accepted(outcome)) {
            const auto& failure = std::get<SchedulingFailure>(outcome);
            rec.failed = true;
            rec.failure_reason = to_string(failure.reason);
            rec.trace = failure.trace;
            response_us = now + rec.sched_us;
            rec.response_us = response_us;
        } else {
            const auto& decision = std::get<ScheduleDecision>(outcome);
            rec.controller = decision.controller;
            rec.worker = decision.worker;
            rec.trace = decision.trace;

            const WorkerNode* wn = topo.find_worker(decision.worker);
            const ControllerNode* cn = topo.find_controller(decision.controller);
            const auto gw_zone = topo.gateway_zone;

            std::int64_t fwd_us = detail::ms_to_us(topo.latency_ms(gw_zone, cn->zone)) +
                                  detail::ms_to_us(topo.latency_ms(cn->zone, wn->zone)) +
                                  detail::transfer_us(wl.function.payload_bytes,
                                                      detail::bw_mbps(knobs, cn->zone, wn->zone));
            std::int64_t back_us = detail::ms_to_us(topo.latency_ms(wn->zone, cn->zone)) +
                                   detail::ms_to_us(topo.latency_ms(cn->zone, gw_zone));
            rec.net_us = fwd_us + back_us;

            const std::int64_t dispatch_us = now + rec.sched_us + fwd_us;
            rec.dispatch_us = dispatch_us;
            const auto& ws = state.worker(decision.worker);
            auto warm_it = ws.warm_since.find(rec.function_id);
            const bool warm = warm_it != ws.warm_since.end() &&
                              dispatch_us - warm_it->second <=
                                  detail::ms_to_us(knobs.cold_cache_ttl_s * 1000.0);
            rec.cold_us = warm ? 0 : detail::ms_to_us(wl.function.init_ms);

            if (service) {
                double bw = detail::bw_mbps(knobs, wn->zone, service->zone);
                rec.data_us = 2 * detail::ms_to_us(topo.latency_ms(wn->zone, service->zone)) +
                              detail::transfer_us(wl.function.data_bytes, bw);
            }

            const double jitter = wl.function.exec_jitter;
            const double factor =
                jitter > 0 ? 1.0 - jitter + 2.0 * jitter * unit_hash(in.seed, fnv1a(rec.request_id))
                           : 1.0;
            rec.exec_us = detail::ms_to_us(wl.function.exec_ms * factor);

            const std::int64_t completion_us = dispatch_us + rec.cold_us + rec.data_us + rec.exec_us;
            response_us = completion_us + back_us;
            rec.response_us = response_us;

            pending.push_back({records.size(), decision.controller, decision.worker,
                               req.memory_demand_mb, completion_us, user, rep});
            queue.push({completion_us, 1, seq++, pending.size() - 1});
        }

        records.push_back(std::move(rec));
        if (rep + 1 < wl.repetitions)
            queue.push({response_us + detail::ms_to_us(wl.pause_s * 1000.0), 2, seq++, user, rep + 1});
    }

    RunResult out;
    std::vector<double> latencies;
    int failures = 0, retries = 0;
    for (const auto& r : records) {
        if (r.failed) {
            ++failures;
        } else {
            latencies.push_back(static_cast<double>(r.latency_us()) / 1000.0);
        }
        retries += r.retries;
    }
    out.metrics = summarize_latencies(std::move(latencies), failures, retries);
    out.records = std::move(records);
    out.script_versions = std::move(script_versions);
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark profiles

// The eight benchmark workloads with the published load configurations.
// Execution means and cold-start init time are simulator knobs, not claims.
inline std::map<std::string, WorkloadProfile> builtin_profiles() {
    std::map<std::string, WorkloadProfile> out;
    auto add = [&](WorkloadProfile p) { out[p.name] = std::move(p); };

    WorkloadProfile hellojs{"hellojs", 4, 10.0, 200, 0.0, {5.0, 0.1, 256, 200.0, 1024, std::nullopt, 0}};
    add(hellojs);
    add({"sleep", 4, 10.0, 25, 0.0, {3000.0, 0.0, 256, 200.0, 1024, std::nullopt, 0}});
    add({"matrixMult", 4, 10.0, 200, 0.0, {40.0, 0.1, 256, 200.0, 2048, std::nullopt, 0}});
    // throttled to one request every 11 minutes so the container cache expires
    add({"cold-start", 1, 0.0, 3, 660.0, {5.0, 0.1, 256, 2500.0, 1024, std::nullopt, 0}, 3});
    add({"slackpost", 1, 0.0, 100, 1.0, {5.0, 0.1, 256, 200.0, 1024, std::nullopt, 0}});
    add({"pycatj", 4, 10.0, 200, 0.0, {5.0, 0.1, 256, 200.0, 2048, std::nullopt, 0}});
    add({"mongoDB", 4, 10.0, 200, 0.0, {5.0, 0.1, 256, 200.0, 1024, std::string("mongo"), 106}});
    add({"data-locality", 4, 10.0, 50, 0.0,
         {5.0, 0.1, 256, 200.0, 1024, std::string("mongo"), 124'380'000}});
    return out;
}

// ---------------------------------------------------------------------------
// Campaigns

struct VariantSpec {
    std::string name;
    DistributionPolicy policy = DistributionPolicy::Default;
    bool vanilla = false;
    std::optional<std::string> script_text;
    std::optional<std::string> request_tag;
};

struct CampaignConfig {
    ClusterTopology topology;
    std::vector<VariantSpec> variants;
    std::vector<WorkloadProfile> profiles;
    int runs = 10;
    std::uint64_t seed = kDefaultSeed;
    SimKnobs knobs;
};

struct CampaignResult {
    // per profile, one column per variant, in config order
    std::vector<std::pair<std::string, std::vector<MetricsReport>>> tables;

    const std::vector<MetricsReport>* table(const std::string& profile) const {
        for (const auto& [name, cols] : tables)
            if (name == profile) return &cols;
        return nullptr;
    }
};

// A deployment reshuffle: new worker declaration order and a new co-prime
// salt, like tearing the platform down and back up.
inline ClusterTopology redeploy(const ClusterTopology& base, Rng& rng) {
    ClusterTopology topo = base;
    rng.shuffle(topo.workers);
    return topo;
}

// Runs every (variant, profile) cell: N runs with a fresh deployment every
// two runs. Deployments and per-run seeds depend only on (campaign seed,
// profile, run index), so variants see identical conditions and compare
// pairwise. `jobs` bounds how many independent runs execute in parallel;
// results are assembled by index, so the output does not depend on it.
inline CampaignResult run_campaign(const CampaignConfig& config, int jobs = 1) {
    struct Task {
        const WorkloadProfile* profile;
        const VariantSpec* variant;
        int run = 0;
        std::size_t table = 0, column = 0, slot = 0;
    };
    CampaignResult out;
    std::vector<Task> tasks;
    for (std::size_t pi = 0; pi < config.profiles.size(); ++pi) {
        const WorkloadProfile& profile = config.profiles[pi];
        const int runs = profile.runs_override > 0 ? profile.runs_override : config.runs;
        std::vector<MetricsReport> columns;
        for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
            MetricsReport report;
            report.variant = config.variants[vi].name;
            report.profile = profile.name;
            report.runs.resize(static_cast<std::size_t>(runs));
            columns.push_back(std::move(report));
            for (int run = 0; run < runs; ++run)
                tasks.push_back({&profile, &config.variants[vi], run, pi, vi,
                                 static_cast<std::size_t>(run)});
        }
        out.tables.emplace_back(profile.name, std::move(columns));
    }

    auto run_task = [&](const Task& task) {
        const int deployment = task.run / 2;
        const std::uint64_t deploy_seed =
            hash_combine(hash_combine(config.seed, fnv1a(task.profile->name)),
                         static_cast<std::uint64_t>(deployment));
        Rng deploy_rng(deploy_seed);
        ClusterTopology topo = redeploy(config.topology, deploy_rng);

        SimulationInput input;
        input.topology = &topo;
        input.policy = task.variant->policy;
        input.script_text = task.variant->script_text;
        input.workload = task.profile;
        input.request_tag = task.variant->request_tag;
        input.vanilla = task.variant->vanilla;
        input.seed = hash_combine(hash_combine(config.seed, fnv1a(task.profile->name)),
                                  0x5eedULL + static_cast<std::uint64_t>(task.run));
        input.coprime_salt = deploy_seed;
        input.knobs = config.knobs;
        out.tables[task.table].second[task.column].runs[task.slot] = run_simulation(input).metrics;
    };

    if (jobs <= 1) {
        for (const Task& t : tasks) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), tasks.size());
        for (std::size_t i = 0; i < n_threads; ++i)
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t idx = next.fetch_add(1);
                    if (idx >= tasks.size()) return;
                    run_task(tasks[idx]);
                }
            });
        for (auto& t : pool) t.join();
    }
    return out;
}

} // namespace tapp::sim
