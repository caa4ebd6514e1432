#pragma once

#include <string>

#include <json.hpp>

#include "tapp/scheduler.hpp"
#include "tapp/simulator.hpp"

namespace tapp {

// Line-delimited structured records for decision traces and per-request
// results; one JSON object per line, consumed by the invariant checker and
// by anyone debugging a run.

inline nlohmann::json to_json(const TraceStep& step) {
    nlohmann::json j;
    j["step"] = to_string(step.kind);
    if (!step.detail.empty()) j["detail"] = step.detail;
    if (!step.tag.empty()) j["tag"] = step.tag;
    if (step.block_index >= 0) j["block"] = step.block_index;
    if (step.clause_index >= 0) j["clause"] = step.clause_index;
    if (!step.controller.empty()) j["controller"] = step.controller;
    if (!step.worker.empty()) j["worker"] = step.worker;
    return j;
}

inline std::string trace_records(const std::vector<TraceStep>& trace) {
    std::string out;
    for (const TraceStep& step : trace) {
        out += to_json(step).dump();
        out += '\n';
    }
    return out;
}

inline nlohmann::json to_json(const sim::RequestRecord& rec) {
    nlohmann::json j;
    j["request"] = rec.request_id;
    j["function"] = rec.function_id;
    j["arrival_us"] = rec.arrival_us;
    j["response_us"] = rec.response_us;
    j["latency_us"] = rec.latency_us();
    j["failed"] = rec.failed;
    if (rec.failed) j["reason"] = rec.failure_reason;
    if (!rec.controller.empty()) j["controller"] = rec.controller;
    if (!rec.worker.empty()) j["worker"] = rec.worker;
    j["sched_us"] = rec.sched_us;
    j["net_us"] = rec.net_us;
    j["cold_us"] = rec.cold_us;
    j["data_us"] = rec.data_us;
    j["exec_us"] = rec.exec_us;
    j["script_version"] = rec.script_version;
    j["snapshot_version"] = rec.snapshot_version;
    j["retries"] = rec.retries;
    return j;
}

inline std::string run_records(const sim::RunResult& result) {
    std::string out;
    for (const auto& rec : result.records) {
        out += to_json(rec).dump();
        out += '\n';
    }
    return out;
}

} // namespace tapp
