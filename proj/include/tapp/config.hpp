#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tapp/markup.hpp"
#include "tapp/simulator.hpp"

namespace tapp::sim {

inline Expected<std::string> read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        return ParseError{ParseError::Kind::Semantic, {0, 0}, "cannot read file `" + path.string() + "`"};
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

namespace detail {

inline std::optional<ParseError> read_number(const DocNode& root, const char* key, double& out,
                                             double min_value) {
    const DocNode* n = root.find(key);
    if (!n) return std::nullopt;
    auto v = n->scalar ? tapp::detail::to_number(*n->scalar) : std::nullopt;
    if (!v || *v < min_value)
        return ParseError{ParseError::Kind::BadValue, n->loc, std::string("invalid value for `") + key + "`"};
    out = *v;
    return std::nullopt;
}

} // namespace detail

// Workload document: top-level load shape plus a `function:` section with
// the per-invocation cost model.
inline Expected<WorkloadProfile> load_workload(std::string_view text) {
    auto doc = parse_document(text);
    if (!doc.ok()) return doc.error();
    const DocNode& root = doc.value();
    WorkloadProfile wl;
    const DocNode* name = root.find("name");
    if (!name || !name->scalar)
        return ParseError{ParseError::Kind::Semantic, {1, 1}, "workload requires a `name`"};
    wl.name = *name->scalar;
    double users = 1, reps = 1, ramp = 0, pause = 0;
    if (auto e = detail::read_number(root, "users", users, 1)) return *e;
    if (auto e = detail::read_number(root, "repetitions", reps, 1)) return *e;
    if (auto e = detail::read_number(root, "ramp_up_s", ramp, 0)) return *e;
    if (auto e = detail::read_number(root, "pause_s", pause, 0)) return *e;
    wl.users = static_cast<int>(users);
    wl.repetitions = static_cast<int>(reps);
    wl.ramp_up_s = ramp;
    wl.pause_s = pause;
    if (const DocNode* fn = root.find("function")) {
        double v = 0;
        if (auto e = detail::read_number(*fn, "exec_ms", wl.function.exec_ms, 0)) return *e;
        if (auto e = detail::read_number(*fn, "exec_jitter", wl.function.exec_jitter, 0)) return *e;
        if (fn->find("memory_mb")) {
            if (auto e = detail::read_number(*fn, "memory_mb", v, 1)) return *e;
            wl.function.memory_mb = static_cast<int>(v);
        }
        if (auto e = detail::read_number(*fn, "init_ms", wl.function.init_ms, 0)) return *e;
        if (fn->find("payload_bytes")) {
            if (auto e = detail::read_number(*fn, "payload_bytes", v, 0)) return *e;
            wl.function.payload_bytes = static_cast<std::int64_t>(v);
        }
        if (const DocNode* svc = fn->find("data_service")) {
            if (!svc->scalar)
                return ParseError{ParseError::Kind::BadValue, svc->loc, "data_service must be a name"};
            wl.function.data_service = *svc->scalar;
        }
        if (fn->find("data_bytes")) {
            if (auto e = detail::read_number(*fn, "data_bytes", v, 0)) return *e;
            wl.function.data_bytes = static_cast<std::int64_t>(v);
        }
    }
    return wl;
}

inline std::optional<ParseError> apply_knobs(const DocNode& root, SimKnobs& knobs) {
    const DocNode* k = root.find("knobs");
    if (!k) return std::nullopt;
    if (auto e = detail::read_number(*k, "intra_zone_bw_mbps", knobs.intra_zone_bw_mbps, 0.001)) return e;
    if (auto e = detail::read_number(*k, "cross_zone_bw_mbps", knobs.cross_zone_bw_mbps, 0.001)) return e;
    if (auto e = detail::read_number(*k, "cold_cache_ttl_s", knobs.cold_cache_ttl_s, 0)) return e;
    if (auto e = detail::read_number(*k, "vanilla_sched_overhead_ms", knobs.vanilla_sched_overhead_ms, 0))
        return e;
    if (auto e = detail::read_number(*k, "tapp_sched_overhead_ms", knobs.tapp_sched_overhead_ms, 0)) return e;
    double v = 0;
    if (k->find("overload_threshold")) {
        if (auto e = detail::read_number(*k, "overload_threshold", v, 1)) return e;
        knobs.overload_threshold = static_cast<int>(v);
    }
    if (k->find("policy_staleness_ms")) {
        if (auto e = detail::read_number(*k, "policy_staleness_ms", v, 0)) return e;
        knobs.policy_staleness_ms = static_cast<std::int64_t>(v);
    }
    return std::nullopt;
}

// Campaign document: topology path, variant list, profile list (builtin
// names or workload file paths), run count, seed, optional knobs. File
// references resolve relative to `base_dir`.
inline Expected<CampaignConfig> load_campaign(std::string_view text, const std::filesystem::path& base_dir) {
    auto doc = parse_document(text);
    if (!doc.ok()) return doc.error();
    const DocNode& root = doc.value();
    CampaignConfig config;

    const DocNode* topo_node = root.find("topology");
    if (!topo_node || !topo_node->scalar)
        return ParseError{ParseError::Kind::Semantic, {1, 1}, "campaign requires a `topology` file path"};
    auto topo_text = read_file(base_dir / *topo_node->scalar);
    if (!topo_text.ok()) return topo_text.error();
    auto topo = load_topology(topo_text.value());
    if (!topo.ok()) return topo.error();
    config.topology = std::move(topo.value());

    double v = 0;
    if (root.find("runs")) {
        if (auto e = detail::read_number(root, "runs", v, 1)) return *e;
        config.runs = static_cast<int>(v);
    }
    if (root.find("seed")) {
        if (auto e = detail::read_number(root, "seed", v, 0)) return *e;
        config.seed = static_cast<std::uint64_t>(v);
    }
    if (auto e = apply_knobs(root, config.knobs)) return *e;

    const DocNode* profiles = root.find("profiles");
    if (!profiles)
        return ParseError{ParseError::Kind::Semantic, {1, 1}, "campaign requires a `profiles` list"};
    auto builtins = builtin_profiles();
    for (const DocNode& p : profiles->items) {
        if (!p.scalar)
            return ParseError{ParseError::Kind::BadValue, p.loc, "profile entries must be names or paths"};
        auto it = builtins.find(*p.scalar);
        if (it != builtins.end()) {
            config.profiles.push_back(it->second);
        } else {
            auto wl_text = read_file(base_dir / *p.scalar);
            if (!wl_text.ok())
                return ParseError{ParseError::Kind::BadValue, p.loc,
                                  "unknown profile `" + *p.scalar + "` (not a builtin, not a readable file)"};
            auto wl = load_workload(wl_text.value());
            if (!wl.ok()) return wl.error();
            config.profiles.push_back(std::move(wl.value()));
        }
    }

    const DocNode* variants = root.find("variants");
    if (!variants)
        return ParseError{ParseError::Kind::Semantic, {1, 1}, "campaign requires a `variants` list"};
    for (const DocNode& item : variants->items) {
        VariantSpec spec;
        const DocNode* name = item.find("name");
        if (!name || !name->scalar)
            return ParseError{ParseError::Kind::Semantic, item.loc, "variant requires a `name`"};
        spec.name = *name->scalar;
        if (const DocNode* vn = item.find("vanilla")) spec.vanilla = vn->scalar && *vn->scalar == "true";
        if (const DocNode* pol = item.find("policy")) {
            auto parsed = pol->scalar ? parse_policy(*pol->scalar) : std::nullopt;
            if (!parsed)
                return ParseError{ParseError::Kind::BadValue, pol->loc,
                                  "unknown policy (default | min_memory | isolated | shared)"};
            spec.policy = *parsed;
        }
        if (const DocNode* script = item.find("script")) {
            if (!script->scalar)
                return ParseError{ParseError::Kind::BadValue, script->loc, "script must be a file path"};
            auto stext = read_file(base_dir / *script->scalar);
            if (!stext.ok()) return stext.error();
            auto parsed = parse_script(stext.value());
            if (!parsed.ok()) return parsed.error();
            spec.script_text = stext.value();
        }
        if (const DocNode* tag = item.find("tag")) {
            if (!tag->scalar) return ParseError{ParseError::Kind::BadValue, tag->loc, "tag must be a name"};
            spec.request_tag = *tag->scalar;
        }
        config.variants.push_back(std::move(spec));
    }
    return config;
}

} // namespace tapp::sim
