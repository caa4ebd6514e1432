#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tapp/ast.hpp"
#include "tapp/markup.hpp"

namespace tapp {

using NodeId = std::string;
using ZoneName = std::string;

struct ControllerNode {
    NodeId id;
    Label label;
    std::optional<ZoneName> zone;
    bool alive = true;
};

struct WorkerNode {
    NodeId id;
    std::vector<Label> labels; // non-empty
    std::optional<ZoneName> zone;
    int memory_capacity_mb = 0;
    int invocation_slot_mb = 256; // one invocation's memory, per the platform default
    bool alive = true;

    bool has_label(const Label& l) const {
        return std::find(labels.begin(), labels.end(), l) != labels.end();
    }
};

struct ExternalService {
    std::string name;
    ZoneName zone;
};

// The physical cluster: zones, controllers, workers, the symmetric
// inter-zone latency matrix, and the external services workloads talk to.
// Immutable after load; declaration order of nodes is significant (it is
// the stable order every selector and fallback uses).
struct ClusterTopology {
    std::vector<ZoneName> zones;
    std::vector<ControllerNode> controllers;
    std::vector<WorkerNode> workers;
    std::map<std::pair<ZoneName, ZoneName>, double> latency_ms_map; // normalized key order
    std::vector<ExternalService> external_services;
    std::optional<ZoneName> gateway_zone;

    const ControllerNode* find_controller_by_label(const Label& label) const {
        for (const auto& c : controllers)
            if (c.label == label) return &c;
        return nullptr;
    }

    const ControllerNode* find_controller(const NodeId& id) const {
        for (const auto& c : controllers)
            if (c.id == id) return &c;
        return nullptr;
    }

    const WorkerNode* find_worker(const NodeId& id) const {
        for (const auto& w : workers)
            if (w.id == id) return &w;
        return nullptr;
    }

    std::vector<const WorkerNode*> workers_with_label(const Label& label) const {
        std::vector<const WorkerNode*> out;
        for (const auto& w : workers)
            if (w.has_label(label)) out.push_back(&w);
        return out;
    }

    const ExternalService* find_service(const std::string& name) const {
        for (const auto& s : external_services)
            if (s.name == name) return &s;
        return nullptr;
    }

    // Latency between zones, in ms. Zone-less endpoints cost nothing.
    double latency_ms(const std::optional<ZoneName>& a, const std::optional<ZoneName>& b) const {
        if (!a || !b) return 0.0;
        auto key = *a <= *b ? std::make_pair(*a, *b) : std::make_pair(*b, *a);
        auto it = latency_ms_map.find(key);
        return it == latency_ms_map.end() ? 0.0 : it->second;
    }

    bool has_latency(const ZoneName& a, const ZoneName& b) const {
        auto key = a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
        return latency_ms_map.count(key) > 0;
    }
};

// Workers selected by one worker clause, in topology declaration order.
// An empty result is legal; the scheduler treats it as an exhausted clause.
inline std::vector<const WorkerNode*> resolve_selector(const ClusterTopology& topology,
                                                       const WorkerClause& clause) {
    std::vector<const WorkerNode*> out;
    for (const auto& w : topology.workers) {
        if (clause.kind == WorkerClause::Kind::Named || clause.label) {
            if (w.has_label(*clause.label)) out.push_back(&w);
        } else {
            out.push_back(&w); // unscoped `*`: every worker
        }
    }
    return out;
}

namespace detail {

inline std::optional<double> to_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline ParseError doc_error(const DocNode& n, std::string msg,
                            ParseError::Kind kind = ParseError::Kind::Semantic) {
    return ParseError{kind, n.loc, std::move(msg)};
}

} // namespace detail

// Loads a topology document. Top-level keys: `zones`, `controllers`,
// `workers`, `latency_ms`, `services`, `gateway_zone`. The latency list
// gives `[zoneA, zoneB, ms]` triples; every unordered zone pair (including
// a zone with itself) must be covered exactly once.
inline Expected<ClusterTopology> load_topology(std::string_view text) {
    using detail::doc_error;
    auto doc = parse_document(text);
    if (!doc.ok()) return doc.error();
    const DocNode& root = doc.value();

    ClusterTopology topo;
    std::set<std::string> zone_set;
    std::set<NodeId> ids;
    std::set<Label> controller_labels;

    auto check_zone = [&](const DocNode& node, const std::string& z) -> std::optional<ParseError> {
        if (!zone_set.count(z))
            return doc_error(node, "unknown zone `" + z + "`");
        return std::nullopt;
    };

    if (const DocNode* zones = root.find("zones")) {
        for (const DocNode& z : zones->items) {
            if (!z.scalar) return doc_error(z, "zone entries must be names");
            if (!zone_set.insert(*z.scalar).second) return doc_error(z, "duplicate zone `" + *z.scalar + "`");
            topo.zones.push_back(*z.scalar);
        }
    }

    if (const DocNode* ctls = root.find("controllers")) {
        for (const DocNode& c : ctls->items) {
            ControllerNode node;
            const DocNode* id = c.find("id");
            if (!id || !id->scalar) return doc_error(c, "controller requires an `id`");
            node.id = *id->scalar;
            if (!ids.insert(node.id).second) return doc_error(c, "duplicate node id `" + node.id + "`");
            const DocNode* label = c.find("label");
            node.label = label && label->scalar ? *label->scalar : node.id;
            if (!controller_labels.insert(node.label).second)
                return doc_error(c, "duplicate controller label `" + node.label + "`");
            if (const DocNode* zone = c.find("zone")) {
                if (!zone->scalar) return doc_error(*zone, "zone must be a name");
                if (auto e = check_zone(*zone, *zone->scalar)) return *e;
                node.zone = *zone->scalar;
            }
            topo.controllers.push_back(std::move(node));
        }
    }

    if (const DocNode* workers = root.find("workers")) {
        for (const DocNode& w : workers->items) {
            WorkerNode node;
            const DocNode* id = w.find("id");
            if (!id || !id->scalar) return doc_error(w, "worker requires an `id`");
            node.id = *id->scalar;
            if (!ids.insert(node.id).second) return doc_error(w, "duplicate node id `" + node.id + "`");
            const DocNode* labels = w.find("labels");
            if (!labels || labels->items.empty())
                return doc_error(w, "worker `" + node.id + "` requires a non-empty `labels` list");
            for (const DocNode& l : labels->items) {
                if (!l.scalar) return doc_error(l, "labels must be names");
                node.labels.push_back(*l.scalar);
            }
            if (const DocNode* zone = w.find("zone")) {
                if (!zone->scalar) return doc_error(*zone, "zone must be a name");
                if (auto e = check_zone(*zone, *zone->scalar)) return *e;
                node.zone = *zone->scalar;
            }
            const DocNode* mem = w.find("memory_mb");
            if (!mem || !mem->scalar) return doc_error(w, "worker `" + node.id + "` requires `memory_mb`");
            auto mv = detail::to_number(*mem->scalar);
            if (!mv || *mv <= 0) return doc_error(*mem, "memory_mb must be a positive number");
            node.memory_capacity_mb = static_cast<int>(*mv);
            if (const DocNode* slot = w.find("invocation_slot_mb")) {
                auto sv = slot->scalar ? detail::to_number(*slot->scalar) : std::nullopt;
                if (!sv || *sv <= 0) return doc_error(*slot, "invocation_slot_mb must be a positive number");
                node.invocation_slot_mb = static_cast<int>(*sv);
            }
            if (node.memory_capacity_mb < node.invocation_slot_mb)
                return doc_error(w, "worker `" + node.id + "` memory_mb is below one invocation slot");
            topo.workers.push_back(std::move(node));
        }
    }

    if (const DocNode* lat = root.find("latency_ms")) {
        for (const DocNode& entry : lat->items) {
            if (entry.items.size() != 3 || !entry.items[0].scalar || !entry.items[1].scalar ||
                !entry.items[2].scalar)
                return doc_error(entry, "latency entries must be `[zoneA, zoneB, ms]` triples");
            const std::string& za = *entry.items[0].scalar;
            const std::string& zb = *entry.items[1].scalar;
            if (auto e = check_zone(entry, za)) return *e;
            if (auto e = check_zone(entry, zb)) return *e;
            auto ms = detail::to_number(*entry.items[2].scalar);
            if (!ms || *ms < 0) return doc_error(entry, "latency must be a non-negative number");
            auto key = za <= zb ? std::make_pair(za, zb) : std::make_pair(zb, za);
            auto [it, inserted] = topo.latency_ms_map.emplace(key, *ms);
            if (!inserted && it->second != *ms)
                return doc_error(entry, "asymmetric latency entry for zones `" + za + "` and `" + zb + "`");
        }
    }

    // every unordered pair (including self) must be present
    for (std::size_t i = 0; i < topo.zones.size(); ++i)
        for (std::size_t j = i; j < topo.zones.size(); ++j)
            if (!topo.has_latency(topo.zones[i], topo.zones[j]))
                return doc_error(root, "missing latency entry for zones `" + topo.zones[i] + "` and `" +
                                           topo.zones[j] + "`");

    if (const DocNode* services = root.find("services")) {
        for (const DocNode& s : services->items) {
            const DocNode* name = s.find("name");
            const DocNode* zone = s.find("zone");
            if (!name || !name->scalar || !zone || !zone->scalar)
                return doc_error(s, "service requires `name` and `zone`");
            if (auto e = check_zone(*zone, *zone->scalar)) return *e;
            topo.external_services.push_back({*name->scalar, *zone->scalar});
        }
    }

    if (const DocNode* gw = root.find("gateway_zone")) {
        if (!gw->scalar) return doc_error(*gw, "gateway_zone must be a name");
        if (auto e = check_zone(*gw, *gw->scalar)) return *e;
        topo.gateway_zone = *gw->scalar;
    }

    for (const auto& [key, value] : root.entries) {
        if (key != "zones" && key != "controllers" && key != "workers" && key != "latency_ms" &&
            key != "services" && key != "gateway_zone")
            return doc_error(value, "unknown topology key `" + key + "`", ParseError::Kind::UnknownKeyword);
    }
    return topo;
}

} // namespace tapp
