#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tapp/markup.hpp"
#include "tapp/parser.hpp"
#include "tapp/topology.hpp"

namespace tapp {

// Versioned view of the cluster as the watcher sees it: which nodes exist,
// their labels and zones, and whether they are alive. Snapshots are values;
// every change produces a new one with a strictly larger version.
struct TopologySnapshot {
    struct NodeInfo {
        bool is_controller = false;
        std::vector<Label> labels;
        std::optional<ZoneName> zone;
        bool alive = true;
    };

    std::int64_t version = 0;
    std::map<NodeId, NodeInfo> nodes;
    std::vector<NodeId> controller_order; // declaration order
    std::vector<NodeId> worker_order;

    const NodeInfo* find(const NodeId& id) const {
        auto it = nodes.find(id);
        return it == nodes.end() ? nullptr : &it->second;
    }

    bool alive(const NodeId& id) const {
        const NodeInfo* n = find(id);
        return n && n->alive;
    }

    std::optional<ZoneName> zone_of(const NodeId& id) const {
        const NodeInfo* n = find(id);
        return n ? n->zone : std::nullopt;
    }

    bool node_has_label(const NodeId& id, const Label& l) const {
        const NodeInfo* n = find(id);
        if (!n) return false;
        for (const Label& x : n->labels)
            if (x == l) return true;
        return false;
    }

    // label -> node ids, over all nodes
    std::map<Label, std::set<NodeId>> label_map() const {
        std::map<Label, std::set<NodeId>> out;
        for (const auto& [id, info] : nodes)
            for (const Label& l : info.labels) out[l].insert(id);
        return out;
    }

    // The controller node currently carrying `label`, if any.
    const NodeId* controller_with_label(const Label& label) const {
        for (const NodeId& id : controller_order)
            if (node_has_label(id, label)) return &id;
        return nullptr;
    }
};

struct ClusterEvent {
    enum class Kind { NodeUp, NodeDown, LabelChanged, ZoneChanged, PolicyUpdated };
    Kind kind = Kind::NodeDown;
    NodeId node;
    std::vector<Label> labels;       // LabelChanged
    std::optional<ZoneName> zone;    // ZoneChanged
    std::string script_text;         // PolicyUpdated

    static ClusterEvent node_up(NodeId id) { return {Kind::NodeUp, std::move(id), {}, std::nullopt, {}}; }
    static ClusterEvent node_down(NodeId id) { return {Kind::NodeDown, std::move(id), {}, std::nullopt, {}}; }
    static ClusterEvent label_changed(NodeId id, std::vector<Label> labels) {
        return {Kind::LabelChanged, std::move(id), std::move(labels), std::nullopt, {}};
    }
    static ClusterEvent zone_changed(NodeId id, std::optional<ZoneName> zone) {
        return {Kind::ZoneChanged, std::move(id), {}, std::move(zone), {}};
    }
    static ClusterEvent policy_updated(std::string text) {
        return {Kind::PolicyUpdated, {}, {}, std::nullopt, std::move(text)};
    }
};

inline TopologySnapshot make_snapshot(const ClusterTopology& topology, std::int64_t version,
                                      const std::map<NodeId, bool>& liveness_overrides = {}) {
    TopologySnapshot snap;
    snap.version = version;
    auto liveness = [&](const NodeId& id, bool base) {
        auto it = liveness_overrides.find(id);
        return it == liveness_overrides.end() ? base : it->second;
    };
    for (const ControllerNode& c : topology.controllers) {
        snap.nodes[c.id] = {true, {c.label}, c.zone, liveness(c.id, c.alive)};
        snap.controller_order.push_back(c.id);
    }
    for (const WorkerNode& w : topology.workers) {
        snap.nodes[w.id] = {false, w.labels, w.zone, liveness(w.id, w.alive)};
        snap.worker_order.push_back(w.id);
    }
    return snap;
}

// In-process stand-in for the watcher service: owns the topology and hands
// out snapshots with strictly increasing versions.
class Watcher {
public:
    explicit Watcher(ClusterTopology topology) : topology_(std::move(topology)) {}

    const ClusterTopology& topology() const { return topology_; }

    TopologySnapshot snapshot(const std::map<NodeId, bool>& liveness_overrides = {}) {
        return make_snapshot(topology_, next_version_++, liveness_overrides);
    }

private:
    ClusterTopology topology_;
    std::int64_t next_version_ = 1;
};

// Applies one cluster event, yielding a snapshot with version + 1. Only
// NodeUp may reference a node the snapshot has never seen (a joining node;
// it stays unschedulable until the topology itself knows it). Policy
// updates do not belong here - they go through the PolicyStore.
inline Expected<TopologySnapshot> apply_event(const TopologySnapshot& snap, const ClusterEvent& ev) {
    if (ev.kind == ClusterEvent::Kind::PolicyUpdated)
        return ParseError{ParseError::Kind::Semantic, {0, 0},
                          "PolicyUpdated events must be routed through the policy store"};
    TopologySnapshot next = snap;
    next.version = snap.version + 1;
    auto it = next.nodes.find(ev.node);
    if (it == next.nodes.end()) {
        if (ev.kind != ClusterEvent::Kind::NodeUp)
            return ParseError{ParseError::Kind::Semantic, {0, 0}, "unknown node id `" + ev.node + "`"};
        next.nodes[ev.node] = {false, ev.labels, ev.zone, true};
        next.worker_order.push_back(ev.node);
        return next;
    }
    switch (ev.kind) {
        case ClusterEvent::Kind::NodeUp: it->second.alive = true; break;
        case ClusterEvent::Kind::NodeDown: it->second.alive = false; break;
        case ClusterEvent::Kind::LabelChanged: it->second.labels = ev.labels; break;
        case ClusterEvent::Kind::ZoneChanged: it->second.zone = ev.zone; break;
        case ClusterEvent::Kind::PolicyUpdated: break; // unreachable
    }
    return next;
}

// Single global copy of the active TAPP script, swapped atomically on
// update. Readers hold an immutable versioned value, so a reader can never
// observe a half-applied update; a rejected update leaves no trace.
class PolicyStore {
public:
    struct Versioned {
        AppScript script;
        std::int64_t version = 0;
        std::string source_text;
    };

    using Subscriber = std::function<void(std::int64_t version)>;

    PolicyStore() = default;

    Expected<std::int64_t> update(std::string_view text) {
        auto parsed = parse_script(text);
        if (!parsed.ok()) return parsed.error();
        AppScript canon = canonicalize(std::move(parsed.value()));
        std::vector<Subscriber> to_notify;
        std::int64_t version = 0;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            version = next_version_++;
            canon.source_version = version;
            auto v = std::make_shared<Versioned>();
            v->script = std::move(canon);
            v->version = version;
            v->source_text = std::string(text);
            current_ = std::move(v);
            to_notify = subscribers_;
        }
        for (const auto& s : to_notify) s(version);
        return version;
    }

    std::shared_ptr<const Versioned> current() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return current_;
    }

    void subscribe(Subscriber fn) {
        std::lock_guard<std::mutex> lock(mutex_);
        subscribers_.push_back(std::move(fn));
    }

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const Versioned> current_;
    std::vector<Subscriber> subscribers_;
    std::int64_t next_version_ = 1;
};

struct TimedEvent {
    std::int64_t at_ms = 0;
    ClusterEvent event;
};

// Timeline document: `timeline:` followed by `(at_ms, event)` records.
// `policy_update` entries name a script file, loaded eagerly relative to
// `base_dir` so a broken reference fails at load time.
inline Expected<std::vector<TimedEvent>> load_timeline(std::string_view text,
                                                       const std::filesystem::path& base_dir = ".") {
    auto doc = parse_document(text);
    if (!doc.ok()) return doc.error();
    const DocNode* list = doc.value().find("timeline");
    if (!list)
        return ParseError{ParseError::Kind::Semantic, {1, 1}, "timeline document requires a `timeline:` list"};
    std::vector<TimedEvent> out;
    for (const DocNode& item : list->items) {
        TimedEvent te;
        const DocNode* at = item.find("at_ms");
        if (!at || !at->scalar) return ParseError{ParseError::Kind::Semantic, item.loc, "event requires `at_ms`"};
        auto ms = detail::to_number(*at->scalar);
        if (!ms || *ms < 0) return ParseError{ParseError::Kind::BadValue, at->loc, "at_ms must be non-negative"};
        te.at_ms = static_cast<std::int64_t>(*ms);
        const DocNode* kind = item.find("event");
        if (!kind || !kind->scalar)
            return ParseError{ParseError::Kind::Semantic, item.loc, "event requires an `event` kind"};
        const std::string& k = *kind->scalar;
        auto node_of = [&]() -> const DocNode* { return item.find("node"); };
        if (k == "node_up" || k == "node_down") {
            const DocNode* node = node_of();
            if (!node || !node->scalar)
                return ParseError{ParseError::Kind::Semantic, item.loc, k + " requires `node`"};
            te.event = k == "node_up" ? ClusterEvent::node_up(*node->scalar)
                                      : ClusterEvent::node_down(*node->scalar);
        } else if (k == "label_changed") {
            const DocNode* node = node_of();
            const DocNode* labels = item.find("labels");
            if (!node || !node->scalar || !labels)
                return ParseError{ParseError::Kind::Semantic, item.loc, "label_changed requires `node` and `labels`"};
            std::vector<Label> ls;
            for (const DocNode& l : labels->items)
                if (l.scalar) ls.push_back(*l.scalar);
            te.event = ClusterEvent::label_changed(*node->scalar, std::move(ls));
        } else if (k == "zone_changed") {
            const DocNode* node = node_of();
            const DocNode* zone = item.find("zone");
            if (!node || !node->scalar)
                return ParseError{ParseError::Kind::Semantic, item.loc, "zone_changed requires `node`"};
            te.event = ClusterEvent::zone_changed(*node->scalar,
                                                  zone && zone->scalar ? std::optional<ZoneName>(*zone->scalar)
                                                                       : std::nullopt);
        } else if (k == "policy_update") {
            const DocNode* file = item.find("script_file");
            if (!file || !file->scalar)
                return ParseError{ParseError::Kind::Semantic, item.loc, "policy_update requires `script_file`"};
            std::filesystem::path p = base_dir / *file->scalar;
            std::ifstream in(p);
            if (!in)
                return ParseError{ParseError::Kind::Semantic, file->loc,
                                  "cannot read script file `" + p.string() + "`"};
            std::ostringstream buf;
            buf << in.rdbuf();
            te.event = ClusterEvent::policy_updated(buf.str());
        } else {
            return ParseError{ParseError::Kind::BadValue, kind->loc, "unknown event kind `" + k + "`"};
        }
        out.push_back(std::move(te));
    }
    return out;
}

} // namespace tapp
