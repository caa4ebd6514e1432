#include <atomic>
#include <thread>

#include <catch_amalgamated.hpp>

#include "tapp/watcher.hpp"

#include "testutil.hpp"

using namespace tapp;

namespace {

ClusterTopology casestudy() {
    auto topo = load_topology(testutil::slurp(testutil::data_file("casestudy.topo.yml")));
    REQUIRE(topo.ok());
    return topo.value();
}

} // namespace

TEST_CASE("snapshots carry labels, zones and liveness") {
    Watcher watcher(casestudy());
    TopologySnapshot snap = watcher.snapshot();
    CHECK(snap.version == 1);
    auto labels = snap.label_map();
    REQUIRE(labels.count("edge"));
    CHECK(labels["edge"] == std::set<NodeId>{"W1", "W2"});
    REQUIRE(labels.count("LocalCtl_1"));
    CHECK(snap.alive("W5"));
    CHECK(*snap.zone_of("CloudCtl") == "cloud");
}

TEST_CASE("snapshot versions strictly increase") {
    Watcher watcher(casestudy());
    TopologySnapshot a = watcher.snapshot();
    TopologySnapshot b = watcher.snapshot();
    CHECK(b.version == a.version + 1);
    // same content apart from version
    CHECK(a.nodes.size() == b.nodes.size());
    CHECK(a.label_map() == b.label_map());
}

TEST_CASE("liveness overrides mark nodes down") {
    Watcher watcher(casestudy());
    TopologySnapshot snap = watcher.snapshot({{"W1", false}, {"CloudCtl", false}});
    CHECK(!snap.alive("W1"));
    CHECK(!snap.alive("CloudCtl"));
    CHECK(snap.alive("W2"));
}

TEST_CASE("apply_event produces single-field deltas") {
    Watcher watcher(casestudy());
    TopologySnapshot snap = watcher.snapshot();

    SECTION("node down") {
        auto next = apply_event(snap, ClusterEvent::node_down("LocalCtl_1"));
        REQUIRE(next.ok());
        CHECK(next.value().version == snap.version + 1);
        CHECK(!next.value().alive("LocalCtl_1"));
        CHECK(next.value().alive("LocalCtl_2"));
        CHECK(next.value().label_map() == snap.label_map());
    }
    SECTION("relabel moves a worker between sets") {
        auto next = apply_event(snap, ClusterEvent::label_changed("W3", {"cloud"}));
        REQUIRE(next.ok());
        auto labels = next.value().label_map();
        CHECK(labels["internal"] == std::set<NodeId>{"W4"});
        CHECK(labels["cloud"].count("W3") == 1);
    }
    SECTION("unknown node is an error except for node_up") {
        CHECK(!apply_event(snap, ClusterEvent::node_down("nope")).ok());
        CHECK(apply_event(snap, ClusterEvent::node_up("newbie")).ok());
    }
    SECTION("policy updates are rejected here") {
        CHECK(!apply_event(snap, ClusterEvent::policy_updated("default:\n - workers:\n    - *\n")).ok());
    }
}

TEST_CASE("policy store swaps scripts atomically") {
    PolicyStore store;
    CHECK(store.current() == nullptr);

    auto v1 = store.update("t:\n - workers:\n    - w1\n");
    REQUIRE(v1.ok());
    CHECK(v1.value() == 1);
    auto cur = store.current();
    REQUIRE(cur);
    CHECK(cur->version == 1);
    CHECK(cur->script.tags.size() == 1);
    // canonicalized on the way in
    CHECK(cur->script.tags[0].second.followup == Followup::Default);

    SECTION("a broken update leaves no trace") {
        auto bad = store.update("t:\n - workers: []\n");
        REQUIRE(!bad.ok());
        CHECK(store.current()->version == 1);
        CHECK(store.current()->source_text == "t:\n - workers:\n    - w1\n");
    }
    SECTION("subscribers observe the new version") {
        std::int64_t seen = 0;
        store.subscribe([&](std::int64_t v) { seen = v; });
        auto v2 = store.update("u:\n - workers:\n    - w2\n");
        REQUIRE(v2.ok());
        CHECK(seen == v2.value());
        CHECK(store.current()->version == v2.value());
    }
}

TEST_CASE("concurrent readers always see a complete version") {
    PolicyStore store;
    // version k has exactly k tags, so content and version are checkable
    auto script_with_tags = [](int n) {
        std::string s;
        for (int i = 0; i < n; ++i) s += "tag" + std::to_string(i) + ":\n - workers:\n    - w\n";
        return s;
    };
    REQUIRE(store.update(script_with_tags(1)).ok());

    std::atomic<bool> stop{false};
    std::atomic<int> inconsistencies{0};
    std::vector<std::thread> readers;
    for (int r = 0; r < 4; ++r) {
        readers.emplace_back([&] {
            std::int64_t last_version = 0;
            while (!stop.load(std::memory_order_relaxed)) {
                auto cur = store.current();
                if (!cur) continue;
                // self-consistency: tags match the version; monotone reads
                if (static_cast<std::int64_t>(cur->script.tags.size()) != cur->version ||
                    cur->version < last_version)
                    inconsistencies.fetch_add(1);
                last_version = cur->version;
            }
        });
    }
    for (int v = 2; v <= 40; ++v) {
        REQUIRE(store.update(script_with_tags(v)).ok());
        if (v % 5 == 0) REQUIRE(!store.update("broken: [\n").ok()); // rejected, invisible
    }
    stop.store(true);
    for (auto& t : readers) t.join();
    CHECK(inconsistencies.load() == 0);
    CHECK(store.current()->version == 40);
}

TEST_CASE("timeline documents load and resolve script files") {
    auto timeline = load_timeline(testutil::slurp(testutil::data_file("reload.timeline.yml")),
                                  std::string(TAPP_DATA_DIR));
    REQUIRE(timeline.ok());
    REQUIRE(timeline.value().size() == 1);
    CHECK(timeline.value()[0].at_ms == 30000);
    CHECK(timeline.value()[0].event.kind == ClusterEvent::Kind::PolicyUpdated);
    CHECK(timeline.value()[0].event.script_text.find("data:") != std::string::npos);

    auto bad = load_timeline("timeline:\n  - at_ms: 5\n    event: explode\n");
    REQUIRE(!bad.ok());
}
