#include <catch_amalgamated.hpp>

#include "tapp/allotment.hpp"
#include "tapp/rng.hpp"

#include "testutil.hpp"

using namespace tapp;

namespace {

ClusterTopology two_controllers_one_worker() {
    ClusterTopology topo;
    topo.zones = {"a", "b"};
    topo.latency_ms_map[{"a", "a"}] = 1;
    topo.latency_ms_map[{"a", "b"}] = 10;
    topo.latency_ms_map[{"b", "b"}] = 1;
    topo.controllers.push_back({"local", "local", ZoneName("a"), true});
    topo.controllers.push_back({"foreign", "foreign", ZoneName("b"), true});
    WorkerNode w;
    w.id = "w";
    w.labels = {"w"};
    w.zone = "a";
    w.memory_capacity_mb = 2048;
    topo.workers.push_back(w);
    return topo;
}

} // namespace

TEST_CASE("default policy splits every worker evenly") {
    ClusterTopology topo = two_controllers_one_worker();
    Allotment a = compute_allotment(topo, DistributionPolicy::Default);
    CHECK(a.grant("local", "w").memory_share_mb == 1024);
    CHECK(a.grant("foreign", "w").memory_share_mb == 1024);
    CHECK(a.grant("local", "w").tier == AccessTier::Primary);
    CHECK(a.grant("foreign", "w").tier == AccessTier::Primary);
}

TEST_CASE("min_memory gives foreign controllers one invocation slot") {
    // worker 2048 MB, one co-located controller, one foreign controller:
    // foreign keeps exactly one 256 MB slot, the local controller gets
    // 2048 - 1*256 = 1792 MB (computed by hand from the policy rule)
    ClusterTopology topo = two_controllers_one_worker();
    Allotment a = compute_allotment(topo, DistributionPolicy::MinMemory);
    CHECK(a.grant("foreign", "w").memory_share_mb == 256);
    CHECK(a.grant("foreign", "w").tier == AccessTier::Primary);
    CHECK(a.grant("local", "w").memory_share_mb == 1792);
}

TEST_CASE("isolated denies foreign controllers") {
    ClusterTopology topo = two_controllers_one_worker();
    Allotment a = compute_allotment(topo, DistributionPolicy::Isolated);
    CHECK(a.grant("local", "w").memory_share_mb == 2048);
    CHECK(a.grant("foreign", "w").tier == AccessTier::Denied);
    CHECK(a.grant("foreign", "w").memory_share_mb == 0);
}

TEST_CASE("shared marks foreign controllers as overflow") {
    ClusterTopology topo = two_controllers_one_worker();
    Allotment a = compute_allotment(topo, DistributionPolicy::Shared);
    CHECK(a.grant("local", "w").memory_share_mb == 2048);
    CHECK(a.grant("foreign", "w").tier == AccessTier::Overflow);
}

TEST_CASE("min_memory errors when foreign slots alone exceed capacity") {
    ClusterTopology topo = two_controllers_one_worker();
    for (int i = 0; i < 9; ++i)
        topo.controllers.push_back({"f" + std::to_string(i), "f" + std::to_string(i), ZoneName("b"), true});
    // 10 foreign controllers * 256 MB = 2560 MB > 2048 MB capacity
    topo.workers[0].memory_capacity_mb = 2048;
    CHECK_THROWS_AS(compute_allotment(topo, DistributionPolicy::MinMemory), AllotmentError);
}

TEST_CASE("zone-less workers: default split, overflow under shared, unreachable under isolated") {
    ClusterTopology topo = two_controllers_one_worker();
    topo.workers[0].zone = std::nullopt;
    CHECK(compute_allotment(topo, DistributionPolicy::MinMemory).grant("local", "w").memory_share_mb ==
          1024);
    CHECK(compute_allotment(topo, DistributionPolicy::Isolated).grant("local", "w").tier ==
          AccessTier::Denied);
    CHECK(compute_allotment(topo, DistributionPolicy::Shared).grant("local", "w").tier ==
          AccessTier::Overflow);
}

namespace {

void check_policy_properties(const ClusterTopology& topo) {
    const DistributionPolicy policies[] = {DistributionPolicy::Default, DistributionPolicy::MinMemory,
                                           DistributionPolicy::Isolated, DistributionPolicy::Shared};
    std::map<DistributionPolicy, Allotment> allotments;
    for (auto p : policies) {
        try {
            allotments[p] = compute_allotment(topo, p);
        } catch (const AllotmentError&) {
            if (p != DistributionPolicy::MinMemory) FAIL("only min_memory may reject a topology");
            return; // oversubscribed min_memory topology; nothing more to check
        }
    }

    // capacity conservation for the static primary shares
    for (auto p : policies) {
        for (const WorkerNode& w : topo.workers) {
            long granted = 0;
            for (const ControllerNode& c : topo.controllers) {
                const AccessGrant& g = allotments[p].grant(c.id, w.id);
                if (g.tier == AccessTier::Primary) granted += g.memory_share_mb;
            }
            CHECK(granted <= w.memory_capacity_mb);
        }
    }

    // eligibility containment: isolated within shared within default
    for (const ControllerNode& c : topo.controllers) {
        for (const WorkerNode& w : topo.workers) {
            bool iso = allotments[DistributionPolicy::Isolated].grant(c.id, w.id).eligible();
            bool sh = allotments[DistributionPolicy::Shared].grant(c.id, w.id).eligible();
            bool def = allotments[DistributionPolicy::Default].grant(c.id, w.id).eligible();
            if (iso) CHECK(sh);
            if (sh) CHECK(def);
        }
    }
}

} // namespace

TEST_CASE("allotment properties hold over random topologies") {
    Rng rng(91);
    for (int i = 0; i < 300; ++i) {
        ClusterTopology topo = testutil::gen_topology(rng);
        check_policy_properties(topo);
    }
}

TEST_CASE("min_memory equals default on fully co-located topologies") {
    Rng rng(92);
    for (int i = 0; i < 100; ++i) {
        ClusterTopology topo = testutil::gen_colocated_topology(rng);
        Allotment mm = compute_allotment(topo, DistributionPolicy::MinMemory);
        Allotment def = compute_allotment(topo, DistributionPolicy::Default);
        for (const ControllerNode& c : topo.controllers)
            for (const WorkerNode& w : topo.workers) {
                CHECK(mm.grant(c.id, w.id).memory_share_mb == def.grant(c.id, w.id).memory_share_mb);
                CHECK(mm.grant(c.id, w.id).tier == def.grant(c.id, w.id).tier);
            }
    }
}

TEST_CASE("allotment values are order-independent") {
    Rng rng(93);
    for (int i = 0; i < 50; ++i) {
        ClusterTopology topo = testutil::gen_topology(rng);
        ClusterTopology shuffled = topo;
        rng.shuffle(shuffled.controllers);
        rng.shuffle(shuffled.workers);
        for (auto policy : {DistributionPolicy::Default, DistributionPolicy::Isolated,
                            DistributionPolicy::Shared}) {
            Allotment a = compute_allotment(topo, policy);
            Allotment b = compute_allotment(shuffled, policy);
            for (const ControllerNode& c : topo.controllers)
                for (const WorkerNode& w : topo.workers) {
                    CHECK(a.grant(c.id, w.id).memory_share_mb == b.grant(c.id, w.id).memory_share_mb);
                    CHECK(a.grant(c.id, w.id).tier == b.grant(c.id, w.id).tier);
                }
        }
    }
}
