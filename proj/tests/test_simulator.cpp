#include <map>

#include <catch_amalgamated.hpp>

#include "tapp/config.hpp"
#include "tapp/records.hpp"
#include "tapp/simulator.hpp"

#include "testutil.hpp"

using namespace tapp;
using namespace tapp::sim;

namespace {

ClusterTopology benchmark_topo() {
    auto topo = load_topology(testutil::slurp(testutil::data_file("benchmark.topo.yml")));
    REQUIRE(topo.ok());
    return topo.value();
}

SimulationInput base_input(const ClusterTopology& topo, const WorkloadProfile& wl) {
    SimulationInput in;
    in.topology = &topo;
    in.workload = &wl;
    in.seed = 42;
    return in;
}

} // namespace

TEST_CASE("builtin profiles carry the published load shapes") {
    auto profiles = builtin_profiles();
    REQUIRE(profiles.size() == 8);
    CHECK(profiles.at("sleep").function.exec_ms == 3000.0);
    CHECK(profiles.at("sleep").repetitions == 25);
    CHECK(profiles.at("cold-start").users == 1);
    CHECK(profiles.at("cold-start").repetitions == 3);
    CHECK(profiles.at("cold-start").pause_s == 660.0);
    CHECK(profiles.at("cold-start").runs_override == 3);
    CHECK(profiles.at("mongoDB").function.data_bytes == 106);
    CHECK(profiles.at("data-locality").users == 4);
    CHECK(profiles.at("data-locality").repetitions == 50);
    CHECK(profiles.at("data-locality").function.data_bytes == 124'380'000);
    CHECK(profiles.at("slackpost").users == 1);
    CHECK(profiles.at("slackpost").repetitions == 100);
    CHECK(profiles.at("slackpost").pause_s == 1.0);
    CHECK(profiles.at("pycatj").users == 4);
    CHECK(profiles.at("pycatj").repetitions == 200);
    CHECK(profiles.at("pycatj").ramp_up_s == 10.0);
    CHECK(profiles.at("hellojs").users == 4);
    CHECK(profiles.at("hellojs").repetitions == 200);
}

TEST_CASE("sleep latency is bounded below by the sleep itself") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("sleep");
    for (auto policy : {DistributionPolicy::Default, DistributionPolicy::Isolated,
                        DistributionPolicy::MinMemory, DistributionPolicy::Shared}) {
        SimulationInput in = base_input(topo, wl);
        in.policy = policy;
        RunResult rr = run_simulation(in);
        CHECK(rr.metrics.failures == 0);
        CHECK(rr.metrics.mean_ms >= 3000.0);
    }
}

TEST_CASE("conservation: every arrival terminates exactly once") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("hellojs");
    SimulationInput in = base_input(topo, wl);
    RunResult rr = run_simulation(in);
    CHECK(rr.records.size() == static_cast<std::size_t>(wl.users * wl.repetitions));
    CHECK(rr.metrics.successes + rr.metrics.failures == wl.users * wl.repetitions);
}

TEST_CASE("latency decomposition adds up per request") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("mongoDB");
    SimulationInput in = base_input(topo, wl);
    in.policy = DistributionPolicy::Shared;
    RunResult rr = run_simulation(in);
    REQUIRE(!rr.records.empty());
    for (const auto& r : rr.records) {
        if (r.failed) continue;
        CHECK(r.latency_us() == r.sched_us + r.net_us + r.cold_us + r.data_us + r.exec_us);
    }
}

TEST_CASE("cold starts follow the cache TTL") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("cold-start");

    SECTION("11-minute spacing: every request pays init") {
        SimulationInput in = base_input(topo, wl);
        RunResult rr = run_simulation(in);
        REQUIRE(rr.records.size() == 3);
        for (const auto& r : rr.records) CHECK(r.cold_us == detail::ms_to_us(wl.function.init_ms));
        CHECK(rr.metrics.mean_ms >= wl.function.init_ms);
    }
    SECTION("5-minute spacing: requests 2 and 3 run warm") {
        WorkloadProfile fast = wl;
        fast.pause_s = 300.0;
        SimulationInput in = base_input(topo, fast);
        RunResult rr = run_simulation(in);
        REQUIRE(rr.records.size() == 3);
        CHECK(rr.records[0].cold_us > 0);
        CHECK(rr.records[1].cold_us == 0);
        CHECK(rr.records[2].cold_us == 0);
    }
}

TEST_CASE("warm-path ordering invariant") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("hellojs");
    SimulationInput in = base_input(topo, wl);
    RunResult rr = run_simulation(in);
    const std::int64_t ttl_us = detail::ms_to_us(in.knobs.cold_cache_ttl_s * 1000.0);
    // completions per (worker, function)
    std::vector<std::pair<std::string, std::int64_t>> completions; // key, completion time
    for (const auto& r : rr.records) {
        if (r.failed) continue;
        std::string key = r.worker + "/" + r.function_id;
        bool warm_available = false;
        for (const auto& [k, done] : completions)
            if (k == key && done <= r.dispatch_us && r.dispatch_us - done <= ttl_us)
                warm_available = true;
        if (warm_available) CHECK(r.cold_us == 0);
        completions.emplace_back(key, r.dispatch_us + r.cold_us + r.data_us + r.exec_us);
    }
}

TEST_CASE("byte-identical reports for identical inputs and seed") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("mongoDB");
    auto run_once = [&] {
        SimulationInput in = base_input(topo, wl);
        in.policy = DistributionPolicy::Shared;
        in.script_text = testutil::slurp(testutil::data_file("datalocality.tapp.yml"));
        in.request_tag = "data";
        RunResult rr = run_simulation(in);
        return run_records(rr); // serialized, so the comparison is byte-level
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("a different seed changes scheduling but not the request count") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("hellojs");
    SimulationInput a = base_input(topo, wl);
    SimulationInput b = base_input(topo, wl);
    b.seed = 43;
    RunResult ra = run_simulation(a);
    RunResult rb = run_simulation(b);
    CHECK(ra.records.size() == rb.records.size());
}

TEST_CASE("uniformly slower cross-zone links never speed a request up") {
    ClusterTopology topo = benchmark_topo();
    ClusterTopology slower = topo;
    for (auto& [key, ms] : slower.latency_ms_map)
        if (key.first != key.second) ms += 20.0;
    WorkloadProfile wl = builtin_profiles().at("mongoDB");
    wl.users = 2;
    wl.repetitions = 40; // light load so decisions match across the two runs
    SimulationInput in_a = base_input(topo, wl);
    SimulationInput in_b = base_input(slower, wl);
    RunResult ra = run_simulation(in_a);
    RunResult rb = run_simulation(in_b);
    REQUIRE(ra.records.size() == rb.records.size());
    std::map<std::string, std::int64_t> base_latency;
    for (const auto& r : ra.records)
        if (!r.failed) base_latency[r.request_id] = r.latency_us();
    for (const auto& r : rb.records) {
        auto it = base_latency.find(r.request_id);
        if (it == base_latency.end() || r.failed) continue;
        CHECK(r.latency_us() >= it->second);
    }
}

TEST_CASE("unknown data service is a configuration error") {
    auto topo = load_topology(testutil::slurp(testutil::data_file("casestudy.topo.yml")));
    REQUIRE(topo.ok());
    WorkloadProfile wl = builtin_profiles().at("mongoDB"); // needs `mongo`
    SimulationInput in = base_input(topo.value(), wl);
    CHECK_THROWS_AS(run_simulation(in), SimError);
}

TEST_CASE("policy swap mid-run: versions are stamped and nothing fails") {
    ClusterTopology topo = benchmark_topo();
    WorkloadProfile wl = builtin_profiles().at("mongoDB");
    auto timeline = load_timeline(testutil::slurp(testutil::data_file("reload.timeline.yml")),
                                  std::string(TAPP_DATA_DIR));
    REQUIRE(timeline.ok());

    SimulationInput in = base_input(topo, wl);
    in.policy = DistributionPolicy::Shared;
    in.script_text = testutil::slurp(testutil::data_file("datalocality.tapp.yml"));
    in.request_tag = "data";
    in.timeline = &timeline.value();
    RunResult rr = run_simulation(in);
    CHECK(rr.metrics.failures == 0);
    REQUIRE(rr.script_versions.size() == 2);

    // every decision carries the version that was current at its arrival
    for (const auto& r : rr.records) {
        std::int64_t expect = 0;
        for (const auto& [at_us, version] : rr.script_versions)
            if (at_us <= r.arrival_us) expect = version;
        CHECK(r.script_version == expect);
    }
    // both versions actually served decisions
    bool v1_used = false, v2_used = false;
    for (const auto& r : rr.records) {
        if (r.script_version == 1) v1_used = true;
        if (r.script_version == 2) v2_used = true;
    }
    CHECK(v1_used);
    CHECK(v2_used);
}

TEST_CASE("campaigns produce appendix-shaped tables") {
    ClusterTopology topo = benchmark_topo();
    CampaignConfig config;
    config.topology = topo;
    config.runs = 4;
    config.seed = 7;
    config.profiles = {builtin_profiles().at("hellojs"), builtin_profiles().at("cold-start")};
    config.variants = {
        {"vanilla", DistributionPolicy::Default, true, std::nullopt, std::nullopt},
        {"default", DistributionPolicy::Default, false, std::nullopt, std::nullopt},
        {"isolated", DistributionPolicy::Isolated, false, std::nullopt, std::nullopt},
        {"min_memory", DistributionPolicy::MinMemory, false, std::nullopt, std::nullopt},
        {"shared", DistributionPolicy::Shared, false, std::nullopt, std::nullopt},
    };
    CampaignResult result = run_campaign(config);
    REQUIRE(result.tables.size() == 2);
    const auto* hello = result.table("hellojs");
    REQUIRE(hello);
    REQUIRE(hello->size() == 5);
    for (const auto& col : *hello) CHECK(col.runs.size() == 4);
    // cold-start pins its own run count
    const auto* cold = result.table("cold-start");
    REQUIRE(cold);
    for (const auto& col : *cold) CHECK(col.runs.size() == 3);

    std::string csv = render_campaign_csv("hellojs", *hello);
    CHECK(csv.find("run,vanilla,default,isolated,min_memory,shared") == 0);
    CHECK(csv.find("average,") != std::string::npos);
    // cells are mean;stddev
    CHECK(csv.find(';') != std::string::npos);

    SECTION("empty profile list gives an empty report") {
        CampaignConfig empty = config;
        empty.profiles.clear();
        CHECK(run_campaign(empty).tables.empty());
    }
}

TEST_CASE("workload and campaign files load") {
    auto wl = load_workload(
        "name: custom\nusers: 2\nrepetitions: 10\nramp_up_s: 1\npause_s: 0.5\n"
        "function:\n  exec_ms: 12\n  memory_mb: 512\n  data_service: mongo\n  data_bytes: 9000\n");
    REQUIRE(wl.ok());
    CHECK(wl.value().users == 2);
    CHECK(wl.value().function.memory_mb == 512);
    CHECK(wl.value().function.data_service == "mongo");

    auto campaign = load_campaign(testutil::slurp(testutil::data_file("campaign.example.yml")),
                                  std::string(TAPP_DATA_DIR));
    REQUIRE(campaign.ok());
    CHECK(campaign.value().variants.size() == 6);
    CHECK(campaign.value().profiles.size() == 2);
    CHECK(campaign.value().runs == 10);
    CHECK(campaign.value().variants[5].script_text.has_value());
    CHECK(campaign.value().variants[5].request_tag == "data");
}
