#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tapp/config.hpp"
#include "tapp/records.hpp"
#include "tapp/tapp.hpp"

namespace fs = std::filesystem;
using namespace tapp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1; // parse/validation/simulation errors
constexpr int kExitUsage = 2;  // bad flags, unreadable files

std::uint64_t default_seed() {
    if (const char* env = std::getenv("TAPP_SIM_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return v;
        std::cerr << "warning: ignoring non-numeric TAPP_SIM_SEED\n";
    }
    return sim::kDefaultSeed;
}

std::optional<std::string> read_or_complain(const fs::path& path) {
    auto text = sim::read_file(path);
    if (!text.ok()) {
        std::cerr << "error: " << text.error().message << "\n";
        return std::nullopt;
    }
    return text.value();
}

void print_parse_error(const fs::path& file, const ParseError& err) {
    std::cerr << file.string() << ":" << err.loc.line << ":" << err.loc.col << ": error ["
              << to_string(err.kind) << "]: " << err.message << "\n";
}

bool write_output(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write `" << path.string() << "`\n";
        return false;
    }
    out << content;
    return true;
}

int cmd_validate(const std::string& script_path, const std::string& topology_path) {
    auto text = read_or_complain(script_path);
    if (!text) return kExitUsage;
    auto parsed = parse_script(*text);
    if (!parsed.ok()) {
        print_parse_error(script_path, parsed.error());
        return kExitDomain;
    }
    AppScript canon = canonicalize(parsed.value());

    std::optional<ClusterTopology> topo;
    if (!topology_path.empty()) {
        auto topo_text = read_or_complain(topology_path);
        if (!topo_text) return kExitUsage;
        auto loaded = load_topology(*topo_text);
        if (!loaded.ok()) {
            print_parse_error(topology_path, loaded.error());
            return kExitDomain;
        }
        topo = std::move(loaded.value());
    }
    auto diags = validate_script(canon, topo ? &*topo : nullptr);
    for (const auto& d : diags)
        std::cout << (d.is_error() ? "error: " : "warning: ") << d.message << "\n";
    if (has_errors(diags)) return kExitDomain;
    std::cout << "ok: " << canon.tags.size() << " tag(s)\n";
    return kExitOk;
}

struct SimArgs {
    std::string topology_path;
    std::string policy = "default";
    std::string script_path;
    std::string profile;
    std::string workload_path;
    std::string timeline_path;
    std::string tag;
    bool vanilla = false;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string format = "pretty";
};

int cmd_simulate(const SimArgs& args) {
    auto topo_text = read_or_complain(args.topology_path);
    if (!topo_text) return kExitUsage;
    auto topo = load_topology(*topo_text);
    if (!topo.ok()) {
        print_parse_error(args.topology_path, topo.error());
        return kExitDomain;
    }

    sim::WorkloadProfile workload;
    if (!args.profile.empty()) {
        auto profiles = sim::builtin_profiles();
        auto it = profiles.find(args.profile);
        if (it == profiles.end()) {
            std::cerr << "error: unknown profile `" << args.profile << "`. Available:";
            for (const auto& [name, _] : profiles) std::cerr << " " << name;
            std::cerr << "\n";
            return kExitDomain;
        }
        workload = it->second;
    } else {
        auto wl_text = read_or_complain(args.workload_path);
        if (!wl_text) return kExitUsage;
        auto wl = sim::load_workload(*wl_text);
        if (!wl.ok()) {
            print_parse_error(args.workload_path, wl.error());
            return kExitDomain;
        }
        workload = std::move(wl.value());
    }

    sim::SimulationInput input;
    input.topology = &topo.value();
    input.workload = &workload;
    input.seed = args.seed;
    input.vanilla = args.vanilla;
    auto policy = parse_policy(args.policy);
    if (!policy) {
        std::cerr << "error: unknown policy `" << args.policy
                  << "` (default | min_memory | isolated | shared)\n";
        return kExitUsage;
    }
    input.policy = *policy;

    std::string script_text;
    if (!args.script_path.empty()) {
        auto text = read_or_complain(args.script_path);
        if (!text) return kExitUsage;
        auto parsed = parse_script(*text);
        if (!parsed.ok()) {
            print_parse_error(args.script_path, parsed.error());
            return kExitDomain;
        }
        auto diags = validate_script(canonicalize(parsed.value()), &topo.value());
        for (const auto& d : diags)
            if (d.is_error()) {
                std::cerr << "error: " << d.message << "\n";
                return kExitDomain;
            }
        script_text = *text;
        input.script_text = script_text;
    }
    if (!args.tag.empty()) input.request_tag = args.tag;

    std::vector<TimedEvent> timeline;
    if (!args.timeline_path.empty()) {
        auto text = read_or_complain(args.timeline_path);
        if (!text) return kExitUsage;
        auto loaded = load_timeline(*text, fs::path(args.timeline_path).parent_path());
        if (!loaded.ok()) {
            print_parse_error(args.timeline_path, loaded.error());
            return kExitDomain;
        }
        timeline = std::move(loaded.value());
        input.timeline = &timeline;
    }

    sim::RunResult result;
    try {
        result = sim::run_simulation(input);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }

    const RunMetrics& m = result.metrics;
    std::cout << workload.name << ": " << format_ms(m.mean_ms) << ";" << format_ms(m.stddev_ms)
              << " (p50 " << format_ms(m.p50_ms) << " p95 " << format_ms(m.p95_ms) << " max "
              << format_ms(m.max_ms) << ") failures=" << m.failures << " retries=" << m.gateway_retries
              << "\n";

    if (args.format == "records" && args.out_dir.empty()) std::cout << run_records(result);
    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        MetricsReport report;
        report.variant = args.vanilla ? "vanilla" : args.policy;
        report.profile = workload.name;
        report.runs.push_back(m);
        if (!write_output(fs::path(args.out_dir) / (workload.name + ".csv"),
                          render_campaign_csv(workload.name, {report})))
            return kExitUsage;
        if (!write_output(fs::path(args.out_dir) / (workload.name + ".records.jsonl"),
                          run_records(result)))
            return kExitUsage;
    }
    return kExitOk;
}

int cmd_campaign(const std::string& config_path, const std::string& out_dir, int jobs,
                 std::optional<std::uint64_t> seed_override, const std::string& format) {
    auto text = read_or_complain(config_path);
    if (!text) return kExitUsage;
    auto config = sim::load_campaign(*text, fs::path(config_path).parent_path());
    if (!config.ok()) {
        print_parse_error(config_path, config.error());
        return kExitDomain;
    }
    if (seed_override) config.value().seed = *seed_override;

    sim::CampaignResult result;
    try {
        result = sim::run_campaign(config.value(), jobs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }

    for (const auto& [profile, columns] : result.tables) {
        if (format == "csv")
            std::cout << "# " << profile << "\n" << render_campaign_csv(profile, columns);
        else
            std::cout << render_pretty_table(profile, columns);
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            if (!write_output(fs::path(out_dir) / (profile + ".csv"),
                              render_campaign_csv(profile, columns)))
                return kExitUsage;
        }
    }
    return kExitOk;
}

int cmd_explain(const std::string& script_path, const std::string& topology_path, const std::string& tag,
                const std::string& function_id, const std::string& policy_name, std::uint64_t seed,
                int memory_mb, const std::vector<std::string>& down) {
    auto script_text = read_or_complain(script_path);
    if (!script_text) return kExitUsage;
    auto topo_text = read_or_complain(topology_path);
    if (!topo_text) return kExitUsage;
    auto parsed = parse_script(*script_text);
    if (!parsed.ok()) {
        print_parse_error(script_path, parsed.error());
        return kExitDomain;
    }
    auto topo = load_topology(*topo_text);
    if (!topo.ok()) {
        print_parse_error(topology_path, topo.error());
        return kExitDomain;
    }
    auto policy = parse_policy(policy_name);
    if (!policy) {
        std::cerr << "error: unknown policy `" << policy_name << "`\n";
        return kExitUsage;
    }

    AppScript script = canonicalize(parsed.value());
    std::map<NodeId, bool> liveness;
    for (const auto& node : down) liveness[node] = false;
    TopologySnapshot snap = make_snapshot(topo.value(), 1, liveness);
    Allotment allot = compute_allotment(topo.value(), *policy);

    SchedulerEnv env;
    env.topology = &topo.value();
    env.snapshot = &snap;
    env.allotment = &allot;
    env.script = &script;
    env.script_version = 1;
    env.coprime_salt = seed;

    ClusterState state;
    Rng rng(seed);
    InvocationRequest req;
    req.request_id = "explain";
    req.function_id = function_id;
    if (!tag.empty()) req.tag = tag;
    req.memory_demand_mb = memory_mb;

    ScheduleOutcome outcome = schedule(env, state, req, rng);
    for (const TraceStep& s : trace_of(outcome)) {
        switch (s.kind) {
            case TraceStep::Kind::TagMatched:
                std::cout << "tag `" << s.tag << "` (" << s.detail << ")\n";
                break;
            case TraceStep::Kind::FallbackPath:
                std::cout << "no matching policy: " << s.detail << "\n";
                break;
            case TraceStep::Kind::BlockTried:
                std::cout << "  block " << s.block_index + 1 << "\n";
                break;
            case TraceStep::Kind::Failover:
                std::cout << "  failover: " << s.detail << "\n";
                break;
            case TraceStep::Kind::ClauseTried:
                std::cout << "    clause " << s.clause_index + 1 << ": " << s.detail << "\n";
                break;
            case TraceStep::Kind::WorkerRejected:
                std::cout << "      " << s.worker << ": " << s.detail << "\n";
                break;
            case TraceStep::Kind::WorkerAccepted:
                std::cout << "      " << s.worker << ": accepted (" << s.detail << ") under "
                          << s.controller << "\n";
                break;
            case TraceStep::Kind::BlockExhausted:
                std::cout << "  block " << s.block_index + 1 << " exhausted\n";
                break;
            case TraceStep::Kind::FollowupTransition:
                std::cout << s.detail << "\n";
                break;
            case TraceStep::Kind::GatewayRetry:
                std::cout << "gateway retry on " << s.controller << "\n";
                break;
            case TraceStep::Kind::Failed:
                std::cout << "FAILED: " << s.detail << "\n";
                break;
        }
    }
    if (accepted(outcome)) {
        const auto& d = std::get<ScheduleDecision>(outcome);
        std::cout << "decision: controller=" << d.controller << " worker=" << d.worker << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TAPP topology-aware serverless scheduling: validator, simulator, explainer"};
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "Parse and validate a TAPP script");
    std::string v_script, v_topo;
    validate->add_option("--script", v_script, "TAPP script file")->required();
    validate->add_option("--topology", v_topo, "Topology file to resolve labels against");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run one simulation");
    SimArgs s;
    simulate->add_option("--topology", s.topology_path, "Topology file")->required();
    simulate->add_option("--policy", s.policy, "Distribution policy")->default_val("default");
    simulate->add_option("--script", s.script_path, "TAPP script file");
    simulate->add_option("--profile", s.profile, "Builtin workload profile");
    simulate->add_option("--workload", s.workload_path, "Workload file");
    simulate->add_option("--timeline", s.timeline_path, "Cluster event timeline file");
    simulate->add_option("--tag", s.tag, "Tag attached to every request");
    simulate->add_flag("--vanilla", s.vanilla, "Baseline platform behaviour (ignore zones)");
    simulate->add_option("--seed", s.seed, "Deterministic seed");
    simulate->add_option("--out", s.out_dir, "Output directory for CSV + records");
    simulate->add_option("--format", s.format, "pretty | csv | records")->default_val("pretty");

    // campaign
    auto* campaign = app.add_subcommand("campaign", "Run a benchmark campaign");
    std::string c_config, c_out, c_format = "pretty";
    int c_jobs = 1;
    std::uint64_t c_seed = 0;
    bool c_seed_set = false;
    campaign->add_option("--config", c_config, "Campaign config file")->required();
    campaign->add_option("--out", c_out, "Output directory for per-profile CSV tables");
    campaign->add_option("--jobs", c_jobs, "Parallel runs")->default_val(1);
    auto* seed_opt = campaign->add_option("--seed", c_seed, "Override the configured seed");
    campaign->add_option("--format", c_format, "pretty | csv")->default_val("pretty");

    // explain
    auto* explain = app.add_subcommand("explain", "Trace one scheduling decision");
    std::string e_script, e_topo, e_tag, e_fn = "fn", e_policy = "default";
    std::uint64_t e_seed = 0;
    int e_memory = 256;
    std::vector<std::string> e_down;
    explain->add_option("--script", e_script, "TAPP script file")->required();
    explain->add_option("--topology", e_topo, "Topology file")->required();
    explain->add_option("--tag", e_tag, "Request tag");
    explain->add_option("--function", e_fn, "Function id");
    explain->add_option("--policy", e_policy, "Distribution policy")->default_val("default");
    explain->add_option("--seed", e_seed, "Deterministic seed");
    explain->add_option("--memory", e_memory, "Request memory demand (MB)")->default_val(256);
    explain->add_option("--down", e_down, "Mark a node as down (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const std::uint64_t seed_default = default_seed();
    if (s.seed == 0 && simulate->count("--seed") == 0) s.seed = seed_default;
    if (e_seed == 0 && explain->count("--seed") == 0) e_seed = seed_default;
    c_seed_set = seed_opt->count() > 0;

    if (validate->parsed()) return cmd_validate(v_script, v_topo);
    if (simulate->parsed()) {
        if (s.profile.empty() == s.workload_path.empty()) {
            std::cerr << "error: exactly one of --profile / --workload is required\n";
            return kExitUsage;
        }
        return cmd_simulate(s);
    }
    if (campaign->parsed())
        return cmd_campaign(c_config, c_out, c_jobs,
                            c_seed_set ? std::optional<std::uint64_t>(c_seed)
                                       : (std::getenv("TAPP_SIM_SEED")
                                              ? std::optional<std::uint64_t>(seed_default)
                                              : std::nullopt),
                            c_format);
    if (explain->parsed())
        return cmd_explain(e_script, e_topo, e_tag, e_fn, e_policy, e_seed, e_memory, e_down);
    return kExitUsage;
}
