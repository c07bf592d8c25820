#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recist/runner.hpp"
#include "test_common.hpp"

using namespace recist;
namespace fs = std::filesystem;

namespace {

const char* kDataDir = RECIST_DATA_DIR;
const char* kCliPath = RECIST_CLI_PATH;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

SimConfig fixture_config(const std::string& name, const std::string& out_dir) {
    fs::path repo = fs::path(kDataDir).parent_path();
    ConfigReport report =
        load_config_file((fs::path(kDataDir) / "configs" / (name + ".cfg")).string());
    // Re-anchor the config's repo-relative paths against the repo root.
    report.config.topology_path =
        (repo / report.config.topology_path).string();
    report.config.scenario_path =
        (repo / report.config.scenario_path).string();
    for (auto& d : report.config.datasets) d.path = (repo / d.path).string();
    report.config.out_dir = out_dir;
    report.findings.clear();
    validate_config(report);
    REQUIRE(report.ok());
    return report.config;
}

}  // namespace

TEST_CASE("the scripted pipeline heals the zookeeper fixture end to end") {
    auto tmp = fs::temp_directory_path() / "recist-pipe-zk";
    fs::remove_all(tmp);
    SimConfig config = fixture_config("zookeeper", tmp.string());
    RunResult result = run_simulation(config);
    CHECK(result.exit_code == 0);
    REQUIRE(result.healings.size() == 1);
    CHECK(result.healings[0].node == "n2");
    CHECK(result.healings[0].outcome == HealOutcome::Recovered);
    REQUIRE(result.healings[0].meta.best.has_value());
    CHECK(result.healings[0].meta.best->topic == "task-contention");
    CHECK(result.healings[0].meta.best->gamma >= 0.85);

    CHECK(fs::exists(tmp / "metrics.csv"));
    CHECK(fs::exists(tmp / "knowledge_local.txt"));
    CHECK(fs::exists(tmp / "transcript.jsonl"));

    // The zookeeper fixture is engineered to produce exactly one verdict,
    // a Best: rates mirror the all-best pattern.
    std::string csv = slurp(tmp / "metrics.csv");
    std::istringstream in(csv);
    TelemetryStream imported = import_stream_csv(in);
    auto rates = compute_rates(imported);
    CHECK(rates.best == 1.0);
    CHECK(rates.accepted == 0.0);
    CHECK(rates.rejected == 0.0);
    CHECK(rates.harmful == 0.0);
}

TEST_CASE("scripted runs are byte-identical across repetitions") {
    auto tmp1 = fs::temp_directory_path() / "recist-det-1";
    auto tmp2 = fs::temp_directory_path() / "recist-det-2";
    fs::remove_all(tmp1);
    fs::remove_all(tmp2);
    SimConfig c1 = fixture_config("bgl", tmp1.string());
    SimConfig c2 = fixture_config("bgl", tmp2.string());
    REQUIRE(run_simulation(c1).exit_code == 0);
    REQUIRE(run_simulation(c2).exit_code == 0);
    for (const char* file : {"metrics.csv", "metrics.jsonl", "knowledge_local.txt",
                             "knowledge_global.txt", "transcript.jsonl",
                             "knowledge_journal.txt"}) {
        INFO(file);
        CHECK(slurp(tmp1 / file) == slurp(tmp2 / file));
    }
}

TEST_CASE("the bgl fixture yields an accepted and a best verdict") {
    auto tmp = fs::temp_directory_path() / "recist-pipe-bgl";
    fs::remove_all(tmp);
    SimConfig config = fixture_config("bgl", tmp.string());
    RunResult result = run_simulation(config);
    REQUIRE(result.exit_code == 0);
    REQUIRE(result.healings.size() == 1);
    const auto& scored = result.healings[0].meta.all_scored;
    REQUIRE(scored.size() == 2);
    CHECK(scored[0].verdict == Verdict::Accepted);
    CHECK(scored[0].topic == "thermal-anomaly");
    CHECK(scored[1].verdict == Verdict::Best);
    CHECK(scored[1].topic == "firmware-event");
    // RDR: two system invocations over the spawned population.
    CHECK(result.healings[0].meta.ledger.rdr() ==
          Catch::Approx(2.0 / result.healings[0].meta.ledger.spawned()));
}

TEST_CASE("an unreachable failure is undetected and exits nonzero") {
    SystemGraph g;
    for (int i = 1; i <= 2; ++i) {
        Node n;
        n.id = "i" + std::to_string(i);
        n.capacity = 4;
        n.memory = 4;
        g.nodes[n.id] = n;
    }
    // No links at all: nobody can observe i2.
    std::map<TaskId, Task> tasks;
    Task t;
    t.id = "t1";
    t.cpu_demand = 1;
    tasks[t.id] = t;
    Allocation a;
    a = assign_task(g, a, tasks, t, "i2");

    PipelineConfig pc;
    HealingPipeline pipeline(g, a, tasks, pc, std::make_shared<ScriptedBackend>());
    FailureScenario s;
    s.id = "isolated";
    s.events = {{1.0, "i2", FailureKind::Crash}};
    auto healings = pipeline.run_scenario(s, {}, LogDialect::ZooKeeper);
    REQUIRE(healings.size() == 1);
    CHECK(healings[0].outcome == HealOutcome::Undetected);
    auto report = pipeline.completion_report(s);
    CHECK_FALSE(report.completed.at("t1"));
}

TEST_CASE("an escalated healing keeps the node recovering but reroutes tasks") {
    // No log records: diagnosis is empty, no hypothesis, escalation.
    SystemGraph g = testutil::line_graph(3, 4, 4);
    std::map<TaskId, Task> tasks;
    Task t;
    t.id = "t1";
    t.cpu_demand = 1;
    t.mem_demand = 1;
    tasks[t.id] = t;
    Allocation a = assign_task(g, {}, tasks, t, "n2");

    PipelineConfig pc;
    HealingPipeline pipeline(g, a, tasks, pc, std::make_shared<ScriptedBackend>());
    FailureScenario s;
    s.id = "silent";
    s.events = {{1.0, "n2", FailureKind::Crash}};
    auto healings = pipeline.run_scenario(s, {}, LogDialect::ZooKeeper);
    REQUIRE(healings.size() == 1);
    CHECK(healings[0].outcome == HealOutcome::Escalated);
    CHECK(pipeline.graph().node("n2").state == NodeState::Recovering);
    CHECK(pipeline.failure_set().count("n2") == 1);
    auto report = pipeline.completion_report(s);
    CHECK(report.completed.at("t1"));  // the task still moved to a live host
}

TEST_CASE("oracle call counts respect the O(p + r) meta envelope") {
    auto tmp = fs::temp_directory_path() / "recist-envelope";
    fs::remove_all(tmp);
    SimConfig config = fixture_config("hadoop", tmp.string());
    RunResult result = run_simulation(config);
    REQUIRE(result.exit_code == 0);
    const auto& meta = result.healings[0].meta;
    long processed = static_cast<long>(meta.all_scored.size());
    long spawned = meta.ledger.spawned();
    // Each processed path costs one hypothesize and one evaluate call.
    CHECK(processed <= spawned);
    CHECK(meta.ledger.invocations.size() == static_cast<size_t>(processed));
}

TEST_CASE("the cli runs the golden configs deterministically") {
    fs::path repo = fs::path(kDataDir).parent_path();
    auto tmp1 = fs::temp_directory_path() / "recist-cli-1";
    auto tmp2 = fs::temp_directory_path() / "recist-cli-2";
    fs::remove_all(tmp1);
    fs::remove_all(tmp2);

    auto invoke = [&](const std::string& out) {
        std::string cmd = "cd " + repo.string() + " && " + kCliPath +
                          " run --config data/configs/zookeeper.cfg --quiet --out " +
                          out;
        return std::system(cmd.c_str());
    };
    std::map<std::string, std::string> inputs_before;
    for (const char* f : {"data/configs/zookeeper.cfg", "data/topologies/mesh4.topo",
                          "data/scenarios/zookeeper_crash.scn",
                          "data/logs/zookeeper_fixture.log"})
        inputs_before[f] = slurp(repo / f);
    REQUIRE(invoke(tmp1.string()) == 0);
    REQUIRE(invoke(tmp2.string()) == 0);
    for (const char* file : {"metrics.csv", "knowledge_local.txt",
                             "knowledge_global.txt", "transcript.jsonl"}) {
        INFO(file);
        CHECK(slurp(tmp1 / file) == slurp(tmp2 / file));
    }
    for (const auto& [f, body] : inputs_before) {
        INFO(f);
        CHECK(slurp(repo / f) == body);  // run never mutates its inputs
    }

    SECTION("validate reports the effective defaults") {
        std::string cmd = "cd " + repo.string() + " && " + kCliPath +
                          " validate --config data/configs/zookeeper.cfg > " +
                          (tmp1 / "validate.txt").string();
        REQUIRE(std::system(cmd.c_str()) == 0);
        std::string out = slurp(tmp1 / "validate.txt");
        CHECK(out.find("theta_inh=0.85") != std::string::npos);
        CHECK(out.find("findings: none") != std::string::npos);
    }

    SECTION("a bad threshold ordering fails the run with nonzero exit") {
        fs::path bad = tmp1 / "bad.cfg";
        std::ofstream out(bad);
        out << "recist-config v1\n[inputs]\n"
            << "topology=data/topologies/mesh4.topo\n"
            << "scenario=data/scenarios/zookeeper_crash.scn\n"
            << "dataset=zookeeper:data/logs/zookeeper_fixture.log\n"
            << "[parameters]\ntheta_pro=0.9\ntheta_inh=0.5\n";
        out.close();
        std::string cmd = "cd " + repo.string() + " && " + kCliPath +
                          " run --quiet --config " + bad.string() + " --out " +
                          (tmp1 / "bad-out").string() + " 2>/dev/null";
        CHECK(std::system(cmd.c_str()) != 0);
    }

    SECTION("unknown config keys are rejected") {
        fs::path bad = tmp1 / "unknown.cfg";
        std::ofstream out(bad);
        out << "recist-config v1\n[parameters]\nwarp_factor=9\n";
        out.close();
        std::string cmd = "cd " + repo.string() + " && " + kCliPath +
                          " run --quiet --config " + bad.string() + " --out " +
                          (tmp1 / "bad-out2").string() + " 2>/dev/null";
        CHECK(std::system(cmd.c_str()) != 0);
    }
}

TEST_CASE("replay of a recorded transcript reproduces the run byte for byte") {
    fs::path repo = fs::path(kDataDir).parent_path();
    auto tmp1 = fs::temp_directory_path() / "recist-replay-1";
    auto tmp2 = fs::temp_directory_path() / "recist-replay-2";
    fs::remove_all(tmp1);
    fs::remove_all(tmp2);

    SimConfig config = fixture_config("openssh", tmp1.string());
    REQUIRE(run_simulation(config).exit_code == 0);

    SimConfig replay_config = fixture_config("openssh", tmp2.string());
    replay_config.backend = "replay";
    replay_config.replay_transcript = (tmp1 / "transcript.jsonl").string();
    REQUIRE(run_simulation(replay_config).exit_code == 0);

    CHECK(slurp(tmp1 / "metrics.csv") == slurp(tmp2 / "metrics.csv"));
    CHECK(slurp(tmp1 / "knowledge_local.txt") == slurp(tmp2 / "knowledge_local.txt"));
}

TEST_CASE("a datasetless scenario heals on synthesized failure logs") {
    auto tmp = fs::temp_directory_path() / "recist-synth";
    fs::remove_all(tmp);
    SimConfig config = fixture_config("zookeeper", tmp.string());
    config.datasets.clear();

    for (auto kind : {FailureKind::Crash, FailureKind::NetworkPartition,
                      FailureKind::DiskFull, FailureKind::AuthStorm}) {
        fs::create_directories(tmp);
        fs::path scn = tmp / (std::string(failure_kind_name(kind)) + ".scn");
        std::ofstream out(scn);
        out << "recist-scenario v1\nid synth\n50 n3 " << failure_kind_name(kind)
            << "\n";
        out.close();
        config.scenario_path = scn.string();
        config.out_dir = (tmp / failure_kind_name(kind)).string();
        RunResult result = run_simulation(config);
        INFO(failure_kind_name(kind));
        CHECK(result.exit_code == 0);
        REQUIRE(result.healings.size() == 1);
        CHECK(result.healings[0].outcome == HealOutcome::Recovered);
    }
}

TEST_CASE("cli kb and parse subcommands work on run outputs") {
    fs::path repo = fs::path(kDataDir).parent_path();
    auto tmp = fs::temp_directory_path() / "recist-kbtools";
    fs::remove_all(tmp);
    SimConfig config = fixture_config("hadoop", tmp.string());
    REQUIRE(run_simulation(config).exit_code == 0);

    SECTION("kb inspect summarizes and checks invariants") {
        std::string cmd = std::string(kCliPath) + " kb inspect --snapshot " +
                          (tmp / "knowledge_local.txt").string() + " > " +
                          (tmp / "inspect.txt").string();
        REQUIRE(std::system(cmd.c_str()) == 0);
        std::string out = slurp(tmp / "inspect.txt");
        CHECK(out.find("invariants ok") != std::string::npos);
    }

    SECTION("kb merge folds a local snapshot into a global one") {
        std::string cmd = std::string(kCliPath) + " kb merge --global " +
                          (tmp / "knowledge_global.txt").string() + " --local " +
                          (tmp / "knowledge_local.txt").string() + " --out " +
                          (tmp / "merged.txt").string() + " > /dev/null";
        REQUIRE(std::system(cmd.c_str()) == 0);
        std::ifstream in(tmp / "merged.txt", std::ios::binary);
        auto merged = RendezvousStore::load_snapshot(in);
        CHECK(merged.invariants_hold());
        // Everything local was already synced at the end of the run.
        CHECK(merged.topics().size() >= 1);
    }

    SECTION("cli parse reproduces the golden canonical records") {
        std::string cmd = std::string(kCliPath) + " parse --dialect hadoop " +
                          "--input " + (repo / "data/logs/hadoop_fixture.log").string() +
                          " --out " + (tmp / "parsed.txt").string() + " 2>/dev/null";
        REQUIRE(std::system(cmd.c_str()) == 0);
        CHECK(slurp(tmp / "parsed.txt") ==
              slurp(repo / "data" / "golden" / "hadoop.canonical"));
    }
}

TEST_CASE("synthetic oracle latency drives the simulated recovery clock") {
    auto tmp = fs::temp_directory_path() / "recist-latency";
    fs::remove_all(tmp);
    SimConfig config = fixture_config("zookeeper", tmp.string());
    config.synthetic_latency = 0.5;
    RunResult result = run_simulation(config);
    REQUIRE(result.exit_code == 0);

    std::string csv = slurp(tmp / "metrics.csv");
    std::istringstream in(csv);
    TelemetryStream imported = import_stream_csv(in);
    auto records = derive_recovery_records(imported);
    REQUIRE(records.size() == 1);
    const auto& r = records[0];
    CHECK(r.elapsed > 0.0);
    // The simulated clock is exactly the sum of per-layer oracle costs.
    CHECK(r.elapsed == Catch::Approx(r.containment_span + r.diagnosis_span +
                                     r.meta_span + r.knowledge_span));
    // One extract call plus the relation/hypothesize/evaluate/embed calls,
    // each worth half a simulated second.
    CHECK(r.diagnosis_span >= 0.5);
    CHECK(r.meta_span >= 1.0);
}

TEST_CASE("host cpu sampling returns a series or falls back flagged") {
    TelemetryStream stream;
    stream.record_event(0.0, "meta", "oracle-calls", "n1", {{"count", "5"}});
    auto series = sample_cpu(stream, 0.01, 2);
    CHECK(series.samples.size() >= 1);
    for (const auto& s : series.samples) {
        CHECK(s.percent >= 0.0);
        CHECK(s.percent <= 100.0);
    }
}

TEST_CASE("a larger mesh absorbs staggered multi-node failures") {
    std::mt19937_64 rng(97);
    SystemGraph g;
    for (int i = 0; i < 16; ++i) {
        Node n;
        n.id = "m" + std::to_string(10 + i);
        n.capacity = 6;
        n.memory = 6;
        g.nodes[n.id] = n;
    }
    std::vector<NodeId> ids;
    for (const auto& [id, _] : g.nodes) ids.push_back(id);
    for (size_t i = 0; i < ids.size(); ++i) {
        g.links.insert({ids[i], ids[(i + 1) % ids.size()], 10, 0.5});
        g.links.insert({ids[i], ids[(i + 4) % ids.size()], 10, 1.0});
    }
    std::map<TaskId, Task> tasks;
    Allocation alloc;
    std::vector<Task> all;
    for (int i = 0; i < 24; ++i) {
        Task t;
        t.id = "t" + std::to_string(100 + i);
        t.cpu_demand = 1.0 + (i % 3) * 0.5;
        t.mem_demand = 1.0;
        tasks[t.id] = t;
        alloc = assign_task(g, alloc, tasks, t, ids[static_cast<size_t>(i) % ids.size()]);
        all.push_back(t);
    }

    FailureScenario s;
    s.id = "storm";
    for (int f = 0; f < 5; ++f)
        s.events.push_back({2.0 * (f + 1), ids[static_cast<size_t>(rng() % ids.size())],
                            FailureKind::Crash});
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const FailureEvent& a, const FailureEvent& b) {
                         return a.time < b.time;
                     });

    PipelineConfig pc;
    HealingPipeline pipeline(g, alloc, tasks, pc,
                             std::make_shared<ScriptedBackend>());
    auto healings = pipeline.run_scenario(s, {}, LogDialect::ZooKeeper);
    CHECK_FALSE(healings.empty());

    // Whatever survived is feasible: no capacity, state, or mapping breaches
    // among tasks that still have a live host.
    std::vector<Task> surviving;
    for (const auto& t : all)
        if (pipeline.allocation().mapping.count(t.id)) surviving.push_back(t);
    CHECK(check_constraints(pipeline.graph(), pipeline.allocation(), surviving)
              .empty());
    // Telemetry stayed totally ordered (no order-violation markers).
    for (const auto& ev : pipeline.telemetry().events())
        CHECK(ev.kind != "order-violation");
}

TEST_CASE("empty scenarios run clean with empty metrics bodies") {
    fs::path repo = fs::path(kDataDir).parent_path();
    auto tmp = fs::temp_directory_path() / "recist-empty";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    std::ofstream scn(tmp / "empty.scn");
    scn << "recist-scenario v1\nid nothing\n";
    scn.close();

    SimConfig config = fixture_config("zookeeper", (tmp / "out").string());
    config.scenario_path = (tmp / "empty.scn").string();
    RunResult result = run_simulation(config);
    CHECK(result.exit_code == 0);
    CHECK(result.healings.empty());
    std::string csv = slurp(tmp / "out" / "metrics.csv");
    CHECK(csv ==
          "recist-metrics v1\n"
          "seq,time,layer,kind,node,Best,Accepted,Rejected,Harmful,RDR,detail\n");
}
