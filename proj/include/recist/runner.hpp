#pragma once
// Run harness behind the CLI: loads inputs, builds the backend, executes the
// pipeline over the scenario, and writes all outputs under a fixed layout.
// Every output except run_info.txt is deterministic for a fixed config and
// scripted backend.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "recist/config.hpp"
#include "recist/io.hpp"
#include "recist/pipeline.hpp"
#include "recist/reasoner_remote.hpp"

namespace recist {

struct RunResult {
    int exit_code = 0;
    std::string error;  // machine-readable error report body when nonzero
    std::vector<NodeHealing> healings;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
}

}  // namespace detail

inline std::vector<LogRecord> load_dataset_records(const SimConfig& config) {
    std::vector<LogRecord> all;
    for (const auto& d : config.datasets) {
        std::ifstream in(d.path, std::ios::binary);
        if (!in) throw IoError("cannot open dataset " + d.path);
        std::vector<LogRecord> records;
        if (d.dialect == LogDialect::CloudStateless) {
            records = parse_cloud_stateless(in);
        } else {
            LoghubOptions opts;
            opts.base_year = config.base_year;
            records = parse_loghub(in, d.dialect, opts);
        }
        all.insert(all.end(), records.begin(), records.end());
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const LogRecord& a, const LogRecord& b) {
                         return a.timestamp < b.timestamp;
                     });
    return all;
}

inline std::shared_ptr<ReasonerBackend> make_backend(const SimConfig& config) {
    if (config.backend == "scripted")
        return std::make_shared<ScriptedBackend>(config.synthetic_latency);
    if (config.backend == "replay") {
        std::ifstream in(config.replay_transcript);
        if (!in) throw IoError("cannot open transcript " + config.replay_transcript);
        return std::make_shared<ReplayBackend>(Transcript::from_jsonl(in));
    }
    if (config.backend == "remote") {
        RemoteOptions opts;
        opts.endpoint = config.endpoint;
        opts.auth_env = config.auth_env;
        return std::make_shared<RemoteBackend>(opts);
    }
    throw ConfigError("unknown backend " + config.backend);
}

inline RunResult run_simulation(const SimConfig& config) {
    RunResult result;
    std::filesystem::create_directories(config.out_dir);
    const std::filesystem::path out(config.out_dir);

    try {
        SystemGraph graph = load_topology_file(config.topology_path);
        graph.bandwidth_floor = config.delta;
        FailureScenario scenario = load_scenario_file(config.scenario_path);
        if (scenario.id.empty()) scenario.id = "scenario";
        std::vector<LogRecord> records = load_dataset_records(config);

        // Tasks are synthesized one per node at half capacity so healing has
        // something to move; topologies may also carry explicit tasks later.
        std::map<TaskId, Task> tasks;
        Allocation alloc;
        for (auto& [id, node] : graph.nodes) {
            if (node.state == NodeState::Down) continue;
            Task t;
            t.id = "task-" + id;
            t.cpu_demand = std::max(0.25, node.capacity / 2.0);
            t.mem_demand = std::max(0.0, node.memory / 2.0);
            t.compute_time = 1.0;
            tasks[t.id] = t;
            node.active_tasks.insert(t.id);
            alloc.mapping[t.id] = id;
        }

        PipelineConfig pc;
        pc.k = config.k;
        pc.delta_t = config.delta_t;
        pc.probe_interval = config.probe_interval;
        pc.busy_accepts = config.busy_accepts;
        pc.delta_d_seconds = config.delta_d;
        pc.meta = config.meta;
        pc.persist_supporting = config.persist_supporting;
        pc.scope = scenario.id;
        if (config.log_epoch == "auto") {
            pc.log_epoch = records.empty() ? 0 : records.front().timestamp;
        } else {
            auto parsed = detail::parse_iso_like(config.log_epoch);
            if (!parsed) throw ConfigError("bad log_epoch: " + config.log_epoch);
            pc.log_epoch = *parsed;
        }

        // Without a dataset, failure kinds synthesize their own log windows.
        if (records.empty()) {
            for (const auto& ev : scenario.events) {
                auto synthetic = synthetic_failure_records(ev, pc.log_epoch);
                records.insert(records.end(), synthetic.begin(), synthetic.end());
            }
            std::stable_sort(records.begin(), records.end(),
                             [](const LogRecord& a, const LogRecord& b) {
                                 return a.timestamp < b.timestamp;
                             });
        }

        LogDialect dialect =
            config.datasets.empty() ? LogDialect::ZooKeeper : config.datasets[0].dialect;
        HealingPipeline pipeline(graph, alloc, tasks, pc, make_backend(config),
                                 config.knowledge);
        pipeline.reasoner().set_default_seed(config.seed);
        pipeline.reasoner().transcript().set_context(config.backend,
                                                     config.config_hash);
        result.healings = pipeline.run_scenario(scenario, records, dialect);

        // Summary rates (skipped when the scenario produced no verdicts).
        try {
            DecisionQualityRates rates = compute_rates(pipeline.telemetry());
            pipeline.telemetry().record_event(
                pipeline.clock(), "telemetry", "rates", "",
                {{"scope", scenario.id},
                 {"best", detail::format_fixed9(rates.best)},
                 {"accepted", detail::format_fixed9(rates.accepted)},
                 {"rejected", detail::format_fixed9(rates.rejected)},
                 {"harmful", detail::format_fixed9(rates.harmful)},
                 {"rdr", detail::format_fixed9(rates.rdr)},
                 {"responses", std::to_string(rates.denominator)}});
        } catch (const EmptyScope&) {
        }

        detail::write_file(out / "effective_config.txt",
                           render_effective_config(config));
        detail::write_file(out / "metrics.csv",
                           export_stream(pipeline.telemetry(), ExportFormat::CSV));
        detail::write_file(out / "metrics.jsonl",
                           export_stream(pipeline.telemetry(), ExportFormat::JSONL));
        detail::write_file(out / "knowledge_local.txt",
                           pipeline.local_store().snapshot());
        detail::write_file(out / "knowledge_global.txt",
                           pipeline.global_store().snapshot());
        detail::write_file(out / "knowledge_journal.txt",
                           pipeline.local_store().journal_text());
        detail::write_file(out / "transcript.jsonl",
                           pipeline.reasoner().transcript().to_jsonl());
        for (const auto& h : result.healings) {
            if (h.outcome == HealOutcome::Undetected) continue;
            detail::write_file(out / ("diagnosis_" + h.node + ".txt"),
                               serialize_diagnosis_graph(h.meta.restructured));
        }

        for (const auto& h : result.healings) {
            if (h.outcome == HealOutcome::Undetected) result.exit_code = 1;
        }
        if (result.exit_code != 0)
            result.error = R"({"error":"UnhealedFailure","detail":"some failures were never detected"})";
    } catch (const Error& e) {
        result.exit_code = 2;
        result.error = std::string(R"({"error":")") + e.code() +
                       R"(","detail":")" + e.what() + R"("})";
    }
    if (!result.error.empty())
        detail::write_file(out / "error.json", result.error + "\n");
    return result;
}

}  // namespace recist
