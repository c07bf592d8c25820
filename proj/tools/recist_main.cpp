// recist: command-line harness for the self-healing continuum simulator.
// Subcommands: run, validate, parse, kb, replay.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "recist/recist.hpp"
#include "recist/runner.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& backend,
            const std::string& out_dir, long seed, bool quiet,
            const std::string& transcript) {
    recist::ConfigReport report = recist::load_config_file(config_path);
    if (!backend.empty()) {
        report.config.backend = backend;
        if (backend == "replay" && !transcript.empty())
            report.config.replay_transcript = transcript;
        report.findings.clear();
        recist::validate_config(report);
    }
    if (seed >= 0) report.config.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) report.config.out_dir = out_dir;
    report.config.quiet = report.config.quiet || quiet;
    if (!report.ok()) {
        for (const auto& f : report.findings)
            std::cerr << f.code << " " << f.where << ": " << f.message << "\n";
        return 2;
    }
    recist::RunResult result = recist::run_simulation(report.config);
    if (!report.config.quiet) {
        for (const auto& h : result.healings) {
            const char* outcome = h.outcome == recist::HealOutcome::Recovered
                                      ? "recovered"
                                      : (h.outcome == recist::HealOutcome::Escalated
                                             ? "escalated"
                                             : "undetected");
            std::cout << h.node << " " << outcome << " flag="
                      << recist::detail::format_decimal(h.flag_time)
                      << " recovery="
                      << recist::detail::format_decimal(h.recovery_time) << "\n";
        }
        if (result.exit_code != 0) std::cout << result.error << "\n";
    }
    return result.exit_code;
}

int cmd_validate(const std::string& config_path) {
    try {
        recist::ConfigReport report = recist::load_config_file(config_path);
        std::cout << recist::render_effective_config(report.config);
        if (report.ok()) {
            std::cout << "findings: none\n";
            return 0;
        }
        for (const auto& f : report.findings)
            std::cout << "finding " << f.code << " " << f.where << ": "
                      << f.message << "\n";
        return 0;  // validate reports, it does not fail
    } catch (const recist::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}

int cmd_parse(const std::string& dialect_name, const std::string& input,
              const std::string& output, int base_year) {
    auto dialect = recist::dialect_from_name(dialect_name);
    if (!dialect) {
        std::cerr << "unknown dialect: " << dialect_name << "\n";
        return 2;
    }
    std::ifstream in(input, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << input << "\n";
        return 2;
    }
    std::vector<recist::LogRecord> records;
    recist::ParseStats stats;
    if (*dialect == recist::LogDialect::CloudStateless) {
        records = recist::parse_cloud_stateless(in, &stats);
    } else {
        recist::LoghubOptions opts;
        opts.base_year = base_year;
        records = recist::parse_loghub(in, *dialect, opts, &stats);
    }
    std::ostringstream body;
    for (const auto& r : records) body << recist::canonical_record(r) << "\n";
    if (output.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out(output, std::ios::binary);
        out << body.str();
    }
    std::cerr << "parsed " << stats.parsed << " degraded " << stats.degraded
              << " skipped " << stats.skipped << "\n";
    return 0;
}

int cmd_kb_inspect(const std::string& snapshot_path) {
    std::ifstream in(snapshot_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << snapshot_path << "\n";
        return 2;
    }
    auto store = recist::RendezvousStore::load_snapshot(in);
    std::cout << "peer " << store.peer_id() << " topics "
              << store.topics().size() << "\n";
    for (const auto& t : store.topics()) {
        size_t members = 0;
        for (const auto& p : t.partitions) members += p.members.size();
        std::cout << t.id << " \"" << t.label << "\" partitions "
                  << t.partitions.size() << " records " << members << "\n";
    }
    std::cout << (store.invariants_hold() ? "invariants ok" : "invariants VIOLATED")
              << "\n";
    return store.invariants_hold() ? 0 : 1;
}

int cmd_kb_merge(const std::string& global_path, const std::string& local_path,
                 const std::string& out_path) {
    std::ifstream gin(global_path, std::ios::binary);
    std::ifstream lin(local_path, std::ios::binary);
    if (!gin || !lin) {
        std::cerr << "cannot open snapshots\n";
        return 2;
    }
    auto global_store = recist::RendezvousStore::load_snapshot(gin);
    auto local_store = recist::RendezvousStore::load_snapshot(lin);
    recist::Reasoner reasoner(std::make_shared<recist::ScriptedBackend>());
    auto report = global_store.sync_from(local_store, reasoner);
    std::ofstream out(out_path, std::ios::binary);
    out << global_store.snapshot();
    std::cout << "inserted " << report.inserted << " ties "
              << report.conflicts_tie << " version-conflicts "
              << report.conflicts_version << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ReCiSt self-healing continuum simulator"};
    app.require_subcommand(1);

    std::string config_path, backend, out_dir, transcript;
    long seed = -1;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "run the healing pipeline");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--backend", backend, "scripted | replay | remote");
    run->add_option("--out", out_dir, "output directory override");
    run->add_option("--seed", seed, "seed override");
    run->add_option("--transcript", transcript, "transcript for replay backend");
    run->add_flag("--quiet", quiet, "suppress progress output");

    std::string vconfig;
    auto* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("--config", vconfig, "config file")->required();

    std::string pdialect, pinput, poutput;
    int pyear = 2023;
    auto* parse = app.add_subcommand("parse", "parse a dataset to canonical records");
    parse->add_option("--dialect", pdialect,
                      "zookeeper|hadoop|openssh|bgl|cloud-stateless")
        ->required();
    parse->add_option("--input", pinput, "dataset file")->required();
    parse->add_option("--out", poutput, "output file (stdout when empty)");
    parse->add_option("--base-year", pyear, "base year for yearless dialects");

    auto* kb = app.add_subcommand("kb", "knowledge snapshot tools");
    std::string ksnapshot, kglobal, klocal, kout;
    auto* kb_inspect = kb->add_subcommand("inspect", "summarize a snapshot");
    kb_inspect->add_option("--snapshot", ksnapshot, "snapshot file")->required();
    auto* kb_merge = kb->add_subcommand("merge", "sync a local snapshot into a global one");
    kb_merge->add_option("--global", kglobal, "global snapshot")->required();
    kb_merge->add_option("--local", klocal, "local snapshot")->required();
    kb_merge->add_option("--out", kout, "merged snapshot output")->required();

    std::string rconfig, rtranscript, rout;
    auto* replay = app.add_subcommand("replay", "re-run a recorded transcript");
    replay->add_option("--config", rconfig, "config file")->required();
    replay->add_option("--transcript", rtranscript, "transcript file")->required();
    replay->add_option("--out", rout, "output directory override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, backend, out_dir, seed, quiet, transcript);
        if (validate->parsed()) return cmd_validate(vconfig);
        if (parse->parsed()) return cmd_parse(pdialect, pinput, poutput, pyear);
        if (kb->parsed()) {
            if (kb_inspect->parsed()) return cmd_kb_inspect(ksnapshot);
            if (kb_merge->parsed()) return cmd_kb_merge(kglobal, klocal, kout);
            std::cerr << "kb needs a subcommand\n";
            return 2;
        }
        if (replay->parsed())
            return cmd_run(rconfig, "replay", rout, -1, false, rtranscript);
    } catch (const recist::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
