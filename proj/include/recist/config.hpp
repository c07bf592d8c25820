#pragma once
// Simulation configuration: line-based key=value with [sections], strict
// about unknown keys, with the effective (defaulted) config echoed into
// every output directory.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "recist/detail/strings.hpp"
#include "recist/errors.hpp"
#include "recist/knowledge.hpp"
#include "recist/logs.hpp"
#include "recist/metacognition.hpp"

namespace recist {

struct DatasetInput {
    LogDialect dialect = LogDialect::ZooKeeper;
    std::string path;
};

struct SimConfig {
    // inputs
    std::string topology_path;
    std::string scenario_path;
    std::vector<DatasetInput> datasets;

    // backend
    std::string backend = "scripted";  // scripted | replay | remote
    std::string endpoint;
    std::string auth_env;              // env var NAME holding the token
    std::string replay_transcript;
    double synthetic_latency = 0.0;

    // containment / model parameters
    int k = 2;
    double alpha = 0.5;
    double delta = 1.0;         // bandwidth floor
    double delta_t = 0.0;       // probe timeout; 0 derives from topology
    double probe_interval = 5.0;
    bool busy_accepts = false;

    // diagnosis
    double delta_d = 120.0;     // diagnosis window, simulated seconds
    int base_year = 2023;

    // meta-cognitive
    MetaConfig meta;

    // knowledge
    KnowledgeThresholds knowledge;
    bool persist_supporting = false;

    // run
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    bool quiet = false;
    std::string log_epoch = "auto";  // auto = first record timestamp

    std::string config_hash;  // filled on load
};

struct ConfigFinding {
    std::string code;   // UnknownKey, BadThresholds, MissingInput, BadValue
    std::string where;  // section.key or path
    std::string message;
};

struct ConfigReport {
    SimConfig config;
    std::vector<ConfigFinding> findings;

    bool ok() const { return findings.empty(); }
};

namespace detail {

inline bool parse_bool(const std::string& v, bool& out) {
    if (v == "true" || v == "1") { out = true; return true; }
    if (v == "false" || v == "0") { out = false; return true; }
    return false;
}

}  // namespace detail

inline ConfigReport parse_config(std::istream& in) {
    ConfigReport report;
    SimConfig& c = report.config;
    std::ostringstream raw;

    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "recist-config v1")
        throw MalformedHeader("expected 'recist-config v1'");
    raw << line << "\n";

    std::string section;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        raw << line << "\n";
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            report.findings.push_back({"BadValue", "line " + std::to_string(lineno),
                                       "expected key=value: " + t});
            continue;
        }
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        std::string where = section + "." + key;

        auto bad = [&](const std::string& msg) {
            report.findings.push_back({"BadValue", where, msg});
        };
        auto num = [&](double& slot) {
            try { slot = std::stod(value); } catch (...) { bad("not a number: " + value); }
        };
        auto inum = [&](int& slot) {
            try { slot = std::stoi(value); } catch (...) { bad("not an integer: " + value); }
        };
        auto flag = [&](bool& slot) {
            if (!detail::parse_bool(value, slot)) bad("not a boolean: " + value);
        };

        if (section == "inputs") {
            if (key == "topology") c.topology_path = value;
            else if (key == "scenario") c.scenario_path = value;
            else if (key == "dataset") {
                auto colon = value.find(':');
                if (colon == std::string::npos) {
                    bad("dataset must be '<dialect>:<path>'");
                } else {
                    auto d = dialect_from_name(value.substr(0, colon));
                    if (!d) bad("unknown dialect: " + value.substr(0, colon));
                    else c.datasets.push_back({*d, value.substr(colon + 1)});
                }
            } else report.findings.push_back({"UnknownKey", where, "unknown key"});
        } else if (section == "backend") {
            if (key == "backend") c.backend = value;
            else if (key == "endpoint") c.endpoint = value;
            else if (key == "auth_env") c.auth_env = value;
            else if (key == "transcript") c.replay_transcript = value;
            else if (key == "synthetic_latency") num(c.synthetic_latency);
            else report.findings.push_back({"UnknownKey", where, "unknown key"});
        } else if (section == "parameters") {
            if (key == "k") inum(c.k);
            else if (key == "alpha") num(c.alpha);
            else if (key == "delta") num(c.delta);
            else if (key == "delta_t") num(c.delta_t);
            else if (key == "probe_interval") num(c.probe_interval);
            else if (key == "busy_accepts") flag(c.busy_accepts);
            else if (key == "delta_d") num(c.delta_d);
            else if (key == "base_year") inum(c.base_year);
            else if (key == "w1") num(c.meta.w1);
            else if (key == "w2") num(c.meta.w2);
            else if (key == "w3") num(c.meta.w3);
            else if (key == "theta_pro") num(c.meta.theta_pro);
            else if (key == "theta_acc") num(c.meta.theta_acc);
            else if (key == "theta_inh") num(c.meta.theta_inh);
            else if (key == "r_max") inum(c.meta.r_max);
            else if (key == "proliferation_batch") inum(c.meta.proliferation_batch);
            else if (key == "agent_cap") inum(c.meta.global_agent_cap);
            else if (key == "max_depth") inum(c.meta.max_depth);
            else if (key == "path_cap") inum(c.meta.path_cap);
            else if (key == "theta_topic") num(c.knowledge.theta_topic);
            else if (key == "theta_reason") num(c.knowledge.theta_reason);
            else if (key == "theta_merge") num(c.knowledge.theta_merge);
            else if (key == "theta_split") num(c.knowledge.theta_split);
            else if (key == "persist_supporting") flag(c.persist_supporting);
            else report.findings.push_back({"UnknownKey", where, "unknown key"});
        } else if (section == "run") {
            if (key == "seed") {
                try { c.seed = std::stoull(value); } catch (...) { bad("not a seed"); }
            } else if (key == "out") c.out_dir = value;
            else if (key == "quiet") flag(c.quiet);
            else if (key == "log_epoch") c.log_epoch = value;
            else report.findings.push_back({"UnknownKey", where, "unknown key"});
        } else {
            report.findings.push_back({"UnknownKey", section + "." + key,
                                       "unknown section"});
        }
    }
    c.config_hash = std::to_string(detail::fnv1a(raw.str()));
    return report;
}

// Static validation: threshold ordering, weight normalization, file
// existence. Findings are data; callers decide whether to abort.
inline void validate_config(ConfigReport& report) {
    SimConfig& c = report.config;
    auto finding = [&](const char* code, const std::string& where,
                       const std::string& msg) {
        report.findings.push_back({code, where, msg});
    };
    if (!(0.0 <= c.meta.theta_pro && c.meta.theta_pro <= c.meta.theta_acc &&
          c.meta.theta_acc < c.meta.theta_inh && c.meta.theta_inh <= 1.0))
        finding("BadThresholds", "parameters.theta_*",
                "need 0 <= pro <= acc < inh <= 1");
    if (c.meta.w1 < 0 || c.meta.w2 < 0 || c.meta.w3 < 0 ||
        std::fabs(c.meta.w1 + c.meta.w2 + c.meta.w3 - 1.0) > 1e-9)
        finding("BadThresholds", "parameters.w*",
                "weights must be nonnegative and sum to 1");
    if (!(c.alpha > 0.0 && c.alpha <= 1.0))
        finding("BadValue", "parameters.alpha", "alpha must be in (0,1]");
    if (c.k < 1) finding("BadValue", "parameters.k", "k must be >= 1");
    if (c.delta_d <= 0)
        finding("BadValue", "parameters.delta_d", "delta_d must be positive");
    if (c.backend != "scripted" && c.backend != "replay" && c.backend != "remote")
        finding("BadValue", "backend.backend",
                "backend must be scripted, replay, or remote");
    if (c.backend == "remote" && c.endpoint.empty())
        finding("MissingInput", "backend.endpoint", "remote backend needs an endpoint");
    if (c.backend == "replay" && c.replay_transcript.empty())
        finding("MissingInput", "backend.transcript", "replay backend needs a transcript");

    auto check_file = [&](const std::string& path, const std::string& where) {
        if (path.empty()) {
            finding("MissingInput", where, "path not set");
            return;
        }
        std::ifstream f(path);
        if (!f) finding("MissingInput", where, "cannot open " + path);
    };
    check_file(c.topology_path, "inputs.topology");
    check_file(c.scenario_path, "inputs.scenario");
    for (const auto& d : c.datasets)
        check_file(d.path, std::string("inputs.dataset(") + dialect_name(d.dialect) + ")");
}

inline ConfigReport load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    ConfigReport report = parse_config(in);
    validate_config(report);
    return report;
}

// Canonical echo of the effective configuration, defaults included.
inline std::string render_effective_config(const SimConfig& c) {
    std::ostringstream out;
    out << "recist-config v1\n";
    out << "[inputs]\n";
    out << "topology=" << c.topology_path << "\n";
    out << "scenario=" << c.scenario_path << "\n";
    for (const auto& d : c.datasets)
        out << "dataset=" << dialect_name(d.dialect) << ":" << d.path << "\n";
    out << "[backend]\n";
    out << "backend=" << c.backend << "\n";
    out << "endpoint=" << c.endpoint << "\n";
    out << "auth_env=" << c.auth_env << "\n";
    out << "transcript=" << c.replay_transcript << "\n";
    out << "synthetic_latency=" << detail::format_decimal(c.synthetic_latency) << "\n";
    out << "[parameters]\n";
    out << "k=" << c.k << "\n";
    out << "alpha=" << detail::format_decimal(c.alpha) << "\n";
    out << "delta=" << detail::format_decimal(c.delta) << "\n";
    out << "delta_t=" << detail::format_decimal(c.delta_t) << "\n";
    out << "probe_interval=" << detail::format_decimal(c.probe_interval) << "\n";
    out << "busy_accepts=" << (c.busy_accepts ? "true" : "false") << "\n";
    out << "delta_d=" << detail::format_decimal(c.delta_d) << "\n";
    out << "base_year=" << c.base_year << "\n";
    out << "w1=" << detail::format_decimal(c.meta.w1) << "\n";
    out << "w2=" << detail::format_decimal(c.meta.w2) << "\n";
    out << "w3=" << detail::format_decimal(c.meta.w3) << "\n";
    out << "theta_pro=" << detail::format_decimal(c.meta.theta_pro) << "\n";
    out << "theta_acc=" << detail::format_decimal(c.meta.theta_acc) << "\n";
    out << "theta_inh=" << detail::format_decimal(c.meta.theta_inh) << "\n";
    out << "r_max=" << c.meta.r_max << "\n";
    out << "proliferation_batch=" << c.meta.proliferation_batch << "\n";
    out << "agent_cap=" << c.meta.global_agent_cap << "\n";
    out << "max_depth=" << c.meta.max_depth << "\n";
    out << "path_cap=" << c.meta.path_cap << "\n";
    out << "theta_topic=" << detail::format_decimal(c.knowledge.theta_topic) << "\n";
    out << "theta_reason=" << detail::format_decimal(c.knowledge.theta_reason) << "\n";
    out << "theta_merge=" << detail::format_decimal(c.knowledge.theta_merge) << "\n";
    out << "theta_split=" << detail::format_decimal(c.knowledge.theta_split) << "\n";
    out << "persist_supporting=" << (c.persist_supporting ? "true" : "false") << "\n";
    out << "[run]\n";
    out << "seed=" << c.seed << "\n";
    out << "out=" << c.out_dir << "\n";
    out << "quiet=" << (c.quiet ? "true" : "false") << "\n";
    out << "log_epoch=" << c.log_epoch << "\n";
    return out.str();
}

}  // namespace recist
