#pragma once
// Text formats for topologies and failure scenarios. Saves are canonical
// (sorted records, fixed decimal rendering) so load/save round-trips are
// byte-stable.

#include <fstream>
#include <sstream>
#include <string>

#include "recist/detail/strings.hpp"
#include "recist/errors.hpp"
#include "recist/faults.hpp"
#include "recist/model.hpp"

namespace recist {

inline std::string save_topology(const SystemGraph& g) {
    std::ostringstream out;
    out << "recist-topology v1\n";
    out << "delta " << detail::format_decimal(g.bandwidth_floor) << "\n";
    for (const auto& [id, n] : g.nodes) {
        out << "node " << id << " " << detail::format_decimal(n.capacity) << " "
            << detail::format_decimal(n.memory) << " " << state_name(n.state)
            << " " << vulnerability_name(n.vulnerability) << "\n";
    }
    for (const auto& l : g.links) {
        out << "link " << l.src << " " << l.dst << " "
            << detail::format_decimal(l.bandwidth) << " "
            << detail::format_decimal(l.latency) << "\n";
    }
    return out.str();
}

inline SystemGraph load_topology(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "recist-topology v1")
        throw MalformedHeader("expected 'recist-topology v1'");
    SystemGraph g;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto tok = detail::split_ws(t);
        if (tok[0] == "delta" && tok.size() == 2) {
            g.bandwidth_floor = std::stod(tok[1]);
        } else if (tok[0] == "node" && tok.size() == 6) {
            Node n;
            n.id = tok[1];
            n.capacity = std::stod(tok[2]);
            n.memory = std::stod(tok[3]);
            auto st = state_from_name(tok[4]);
            auto vu = vulnerability_from_name(tok[5]);
            if (!st || !vu)
                throw IoError("bad node record at line " + std::to_string(lineno));
            n.state = *st;
            n.vulnerability = *vu;
            g.nodes[n.id] = n;
        } else if (tok[0] == "link" && tok.size() == 5) {
            Link l;
            l.src = tok[1];
            l.dst = tok[2];
            l.bandwidth = std::stod(tok[3]);
            l.latency = std::stod(tok[4]);
            if (l.src == l.dst)
                throw IoError("self link at line " + std::to_string(lineno));
            g.links.insert(l);
        } else {
            throw IoError("unrecognized record at line " + std::to_string(lineno) +
                          ": " + t);
        }
    }
    for (const auto& l : g.links) {
        if (!g.has_node(l.src) || !g.has_node(l.dst))
            throw IoError("link endpoint missing: " + l.src + "-" + l.dst);
    }
    return g;
}

inline SystemGraph load_topology_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open topology file " + path);
    return load_topology(in);
}

inline std::string save_scenario(const FailureScenario& s) {
    std::ostringstream out;
    out << "recist-scenario v1\n";
    if (!s.id.empty()) out << "id " << s.id << "\n";
    for (const auto& ev : s.events) {
        out << detail::format_decimal(ev.time) << " " << ev.node << " "
            << failure_kind_name(ev.kind) << "\n";
    }
    for (const auto& [node, ref] : s.attached_logs) {
        out << "logs " << node << " " << ref << "\n";
    }
    return out.str();
}

inline FailureScenario load_scenario(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "recist-scenario v1")
        throw MalformedHeader("expected 'recist-scenario v1'");
    FailureScenario s;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto tok = detail::split_ws(t);
        if (tok[0] == "id" && tok.size() == 2) {
            s.id = tok[1];
        } else if (tok[0] == "logs" && tok.size() == 3) {
            s.attached_logs[tok[1]] = tok[2];
        } else if (tok.size() == 3) {
            FailureEvent ev;
            ev.time = std::stod(tok[0]);
            ev.node = tok[1];
            auto k = failure_kind_from_name(tok[2]);
            if (!k)
                throw IoError("unknown failure kind at line " +
                              std::to_string(lineno) + ": " + tok[2]);
            ev.kind = *k;
            s.events.push_back(ev);
        } else {
            throw IoError("unrecognized record at line " + std::to_string(lineno) +
                          ": " + t);
        }
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const FailureEvent& a, const FailureEvent& b) {
                         return a.time < b.time;
                     });
    return s;
}

inline FailureScenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file " + path);
    return load_scenario(in);
}

}  // namespace recist
