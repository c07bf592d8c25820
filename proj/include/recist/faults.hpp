#pragma once
// Fault injection: timed node outages (failure scenarios omega) and the
// legal node state machine with its audit trail.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recist/errors.hpp"
#include "recist/logs.hpp"
#include "recist/model.hpp"

namespace recist {

enum class FailureKind { Crash, NetworkPartition, DiskFull, AuthStorm };

inline const char* failure_kind_name(FailureKind k) {
    switch (k) {
        case FailureKind::Crash: return "crash";
        case FailureKind::NetworkPartition: return "network-partition";
        case FailureKind::DiskFull: return "disk-full";
        case FailureKind::AuthStorm: return "auth-storm";
    }
    return "crash";
}

inline std::optional<FailureKind> failure_kind_from_name(const std::string& s) {
    if (s == "crash") return FailureKind::Crash;
    if (s == "network-partition") return FailureKind::NetworkPartition;
    if (s == "disk-full") return FailureKind::DiskFull;
    if (s == "auth-storm") return FailureKind::AuthStorm;
    return std::nullopt;
}

struct FailureEvent {
    SimTime time = 0.0;
    NodeId node;
    FailureKind kind = FailureKind::Crash;
};

struct FailureScenario {
    std::string id;
    std::vector<FailureEvent> events;  // sorted by time
    std::map<NodeId, std::string> attached_logs;  // node -> log bundle reference
};

// Allowed explicit transitions: Down->Recovering, Recovering->Available,
// Available<->Busy. Failures force Down through apply_failures instead.
inline NodeState transition_state(SystemGraph& graph, const NodeId& node_id,
                                  NodeState to, const std::string& cause = "transition") {
    if (!graph.has_node(node_id)) throw UnknownNode(node_id);
    Node& n = graph.node(node_id);
    NodeState from = n.state;
    bool ok = (from == NodeState::Down && to == NodeState::Recovering) ||
              (from == NodeState::Recovering && to == NodeState::Available) ||
              (from == NodeState::Available && to == NodeState::Busy) ||
              (from == NodeState::Busy && to == NodeState::Available);
    if (!ok)
        throw IllegalTransition(node_id + ": " + state_name(from) + " -> " +
                                state_name(to));
    n.state = to;
    graph.audit_trail.push_back({graph.now, node_id, from, to, cause});
    return from;
}

// Applies every event at time <= t whose failure is not already being (or
// done being) handled: any audit transition out of Down at or after the
// event time consumes it. Disrupted tasks stay mapped but are marked stale
// until containment reroutes them. Returns F_omega(t). Idempotent for fixed
// (scenario, t).
inline std::set<NodeId> apply_failures(SystemGraph& graph, Allocation& alloc,
                                       const FailureScenario& scenario,
                                       SimTime t) {
    if (t < 0) throw ConfigError("apply_failures requires t >= 0");
    std::set<NodeId> failed;
    for (const auto& ev : scenario.events) {
        if (ev.time > t) break;
        if (!graph.has_node(ev.node)) throw UnknownNode(ev.node);
        bool handled_since = false;
        for (const auto& tr : graph.audit_trail) {
            if (tr.node == ev.node && tr.from == NodeState::Down &&
                tr.time >= ev.time) {
                handled_since = true;
                break;
            }
        }
        if (handled_since) continue;
        Node& n = graph.node(ev.node);
        if (n.state != NodeState::Down) {
            graph.audit_trail.push_back(
                {ev.time, ev.node, n.state, NodeState::Down,
                 std::string("failure:") + failure_kind_name(ev.kind)});
            n.state = NodeState::Down;
            graph.now = std::max(graph.now, ev.time);
        }
        failed.insert(ev.node);
        for (const auto& tid : n.active_tasks) {
            auto it = alloc.mapping.find(tid);
            if (it != alloc.mapping.end() && it->second == ev.node)
                alloc.stale.insert(tid);
        }
    }
    return failed;
}

// Each failure kind maps to a log template so scenarios without an attached
// dataset still produce a diagnosable window: crashes leave kernel lines,
// partitions leave timeout lines, and so on.
inline std::vector<LogRecord> synthetic_failure_records(const FailureEvent& ev,
                                                        Instant log_epoch) {
    static const std::map<FailureKind, std::vector<const char*>> templates = {
        {FailureKind::Crash,
         {"cache parity error detected on cpu", "cache parity error detected on cpu",
          "machine check interrupt raised", "kernel panic - not syncing"}},
        {FailureKind::NetworkPartition,
         {"cannot open channel to peer", "cannot open channel to peer",
          "connection broken for id 0", "session expired after partition"}},
        {FailureKind::DiskFull,
         {"no space left on device", "no space left on device",
          "write failed for journal block", "task attempt failed after io error"}},
        {FailureKind::AuthStorm,
         {"failed password for invalid user", "failed password for invalid user",
          "error: maximum authentication attempts exceeded",
          "received disconnect from remote"}},
    };
    const auto& lines = templates.at(ev.kind);
    std::vector<LogRecord> out;
    Instant base = log_epoch + static_cast<Instant>(ev.time) * 1000000LL;
    for (size_t i = 0; i < lines.size(); ++i) {
        LogRecord r;
        r.timestamp = base - static_cast<Instant>(lines.size() - 1 - i) * 1000000LL;
        r.source = LogSource::Sys;
        r.node_hint = ev.node;
        r.text = lines[i];
        out.push_back(std::move(r));
    }
    return out;
}

// Replays a trail against a copy of initial states; used to check that the
// audit reconstructs the timeline.
inline std::map<NodeId, NodeState> replay_audit(
    const std::map<NodeId, NodeState>& initial,
    const std::vector<StateTransition>& trail) {
    std::map<NodeId, NodeState> states = initial;
    for (const auto& tr : trail) states[tr.node] = tr.to;
    return states;
}

}  // namespace recist
