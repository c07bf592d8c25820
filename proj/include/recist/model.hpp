#pragma once
// Continuum model: the node/link graph under simulation, tasks, and the
// time-indexed task-to-node allocation that healing mutates.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recist/errors.hpp"

namespace recist {

using NodeId = std::string;
using TaskId = std::string;
using SimTime = double;  // simulated seconds

enum class NodeState { Down, Available, Busy, Recovering };
enum class Vulnerability { Low, Medium, High, Critical };

// Two-bit wire codec for states and vulnerabilities. Ordering follows the
// positional lists of the system model (S: 00 down, 11 available, 01 busy,
// 10 recovering; V: 00 low, 11 medium, 01 high, 10 critical).
inline std::uint8_t encode_state(NodeState s) {
    switch (s) {
        case NodeState::Down: return 0b00;
        case NodeState::Available: return 0b11;
        case NodeState::Busy: return 0b01;
        case NodeState::Recovering: return 0b10;
    }
    return 0b00;
}

inline NodeState decode_state(std::uint8_t bits) {
    switch (bits & 0b11) {
        case 0b00: return NodeState::Down;
        case 0b11: return NodeState::Available;
        case 0b01: return NodeState::Busy;
        default: return NodeState::Recovering;
    }
}

inline std::uint8_t encode_vulnerability(Vulnerability v) {
    switch (v) {
        case Vulnerability::Low: return 0b00;
        case Vulnerability::Medium: return 0b11;
        case Vulnerability::High: return 0b01;
        case Vulnerability::Critical: return 0b10;
    }
    return 0b00;
}

inline Vulnerability decode_vulnerability(std::uint8_t bits) {
    switch (bits & 0b11) {
        case 0b00: return Vulnerability::Low;
        case 0b11: return Vulnerability::Medium;
        case 0b01: return Vulnerability::High;
        default: return Vulnerability::Critical;
    }
}

inline const char* state_name(NodeState s) {
    switch (s) {
        case NodeState::Down: return "down";
        case NodeState::Available: return "available";
        case NodeState::Busy: return "busy";
        case NodeState::Recovering: return "recovering";
    }
    return "down";
}

inline std::optional<NodeState> state_from_name(const std::string& name) {
    if (name == "down") return NodeState::Down;
    if (name == "available") return NodeState::Available;
    if (name == "busy") return NodeState::Busy;
    if (name == "recovering") return NodeState::Recovering;
    return std::nullopt;
}

inline const char* vulnerability_name(Vulnerability v) {
    switch (v) {
        case Vulnerability::Low: return "low";
        case Vulnerability::Medium: return "medium";
        case Vulnerability::High: return "high";
        case Vulnerability::Critical: return "critical";
    }
    return "low";
}

inline std::optional<Vulnerability> vulnerability_from_name(const std::string& name) {
    if (name == "low") return Vulnerability::Low;
    if (name == "medium") return Vulnerability::Medium;
    if (name == "high") return Vulnerability::High;
    if (name == "critical") return Vulnerability::Critical;
    return std::nullopt;
}

struct Task {
    TaskId id;
    double cpu_demand = 1.0;   // c_j > 0
    double mem_demand = 0.0;   // m_j >= 0
    double compute_time = 1.0; // simulated seconds
    bool critical = false;
};

struct Node {
    NodeId id;
    double capacity = 1.0;  // C_i
    double memory = 1.0;    // M_i
    NodeState state = NodeState::Available;
    Vulnerability vulnerability = Vulnerability::Low;
    std::set<TaskId> active_tasks;
};

struct Link {
    NodeId src;
    NodeId dst;
    double bandwidth = 1.0;  // b_ij
    double latency = 0.0;    // seconds per traversal

    bool operator<(const Link& o) const {
        if (src != o.src) return src < o.src;
        if (dst != o.dst) return dst < o.dst;
        if (bandwidth != o.bandwidth) return bandwidth < o.bandwidth;
        return latency < o.latency;
    }
};

// One node-state change; the trail replays to the exact state timeline.
struct StateTransition {
    SimTime time = 0.0;
    NodeId node;
    NodeState from = NodeState::Available;
    NodeState to = NodeState::Available;
    std::string cause;  // "transition", "failure", "recovery"
};

struct SystemGraph {
    std::map<NodeId, Node> nodes;
    std::set<Link> links;
    double bandwidth_floor = 1.0;  // delta
    SimTime now = 0.0;
    std::vector<StateTransition> audit_trail;

    bool has_node(const NodeId& id) const { return nodes.count(id) != 0; }

    Node& node(const NodeId& id) {
        auto it = nodes.find(id);
        if (it == nodes.end()) throw NodeNotFound(id);
        return it->second;
    }

    const Node& node(const NodeId& id) const {
        auto it = nodes.find(id);
        if (it == nodes.end()) throw NodeNotFound(id);
        return it->second;
    }

    // Undirected adjacency, link bandwidth below the floor excluded when
    // respect_floor is set.
    std::vector<std::pair<NodeId, const Link*>> neighbors(
        const NodeId& id, bool respect_floor = false) const {
        std::vector<std::pair<NodeId, const Link*>> out;
        for (const auto& l : links) {
            if (respect_floor && l.bandwidth < bandwidth_floor) continue;
            if (l.src == id) out.emplace_back(l.dst, &l);
            else if (l.dst == id) out.emplace_back(l.src, &l);
        }
        return out;
    }
};

struct Allocation {
    SimTime time = 0.0;
    std::map<TaskId, NodeId> mapping;
    std::set<TaskId> stale;  // disrupted by a failure, awaiting containment
};

// Per-scenario completion indicators I_j.
struct CompletionReport {
    std::string scenario_id;
    std::map<TaskId, bool> completed;

    int completed_count() const {
        int n = 0;
        for (const auto& [_, ok] : completed) n += ok ? 1 : 0;
        return n;
    }
};

}  // namespace recist
