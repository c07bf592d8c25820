#pragma once
// Containment layer: heartbeat probing of the k-neighborhood, failure-set
// construction, neighbor negotiation into a plug structure, and task
// redistribution producing the post-failure allocation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recist/continuum.hpp"
#include "recist/errors.hpp"
#include "recist/faults.hpp"
#include "recist/model.hpp"

namespace recist {

// Operation counters backing the complexity assertions: probes are O(d),
// candidate ordering O(d log k).
struct ContainmentCounters {
    long probe_messages = 0;
    long selection_comparisons = 0;
    long negotiation_queries = 0;

    void reset() { *this = {}; }
};

struct Heartbeat {
    double cpu_load = 0.0;
    double mem_load = 0.0;
    int queue_length = 0;
};

struct ProbeResult {
    bool timed_out = false;
    NodeState state = NodeState::Available;
    Heartbeat heartbeat;
    double response_delay = 0.0;  // round trip, simulated seconds
};

struct MonitoringAgent {
    std::string id;
    NodeId home;
    int k = 2;
    double probe_interval = 5.0;
    double timeout = 0.0;  // delta-t; 0 means derive from the topology
    std::map<NodeId, ProbeResult> view;
};

// Default delta-t: three times the one-way latency to the farthest
// k-neighbor (floor 1s so degenerate topologies still probe).
inline double derive_probe_timeout(const SystemGraph& g, const NodeId& home, int k) {
    auto hops = detail::hop_distances(g, home, k);
    double worst = 0.0;
    for (const auto& [id, d] : hops) {
        if (id == home || d > k) continue;
        auto lat = detail::shortest_latency(g, home, id,
                                            /*avoid_down_intermediates=*/false);
        if (lat) worst = std::max(worst, *lat);
    }
    return std::max(3.0 * worst, 1.0);
}

// One probe sweep over N^(k). Down nodes and nodes without a live path of
// floor bandwidth time out; live nodes answer with their state and heartbeat
// after a round trip, which also times out if it exceeds delta-t.
inline std::map<NodeId, ProbeResult> probe_neighborhood(
    MonitoringAgent& agent, const SystemGraph& graph,
    const std::map<TaskId, Task>& tasks, SimTime /*sweep time*/,
    ContainmentCounters* counters = nullptr) {
    if (!graph.has_node(agent.home) ||
        graph.node(agent.home).state == NodeState::Down)
        throw AgentOffline("agent " + agent.id + " home " + agent.home + " is down");
    double timeout = agent.timeout > 0.0
                         ? agent.timeout
                         : derive_probe_timeout(graph, agent.home, agent.k);
    auto hops = detail::hop_distances(graph, agent.home, agent.k);
    std::map<NodeId, ProbeResult> results;
    for (const auto& [id, d] : hops) {
        if (id == agent.home || d > agent.k) continue;
        if (counters) ++counters->probe_messages;
        ProbeResult r;
        const Node& n = graph.node(id);
        auto lat = detail::shortest_latency(graph, agent.home, id);
        if (n.state == NodeState::Down || !lat || 2.0 * *lat > timeout) {
            r.timed_out = true;
            r.response_delay = timeout;
        } else {
            r.state = n.state;
            r.heartbeat = {cpu_load(n, tasks), mem_load(n, tasks),
                           static_cast<int>(n.active_tasks.size())};
            r.response_delay = 2.0 * *lat;
        }
        results[id] = r;
    }
    agent.view = results;
    return results;
}

struct FlaggedNode {
    NodeId node;
    SimTime flagged_at;  // starts the self-healing clock
};

// F(t) with first-flag-wins timestamps. Pass the running flag registry so a
// repeated sweep keeps the original flag time.
inline std::set<NodeId> build_failure_set(
    const std::map<NodeId, ProbeResult>& probe_results, SimTime t,
    std::map<NodeId, SimTime>& flag_times) {
    std::set<NodeId> failure_set;
    for (const auto& [id, r] : probe_results) {
        if (!r.timed_out) continue;
        failure_set.insert(id);
        flag_times.emplace(id, t);  // no overwrite on re-flag
    }
    return failure_set;
}

struct RerouteRule {
    TaskId task;
    NodeId target;
};

struct PlugStructure {
    NodeId failed;
    std::vector<NodeId> accepted;  // p, in negotiation order
    std::vector<RerouteRule> reroute_rules;
    std::vector<TaskId> shortfall;  // tasks the plug could not cover
    SimTime created_at = 0.0;
};

namespace detail {

// Orders candidates by (hop distance, id) with an explicit bounded max-heap
// so the comparison count stays O(d log k). The caller supplies the hop
// metric; cap bounds the heap size.
inline std::vector<NodeId> order_candidates(const std::map<NodeId, int>& hops,
                                            const std::set<NodeId>& pool,
                                            int cap,
                                            ContainmentCounters* counters) {
    using Key = std::pair<int, NodeId>;  // (hop, id), smaller is better
    std::vector<Key> heap;                // max-heap on Key
    auto cmp = [counters](const Key& a, const Key& b) {
        if (counters) ++counters->selection_comparisons;
        return a < b;
    };
    for (const auto& id : pool) {
        auto it = hops.find(id);
        int hop = it == hops.end() ? 1 << 20 : it->second;
        Key key{hop, id};
        if (static_cast<int>(heap.size()) < cap) {
            heap.push_back(key);
            std::push_heap(heap.begin(), heap.end(), cmp);
        } else if (!heap.empty() && cmp(key, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), cmp);
            heap.back() = key;
            std::push_heap(heap.begin(), heap.end(), cmp);
        }
    }
    std::sort_heap(heap.begin(), heap.end(), cmp);
    std::vector<NodeId> out;
    out.reserve(heap.size());
    for (const auto& [_, id] : heap) out.push_back(id);
    return out;
}

}  // namespace detail

// Negotiates a plug for the failed node's task set. Candidates answer with
// (C, M, S); only Available nodes are accepted. A single accepted node that
// fits the whole set is chosen alone, otherwise the minimal prefix whose
// summed residuals cover the totals. Tasks map onto the plug first-fit-
// decreasing on cpu demand (ties by id). Uncoverable tasks are returned in
// the shortfall report rather than thrown.
inline PlugStructure negotiate_plug(const SystemGraph& graph,
                                    const std::map<TaskId, Task>& tasks,
                                    const NodeId& failed,
                                    const std::vector<NodeId>& candidates,
                                    SimTime t,
                                    ContainmentCounters* counters = nullptr,
                                    bool busy_accepts = false) {
    PlugStructure plug;
    plug.failed = failed;
    plug.created_at = t;

    const Node& dead = graph.node(failed);
    std::vector<Task> moving;
    for (const auto& tid : dead.active_tasks) {
        auto it = tasks.find(tid);
        if (it != tasks.end()) moving.push_back(it->second);
    }

    struct Residual {
        NodeId id;
        double cpu;
        double mem;
        Vulnerability vuln;
    };
    std::vector<Residual> accepted;
    double total_cpu = 0.0, total_mem = 0.0;
    for (const auto& tsk : moving) {
        total_cpu += tsk.cpu_demand;
        total_mem += tsk.mem_demand;
    }
    for (const auto& cid : candidates) {
        if (counters) ++counters->negotiation_queries;
        if (!graph.has_node(cid)) continue;
        const Node& c = graph.node(cid);
        bool ok = c.state == NodeState::Available ||
                  (busy_accepts && c.state == NodeState::Busy);
        if (!ok) continue;
        accepted.push_back({cid, c.capacity - cpu_load(c, tasks),
                            c.memory - mem_load(c, tasks),
                            c.vulnerability});
    }

    if (moving.empty()) {
        for (const auto& r : accepted) plug.accepted.push_back(r.id);
        return plug;
    }

    // Single-node fit, first in candidate order.
    std::vector<Residual> chosen;
    for (const auto& r : accepted) {
        if (r.cpu >= total_cpu && r.mem >= total_mem) {
            chosen.push_back(r);
            break;
        }
    }
    if (chosen.empty()) {
        double acc_cpu = 0.0, acc_mem = 0.0;
        for (const auto& r : accepted) {
            chosen.push_back(r);
            acc_cpu += r.cpu;
            acc_mem += r.mem;
            if (acc_cpu >= total_cpu && acc_mem >= total_mem) break;
        }
        // If the full accepted set cannot cover, keep it all and report the
        // shortfall after packing.
    }
    for (const auto& r : chosen) plug.accepted.push_back(r.id);

    // First-fit-decreasing on cpu demand, ties by task id.
    std::sort(moving.begin(), moving.end(), [](const Task& a, const Task& b) {
        if (a.cpu_demand != b.cpu_demand) return a.cpu_demand > b.cpu_demand;
        return a.id < b.id;
    });
    for (const auto& tsk : moving) {
        bool placed = false;
        for (auto& r : chosen) {
            bool vuln_ok = !tsk.critical || (r.vuln == Vulnerability::Low ||
                                             r.vuln == Vulnerability::Medium);
            if (vuln_ok && r.cpu >= tsk.cpu_demand && r.mem >= tsk.mem_demand) {
                r.cpu -= tsk.cpu_demand;
                r.mem -= tsk.mem_demand;
                plug.reroute_rules.push_back({tsk.id, r.id});
                placed = true;
                break;
            }
        }
        if (!placed) plug.shortfall.push_back(tsk.id);
    }
    return plug;
}

struct RedistributionReport {
    Allocation allocation;
    std::vector<RerouteRule> rejected;  // rules that would breach 3a-3d
    std::vector<TaskId> dropped;        // shortfall plus rejected-rule tasks
};

// Applies the plug: stale tasks move to their targets, the failed node is
// cleared and transitioned Down -> Recovering. Rules that would violate a
// constraint at apply time (e.g. the target failed concurrently) are
// rejected individually and reported; the rest still apply.
inline RedistributionReport redistribute(SystemGraph& graph, Allocation alloc,
                                         const std::map<TaskId, Task>& tasks,
                                         const PlugStructure& plug, SimTime t,
                                         bool busy_accepts = false) {
    RedistributionReport report;
    graph.now = std::max(graph.now, t);
    Node& dead = graph.node(plug.failed);

    for (const auto& rule : plug.reroute_rules) {
        auto tit = tasks.find(rule.task);
        if (tit == tasks.end() || !graph.has_node(rule.target)) {
            report.rejected.push_back(rule);
            continue;
        }
        Node& target = graph.node(rule.target);
        const Task& tsk = tit->second;
        bool state_ok = target.state == NodeState::Available ||
                        (busy_accepts && target.state == NodeState::Busy);
        bool vuln_ok = !tsk.critical ||
                       (target.vulnerability == Vulnerability::Low ||
                        target.vulnerability == Vulnerability::Medium);
        bool fits = cpu_load(target, tasks) + tsk.cpu_demand <=
                        target.capacity &&
                    mem_load(target, tasks) + tsk.mem_demand <=
                        target.memory;
        if (!state_ok || !vuln_ok || !fits) {
            report.rejected.push_back(rule);
            continue;
        }
        target.active_tasks.insert(rule.task);
        alloc.mapping[rule.task] = rule.target;
        alloc.stale.erase(rule.task);
        if (target.capacity - cpu_load(target, tasks) <= 0.0)
            target.state = NodeState::Busy;
    }

    // Anything still hosted on the failed node is dropped from the mapping.
    for (const auto& tid : dead.active_tasks) {
        auto it = alloc.mapping.find(tid);
        if (it != alloc.mapping.end() && it->second == plug.failed) {
            alloc.mapping.erase(it);
            alloc.stale.erase(tid);
            report.dropped.push_back(tid);
        }
    }
    dead.active_tasks.clear();
    if (dead.state == NodeState::Down) {
        dead.state = NodeState::Recovering;
        graph.audit_trail.push_back(
            {t, plug.failed, NodeState::Down, NodeState::Recovering, "containment"});
    }
    alloc.time = t;
    report.allocation = std::move(alloc);
    return report;
}

}  // namespace recist
