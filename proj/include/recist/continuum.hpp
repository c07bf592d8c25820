#pragma once
// System-model operations: task assignment, latency/utilization scoring,
// constraint checking, and the resilience measure over failure scenarios.

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "recist/detail/strings.hpp"
#include "recist/errors.hpp"
#include "recist/model.hpp"

namespace recist {

inline double cpu_load(const Node& n, const std::map<TaskId, Task>& tasks) {
    double sum = 0.0;
    for (const auto& tid : n.active_tasks) {
        auto it = tasks.find(tid);
        if (it != tasks.end()) sum += it->second.cpu_demand;
    }
    return sum;
}

inline double mem_load(const Node& n, const std::map<TaskId, Task>& tasks) {
    double sum = 0.0;
    for (const auto& tid : n.active_tasks) {
        auto it = tasks.find(tid);
        if (it != tasks.end()) sum += it->second.mem_demand;
    }
    return sum;
}

// Maps task τ_j onto a node, enforcing capacity (3a), memory (3b),
// availability (3c) and the criticality rule (3d). The node flips to Busy
// only when it has no residual capacity left.
inline Allocation assign_task(SystemGraph& graph, Allocation alloc,
                              const std::map<TaskId, Task>& tasks,
                              const Task& task, const NodeId& node_id,
                              bool busy_accepts = false) {
    if (!graph.has_node(node_id)) throw NodeNotFound(node_id);
    Node& n = graph.node(node_id);
    if (n.state != NodeState::Available &&
        !(busy_accepts && n.state == NodeState::Busy)) {
        throw NodeUnavailable(node_id + " is " + state_name(n.state));
    }
    if (task.critical && (n.vulnerability == Vulnerability::High ||
                          n.vulnerability == Vulnerability::Critical)) {
        throw CriticalityViolation("critical task " + task.id + " on " +
                                   node_id + " (" +
                                   vulnerability_name(n.vulnerability) + ")");
    }
    double cl = cpu_load(n, tasks);
    double ml = mem_load(n, tasks);
    if (cl + task.cpu_demand > n.capacity || ml + task.mem_demand > n.memory) {
        throw CapacityExceeded("task " + task.id + " does not fit on " + node_id);
    }
    n.active_tasks.insert(task.id);
    alloc.mapping[task.id] = node_id;
    if (n.capacity - (cl + task.cpu_demand) <= 0.0) n.state = NodeState::Busy;
    return alloc;
}

namespace detail {

// Dijkstra over link latency; links under the bandwidth floor and Down
// intermediate nodes are unusable. Endpoints may be Down (probing a dead
// node still has a well-defined path cost).
inline std::optional<double> shortest_latency(const SystemGraph& g,
                                              const NodeId& from,
                                              const NodeId& to,
                                              bool avoid_down_intermediates = true) {
    if (from == to) return 0.0;
    std::map<NodeId, double> dist;
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[from] = 0.0;
    pq.push({0.0, from});
    while (!pq.empty()) {
        auto [d, id] = pq.top();
        pq.pop();
        if (d > dist[id]) continue;
        if (id == to) return d;
        if (avoid_down_intermediates && id != from &&
            g.node(id).state == NodeState::Down)
            continue;  // dead nodes do not forward
        for (const auto& [nid, link] : g.neighbors(id, /*respect_floor=*/true)) {
            double nd = d + link->latency;
            auto it = dist.find(nid);
            if (it == dist.end() || nd < it->second) {
                dist[nid] = nd;
                pq.push({nd, nid});
            }
        }
    }
    return std::nullopt;
}

// Hop distance ignoring the bandwidth floor (neighborhood membership is a
// topology property, not a throughput one).
inline std::map<NodeId, int> hop_distances(const SystemGraph& g,
                                           const NodeId& from, int max_hops) {
    std::map<NodeId, int> dist;
    dist[from] = 0;
    std::queue<NodeId> q;
    q.push(from);
    while (!q.empty()) {
        NodeId id = q.front();
        q.pop();
        int d = dist[id];
        if (d >= max_hops) continue;
        for (const auto& [nid, _] : g.neighbors(id)) {
            if (!dist.count(nid)) {
                dist[nid] = d + 1;
                q.push(nid);
            }
        }
    }
    return dist;
}

}  // namespace detail

// L(A): mean over tasks of network latency (shortest path from the task's
// source to its assigned node) plus compute time scaled by the assigned
// node's load from other tasks: compute_time * (1 + other_load / C_i).
inline double compute_latency(const SystemGraph& graph, const Allocation& alloc,
                              const std::vector<Task>& tasks,
                              const std::map<TaskId, NodeId>& source) {
    if (tasks.empty()) return 0.0;
    std::map<TaskId, Task> task_map;
    for (const auto& t : tasks) task_map[t.id] = t;
    double total = 0.0;
    for (const auto& t : tasks) {
        auto mit = alloc.mapping.find(t.id);
        if (mit == alloc.mapping.end())
            throw NodeNotFound("task " + t.id + " is unmapped");
        auto sit = source.find(t.id);
        if (sit == source.end() || !graph.has_node(sit->second))
            throw NodeNotFound("no source node for task " + t.id);
        const NodeId& target = mit->second;
        auto net = detail::shortest_latency(graph, sit->second, target,
                                            /*avoid_down_intermediates=*/false);
        if (!net)
            throw Unreachable("no path " + sit->second + " -> " + target +
                              " with bandwidth >= floor");
        const Node& n = graph.node(target);
        double other = cpu_load(n, task_map) -
                       (n.active_tasks.count(t.id) ? t.cpu_demand : 0.0);
        double l_com = t.compute_time * (1.0 + (n.capacity > 0.0 ? other / n.capacity : 0.0));
        total += *net + l_com;
    }
    return total / static_cast<double>(tasks.size());
}

// U(A) = alpha * cpu ratio + (1-alpha) * mem ratio over the whole graph.
inline double compute_utilization(const SystemGraph& graph,
                                  const std::map<TaskId, Task>& tasks,
                                  double alpha) {
    double cap = 0.0, mem = 0.0, cl = 0.0, ml = 0.0;
    for (const auto& [_, n] : graph.nodes) {
        cap += n.capacity;
        mem += n.memory;
        cl += cpu_load(n, tasks);
        ml += mem_load(n, tasks);
    }
    if (cap <= 0.0 || mem <= 0.0)
        throw ZeroCapacity("graph has zero total capacity or memory");
    return alpha * (cl / cap) + (1.0 - alpha) * (ml / mem);
}

enum class ViolationKind {
    CapCPU,          // 3a
    CapMem,          // 3b
    StateNotAvailable,  // 3c
    VulnCritical,    // 3d
    BandwidthFloor,  // 3e
    UnmappedTask     // 3f
};

inline const char* violation_name(ViolationKind k) {
    switch (k) {
        case ViolationKind::CapCPU: return "CapCPU";
        case ViolationKind::CapMem: return "CapMem";
        case ViolationKind::StateNotAvailable: return "StateNotAvailable";
        case ViolationKind::VulnCritical: return "VulnCritical";
        case ViolationKind::BandwidthFloor: return "BandwidthFloor";
        case ViolationKind::UnmappedTask: return "UnmappedTask";
    }
    return "?";
}

struct Violation {
    ViolationKind kind;
    std::string subject;  // node, task, or link involved
    std::string detail;
};

// Violations are data, not errors: one record per breached constraint.
// Node-state checks accept Busy placements (a fully loaded node still hosts
// its tasks legally); only Down/Recovering hosts violate 3c.
inline std::vector<Violation> check_constraints(const SystemGraph& graph,
                                                const Allocation& alloc,
                                                const std::vector<Task>& tasks) {
    std::vector<Violation> out;
    std::map<TaskId, Task> task_map;
    for (const auto& t : tasks) task_map[t.id] = t;

    for (const auto& [id, n] : graph.nodes) {
        double cl = cpu_load(n, task_map);
        double ml = mem_load(n, task_map);
        if (cl > n.capacity)
            out.push_back({ViolationKind::CapCPU, id,
                           "cpu load " + detail::format_decimal(cl) + " > " +
                               detail::format_decimal(n.capacity)});
        if (ml > n.memory)
            out.push_back({ViolationKind::CapMem, id,
                           "mem load " + detail::format_decimal(ml) + " > " +
                               detail::format_decimal(n.memory)});
    }
    for (const auto& t : tasks) {
        auto it = alloc.mapping.find(t.id);
        if (it == alloc.mapping.end() || !graph.has_node(it->second)) {
            out.push_back({ViolationKind::UnmappedTask, t.id, "no host node"});
            continue;
        }
        const Node& n = graph.node(it->second);
        if (n.state == NodeState::Down || n.state == NodeState::Recovering)
            out.push_back({ViolationKind::StateNotAvailable, t.id,
                           "host " + n.id + " is " + state_name(n.state)});
        if (t.critical && (n.vulnerability == Vulnerability::High ||
                           n.vulnerability == Vulnerability::Critical))
            out.push_back({ViolationKind::VulnCritical, t.id,
                           "critical task on " +
                               std::string(vulnerability_name(n.vulnerability)) +
                               " node " + n.id});
    }
    for (const auto& l : graph.links) {
        if (l.bandwidth < graph.bandwidth_floor)
            out.push_back({ViolationKind::BandwidthFloor, l.src + "-" + l.dst,
                           "bandwidth " + detail::format_decimal(l.bandwidth) +
                               " < floor " +
                               detail::format_decimal(graph.bandwidth_floor)});
    }
    return out;
}

// Exact completion fraction, kept rational so scenario means can be compared
// without float drift.
struct Fraction {
    long long num = 0;
    long long den = 1;

    static long long gcd(long long a, long long b) {
        while (b) {
            long long t = a % b;
            a = b;
            b = t;
        }
        return a < 0 ? -a : a;
    }

    Fraction normalized() const {
        if (num == 0) return {0, 1};
        long long g = gcd(num, den);
        return {num / g, den / g};
    }

    Fraction operator+(const Fraction& o) const {
        return Fraction{num * o.den + o.num * den, den * o.den}.normalized();
    }

    bool operator==(const Fraction& o) const {
        Fraction a = normalized(), b = o.normalized();
        return a.num == b.num && a.den == b.den;
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Fraction completion_fraction(const CompletionReport& report) {
    if (report.completed.empty()) return {1, 1};
    return Fraction{report.completed_count(),
                    static_cast<long long>(report.completed.size())}
        .normalized();
}

template <typename Reports>
Fraction mean_completion_fraction(const Reports& reports) {
    if (reports.empty()) return {1, 1};
    Fraction sum{0, 1};
    for (const auto& r : reports) sum = sum + completion_fraction(r);
    return Fraction{sum.num, sum.den * static_cast<long long>(reports.size())}
        .normalized();
}

// R(A): empirical mean of per-scenario completion fractions. The policy is
// invoked once per (scenario, trial) on private copies of graph/allocation;
// failures inside a policy score the scenario by what did complete. Results
// reduce in scenario order regardless of evaluation order, so fixed
// (seed, inputs) give identical output.
template <typename Scenarios, typename Policy>
double compute_resilience(const SystemGraph& graph, const Allocation& alloc,
                          const std::map<TaskId, Task>& tasks,
                          const Scenarios& scenarios, Policy&& policy,
                          int trials = 1, std::uint64_t seed = 0) {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (scenarios.empty()) throw ConfigError("scenario list is empty");
    std::vector<CompletionReport> reports;
    for (int trial = 0; trial < trials; ++trial) {
        int index = 0;
        for (const auto& scenario : scenarios) {
            SystemGraph g = graph;
            Allocation a = alloc;
            reports.push_back(
                policy(g, a, tasks, scenario, seed + static_cast<std::uint64_t>(trial)));
            ++index;
        }
        (void)index;
    }
    return mean_completion_fraction(reports).value();
}

}  // namespace recist
