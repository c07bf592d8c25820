#pragma once
// The four-layer healing pipeline: probe -> contain -> diagnose -> reason ->
// consolidate knowledge, driven per failure event on a single logical
// timeline. Also provides the identity (no-op) policy and the policy adapter
// used by compute_resilience.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recist/containment.hpp"
#include "recist/continuum.hpp"
#include "recist/diagnosis.hpp"
#include "recist/faults.hpp"
#include "recist/knowledge.hpp"
#include "recist/logs.hpp"
#include "recist/metacognition.hpp"
#include "recist/model.hpp"
#include "recist/reasoner.hpp"
#include "recist/telemetry.hpp"

namespace recist {

struct PipelineConfig {
    int k = 2;
    double delta_t = 0.0;  // 0 derives from topology
    double probe_interval = 5.0;
    bool busy_accepts = false;
    double delta_d_seconds = 120.0;
    MetaConfig meta;
    bool persist_supporting = false;
    std::string scope;        // dataset/scenario label stamped on telemetry
    Instant log_epoch = 0;    // log instant corresponding to sim time 0
};

enum class HealOutcome { Recovered, Escalated, Undetected };

struct NodeHealing {
    NodeId node;
    SimTime flag_time = 0.0;
    SimTime recovery_time = 0.0;
    HealOutcome outcome = HealOutcome::Escalated;
    MetaOutcome meta;
};

namespace detail {

// Hop distances from a (possibly down) source across live intermediates.
inline std::map<NodeId, int> live_hop_distances(const SystemGraph& g,
                                                const NodeId& from, int max_hops) {
    std::map<NodeId, int> dist;
    dist[from] = 0;
    std::vector<NodeId> frontier{from};
    for (int d = 0; d < max_hops && !frontier.empty(); ++d) {
        std::vector<NodeId> next;
        for (const auto& id : frontier) {
            if (id != from) {
                NodeState s = g.node(id).state;
                if (s == NodeState::Down || s == NodeState::Recovering)
                    continue;  // dead/recovering nodes do not forward
            }
            for (const auto& [nid, _] : g.neighbors(id)) {
                if (!dist.count(nid)) {
                    dist[nid] = d + 1;
                    next.push_back(nid);
                }
            }
        }
        frontier = std::move(next);
    }
    return dist;
}

}  // namespace detail

class HealingPipeline {
public:
    HealingPipeline(SystemGraph graph, Allocation alloc,
                    std::map<TaskId, Task> tasks, PipelineConfig config,
                    std::shared_ptr<ReasonerBackend> backend,
                    KnowledgeThresholds knowledge_thresholds = {})
        : graph_(std::move(graph)),
          alloc_(std::move(alloc)),
          tasks_(std::move(tasks)),
          config_(std::move(config)),
          reasoner_(std::move(backend)),
          local_store_(RendezvousStore::Scope::Local, "local-rp",
                       knowledge_thresholds),
          global_store_(RendezvousStore::Scope::Global, "global-rp",
                        knowledge_thresholds) {}

    // Runs one scenario end to end. Dataset records feed the diagnosis
    // windows; the scenario's dialect determines the extraction rules.
    std::vector<NodeHealing> run_scenario(const FailureScenario& scenario,
                                          const std::vector<LogRecord>& records,
                                          LogDialect dialect) {
        std::vector<NodeHealing> healings;
        std::vector<SimTime> event_times;
        for (const auto& ev : scenario.events)
            if (event_times.empty() || event_times.back() != ev.time)
                event_times.push_back(ev.time);

        for (SimTime t : event_times) {
            std::set<NodeId> failed_now = apply_failures(graph_, alloc_, scenario, t);
            clock_ = std::max(clock_, t);
            // Heal nodes that are newly down (not already handled).
            std::vector<NodeId> batch;
            for (const auto& id : failed_now)
                if (graph_.node(id).state == NodeState::Down) batch.push_back(id);
            for (const auto& id : batch) {
                healings.push_back(heal_node(scenario, id, t, records, dialect));
            }
        }
        // Local knowledge syncs into the global store at scenario end.
        global_store_.sync_from(local_store_, reasoner_);
        return healings;
    }

    // I_j: a task completes when it ends the scenario mapped onto a live
    // host. Tasks dropped by containment or left on a dead host do not.
    CompletionReport completion_report(const FailureScenario& scenario) const {
        CompletionReport report;
        report.scenario_id = scenario.id;
        for (const auto& [tid, _] : tasks_) {
            auto it = alloc_.mapping.find(tid);
            bool ok = false;
            if (it != alloc_.mapping.end() && graph_.has_node(it->second)) {
                NodeState s = graph_.node(it->second).state;
                ok = s != NodeState::Down;
            }
            report.completed[tid] = ok;
        }
        return report;
    }

    const SystemGraph& graph() const { return graph_; }
    const Allocation& allocation() const { return alloc_; }
    TelemetryStream& telemetry() { return telemetry_; }
    const TelemetryStream& telemetry() const { return telemetry_; }
    Reasoner& reasoner() { return reasoner_; }
    RendezvousStore& local_store() { return local_store_; }
    RendezvousStore& global_store() { return global_store_; }
    const std::set<NodeId>& failure_set() const { return failure_set_; }
    const ContainmentCounters& containment_counters() const {
        return containment_counters_;
    }
    const DiagnosisCounters& diagnosis_counters() const {
        return diagnosis_counters_;
    }
    SimTime clock() const { return clock_; }

private:
    NodeHealing heal_node(const FailureScenario& scenario, const NodeId& node,
                          SimTime t, const std::vector<LogRecord>& records,
                          LogDialect dialect) {
        NodeHealing healing;
        healing.node = node;

        // --- containment -------------------------------------------------
        double oracle_latency_before = reasoner_.counters().simulated_latency;
        std::optional<NodeId> adopter = find_adopter(node);
        double sweep = config_.probe_interval > 0.0
                           ? std::ceil(t / config_.probe_interval) *
                                 config_.probe_interval
                           : t;
        double timeout = config_.delta_t;

        if (!adopter) {
            // Nobody can see the node: tasks are lost, node stays down.
            healing.outcome = HealOutcome::Undetected;
            healing.flag_time = t;
            healing.recovery_time = t;
            Node& dead = graph_.node(node);
            for (const auto& tid : dead.active_tasks) {
                alloc_.mapping.erase(tid);
                alloc_.stale.erase(tid);
            }
            dead.active_tasks.clear();
            telemetry_.record_event(clock_, "containment", "undetected", node,
                                    {{"scope", config_.scope}});
            return healing;
        }

        MonitoringAgent agent;
        agent.id = "agent-" + *adopter;
        agent.home = *adopter;
        agent.k = config_.k;
        agent.probe_interval = config_.probe_interval;
        agent.timeout = timeout;
        if (agent.timeout <= 0.0)
            agent.timeout = derive_probe_timeout(graph_, agent.home, agent.k);

        auto probes = probe_neighborhood(agent, graph_, tasks_, sweep,
                                         &containment_counters_);
        std::set<NodeId> flagged =
            build_failure_set(probes, sweep + agent.timeout, flag_times_);
        failure_set_.insert(flagged.begin(), flagged.end());
        failure_set_.insert(node);  // the reflex request names the dead node
        flag_times_.emplace(node, sweep + agent.timeout);

        SimTime flag_time = std::max(flag_times_.at(node), clock_);
        clock_ = flag_time;
        healing.flag_time = flag_time;
        telemetry_.record_event(flag_time, "containment", "flag", node,
                                {{"scope", config_.scope},
                                 {"agent", agent.id}});

        auto candidates = plug_candidates(node);
        PlugStructure plug = negotiate_plug(graph_, tasks_, node, candidates,
                                            flag_time, &containment_counters_,
                                            config_.busy_accepts);
        telemetry_.record_event(
            flag_time, "containment", "negotiate", node,
            {{"scope", config_.scope},
             {"accepted", std::to_string(plug.accepted.size())},
             {"rules", std::to_string(plug.reroute_rules.size())},
             {"shortfall", std::to_string(plug.shortfall.size())}});

        auto redistribution = redistribute(graph_, alloc_, tasks_, plug,
                                           flag_time, config_.busy_accepts);
        alloc_ = std::move(redistribution.allocation);
        telemetry_.record_event(
            flag_time, "containment", "redistribute", node,
            {{"scope", config_.scope},
             {"rejected", std::to_string(redistribution.rejected.size())},
             {"dropped", std::to_string(redistribution.dropped.size())}});
        double containment_cost =
            reasoner_.counters().simulated_latency - oracle_latency_before;
        telemetry_.record_event(flag_time, "containment", "layer-span", node,
                                {{"scope", config_.scope},
                                 {"span", detail::format_decimal(containment_cost)}});

        // --- diagnosis ----------------------------------------------------
        double diag_before = reasoner_.counters().simulated_latency;
        long calls_before = reasoner_.counters().calls;
        Instant fail_instant =
            config_.log_epoch + static_cast<Instant>(t * detail::kMicros);
        Instant window = static_cast<Instant>(config_.delta_d_seconds *
                                              detail::kMicros);
        // Datasets name nodes in their own terms; the scenario's attached_logs
        // binds a simulator node to its log identity.
        auto log_key_it = scenario.attached_logs.find(node);
        const NodeId& log_key =
            log_key_it == scenario.attached_logs.end() ? node : log_key_it->second;
        LogBundle bundle = extract_window(records, log_key, fail_instant, window,
                                          nullptr);
        bundle.node = node;
        auto variables = extract_variables(bundle, reasoner_, dialect);
        diagnosis_counters_.scan_ops += static_cast<long>(bundle.records.size());
        auto edges = infer_edges(variables, reasoner_, &diagnosis_counters_);
        DiagnosisGraph diag = build_diagnosis_graph(node, variables, edges);
        auto subtrees = extract_subtrees(diag, scripted_classifier);
        DiagnosisGraph consolidated = consolidate(diag, subtrees);
        double diag_cost = reasoner_.counters().simulated_latency - diag_before;
        clock_ += diag_cost;
        telemetry_.record_event(clock_, "diagnosis", "graph", node,
                                {{"scope", config_.scope},
                                 {"variables", std::to_string(diag.variables.size())},
                                 {"edges", std::to_string(diag.edges.size())},
                                 {"subtrees", std::to_string(subtrees.size())}});
        telemetry_.record_event(clock_, "diagnosis", "layer-span", node,
                                {{"scope", config_.scope},
                                 {"span", detail::format_decimal(diag_cost)}});
        telemetry_.record_event(
            clock_, "diagnosis", "oracle-calls", node,
            {{"scope", config_.scope},
             {"count", std::to_string(reasoner_.counters().calls - calls_before)}});

        // --- meta-cognitive -------------------------------------------------
        double meta_before = reasoner_.counters().simulated_latency;
        long meta_calls_before = reasoner_.counters().calls;
        PathEnumeration preview = enumerate_paths(consolidated, config_.meta.max_depth,
                                                  config_.meta.path_cap);
        telemetry_.record_event(clock_, "meta", "paths", node,
                                {{"scope", config_.scope},
                                 {"count", std::to_string(preview.paths.size())},
                                 {"truncated", preview.truncated ? "true" : "false"}});
        auto on_verdict = [&](const Hypothesis& h) {
            telemetry_.record_event(
                clock_, "meta", "verdict", node,
                {{"scope", config_.scope},
                 {"hypothesis", h.id},
                 {"verdict", verdict_name(h.verdict)},
                 {"gamma", detail::format_fixed9(h.gamma)},
                 {"level", h.path_index <
                               static_cast<int>(preview.paths.size())
                               ? "system"
                               : "auxiliary"}});
        };
        MetaOutcome outcome = run_metacognition(graph_, consolidated, bundle,
                                                reasoner_, config_.meta,
                                                failure_set_, on_verdict);
        for (const auto& a : outcome.ledger.agents) {
            telemetry_.record_event(clock_, "meta", "agent-spawn", node,
                                    {{"scope", config_.scope},
                                     {"agent", a.id},
                                     {"level", agent_level_name(a.level)}});
        }
        double meta_cost = reasoner_.counters().simulated_latency - meta_before;
        clock_ += meta_cost;
        telemetry_.record_event(clock_, "meta", "layer-span", node,
                                {{"scope", config_.scope},
                                 {"span", detail::format_decimal(meta_cost)}});
        telemetry_.record_event(
            clock_, "meta", "oracle-calls", node,
            {{"scope", config_.scope},
             {"count",
              std::to_string(reasoner_.counters().calls - meta_calls_before)}});

        // --- knowledge ------------------------------------------------------
        double kb_before = reasoner_.counters().simulated_latency;
        if (outcome.best) {
            insert_outcome(scenario, node, flag_time, *outcome.best, false);
            if (config_.persist_supporting) {
                for (const auto& h : outcome.supporting)
                    insert_outcome(scenario, node, flag_time, h, true);
            }
        }
        double kb_cost = reasoner_.counters().simulated_latency - kb_before;
        clock_ += kb_cost;
        telemetry_.record_event(clock_, "knowledge", "layer-span", node,
                                {{"scope", config_.scope},
                                 {"span", detail::format_decimal(kb_cost)}});

        healing.recovery_time = clock_;
        if (outcome.best) {
            healing.outcome = HealOutcome::Recovered;
            flag_times_.erase(node);  // a later failure opens a new episode
            telemetry_.record_event(clock_, "meta", "recovered", node,
                                    {{"scope", config_.scope},
                                     {"gamma",
                                      detail::format_fixed9(outcome.best->gamma)}});
        } else {
            healing.outcome = HealOutcome::Escalated;
            telemetry_.record_event(clock_, "meta", "escalated", node,
                                    {{"scope", config_.scope}});
        }
        healing.meta = std::move(outcome);
        return healing;
    }

    void insert_outcome(const FailureScenario& scenario, const NodeId& node,
                        SimTime flag_time, const Hypothesis& h, bool supporting) {
        KnowledgeRecord record;
        record.topic = h.topic;
        record.reason = h.reason;
        record.solution = h.solution;
        record.source_node = node;
        record.timestamp = clock_;
        record.origin_hypothesis = scenario.id + "/" + node + "/" +
                                   detail::format_decimal(flag_time) + "/" + h.id;
        record.supporting = supporting;
        auto report = local_store_.insert_knowledge(record, reasoner_);
        telemetry_.record_event(clock_, "knowledge", "insert", node,
                                {{"scope", config_.scope},
                                 {"placed", insert_kind_name(report.kind)},
                                 {"topic", report.topic_id},
                                 {"partition", report.partition_id}});
        // Reorganization pass over the touched topic.
        const Topic* topic = local_store_.find_topic_by_id(report.topic_id);
        if (topic) {
            std::vector<std::string> partition_ids;
            for (const auto& p : topic->partitions) partition_ids.push_back(p.id);
            for (const auto& pid : partition_ids) {
                int n = local_store_.split_partition(report.topic_id, pid);
                if (n > 1)
                    telemetry_.record_event(clock_, "knowledge", "split", node,
                                            {{"scope", config_.scope},
                                             {"topic", report.topic_id},
                                             {"partition", pid}});
            }
        }
    }

    // The monitor of a failed node: the lexicographically smallest live node
    // whose k-neighborhood reaches it (its own agent died with it).
    std::optional<NodeId> find_adopter(const NodeId& node) const {
        auto hops = detail::live_hop_distances(graph_, node, config_.k);
        std::optional<NodeId> adopter;
        for (const auto& [id, d] : hops) {
            if (id == node || d > config_.k) continue;
            NodeState s = graph_.node(id).state;
            if (s != NodeState::Available && s != NodeState::Busy) continue;
            if (!adopter || id < *adopter) adopter = id;
        }
        return adopter;
    }

    // Candidates for the plug: live nodes within k hops of the failed node,
    // ordered by (hop distance, id) under the same live-hop metric that
    // defined the pool.
    std::vector<NodeId> plug_candidates(const NodeId& node) {
        auto hops = detail::live_hop_distances(graph_, node, config_.k);
        std::set<NodeId> pool;
        for (const auto& [id, d] : hops) {
            if (id == node || d > config_.k) continue;
            if (failure_set_.count(id)) continue;
            NodeState s = graph_.node(id).state;
            if (s == NodeState::Down || s == NodeState::Recovering) continue;
            pool.insert(id);
        }
        return detail::order_candidates(hops, pool,
                                        std::max<int>(8, static_cast<int>(pool.size())),
                                        &containment_counters_);
    }

    SystemGraph graph_;
    Allocation alloc_;
    std::map<TaskId, Task> tasks_;
    PipelineConfig config_;
    Reasoner reasoner_;
    RendezvousStore local_store_;
    RendezvousStore global_store_;
    TelemetryStream telemetry_;
    ContainmentCounters containment_counters_;
    DiagnosisCounters diagnosis_counters_;
    std::set<NodeId> failure_set_;
    std::map<NodeId, SimTime> flag_times_;
    SimTime clock_ = 0.0;
};

// No-op healing policy: failures apply, nothing reroutes.
inline CompletionReport identity_policy(SystemGraph& graph, Allocation& alloc,
                                        const std::map<TaskId, Task>& tasks,
                                        const FailureScenario& scenario,
                                        std::uint64_t /*seed*/) {
    for (const auto& ev : scenario.events)
        apply_failures(graph, alloc, scenario, ev.time);
    CompletionReport report;
    report.scenario_id = scenario.id;
    for (const auto& [tid, _] : tasks) {
        auto it = alloc.mapping.find(tid);
        bool ok = it != alloc.mapping.end() && graph.has_node(it->second) &&
                  graph.node(it->second).state != NodeState::Down;
        report.completed[tid] = ok;
    }
    return report;
}

// Containment-pipeline policy for compute_resilience: a fresh pipeline per
// scenario on the caller's graph/allocation copies.
struct ContainmentPolicy {
    PipelineConfig config;

    CompletionReport operator()(SystemGraph& graph, Allocation& alloc,
                                const std::map<TaskId, Task>& tasks,
                                const FailureScenario& scenario,
                                std::uint64_t /*seed*/) const {
        HealingPipeline pipeline(graph, alloc, tasks, config,
                                 std::make_shared<ScriptedBackend>());
        pipeline.run_scenario(scenario, {}, LogDialect::ZooKeeper);
        return pipeline.completion_report(scenario);
    }
};

}  // namespace recist
