#pragma once
// Meta-cognitive layer: DFS path enumeration over the consolidated diagnosis
// graph, micro-agent hypothesis generation and scoring, verdict banding,
// proliferation/inhibition regulation, graph restructuring, and selection of
// the best hypothesis.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recist/diagnosis.hpp"
#include "recist/errors.hpp"
#include "recist/faults.hpp"
#include "recist/logs.hpp"
#include "recist/model.hpp"
#include "recist/reasoner.hpp"

namespace recist {

struct MetaConfig {
    double w1 = 0.4;
    double w2 = 0.35;
    double w3 = 0.25;
    double theta_pro = 0.35;
    double theta_acc = 0.55;
    double theta_inh = 0.85;
    int r_max = 8;
    int proliferation_batch = 2;
    int global_agent_cap = 32;
    int max_depth = 12;
    int path_cap = 64;
    bool forward_supporting = true;  // persist Accepted hypotheses downstream
};

struct ReasoningPath {
    std::vector<std::string> variable_ids;  // consecutive pairs are edges
    int depth() const { return static_cast<int>(variable_ids.size()); }
};

struct PathEnumeration {
    std::vector<ReasoningPath> paths;  // DFS order, children by ascending id
    bool truncated = false;            // hit the path cap
};

// All root-to-sink simple paths of depth <= max_depth, DFS order with
// children visited by ascending variable id. Isolated variables yield a
// single depth-1 path. Enumeration stops (flagged) at path_cap.
inline PathEnumeration enumerate_paths(const DiagnosisGraph& graph, int max_depth,
                                       int path_cap = 1 << 20) {
    PathEnumeration result;
    std::map<std::string, std::vector<std::string>> adj;
    std::set<std::string> has_incoming;
    for (const auto& e : graph.edges) {
        adj[e.src].push_back(e.dst);
        has_incoming.insert(e.dst);
    }
    for (auto& [_, children] : adj) std::sort(children.begin(), children.end());

    std::vector<std::string> stack;
    std::function<void(const std::string&)> dfs = [&](const std::string& id) {
        if (result.truncated) return;
        stack.push_back(id);
        auto it = adj.find(id);
        bool is_sink = it == adj.end() || it->second.empty();
        if (is_sink) {
            if (static_cast<int>(result.paths.size()) >= path_cap) {
                result.truncated = true;
            } else {
                result.paths.push_back({stack});
            }
        } else if (static_cast<int>(stack.size()) < max_depth) {
            for (const auto& child : it->second) {
                dfs(child);
                if (result.truncated) break;
            }
        }
        stack.pop_back();
    };

    for (const auto& [id, _] : graph.variables) {
        if (has_incoming.count(id)) continue;  // roots only
        dfs(id);
        if (result.truncated) break;
    }
    return result;
}

enum class AgentLevel { System, Auxiliary };

inline const char* agent_level_name(AgentLevel l) {
    return l == AgentLevel::System ? "system" : "auxiliary";
}

enum class Verdict { Harmful, Rejected, Accepted, Best };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Harmful: return "harmful";
        case Verdict::Rejected: return "rejected";
        case Verdict::Accepted: return "accepted";
        case Verdict::Best: return "best";
    }
    return "rejected";
}

struct MicroAgent {
    std::string id;
    AgentLevel level = AgentLevel::System;
    bool used = false;
};

struct AgentInvocation {
    std::string agent_id;
    int path_index = -1;
    SimTime time = 0.0;
    AgentLevel level = AgentLevel::System;
};

struct MicroAgentLedger {
    std::vector<MicroAgent> agents;
    std::vector<AgentInvocation> invocations;
    int proliferation_events = 0;
    int inhibition_events = 0;
    bool cap_reached = false;

    int spawned() const { return static_cast<int>(agents.size()); }

    int spawned_at_level(AgentLevel l) const {
        int n = 0;
        for (const auto& a : agents) n += a.level == l ? 1 : 0;
        return n;
    }

    int system_invocations() const {
        int n = 0;
        for (const auto& inv : invocations) n += inv.level == AgentLevel::System;
        return n;
    }

    // Reasoning-depth rate: system-level invocations over instantiated agents.
    double rdr() const {
        if (agents.empty()) return 0.0;
        return static_cast<double>(system_invocations()) /
               static_cast<double>(agents.size());
    }
};

// Initial population: r = min(r_max, path count) system-level agents.
inline MicroAgentLedger spawn_micro_agents(int path_count, const MetaConfig& config) {
    if (path_count < 0) throw ConfigError("path count must be >= 0");
    MicroAgentLedger ledger;
    int r = std::min(config.r_max, path_count);
    for (int i = 0; i < r; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "a%03d", i + 1);
        ledger.agents.push_back({buf, AgentLevel::System, false});
    }
    return ledger;
}

struct Hypothesis {
    std::string id;            // H<path index>
    int path_index = -1;
    ReasoningPath path;
    std::string topic;
    std::string reason;
    std::string solution;
    std::vector<size_t> evidence;  // bundle record indices
    double coherence = 0.0;
    double safety = 0.0;
    double utility = 0.0;
    double gamma = 0.0;
    Verdict verdict = Verdict::Rejected;
    bool empty_narrative = false;
};

// Lambda: one micro-agent turns one path plus its log evidence into an
// unscored hypothesis. A path with no evidence overlap raises EmptyNarrative.
inline Hypothesis generate_hypothesis(const std::string& agent_id,
                                      const ReasoningPath& path, int path_index,
                                      const DiagnosisGraph& graph,
                                      const LogBundle& bundle, Reasoner& reasoner) {
    (void)agent_id;
    Hypothesis h;
    h.path_index = path_index;
    h.id = "H" + std::to_string(path_index);
    h.path = path;

    std::set<size_t> evidence;
    for (const auto& vid : path.variable_ids) {
        auto it = graph.variables.find(vid);
        if (it == graph.variables.end()) continue;
        for (size_t e : it->second.evidence)
            if (e < bundle.records.size()) evidence.insert(e);
    }
    h.evidence.assign(evidence.begin(), evidence.end());
    if (h.evidence.empty())
        throw EmptyNarrative("path " + h.id + " has no evidence in the bundle");

    ReasonerRequest req;
    req.kind = RequestKind::Hypothesize;
    req.payload["node"] = bundle.node;
    Json steps = Json::array();
    for (const auto& vid : path.variable_ids) {
        const auto& v = graph.variables.at(vid);
        steps.push_back({{"id", v.id},
                         {"kind", variable_kind_name(v.kind)},
                         {"label", v.label}});
    }
    req.payload["path"] = std::move(steps);
    Json ev = Json::array();
    for (size_t i : h.evidence) ev.push_back(bundle.records[i].text);
    req.payload["evidence"] = std::move(ev);
    Json response = reasoner.dispatch(req);

    h.topic = response.value("topic", "");
    h.reason = response.value("reason", "");
    h.solution = response.value("solution", "");
    if (h.topic.empty() || h.reason.empty() || h.solution.empty())
        throw EmptyNarrative("oracle produced an empty narrative for " + h.id);
    return h;
}

// Gamma = w1*coherence + w2*safety + w3*utility, components clamped to [0,1].
inline Hypothesis score_hypothesis(Hypothesis h, const MetaConfig& config,
                                   Reasoner& reasoner) {
    if (config.w1 < 0 || config.w2 < 0 || config.w3 < 0 ||
        std::fabs(config.w1 + config.w2 + config.w3 - 1.0) > 1e-9)
        throw BadThresholds("weights must be nonnegative and sum to 1");
    ReasonerRequest req;
    req.kind = RequestKind::Evaluate;
    req.payload["topic"] = h.topic;
    req.payload["reason"] = h.reason;
    req.payload["solution"] = h.solution;
    req.payload["depth"] = h.path.depth();
    req.payload["evidence_count"] = static_cast<long>(h.evidence.size());
    Json response;
    try {
        response = reasoner.dispatch(req);
    } catch (const ReasonerUnavailable& e) {
        throw EvaluatorUnavailable(e.what());
    }
    auto clamp01 = [](double x) { return std::min(1.0, std::max(0.0, x)); };
    h.coherence = clamp01(response.value("coherence", 0.0));
    h.safety = clamp01(response.value("safety", 0.0));
    h.utility = clamp01(response.value("utility", 0.0));
    h.gamma = config.w1 * h.coherence + config.w2 * h.safety + config.w3 * h.utility;
    return h;
}

// Bands partition [0,1]: Harmful [0,pro), Rejected [pro,acc),
// Accepted [acc,inh), Best [inh,1].
inline Verdict classify_verdict(double gamma, const MetaConfig& config) {
    if (!(0.0 <= config.theta_pro && config.theta_pro <= config.theta_acc &&
          config.theta_acc < config.theta_inh && config.theta_inh <= 1.0))
        throw BadThresholds("need 0 <= pro <= acc < inh <= 1");
    if (gamma >= config.theta_inh) return Verdict::Best;
    if (gamma < config.theta_pro) return Verdict::Harmful;
    if (gamma >= config.theta_acc) return Verdict::Accepted;
    return Verdict::Rejected;
}

struct GraphDelta {
    std::vector<DiagnosisVariable> added_variables;
    std::vector<CausalEdge> added_edges;
};

struct RegulationResult {
    std::vector<ReasoningPath> new_paths;
    GraphDelta delta;
    bool stop = false;  // inhibition fired
};

// Proliferation/inhibition control. Harmful verdicts grow the population:
// up to proliferation_batch auxiliary agents, new paths found by re-rooting
// DFS at unexplored high-out-degree variables and by bridging temporally
// adjacent unconnected variables. Best verdicts inhibit all further growth.
inline RegulationResult regulate_population(MicroAgentLedger& ledger,
                                            Verdict verdict,
                                            const DiagnosisGraph& graph,
                                            const std::vector<ReasoningPath>& explored,
                                            const MetaConfig& config) {
    RegulationResult result;
    if (verdict == Verdict::Best) {
        ++ledger.inhibition_events;
        result.stop = true;
        return result;
    }
    if (verdict != Verdict::Harmful) return result;

    ++ledger.proliferation_events;
    int budget = std::min(config.proliferation_batch,
                          config.global_agent_cap - ledger.spawned());
    if (budget <= 0) {
        ledger.cap_reached = true;
        return result;
    }

    // Bridge temporally adjacent, unconnected variables.
    std::vector<const DiagnosisVariable*> order;
    for (const auto& [_, v] : graph.variables) order.push_back(&v);
    std::sort(order.begin(), order.end(),
              [](const DiagnosisVariable* a, const DiagnosisVariable* b) {
                  if (a->first_seen != b->first_seen)
                      return a->first_seen < b->first_seen;
                  return a->id < b->id;
              });
    DiagnosisGraph bridged = graph;
    for (size_t i = 0; i + 1 < order.size(); ++i) {
        const auto& a = *order[i];
        const auto& b = *order[i + 1];
        if (graph.has_edge(a.id, b.id) || graph.has_edge(b.id, a.id)) continue;
        CausalEdge aux{a.id, b.id, 0.5, "auxiliary bridge: temporal adjacency", true};
        if (bridged.edges.insert(aux).second)
            result.delta.added_edges.push_back(aux);
    }

    // Re-root at unexplored high-out-degree variables of the bridged graph.
    std::set<std::string> explored_roots;
    for (const auto& p : explored)
        if (!p.variable_ids.empty()) explored_roots.insert(p.variable_ids.front());
    std::map<std::string, int> out_degree;
    for (const auto& e : bridged.edges) ++out_degree[e.src];
    std::vector<std::string> candidates;
    for (const auto& [id, _] : bridged.variables)
        if (!explored_roots.count(id) && out_degree[id] > 0) candidates.push_back(id);
    std::sort(candidates.begin(), candidates.end(),
              [&](const std::string& a, const std::string& b) {
                  if (out_degree[a] != out_degree[b])
                      return out_degree[a] > out_degree[b];
                  return a < b;
              });

    // Enumerate through the bridged graph from each candidate root and keep
    // paths not explored yet, one per newly spawned agent.
    std::set<std::vector<std::string>> known;
    for (const auto& p : explored) known.insert(p.variable_ids);
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : bridged.edges) adj[e.src].push_back(e.dst);
    for (auto& [_, ch] : adj) std::sort(ch.begin(), ch.end());
    for (const auto& root : candidates) {
        if (static_cast<int>(result.new_paths.size()) >= budget) break;
        std::vector<std::string> stack;
        std::function<void(const std::string&)> dfs = [&](const std::string& id) {
            if (static_cast<int>(result.new_paths.size()) >= budget) return;
            if (std::find(stack.begin(), stack.end(), id) != stack.end()) return;
            stack.push_back(id);
            auto it = adj.find(id);
            bool is_sink = it == adj.end() || it->second.empty();
            if (is_sink) {
                if (!known.count(stack)) {
                    result.new_paths.push_back({stack});
                    known.insert(stack);
                }
            } else if (static_cast<int>(stack.size()) < config.max_depth) {
                for (const auto& child : it->second) dfs(child);
            }
            stack.pop_back();
        };
        dfs(root);
    }

    for (size_t i = 0; i < result.new_paths.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "b%03d", ledger.spawned_at_level(AgentLevel::Auxiliary) + 1);
        ledger.agents.push_back({buf, AgentLevel::Auxiliary, false});
    }
    if (ledger.spawned() >= config.global_agent_cap) ledger.cap_reached = true;
    return result;
}

// G^meta: source graph plus accumulated deltas, re-DAG-ized with the
// diagnosis cycle rule. Auxiliary tags survive the union.
inline DiagnosisGraph restructure_graph(const DiagnosisGraph& graph,
                                        const std::vector<GraphDelta>& deltas) {
    std::vector<DiagnosisVariable> variables;
    for (const auto& [_, v] : graph.variables) variables.push_back(v);
    std::set<CausalEdge> edges = graph.edges;
    for (const auto& d : deltas) {
        for (const auto& v : d.added_variables) variables.push_back(v);
        for (const auto& e : d.added_edges) edges.insert(e);
    }
    DiagnosisGraph out = build_diagnosis_graph(graph.node, variables, edges);
    return out;
}

struct MetaOutcome {
    NodeId node;
    std::optional<Hypothesis> best;
    std::vector<Hypothesis> supporting;  // Accepted, in path order
    std::vector<Hypothesis> all_scored;
    DiagnosisGraph restructured;
    MicroAgentLedger ledger;
    bool escalated = false;  // no Best hypothesis
    bool paths_truncated = false;
};

// Argmax selection. On success the node leaves the failure set and
// transitions Recovering -> Available; otherwise the outcome is escalated
// and the node stays Recovering.
inline MetaOutcome select_best(SystemGraph& graph,
                               std::vector<Hypothesis> scored, const NodeId& node,
                               std::set<NodeId>& failure_set) {
    MetaOutcome outcome;
    outcome.node = node;
    std::optional<size_t> best_index;
    for (size_t i = 0; i < scored.size(); ++i) {
        if (scored[i].verdict == Verdict::Accepted)
            outcome.supporting.push_back(scored[i]);
        if (scored[i].verdict != Verdict::Best) continue;
        if (!best_index || scored[i].gamma > scored[*best_index].gamma)
            best_index = i;  // ties keep the earlier path index
    }
    if (!best_index) {
        outcome.escalated = true;
        outcome.all_scored = std::move(scored);
        return outcome;
    }
    outcome.best = scored[*best_index];
    outcome.all_scored = std::move(scored);
    failure_set.erase(node);
    if (graph.has_node(node) && graph.node(node).state == NodeState::Recovering) {
        graph.node(node).state = NodeState::Available;
        graph.audit_trail.push_back({graph.now, node, NodeState::Recovering,
                                     NodeState::Available, "recovery"});
    }
    return outcome;
}

// Full Algorithm-3 loop for one failed node. Oracle calls stay bounded by
// O(paths + agents); the verdict stream and ledger are pure functions of
// (graph, bundle, config, reasoner transcript).
inline MetaOutcome run_metacognition(SystemGraph& system, const DiagnosisGraph& graph,
                                     const LogBundle& bundle, Reasoner& reasoner,
                                     const MetaConfig& config,
                                     std::set<NodeId>& failure_set,
                                     const std::function<void(const Hypothesis&)>&
                                         on_verdict = nullptr) {
    PathEnumeration enumeration = enumerate_paths(graph, config.max_depth,
                                                  config.path_cap);
    MicroAgentLedger ledger =
        spawn_micro_agents(static_cast<int>(enumeration.paths.size()), config);

    struct QueueItem {
        ReasoningPath path;
        AgentLevel level;
    };
    std::vector<QueueItem> queue;
    for (const auto& p : enumeration.paths)
        queue.push_back({p, AgentLevel::System});

    std::vector<Hypothesis> scored;
    std::vector<GraphDelta> deltas;
    std::vector<ReasoningPath> explored;

    auto acquire_agent = [&](AgentLevel level) -> MicroAgent* {
        for (auto& a : ledger.agents)
            if (!a.used && a.level == level) return &a;
        if (ledger.spawned() >= config.global_agent_cap) {
            ledger.cap_reached = true;
            return nullptr;
        }
        char buf[16];
        if (level == AgentLevel::System)
            std::snprintf(buf, sizeof(buf), "a%03d",
                          ledger.spawned_at_level(AgentLevel::System) + 1);
        else
            std::snprintf(buf, sizeof(buf), "b%03d",
                          ledger.spawned_at_level(AgentLevel::Auxiliary) + 1);
        ledger.agents.push_back({buf, level, false});
        return &ledger.agents.back();
    };

    bool stopped = false;
    for (size_t i = 0; i < queue.size() && !stopped; ++i) {
        const QueueItem& item = queue[i];
        MicroAgent* agent = acquire_agent(item.level);
        if (!agent) break;  // cap reached, stop gracefully
        agent->used = true;

        Hypothesis h;
        bool narrated = true;
        try {
            h = generate_hypothesis(agent->id, item.path, static_cast<int>(i),
                                    graph, bundle, reasoner);
        } catch (const EmptyNarrative&) {
            narrated = false;
            h.path = item.path;
            h.path_index = static_cast<int>(i);
            h.id = "H" + std::to_string(i);
            h.empty_narrative = true;
            h.verdict = Verdict::Rejected;
        }
        ledger.invocations.push_back(
            {agent->id, static_cast<int>(i), system.now, agent->level});
        if (narrated) {
            h = score_hypothesis(std::move(h), config, reasoner);
            h.verdict = classify_verdict(h.gamma, config);
        }
        explored.push_back(item.path);
        if (on_verdict) on_verdict(h);

        RegulationResult reg =
            regulate_population(ledger, h.verdict, graph, explored, config);
        scored.push_back(std::move(h));
        if (reg.stop) stopped = true;
        if (!reg.delta.added_edges.empty() || !reg.delta.added_variables.empty())
            deltas.push_back(reg.delta);
        for (const auto& p : reg.new_paths)
            queue.push_back({p, AgentLevel::Auxiliary});
    }

    MetaOutcome outcome = select_best(system, std::move(scored), graph.node,
                                      failure_set);
    outcome.restructured = restructure_graph(graph, deltas);
    outcome.ledger = std::move(ledger);
    outcome.paths_truncated = enumeration.truncated;
    return outcome;
}

}  // namespace recist
