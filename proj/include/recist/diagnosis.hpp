#pragma once
// Diagnosis layer: turns a node's log window into diagnostic variables,
// asks the relation oracle for causal edges (temporal precedence gated),
// DAG-izes the result, extracts per-category subtrees, and consolidates.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recist/errors.hpp"
#include "recist/logs.hpp"
#include "recist/reasoner.hpp"

namespace recist {

enum class VariableKind { Event, Metric, StateTransition, ResourceIndicator, ErrorCode };

inline const char* variable_kind_name(VariableKind k) {
    switch (k) {
        case VariableKind::Event: return "Event";
        case VariableKind::Metric: return "Metric";
        case VariableKind::StateTransition: return "StateTransition";
        case VariableKind::ResourceIndicator: return "ResourceIndicator";
        case VariableKind::ErrorCode: return "ErrorCode";
    }
    return "Event";
}

inline VariableKind variable_kind_from_name(const std::string& s) {
    if (s == "Metric") return VariableKind::Metric;
    if (s == "StateTransition") return VariableKind::StateTransition;
    if (s == "ResourceIndicator") return VariableKind::ResourceIndicator;
    if (s == "ErrorCode") return VariableKind::ErrorCode;
    return VariableKind::Event;
}

struct DiagnosisVariable {
    std::string id;  // x001, x002, ... in first-evidence order
    VariableKind kind = VariableKind::Event;
    std::string label;
    std::vector<size_t> evidence;  // indices into the bundle's records
    Instant first_seen = 0;
    Instant last_seen = 0;
};

struct CausalEdge {
    std::string src;
    std::string dst;
    double confidence = 1.0;
    std::string rationale;
    bool auxiliary = false;  // inserted by meta-cognitive restructuring

    bool operator<(const CausalEdge& o) const {
        if (src != o.src) return src < o.src;
        return dst < o.dst;
    }

    bool operator==(const CausalEdge& o) const {
        return src == o.src && dst == o.dst;
    }
};

struct DiagnosisGraph {
    NodeId node;
    std::map<std::string, DiagnosisVariable> variables;  // id -> variable
    std::set<CausalEdge> edges;
    std::vector<CausalEdge> removed_in_dagization;

    bool has_edge(const std::string& a, const std::string& b) const {
        return edges.count(CausalEdge{a, b, 0, "", false}) != 0;
    }
};

struct DiagnosisCounters {
    long pair_queries = 0;
    long scan_ops = 0;

    void reset() { *this = {}; }
};

// EXTRACT step: one oracle call over the whole bundle; entities dedup by
// (kind, label) with all supporting records as evidence.
inline std::vector<DiagnosisVariable> extract_variables(const LogBundle& bundle,
                                                        Reasoner& reasoner,
                                                        LogDialect dialect) {
    if (bundle.records.empty()) return {};
    Json records = Json::array();
    for (const auto& r : bundle.records) {
        Json rec;
        rec["text"] = r.text;
        rec["ts"] = r.timestamp;
        if (!r.fields.empty()) {
            Json f = Json::object();
            for (const auto& [k, v] : r.fields) f[k] = v;
            rec["fields"] = f;
        }
        records.push_back(std::move(rec));
    }
    ReasonerRequest req;
    req.kind = RequestKind::Extract;
    req.payload["dialect"] = dialect_name(dialect);
    req.payload["node"] = bundle.node;
    req.payload["records"] = std::move(records);
    Json response = reasoner.dispatch(req);

    std::vector<DiagnosisVariable> out;
    std::map<std::pair<std::string, std::string>, size_t> dedup;
    int counter = 0;
    for (const auto& v : response["variables"]) {
        std::string label = v.value("label", "");
        std::string kind = v.value("kind", "Event");
        if (label.empty()) continue;
        std::vector<size_t> evidence;
        for (const auto& e : v["evidence"]) {
            size_t i = e.get<size_t>();
            if (i < bundle.records.size()) evidence.push_back(i);
        }
        if (evidence.empty()) continue;
        auto key = std::make_pair(kind, label);
        auto it = dedup.find(key);
        if (it != dedup.end()) {
            auto& existing = out[it->second];
            existing.evidence.insert(existing.evidence.end(), evidence.begin(),
                                     evidence.end());
            for (size_t i : evidence) {
                existing.first_seen = std::min(existing.first_seen,
                                               bundle.records[i].timestamp);
                existing.last_seen = std::max(existing.last_seen,
                                              bundle.records[i].timestamp);
            }
            continue;
        }
        DiagnosisVariable var;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "x%03d", ++counter);
        var.id = buf;
        var.kind = variable_kind_from_name(kind);
        var.label = label;
        var.evidence = evidence;
        var.first_seen = bundle.records[evidence.front()].timestamp;
        var.last_seen = var.first_seen;
        for (size_t i : evidence) {
            var.first_seen = std::min(var.first_seen, bundle.records[i].timestamp);
            var.last_seen = std::max(var.last_seen, bundle.records[i].timestamp);
        }
        dedup[key] = out.size();
        out.push_back(std::move(var));
    }
    return out;
}

// Phi over ordered pairs. The precedence gate admits (a,b) only when
// a.first_seen < b.first_seen, ties broken by id, so at most m(m-1)/2 pairs
// ever reach the oracle.
inline std::set<CausalEdge> infer_edges(const std::vector<DiagnosisVariable>& variables,
                                        Reasoner& reasoner,
                                        DiagnosisCounters* counters = nullptr) {
    std::set<CausalEdge> edges;
    for (const auto& a : variables) {
        for (const auto& b : variables) {
            if (a.id == b.id) continue;
            bool precedes = a.first_seen < b.first_seen ||
                            (a.first_seen == b.first_seen && a.id < b.id);
            if (!precedes) continue;
            if (counters) ++counters->pair_queries;
            ReasonerRequest req;
            req.kind = RequestKind::Relation;
            req.payload["src"] = {{"id", a.id}, {"kind", variable_kind_name(a.kind)},
                                  {"label", a.label}};
            req.payload["dst"] = {{"id", b.id}, {"kind", variable_kind_name(b.kind)},
                                  {"label", b.label}};
            Json response = reasoner.dispatch(req);
            if (response.value("related", 0) == 1) {
                edges.insert({a.id, b.id, response.value("confidence", 1.0),
                              response.value("rationale", ""), false});
            }
        }
    }
    return edges;
}

namespace detail {

// Finds one cycle via iterative DFS; empty result means acyclic.
inline std::vector<std::string> find_cycle(const DiagnosisGraph& g) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : g.edges) adj[e.src].push_back(e.dst);
    std::map<std::string, int> color;  // 0 white, 1 gray, 2 black
    std::map<std::string, std::string> parent;
    std::vector<std::string> cycle;

    std::function<bool(const std::string&)> dfs = [&](const std::string& u) -> bool {
        color[u] = 1;
        for (const auto& v : adj[u]) {
            if (color[v] == 1) {
                // unwind u -> ... -> v
                cycle.push_back(v);
                std::string cur = u;
                while (cur != v) {
                    cycle.push_back(cur);
                    cur = parent[cur];
                }
                std::reverse(cycle.begin(), cycle.end());
                return true;
            }
            if (color[v] == 0) {
                parent[v] = u;
                if (dfs(v)) return true;
            }
        }
        color[u] = 2;
        return false;
    };
    for (const auto& [id, _] : g.variables) {
        if (color[id] == 0 && dfs(id)) return cycle;
    }
    return {};
}

}  // namespace detail

// Assembles G^diag and enforces the DAG invariant: every cycle loses its
// lowest-confidence edge, ties broken by the latest dst first_seen, then by
// (src,dst) order. Removals are logged on the graph.
inline DiagnosisGraph build_diagnosis_graph(const NodeId& node,
                                            const std::vector<DiagnosisVariable>& variables,
                                            const std::set<CausalEdge>& edges) {
    DiagnosisGraph g;
    g.node = node;
    for (const auto& v : variables) g.variables[v.id] = v;
    for (const auto& e : edges) {
        if (g.variables.count(e.src) && g.variables.count(e.dst) && e.src != e.dst)
            g.edges.insert(e);
    }
    for (;;) {
        auto cycle = detail::find_cycle(g);
        if (cycle.empty()) break;
        std::optional<CausalEdge> worst;
        for (size_t i = 0; i < cycle.size(); ++i) {
            const std::string& a = cycle[i];
            const std::string& b = cycle[(i + 1) % cycle.size()];
            auto it = g.edges.find(CausalEdge{a, b, 0, "", false});
            if (it == g.edges.end()) continue;
            if (!worst) {
                worst = *it;
                continue;
            }
            Instant it_seen = g.variables.at(it->dst).first_seen;
            Instant worst_seen = g.variables.at(worst->dst).first_seen;
            if (it->confidence < worst->confidence ||
                (it->confidence == worst->confidence && it_seen > worst_seen) ||
                (it->confidence == worst->confidence && it_seen == worst_seen &&
                 std::make_pair(it->src, it->dst) <
                     std::make_pair(worst->src, worst->dst))) {
                worst = *it;
            }
        }
        if (!worst) break;  // cycle with no removable edge left
        g.edges.erase(*worst);
        g.removed_in_dagization.push_back(*worst);
    }
    return g;
}

struct Subtree {
    FailureCategory kind = FailureCategory::Unclassified;
    std::set<std::string> variables;
    std::set<CausalEdge> edges;
};

// Classifier seam: maps a variable to its failure category. The scripted
// classifier reuses the extraction rule table.
using SubtreeClassifier = std::function<FailureCategory(const DiagnosisVariable&)>;

inline FailureCategory scripted_classifier(const DiagnosisVariable& v) {
    return classify_label(v.label);
}

// Psi: for each category with at least one seed variable, the induced
// subgraph of the seeds plus all of their ancestors.
inline std::vector<Subtree> extract_subtrees(const DiagnosisGraph& graph,
                                             const SubtreeClassifier& classifier) {
    static const FailureCategory kinds[] = {
        FailureCategory::ResourceOverload, FailureCategory::NetworkInstability,
        FailureCategory::TaskContention, FailureCategory::ThermalAnomaly,
        FailureCategory::FirmwareEvent};

    std::map<std::string, std::vector<std::string>> rev;
    for (const auto& e : graph.edges) rev[e.dst].push_back(e.src);

    std::vector<Subtree> out;
    for (FailureCategory cat : kinds) {
        std::set<std::string> seeds;
        for (const auto& [id, v] : graph.variables)
            if (classifier(v) == cat) seeds.insert(id);
        if (seeds.empty()) continue;
        // ancestor closure by reverse BFS
        std::set<std::string> members = seeds;
        std::vector<std::string> frontier(seeds.begin(), seeds.end());
        while (!frontier.empty()) {
            std::string cur = frontier.back();
            frontier.pop_back();
            for (const auto& p : rev[cur]) {
                if (members.insert(p).second) frontier.push_back(p);
            }
        }
        Subtree st;
        st.kind = cat;
        st.variables = members;
        for (const auto& e : graph.edges)
            if (members.count(e.src) && members.count(e.dst)) st.edges.insert(e);
        out.push_back(std::move(st));
    }
    return out;
}

// Consolidated graph: union of the subtree ensemble, never inventing
// variables or edges beyond the source graph.
inline DiagnosisGraph consolidate(const DiagnosisGraph& source,
                                  const std::vector<Subtree>& subtrees) {
    DiagnosisGraph g;
    g.node = source.node;
    for (const auto& st : subtrees) {
        for (const auto& id : st.variables) {
            auto it = source.variables.find(id);
            if (it != source.variables.end()) g.variables[id] = it->second;
        }
        for (const auto& e : st.edges) g.edges.insert(e);
    }
    return g;
}

// Line format used by golden tests and the CLI export.
inline std::string serialize_diagnosis_graph(const DiagnosisGraph& g) {
    std::ostringstream out;
    out << "recist-diagnosis v1 node " << g.node << "\n";
    for (const auto& [id, v] : g.variables) {
        out << "var " << id << " " << variable_kind_name(v.kind) << " \""
            << v.label << "\" evidence " << v.evidence.size() << "\n";
    }
    for (const auto& e : g.edges) {
        out << "edge " << e.src << " " << e.dst << " "
            << detail::format_decimal(e.confidence)
            << (e.auxiliary ? " aux" : "") << "\n";
    }
    return out.str();
}

}  // namespace recist
