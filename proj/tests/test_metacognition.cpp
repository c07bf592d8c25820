#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <random>

#include "test_common.hpp"

using namespace recist;
using testutil::random_dag;

namespace {

constexpr Instant kMicros = 1000000;

DiagnosisGraph graph_from(const std::vector<std::string>& ids,
                          const std::vector<std::pair<std::string, std::string>>& edges) {
    DiagnosisGraph g;
    g.node = "n1";
    int i = 0;
    for (const auto& id : ids) {
        DiagnosisVariable v;
        v.id = id;
        v.kind = VariableKind::Event;
        v.label = "label " + id;
        v.evidence = {0};
        v.first_seen = i++;
        g.variables[id] = v;
    }
    for (const auto& [a, b] : edges) g.edges.insert({a, b, 1.0, "", false});
    return g;
}

LogBundle one_record_bundle() {
    LogBundle b;
    b.node = "n1";
    LogRecord r;
    r.text = "connection broken for id 2";
    r.timestamp = kMicros;
    b.records.push_back(r);
    return b;
}

}  // namespace

TEST_CASE("enumerate_paths covers the hand cases") {
    SECTION("single variable, no edges: one depth-1 path") {
        auto g = graph_from({"x001"}, {});
        auto e = enumerate_paths(g, 12);
        REQUIRE(e.paths.size() == 1);
        CHECK(e.paths[0].variable_ids == std::vector<std::string>{"x001"});
        CHECK(e.paths[0].depth() == 1);
    }

    SECTION("diamond yields exactly two paths") {
        auto g = graph_from({"x001", "x002", "x003", "x004"},
                            {{"x001", "x002"}, {"x002", "x004"},
                             {"x001", "x003"}, {"x003", "x004"}});
        auto e = enumerate_paths(g, 12);
        REQUIRE(e.paths.size() == 2);
        CHECK(e.paths[0].variable_ids ==
              std::vector<std::string>{"x001", "x002", "x004"});
        CHECK(e.paths[1].variable_ids ==
              std::vector<std::string>{"x001", "x003", "x004"});
    }

    SECTION("the path cap truncates and flags") {
        auto g = graph_from({"x001", "x002", "x003", "x004"},
                            {{"x001", "x002"}, {"x002", "x004"},
                             {"x001", "x003"}, {"x003", "x004"}});
        auto e = enumerate_paths(g, 12, 1);
        CHECK(e.paths.size() == 1);
        CHECK(e.truncated);
    }
}

TEST_CASE("enumerate_paths equals recursive brute force on random DAGs") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 80; ++trial) {
        DiagnosisGraph g = random_dag(rng, 8);
        std::map<std::string, std::vector<std::string>> adj;
        std::vector<std::string> ids;
        for (const auto& [id, _] : g.variables) ids.push_back(id);
        for (const auto& e : g.edges) adj[e.src].push_back(e.dst);
        auto expected = testutil::brute_force_paths(adj, ids, 12);
        auto got = enumerate_paths(g, 12, 1 << 20);
        REQUIRE_FALSE(got.truncated);
        REQUIRE(got.paths.size() == expected.size());
        for (size_t i = 0; i < expected.size(); ++i)
            CHECK(got.paths[i].variable_ids == expected[i]);
    }
}

TEST_CASE("spawn_micro_agents sizes the population adaptively") {
    MetaConfig config;
    config.r_max = 5;
    CHECK(spawn_micro_agents(0, config).spawned() == 0);
    CHECK(spawn_micro_agents(7, config).spawned() == 5);
    CHECK(spawn_micro_agents(3, config).spawned() == 3);
    auto ledger = spawn_micro_agents(3, config);
    for (const auto& a : ledger.agents) CHECK(a.level == AgentLevel::System);
}

TEST_CASE("generate_hypothesis templates the path and traces evidence") {
    Reasoner reasoner(std::make_shared<ScriptedBackend>());
    LogBundle bundle = one_record_bundle();
    DiagnosisGraph g = graph_from({"x001"}, {});
    g.variables["x001"].label = "connection broken";

    SECTION("a one-variable path names that variable") {
        ReasoningPath p{{"x001"}};
        Hypothesis h = generate_hypothesis("a001", p, 0, g, bundle, reasoner);
        CHECK(h.topic == "network-instability");
        CHECK(h.reason == "connection broken on node n1");
        CHECK_FALSE(h.solution.empty());
        REQUIRE(h.evidence.size() == 1);
    }

    SECTION("no evidence overlap raises EmptyNarrative") {
        g.variables["x001"].evidence = {42};  // outside the bundle
        ReasoningPath p{{"x001"}};
        CHECK_THROWS_AS(generate_hypothesis("a001", p, 0, g, bundle, reasoner),
                        EmptyNarrative);
    }

    SECTION("identical inputs give identical text") {
        ReasoningPath p{{"x001"}};
        Hypothesis h1 = generate_hypothesis("a001", p, 0, g, bundle, reasoner);
        Hypothesis h2 = generate_hypothesis("a001", p, 0, g, bundle, reasoner);
        CHECK(h1.topic == h2.topic);
        CHECK(h1.reason == h2.reason);
        CHECK(h1.solution == h2.solution);
    }
}

TEST_CASE("score_hypothesis computes gamma exactly") {
    MetaConfig config;

    Hypothesis h;
    h.topic = "t";
    h.reason = "r";
    h.solution = "s";
    h.path = ReasoningPath{{"x001"}};

    SECTION("all ones scores 1, all zeros scores 0") {
        Reasoner ones(testutil::fixed_evaluator(1, 1, 1));
        CHECK(score_hypothesis(h, config, ones).gamma ==
              Catch::Approx(1.0).margin(1e-12));
        Reasoner zeros(testutil::fixed_evaluator(0, 0, 0));
        CHECK(score_hypothesis(h, config, zeros).gamma == 0.0);
    }

    SECTION("direct formula with custom weights") {
        MetaConfig w;
        w.w1 = 0.5;
        w.w2 = 0.3;
        w.w3 = 0.2;
        Reasoner r(testutil::fixed_evaluator(0.8, 0.5, 0.9));
        Hypothesis scored = score_hypothesis(h, w, r);
        CHECK(scored.gamma == Catch::Approx(0.73).margin(1e-12));
        CHECK(scored.gamma == Catch::Approx(w.w1 * 0.8 + w.w2 * 0.5 + w.w3 * 0.9)
                                  .margin(1e-15));
    }

    SECTION("components clamp to [0,1]") {
        Reasoner wild(testutil::fixed_evaluator(1.7, -0.3, 0.5));
        Hypothesis scored = score_hypothesis(h, config, wild);
        CHECK(scored.coherence == 1.0);
        CHECK(scored.safety == 0.0);
    }

    SECTION("bad weights are rejected") {
        MetaConfig bad;
        bad.w1 = 0.9;
        bad.w2 = 0.9;
        bad.w3 = 0.9;
        Reasoner r(testutil::fixed_evaluator(1, 1, 1));
        CHECK_THROWS_AS(score_hypothesis(h, bad, r), BadThresholds);
    }
}

TEST_CASE("verdict bands partition [0,1] with the stated boundary rules") {
    MetaConfig config;  // pro 0.35, acc 0.55, inh 0.85

    CHECK(classify_verdict(config.theta_inh, config) == Verdict::Best);
    CHECK(classify_verdict(config.theta_pro - 1e-9, config) == Verdict::Harmful);
    CHECK(classify_verdict(config.theta_pro, config) == Verdict::Rejected);
    CHECK(classify_verdict(config.theta_acc, config) == Verdict::Accepted);

    SECTION("1001-point grid maps each gamma to exactly one verdict") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            double vals[3] = {u(rng), u(rng), u(rng)};
            std::sort(vals, vals + 3);
            MetaConfig c;
            c.theta_pro = vals[0];
            c.theta_acc = vals[1];
            c.theta_inh = vals[2];
            if (!(c.theta_acc < c.theta_inh))
                c.theta_inh = std::min(1.0, c.theta_acc + 1e-6);
            if (!(c.theta_acc < c.theta_inh)) continue;
            for (int i = 0; i <= 1000; ++i) {
                double gamma = static_cast<double>(i) / 1000.0;
                Verdict v = classify_verdict(gamma, c);
                int matches = 0;
                if (gamma < c.theta_pro) {
                    CHECK(v == Verdict::Harmful);
                    ++matches;
                }
                if (gamma >= c.theta_pro && gamma < c.theta_acc) {
                    CHECK(v == Verdict::Rejected);
                    ++matches;
                }
                if (gamma >= c.theta_acc && gamma < c.theta_inh) {
                    CHECK(v == Verdict::Accepted);
                    ++matches;
                }
                if (gamma >= c.theta_inh) {
                    CHECK(v == Verdict::Best);
                    ++matches;
                }
                CHECK(matches == 1);
            }
        }
    }

    SECTION("threshold ordering is validated") {
        MetaConfig bad;
        bad.theta_pro = 0.9;
        bad.theta_acc = 0.5;
        bad.theta_inh = 0.8;
        CHECK_THROWS_AS(classify_verdict(0.5, bad), BadThresholds);
    }
}

TEST_CASE("regulate_population proliferates on harmful and stops on best") {
    MetaConfig config;
    config.proliferation_batch = 2;
    auto g = graph_from({"x001", "x002", "x003"},
                        {{"x001", "x002"}, {"x002", "x003"}});
    std::vector<ReasoningPath> explored{{{"x001", "x002", "x003"}}};

    SECTION("best inhibits all further spawning") {
        MicroAgentLedger ledger = spawn_micro_agents(1, config);
        auto r = regulate_population(ledger, Verdict::Best, g, explored, config);
        CHECK(r.stop);
        CHECK(r.new_paths.empty());
        CHECK(ledger.inhibition_events == 1);
        CHECK(ledger.spawned() == 1);
    }

    SECTION("harmful spawns up to the batch as auxiliaries") {
        // Unexplored roots exist: x002 (bridging may add more edges).
        MicroAgentLedger ledger = spawn_micro_agents(1, config);
        auto r = regulate_population(ledger, Verdict::Harmful, g, explored, config);
        CHECK(ledger.proliferation_events == 1);
        CHECK(static_cast<int>(r.new_paths.size()) <= config.proliferation_batch);
        CHECK(ledger.spawned_at_level(AgentLevel::Auxiliary) ==
              static_cast<int>(r.new_paths.size()));
    }

    SECTION("accepted and rejected only advance the queue") {
        MicroAgentLedger ledger = spawn_micro_agents(1, config);
        auto r = regulate_population(ledger, Verdict::Accepted, g, explored, config);
        CHECK_FALSE(r.stop);
        CHECK(r.new_paths.empty());
        CHECK(ledger.spawned() == 1);
    }

    SECTION("a fully explored graph never spins") {
        // Explore everything reachable, then ask for more.
        auto single = graph_from({"x001"}, {});
        std::vector<ReasoningPath> all{{{"x001"}}};
        MicroAgentLedger ledger = spawn_micro_agents(1, config);
        auto r = regulate_population(ledger, Verdict::Harmful, single, all, config);
        CHECK(r.new_paths.empty());
    }

    SECTION("the global cap flags and stops growth") {
        MetaConfig tight;
        tight.global_agent_cap = 1;
        MicroAgentLedger ledger = spawn_micro_agents(1, tight);
        auto r = regulate_population(ledger, Verdict::Harmful, g, explored, tight);
        CHECK(ledger.cap_reached);
        CHECK(r.new_paths.empty());
    }
}

TEST_CASE("restructure_graph unions deltas and re-DAG-izes") {
    auto g = graph_from({"x001", "x002"}, {{"x001", "x002"}});

    SECTION("empty deltas leave the graph unchanged") {
        auto out = restructure_graph(g, {});
        CHECK(out.edges == g.edges);
        CHECK(out.variables.size() == g.variables.size());
    }

    SECTION("auxiliary edges survive tagged") {
        GraphDelta d;
        d.added_edges.push_back({"x002", "x001", 0.5, "bridge", true});
        // This introduces a 2-cycle; the lower-confidence edge must go.
        auto out = restructure_graph(g, {d});
        CHECK(out.edges.size() == 1);
        CHECK(out.has_edge("x001", "x002"));
    }

    SECTION("added variables participate") {
        GraphDelta d;
        DiagnosisVariable v;
        v.id = "x099";
        v.label = "aux";
        v.evidence = {0};
        d.added_variables.push_back(v);
        d.added_edges.push_back({"x002", "x099", 0.5, "bridge", true});
        auto out = restructure_graph(g, {d});
        CHECK(out.variables.count("x099") == 1);
        CHECK(out.has_edge("x002", "x099"));
        for (const auto& e : out.edges)
            if (e.src == "x002" && e.dst == "x099") CHECK(e.auxiliary);
    }
}

TEST_CASE("select_best picks the argmax and releases the node") {
    SystemGraph sys = testutil::line_graph(2);
    sys.node("n1").state = NodeState::Recovering;
    std::set<NodeId> failure_set{"n1", "n9"};

    auto mk = [](int index, double gamma, Verdict v) {
        Hypothesis h;
        h.id = "H" + std::to_string(index);
        h.path_index = index;
        h.gamma = gamma;
        h.verdict = v;
        return h;
    };

    SECTION("single best wins") {
        auto outcome = select_best(sys, {mk(0, 0.9, Verdict::Best)}, "n1",
                                   failure_set);
        REQUIRE(outcome.best.has_value());
        CHECK(outcome.best->id == "H0");
        CHECK(failure_set == std::set<NodeId>{"n9"});
        CHECK(sys.node("n1").state == NodeState::Available);
    }

    SECTION("equal gammas keep the earlier path index") {
        auto outcome = select_best(
            sys, {mk(0, 0.9, Verdict::Best), mk(1, 0.9, Verdict::Best)}, "n1",
            failure_set);
        REQUIRE(outcome.best.has_value());
        CHECK(outcome.best->path_index == 0);
    }

    SECTION("argmax over a gamma list, supporting collected") {
        auto outcome = select_best(sys,
                                   {mk(0, 0.4, Verdict::Rejected),
                                    mk(1, 0.9, Verdict::Best),
                                    mk(2, 0.7, Verdict::Accepted)},
                                   "n1", failure_set);
        REQUIRE(outcome.best.has_value());
        CHECK(outcome.best->path_index == 1);
        REQUIRE(outcome.supporting.size() == 1);
        CHECK(outcome.supporting[0].path_index == 2);
        CHECK(failure_set.count("n1") == 0);
    }

    SECTION("no best hypothesis escalates and keeps the node recovering") {
        auto outcome = select_best(sys, {mk(0, 0.5, Verdict::Rejected)}, "n1",
                                   failure_set);
        CHECK(outcome.escalated);
        CHECK_FALSE(outcome.best.has_value());
        CHECK(failure_set.count("n1") == 1);
        CHECK(sys.node("n1").state == NodeState::Recovering);
    }
}

TEST_CASE("the full loop terminates and keeps RDR in range") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        DiagnosisGraph g = random_dag(rng, 10);
        for (auto& [_, v] : g.variables) v.label = "connection broken";
        LogBundle bundle = one_record_bundle();
        SystemGraph sys = testutil::line_graph(2);
        sys.node("n1").state = NodeState::Recovering;
        std::set<NodeId> failure_set{"n1"};
        MetaConfig config;
        config.path_cap = 64;
        Reasoner reasoner(std::make_shared<ScriptedBackend>());
        MetaOutcome outcome = run_metacognition(sys, g, bundle, reasoner, config,
                                                failure_set);
        double rdr = outcome.ledger.rdr();
        CHECK(rdr >= 0.0);
        CHECK(rdr <= 1.0);
        CHECK(outcome.ledger.spawned() <= config.global_agent_cap);
        CHECK(outcome.ledger.invocations.size() >= outcome.all_scored.size());
    }
}

TEST_CASE("rescaled-then-renormalized weights select the same hypothesis") {
    MetaConfig base;
    double c = 3.7;
    MetaConfig scaled;
    double sum = c * base.w1 + c * base.w2 + c * base.w3;
    scaled.w1 = c * base.w1 / sum;
    scaled.w2 = c * base.w2 / sum;
    scaled.w3 = c * base.w3 / sum;

    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::array<double, 3>> components(5);
        for (auto& comp : components) comp = {u(rng), u(rng), u(rng)};
        auto argmax = [&](const MetaConfig& cfg) {
            size_t best = 0;
            double best_gamma = -1;
            for (size_t i = 0; i < components.size(); ++i) {
                double gamma = cfg.w1 * components[i][0] +
                               cfg.w2 * components[i][1] +
                               cfg.w3 * components[i][2];
                if (gamma > best_gamma) {
                    best_gamma = gamma;
                    best = i;
                }
            }
            return best;
        };
        CHECK(argmax(base) == argmax(scaled));
    }
}
