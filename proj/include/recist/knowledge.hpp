#pragma once
// Knowledge layer: rendezvous-point stores of topic-clustered failure
// knowledge. Inserts match topics and reason partitions by embedding
// similarity; reorganization merges near-duplicate partitions and splits
// internally drifted ones; local stores sync into a global store with
// version-based conflict resolution.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recist/detail/strings.hpp"
#include "recist/errors.hpp"
#include "recist/model.hpp"
#include "recist/reasoner.hpp"

namespace recist {

using Embedding = std::vector<double>;

enum class EmbedKind { Topic, Reason };

// Unit-norm embedding via the reasoner's Embed oracle.
inline Embedding embed(const std::string& text, EmbedKind kind, Reasoner& reasoner) {
    ReasonerRequest req;
    req.kind = RequestKind::Embed;
    req.payload["kind"] = kind == EmbedKind::Topic ? "topic" : "reason";
    req.payload["text"] = text;
    Json response;
    try {
        response = reasoner.dispatch(req);
    } catch (const ReasonerUnavailable& e) {
        throw EmbedderUnavailable(e.what());
    }
    Embedding v;
    for (const auto& x : response["vector"]) v.push_back(x.get<double>());
    if (v.empty()) throw EmbedderUnavailable("oracle returned an empty vector");
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm <= 0.0) throw EmbedderUnavailable("oracle returned a zero vector");
    for (double& x : v) x /= norm;
    return v;
}

inline double similarity(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size())
        throw DimensionMismatch(std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

struct KnowledgeRecord {
    std::string topic;
    std::string reason;
    std::string solution;
    NodeId source_node;
    double timestamp = 0.0;
    std::string origin_hypothesis;  // globally unique
    int version = 1;
    bool supporting = false;  // Accepted hypothesis forwarded as context
};

struct StoredRecord {
    KnowledgeRecord record;
    Embedding topic_embedding;
    Embedding reason_embedding;
};

struct Partition {
    std::string id;
    Embedding representative;  // normalized mean of member reason embeddings
    std::vector<StoredRecord> members;
    long version = 1;
};

struct Topic {
    std::string id;
    std::string label;
    Embedding representative;  // normalized mean of member topic embeddings
    std::vector<Partition> partitions;
};

struct KnowledgeThresholds {
    double theta_topic = 0.75;
    double theta_reason = 0.70;
    double theta_merge = 0.90;
    double theta_split = 0.60;
};

struct KnowledgeCounters {
    long inserts = 0;
    long merges = 0;
    long splits = 0;
    long last_insert_similarity_evals = 0;
    long last_insert_topic_count = 0;      // u at insert time
    long last_insert_partition_count = 0;  // m_j of the matched topic

    void reset() { *this = {}; }
};

enum class InsertKind { NewTopic, NewPartition, Reinforced };

inline const char* insert_kind_name(InsertKind k) {
    switch (k) {
        case InsertKind::NewTopic: return "new-topic";
        case InsertKind::NewPartition: return "new-partition";
        case InsertKind::Reinforced: return "reinforced";
    }
    return "new-topic";
}

struct InsertReport {
    InsertKind kind = InsertKind::NewTopic;
    std::string topic_id;
    std::string partition_id;
    double topic_similarity = 0.0;   // best match before decision
    double reason_similarity = 0.0;  // best match within the topic
};

namespace detail {

inline Embedding normalized_mean(const std::vector<const Embedding*>& vs) {
    if (vs.empty()) return {};
    Embedding mean(vs.front()->size(), 0.0);
    for (const auto* v : vs)
        for (size_t i = 0; i < mean.size(); ++i) mean[i] += (*v)[i];
    double norm = 0.0;
    for (double x : mean) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : mean) x /= norm;
    return mean;
}

inline void recompute_partition_representative(Partition& p) {
    std::vector<const Embedding*> vs;
    for (const auto& m : p.members) vs.push_back(&m.reason_embedding);
    p.representative = normalized_mean(vs);
}

inline void recompute_topic_representative(Topic& t) {
    std::vector<const Embedding*> vs;
    for (const auto& p : t.partitions)
        for (const auto& m : p.members) vs.push_back(&m.topic_embedding);
    t.representative = normalized_mean(vs);
}

}  // namespace detail

struct MergeReport {
    int inserted = 0;
    int reinforced = 0;
    int conflicts_version = 0;
    int conflicts_tie = 0;
    int skipped_identical = 0;

    bool empty() const {
        return inserted == 0 && reinforced == 0 && conflicts_version == 0 &&
               conflicts_tie == 0;
    }
};

class RendezvousStore {
public:
    enum class Scope { Local, Global };

    RendezvousStore(Scope scope, std::string peer_id,
                    KnowledgeThresholds thresholds = {})
        : scope_(scope), peer_id_(std::move(peer_id)), thresholds_(thresholds) {}

    Scope scope() const { return scope_; }
    const std::string& peer_id() const { return peer_id_; }
    const KnowledgeThresholds& thresholds() const { return thresholds_; }
    const std::vector<Topic>& topics() const { return topics_; }
    const std::map<std::string, long>& version_vector() const {
        return version_vector_;
    }
    long op_counter() const { return op_counter_; }
    const std::vector<std::string>& journal() const { return journal_; }
    const KnowledgeCounters& counters() const { return counters_; }
    void reset_counters() { counters_.reset(); }

    // Alg. 4 insert: topic match below theta_topic creates a topic; inside
    // the best topic a reason match below theta_reason creates a partition;
    // otherwise the record reinforces the closest partition. Representatives
    // and store invariants are restored before returning.
    InsertReport insert_knowledge(const KnowledgeRecord& record, Reasoner& reasoner) {
        Embedding topic_vec = embed(record.topic, EmbedKind::Topic, reasoner);
        counters_.last_insert_similarity_evals = 0;
        counters_.last_insert_topic_count = static_cast<long>(topics_.size());
        counters_.last_insert_partition_count = 0;

        InsertReport report;
        double best_topic_sim = -2.0;
        size_t best_topic = 0;
        for (size_t i = 0; i < topics_.size(); ++i) {
            ++counters_.last_insert_similarity_evals;
            double s = similarity(topic_vec, topics_[i].representative);
            if (s > best_topic_sim) {
                best_topic_sim = s;
                best_topic = i;
            }
        }
        report.topic_similarity = topics_.empty() ? 0.0 : best_topic_sim;

        StoredRecord stored;
        stored.record = record;
        stored.topic_embedding = topic_vec;
        stored.reason_embedding = embed(record.reason, EmbedKind::Reason, reasoner);

        if (topics_.empty() || best_topic_sim < thresholds_.theta_topic) {
            Topic t;
            t.id = next_topic_id();
            t.label = record.topic;
            Partition p;
            p.id = next_partition_id();
            p.members.push_back(std::move(stored));
            detail::recompute_partition_representative(p);
            t.partitions.push_back(std::move(p));
            detail::recompute_topic_representative(t);
            report.kind = InsertKind::NewTopic;
            report.topic_id = t.id;
            report.partition_id = t.partitions.front().id;
            topics_.push_back(std::move(t));
        } else {
            Topic& t = topics_[best_topic];
            report.topic_id = t.id;
            counters_.last_insert_partition_count =
                static_cast<long>(t.partitions.size());
            double best_reason_sim = -2.0;
            size_t best_partition = 0;
            for (size_t i = 0; i < t.partitions.size(); ++i) {
                ++counters_.last_insert_similarity_evals;
                double s = similarity(stored.reason_embedding,
                                      t.partitions[i].representative);
                if (s > best_reason_sim) {
                    best_reason_sim = s;
                    best_partition = i;
                }
            }
            report.reason_similarity = best_reason_sim;
            if (best_reason_sim < thresholds_.theta_reason) {
                Partition p;
                p.id = next_partition_id();
                p.members.push_back(std::move(stored));
                detail::recompute_partition_representative(p);
                report.kind = InsertKind::NewPartition;
                report.partition_id = p.id;
                t.partitions.push_back(std::move(p));
            } else {
                Partition& p = t.partitions[best_partition];
                p.members.push_back(std::move(stored));
                detail::recompute_partition_representative(p);
                ++p.version;
                report.kind = InsertKind::Reinforced;
                report.partition_id = p.id;
            }
            detail::recompute_topic_representative(t);
        }

        restore_invariants();
        ++counters_.inserts;
        append_journal("insert", journal_record(record, report));
        return report;
    }

    // Merges partition pairs of one topic while any pair is at or above
    // theta_merge, highest-similarity pair first. Returns the merge count.
    // Ids pass by value: callers routinely hand in references into the store
    // that reorganization would invalidate.
    int merge_partitions(std::string topic_id) {
        Topic* t = find_topic(topic_id);
        if (!t) throw UnknownNode("topic " + topic_id);
        int merges = merge_partitions_in(*t);
        counters_.merges += merges;
        if (merges > 0) {
            detail::recompute_topic_representative(*t);
            append_journal("merge", Json{{"topic", topic_id}, {"count", merges}});
        }
        return merges;
    }

    // DIV(P) = 1 - mean pairwise member similarity. A partition above
    // theta_split is 2-means split, seeded by its two least-similar members
    // with one refinement pass. Returns resulting partition count (1 or 2).
    int split_partition(std::string topic_id, std::string partition_id) {
        Topic* t = find_topic(topic_id);
        if (!t) throw UnknownNode("topic " + topic_id);
        for (size_t pi = 0; pi < t->partitions.size(); ++pi) {
            Partition& p = t->partitions[pi];
            if (p.id != partition_id) continue;
            if (p.members.size() < 2) return 1;
            if (divergence(p) <= thresholds_.theta_split) return 1;

            // Seeds: least similar member pair, earliest indices on ties.
            size_t s1 = 0, s2 = 1;
            double worst = 2.0;
            for (size_t i = 0; i < p.members.size(); ++i)
                for (size_t j = i + 1; j < p.members.size(); ++j) {
                    double s = similarity(p.members[i].reason_embedding,
                                          p.members[j].reason_embedding);
                    if (s < worst) {
                        worst = s;
                        s1 = i;
                        s2 = j;
                    }
                }
            std::vector<int> assign(p.members.size(), 0);
            Embedding c1 = p.members[s1].reason_embedding;
            Embedding c2 = p.members[s2].reason_embedding;
            for (int pass = 0; pass < 2; ++pass) {
                for (size_t i = 0; i < p.members.size(); ++i) {
                    assign[i] = similarity(p.members[i].reason_embedding, c2) >
                                        similarity(p.members[i].reason_embedding, c1)
                                    ? 1
                                    : 0;
                }
                std::vector<const Embedding*> g1, g2;
                for (size_t i = 0; i < p.members.size(); ++i)
                    (assign[i] ? g2 : g1).push_back(&p.members[i].reason_embedding);
                if (g1.empty() || g2.empty()) return 1;
                c1 = detail::normalized_mean(g1);
                c2 = detail::normalized_mean(g2);
            }
            // A split whose halves would immediately re-merge is skipped so
            // merge/split always reaches a fixed point.
            if (similarity(c1, c2) >= thresholds_.theta_merge) return 1;

            Partition a, b;
            a.id = p.id;
            a.version = p.version + 1;
            b.id = next_partition_id();
            for (size_t i = 0; i < p.members.size(); ++i)
                (assign[i] ? b : a).members.push_back(std::move(p.members[i]));
            detail::recompute_partition_representative(a);
            detail::recompute_partition_representative(b);
            t->partitions[pi] = std::move(a);
            t->partitions.push_back(std::move(b));
            ++counters_.splits;
            append_journal("split", Json{{"topic", topic_id},
                                         {"partition", partition_id},
                                         {"into", t->partitions.back().id}});
            return 2;
        }
        throw UnknownNode("partition " + partition_id + " in topic " + topic_id);
    }

    double divergence(const Partition& p) const {
        if (p.members.size() < 2) return 0.0;
        double sum = 0.0;
        long pairs = 0;
        for (size_t i = 0; i < p.members.size(); ++i)
            for (size_t j = i + 1; j < p.members.size(); ++j) {
                sum += similarity(p.members[i].reason_embedding,
                                  p.members[j].reason_embedding);
                ++pairs;
            }
        return 1.0 - sum / static_cast<double>(pairs);
    }

    // MERGE step: local records absent from the global store insert normally;
    // same-origin conflicts resolve by record version, ties blend the two
    // reason embeddings weighted by similarity to the current representative.
    MergeReport sync_from(const RendezvousStore& local, Reasoner& reasoner) {
        MergeReport report;
        for (const auto& lt : local.topics_) {
            for (const auto& lp : lt.partitions) {
                for (const auto& lm : lp.members) {
                    StoredRecord* mine = find_record(lm.record.origin_hypothesis);
                    if (!mine) {
                        insert_knowledge(lm.record, reasoner);
                        ++report.inserted;
                        continue;
                    }
                    if (same_payload(mine->record, lm.record)) {
                        ++report.skipped_identical;
                        continue;
                    }
                    if (lm.record.version > mine->record.version) {
                        mine->record = lm.record;
                        mine->topic_embedding = lm.topic_embedding;
                        mine->reason_embedding = lm.reason_embedding;
                        ++report.conflicts_version;
                        rebuild_representatives();
                        restore_invariants();
                    } else if (lm.record.version == mine->record.version) {
                        blend_embedding(*mine, lm);
                        mine->record.version += 1;
                        ++report.conflicts_tie;
                        rebuild_representatives();
                        restore_invariants();
                    }
                    // lower local version: global copy wins, nothing to do
                }
            }
        }
        auto it = version_vector_.find(local.peer_id());
        if (it == version_vector_.end() || it->second < local.op_counter())
            version_vector_[local.peer_id()] = local.op_counter();
        if (!report.empty())
            append_journal("sync", Json{{"peer", local.peer_id()},
                                        {"inserted", report.inserted},
                                        {"ties", report.conflicts_tie}});
        return report;
    }

    // No two topic representatives at or above theta_topic; within a topic
    // no partition pair at or above theta_merge.
    bool invariants_hold() const {
        for (size_t i = 0; i < topics_.size(); ++i)
            for (size_t j = i + 1; j < topics_.size(); ++j)
                if (similarity(topics_[i].representative,
                               topics_[j].representative) >= thresholds_.theta_topic)
                    return false;
        for (const auto& t : topics_)
            for (size_t i = 0; i < t.partitions.size(); ++i)
                for (size_t j = i + 1; j < t.partitions.size(); ++j)
                    if (similarity(t.partitions[i].representative,
                                   t.partitions[j].representative) >=
                        thresholds_.theta_merge)
                        return false;
        return true;
    }

    std::string snapshot() const {
        std::ostringstream out;
        out << "recist-knowledge v1\n";
        out << "scope " << (scope_ == Scope::Local ? "local" : "global") << "\n";
        out << "peer " << peer_id_ << "\n";
        out << "ops " << op_counter_ << "\n";
        out << "thresholds " << detail::format_decimal(thresholds_.theta_topic)
            << " " << detail::format_decimal(thresholds_.theta_reason) << " "
            << detail::format_decimal(thresholds_.theta_merge) << " "
            << detail::format_decimal(thresholds_.theta_split) << "\n";
        for (const auto& [peer, counter] : version_vector_)
            out << "peer-version " << peer << " " << counter << "\n";
        for (const auto& t : topics_) {
            out << "topic " << t.id << " \"" << t.label << "\"\n";
            out << "trep" << render_vector(t.representative) << "\n";
            for (const auto& p : t.partitions) {
                out << "partition " << t.id << " " << p.id << " version "
                    << p.version << "\n";
                out << "prep" << render_vector(p.representative) << "\n";
                for (const auto& m : p.members) {
                    out << "record " << t.id << " " << p.id << " "
                        << journal_record(m.record, {}).dump() << "\n";
                }
            }
        }
        return out.str();
    }

    std::string journal_text() const {
        std::ostringstream out;
        out << "recist-knowledge-journal v1\n";
        for (const auto& line : journal_) out << line << "\n";
        return out.str();
    }

    const Topic* find_topic_by_id(const std::string& id) const {
        for (const auto& t : topics_)
            if (t.id == id) return &t;
        return nullptr;
    }

    // Rebuilds a store by re-running its journal: inserts replay with their
    // recorded payloads, merges and splits by their recorded targets. All
    // three are deterministic, so the replayed state equals the original.
    static RendezvousStore replay_journal(std::istream& in, Scope scope,
                                          std::string peer_id,
                                          KnowledgeThresholds thresholds,
                                          Reasoner& reasoner) {
        std::string line;
        if (!std::getline(in, line) ||
            detail::trim(line) != "recist-knowledge-journal v1")
            throw MalformedHeader("expected 'recist-knowledge-journal v1'");
        RendezvousStore store(scope, std::move(peer_id), thresholds);
        while (std::getline(in, line)) {
            if (detail::trim(line).empty()) continue;
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded()) throw IoError("malformed journal line");
            std::string op = j.value("op", "");
            const Json& body = j["body"];
            if (op == "insert") {
                KnowledgeRecord r;
                r.origin_hypothesis = body.value("origin", "");
                r.topic = body.value("topic", "");
                r.reason = body.value("reason", "");
                r.solution = body.value("solution", "");
                r.source_node = body.value("node", "");
                r.timestamp = body.value("time", 0.0);
                r.version = body.value("version", 1);
                r.supporting = body.value("supporting", false);
                store.insert_knowledge(r, reasoner);
            } else if (op == "merge") {
                store.merge_partitions(body.value("topic", ""));
            } else if (op == "split") {
                store.split_partition(body.value("topic", ""),
                                      body.value("partition", ""));
            }
            // sync entries are bookkeeping; the peer journals carry the data
        }
        return store;
    }

    static RendezvousStore load_snapshot(std::istream& in) {
        std::string line;
        if (!std::getline(in, line) || detail::trim(line) != "recist-knowledge v1")
            throw MalformedHeader("expected 'recist-knowledge v1'");
        RendezvousStore store(Scope::Local, "loaded");
        Topic* topic = nullptr;
        Partition* partition = nullptr;
        while (std::getline(in, line)) {
            std::string t = detail::trim(line);
            if (t.empty()) continue;
            auto tok = detail::split_ws(t);
            if (tok[0] == "scope" && tok.size() == 2) {
                store.scope_ = tok[1] == "global" ? Scope::Global : Scope::Local;
            } else if (tok[0] == "peer" && tok.size() == 2) {
                store.peer_id_ = tok[1];
            } else if (tok[0] == "ops" && tok.size() == 2) {
                store.op_counter_ = std::stol(tok[1]);
            } else if (tok[0] == "thresholds" && tok.size() == 5) {
                store.thresholds_ = {std::stod(tok[1]), std::stod(tok[2]),
                                     std::stod(tok[3]), std::stod(tok[4])};
            } else if (tok[0] == "peer-version" && tok.size() == 3) {
                store.version_vector_[tok[1]] = std::stol(tok[2]);
            } else if (tok[0] == "topic" && tok.size() >= 3) {
                Topic nt;
                nt.id = tok[1];
                auto q1 = t.find('"');
                auto q2 = t.rfind('"');
                if (q1 != std::string::npos && q2 > q1)
                    nt.label = t.substr(q1 + 1, q2 - q1 - 1);
                store.topics_.push_back(std::move(nt));
                topic = &store.topics_.back();
                partition = nullptr;
                store.topic_seq_ = std::max(store.topic_seq_,
                                            std::atoi(tok[1].c_str() + 1));
            } else if (tok[0] == "trep" && topic) {
                topic->representative.clear();
                for (size_t i = 1; i < tok.size(); ++i)
                    topic->representative.push_back(std::stod(tok[i]));
            } else if (tok[0] == "partition" && topic && tok.size() >= 5) {
                Partition np;
                np.id = tok[2];
                np.version = std::stol(tok[4]);
                topic->partitions.push_back(std::move(np));
                partition = &topic->partitions.back();
                store.partition_seq_ = std::max(store.partition_seq_,
                                                std::atoi(tok[2].c_str() + 1));
            } else if (tok[0] == "prep" && partition) {
                partition->representative.clear();
                for (size_t i = 1; i < tok.size(); ++i)
                    partition->representative.push_back(std::stod(tok[i]));
            } else if (tok[0] == "record" && partition) {
                auto brace = t.find('{');
                if (brace == std::string::npos) throw IoError("bad record line");
                Json j = Json::parse(t.substr(brace), nullptr, false);
                if (j.is_discarded()) throw IoError("bad record json");
                StoredRecord sr;
                sr.record.origin_hypothesis = j.value("origin", "");
                sr.record.topic = j.value("topic", "");
                sr.record.reason = j.value("reason", "");
                sr.record.solution = j.value("solution", "");
                sr.record.source_node = j.value("node", "");
                sr.record.timestamp = j.value("time", 0.0);
                sr.record.version = j.value("version", 1);
                sr.record.supporting = j.value("supporting", false);
                sr.topic_embedding = scripted_embedding(sr.record.topic);
                sr.reason_embedding = scripted_embedding(sr.record.reason);
                partition->members.push_back(std::move(sr));
            } else {
                throw IoError("unrecognized snapshot line: " + t);
            }
        }
        return store;
    }

private:
    Topic* find_topic(const std::string& id) {
        for (auto& t : topics_)
            if (t.id == id) return &t;
        return nullptr;
    }

    StoredRecord* find_record(const std::string& origin) {
        for (auto& t : topics_)
            for (auto& p : t.partitions)
                for (auto& m : p.members)
                    if (m.record.origin_hypothesis == origin) return &m;
        return nullptr;
    }

    static bool same_payload(const KnowledgeRecord& a, const KnowledgeRecord& b) {
        return a.topic == b.topic && a.reason == b.reason &&
               a.solution == b.solution;
    }

    void blend_embedding(StoredRecord& mine, const StoredRecord& theirs) {
        Partition* hosting = nullptr;
        for (auto& t : topics_)
            for (auto& p : t.partitions)
                for (auto& m : p.members)
                    if (&m == &mine) hosting = &p;
        double wa = 0.5, wb = 0.5;
        if (hosting && !hosting->representative.empty()) {
            wa = std::max(0.01, similarity(mine.reason_embedding,
                                           hosting->representative));
            wb = std::max(0.01, similarity(theirs.reason_embedding,
                                           hosting->representative));
        }
        Embedding blended(mine.reason_embedding.size(), 0.0);
        for (size_t i = 0; i < blended.size(); ++i)
            blended[i] = wa * mine.reason_embedding[i] +
                         wb * theirs.reason_embedding[i];
        double norm = 0.0;
        for (double x : blended) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& x : blended) x /= norm;
        mine.reason_embedding = blended;
    }

    int merge_partitions_in(Topic& t) {
        int merges = 0;
        for (;;) {
            double best = -2.0;
            size_t bi = 0, bj = 0;
            for (size_t i = 0; i < t.partitions.size(); ++i)
                for (size_t j = i + 1; j < t.partitions.size(); ++j) {
                    double s = similarity(t.partitions[i].representative,
                                          t.partitions[j].representative);
                    if (s > best) {
                        best = s;
                        bi = i;
                        bj = j;
                    }
                }
            if (t.partitions.size() < 2 || best < thresholds_.theta_merge) break;
            Partition& keep = t.partitions[bi];
            Partition& gone = t.partitions[bj];
            if (gone.id < keep.id) std::swap(keep.id, gone.id);
            for (auto& m : gone.members) keep.members.push_back(std::move(m));
            keep.version = std::max(keep.version, gone.version) + 1;
            detail::recompute_partition_representative(keep);
            t.partitions.erase(t.partitions.begin() + static_cast<long>(bj));
            ++merges;
        }
        return merges;
    }

    // Reinforcements can drift representatives across thresholds; merge
    // until the structural invariant holds again.
    void restore_invariants() {
        for (auto& t : topics_) {
            int m = merge_partitions_in(t);
            if (m > 0) {
                counters_.merges += m;
                detail::recompute_topic_representative(t);
            }
        }
        for (;;) {
            bool merged = false;
            for (size_t i = 0; i < topics_.size() && !merged; ++i)
                for (size_t j = i + 1; j < topics_.size() && !merged; ++j) {
                    if (similarity(topics_[i].representative,
                                   topics_[j].representative) <
                        thresholds_.theta_topic)
                        continue;
                    Topic& keep = topics_[i];
                    Topic& gone = topics_[j];
                    for (auto& p : gone.partitions)
                        keep.partitions.push_back(std::move(p));
                    counters_.merges += merge_partitions_in(keep);
                    detail::recompute_topic_representative(keep);
                    topics_.erase(topics_.begin() + static_cast<long>(j));
                    merged = true;
                }
            if (!merged) break;
        }
    }

    void rebuild_representatives() {
        for (auto& t : topics_) {
            for (auto& p : t.partitions)
                detail::recompute_partition_representative(p);
            detail::recompute_topic_representative(t);
        }
    }

    std::string next_topic_id() {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "Z%03d", ++topic_seq_);
        return buf;
    }

    std::string next_partition_id() {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "P%03d", ++partition_seq_);
        return buf;
    }

    static Json journal_record(const KnowledgeRecord& r, const InsertReport& report) {
        Json j;
        j["origin"] = r.origin_hypothesis;
        j["topic"] = r.topic;
        j["reason"] = r.reason;
        j["solution"] = r.solution;
        j["node"] = r.source_node;
        j["time"] = r.timestamp;
        j["version"] = r.version;
        j["supporting"] = r.supporting;
        if (!report.topic_id.empty()) {
            j["placed"] = insert_kind_name(report.kind);
            j["topic_id"] = report.topic_id;
            j["partition_id"] = report.partition_id;
        }
        return j;
    }

    void append_journal(const std::string& op, const Json& body) {
        ++op_counter_;
        Json j;
        j["seq"] = op_counter_;
        j["op"] = op;
        j["body"] = body;
        journal_.push_back(j.dump());
    }

    static std::string render_vector(const Embedding& v) {
        std::ostringstream out;
        for (double x : v) out << " " << detail::format_fixed9(x);
        return out.str();
    }

    Scope scope_;
    std::string peer_id_;
    KnowledgeThresholds thresholds_;
    std::vector<Topic> topics_;
    std::map<std::string, long> version_vector_;
    std::vector<std::string> journal_;
    long op_counter_ = 0;
    int topic_seq_ = 0;
    int partition_seq_ = 0;
    KnowledgeCounters counters_;
};

inline MergeReport sync_global(RendezvousStore& global_store,
                               const RendezvousStore& local_store,
                               Reasoner& reasoner) {
    return global_store.sync_from(local_store, reasoner);
}

}  // namespace recist
