#pragma once
// Oracle seam: every LM-dependent step (variable extraction, the relation
// function, hypothesis generation, component scoring, embeddings) goes
// through dispatch() against a backend. The scripted backend is a pure
// function of (payload, rule table, seed); the replay backend re-serves a
// recorded transcript. The remote HTTP backend lives in reasoner_remote.hpp.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "recist/detail/strings.hpp"
#include "recist/errors.hpp"

namespace recist {

using Json = nlohmann::ordered_json;

enum class RequestKind { Extract, Relation, Hypothesize, Evaluate, Embed };

inline const char* request_kind_name(RequestKind k) {
    switch (k) {
        case RequestKind::Extract: return "extract";
        case RequestKind::Relation: return "relation";
        case RequestKind::Hypothesize: return "hypothesize";
        case RequestKind::Evaluate: return "evaluate";
        case RequestKind::Embed: return "embed";
    }
    return "extract";
}

inline std::optional<RequestKind> request_kind_from_name(const std::string& s) {
    if (s == "extract") return RequestKind::Extract;
    if (s == "relation") return RequestKind::Relation;
    if (s == "hypothesize") return RequestKind::Hypothesize;
    if (s == "evaluate") return RequestKind::Evaluate;
    if (s == "embed") return RequestKind::Embed;
    return std::nullopt;
}

struct ReasonerBudget {
    long max_payload_bytes = 1 << 20;
    long max_calls = 0;  // 0 = unlimited
};

struct ReasonerRequest {
    RequestKind kind = RequestKind::Extract;
    Json payload;
    ReasonerBudget budget;
    std::uint64_t seed = 0;
};

// Kind-specific payload schema, checked before any backend sees the request.
inline void validate_request(const ReasonerRequest& req) {
    const Json& p = req.payload;
    auto need = [&](const char* key) {
        if (!p.is_object() || !p.contains(key))
            throw SchemaViolation(std::string(request_kind_name(req.kind)) +
                                  " payload missing '" + key + "'");
    };
    switch (req.kind) {
        case RequestKind::Extract:
            need("dialect");
            need("records");
            break;
        case RequestKind::Relation:
            need("src");
            need("dst");
            break;
        case RequestKind::Hypothesize:
            need("node");
            need("path");
            need("evidence");
            break;
        case RequestKind::Evaluate:
            need("topic");
            need("reason");
            need("solution");
            need("depth");
            need("evidence_count");
            break;
        case RequestKind::Embed:
            need("kind");
            need("text");
            if (p["text"].get<std::string>().empty())
                throw SchemaViolation("embed text is empty");
            break;
    }
}

struct TranscriptRecord {
    long seq = 0;
    RequestKind kind = RequestKind::Extract;
    Json payload;
    Json response;
    double latency = 0.0;
    std::string backend;
};

// Append-only exchange log. Feeding it back through the replay backend
// reproduces the exact pipeline run.
class Transcript {
public:
    Transcript() = default;
    Transcript(Transcript&& o) noexcept
        : records_(std::move(o.records_)),
          backend_id_(std::move(o.backend_id_)),
          config_hash_(std::move(o.config_hash_)) {}
    Transcript& operator=(Transcript&& o) noexcept {
        records_ = std::move(o.records_);
        backend_id_ = std::move(o.backend_id_);
        config_hash_ = std::move(o.config_hash_);
        return *this;
    }

    void set_context(std::string backend_id, std::string config_hash) {
        backend_id_ = std::move(backend_id);
        config_hash_ = std::move(config_hash);
    }

    long append(RequestKind kind, const Json& payload, const Json& response,
                double latency, const std::string& backend) {
        std::lock_guard<std::mutex> lock(mu_);
        long seq = static_cast<long>(records_.size());
        records_.push_back({seq, kind, payload, response, latency, backend});
        return seq;
    }

    const std::vector<TranscriptRecord>& records() const { return records_; }
    const std::string& backend_id() const { return backend_id_; }
    const std::string& config_hash() const { return config_hash_; }

    std::string to_jsonl() const {
        std::ostringstream out;
        Json head;
        head["transcript"] = "recist v1";
        head["backend"] = backend_id_;
        head["config_hash"] = config_hash_;
        out << head.dump() << "\n";
        for (const auto& r : records_) {
            Json j;
            j["seq"] = r.seq;
            j["kind"] = request_kind_name(r.kind);
            j["payload"] = r.payload;
            j["response"] = r.response;
            j["latency"] = r.latency;
            j["backend"] = r.backend;
            out << j.dump() << "\n";
        }
        return out.str();
    }

    static Transcript from_jsonl(std::istream& in) {
        Transcript t;
        std::string line;
        if (!std::getline(in, line))
            throw MalformedHeader("empty transcript");
        Json head = Json::parse(line, nullptr, false);
        if (head.is_discarded() || head.value("transcript", "") != "recist v1")
            throw MalformedHeader("expected transcript header 'recist v1'");
        t.backend_id_ = head.value("backend", "");
        t.config_hash_ = head.value("config_hash", "");
        while (std::getline(in, line)) {
            if (detail::trim(line).empty()) continue;
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw IoError("malformed transcript record");
            TranscriptRecord r;
            r.seq = j.value("seq", 0L);
            auto k = request_kind_from_name(j.value("kind", ""));
            if (!k) throw IoError("unknown transcript kind");
            r.kind = *k;
            r.payload = j["payload"];
            r.response = j["response"];
            r.latency = j.value("latency", 0.0);
            r.backend = j.value("backend", "");
            t.records_.push_back(std::move(r));
        }
        return t;
    }

private:
    mutable std::mutex mu_;
    std::vector<TranscriptRecord> records_;
    std::string backend_id_;
    std::string config_hash_;
};

class ReasonerBackend {
public:
    virtual ~ReasonerBackend() = default;
    virtual std::string name() const = 0;
    virtual Json handle(const ReasonerRequest& req) = 0;
    // Simulated seconds a dispatch costs; remote backends report wall time.
    virtual double latency() const { return 0.0; }
};

// --- scripted rule tables -------------------------------------------------

// Failure categories used by the subtree classifier and the hypothesis
// templates.
enum class FailureCategory {
    ResourceOverload,
    NetworkInstability,
    TaskContention,
    ThermalAnomaly,
    FirmwareEvent,
    Unclassified
};

inline const char* category_name(FailureCategory c) {
    switch (c) {
        case FailureCategory::ResourceOverload: return "resource-overload";
        case FailureCategory::NetworkInstability: return "network-instability";
        case FailureCategory::TaskContention: return "task-contention";
        case FailureCategory::ThermalAnomaly: return "thermal-anomaly";
        case FailureCategory::FirmwareEvent: return "firmware-event";
        case FailureCategory::Unclassified: return "unclassified";
    }
    return "unclassified";
}

struct ExtractionRule {
    std::string label;
    std::vector<std::string> needles;  // case-insensitive substrings
    std::string kind;                  // diagnosis variable kind name
    FailureCategory category = FailureCategory::Unclassified;
};

// Ordered: first hit wins per line.
inline const std::vector<ExtractionRule>& extraction_rules() {
    static const std::vector<ExtractionRule> rules = {
        {"disk full", {"no space left", "disk full"}, "ResourceIndicator",
         FailureCategory::ResourceOverload},
        {"write failed", {"write failed", "error writing"}, "ErrorCode",
         FailureCategory::ResourceOverload},
        {"cpu saturation", {"cpu saturation"}, "ResourceIndicator",
         FailureCategory::ResourceOverload},
        {"memory saturation", {"memory saturation"}, "ResourceIndicator",
         FailureCategory::ResourceOverload},
        {"thermal warning", {"overheat", "thermal", "temperature above"},
         "Metric", FailureCategory::ThermalAnomaly},
        {"failed password", {"failed password"}, "Event",
         FailureCategory::NetworkInstability},
        {"auth failure", {"authentication failure", "auth fail"}, "Event",
         FailureCategory::NetworkInstability},
        {"max auth attempts", {"maximum authentication attempts"}, "ErrorCode",
         FailureCategory::NetworkInstability},
        {"possible break-in", {"break-in attempt"}, "Event",
         FailureCategory::NetworkInstability},
        {"disconnect", {"received disconnect"}, "Event",
         FailureCategory::NetworkInstability},
        {"invalid user", {"invalid user"}, "Event",
         FailureCategory::NetworkInstability},
        {"session expired", {"session expired", "expiring session",
                             "has expired"},
         "Event", FailureCategory::TaskContention},
        {"channel open failure", {"cannot open channel"}, "Event",
         FailureCategory::NetworkInstability},
        {"end of stream", {"end of stream"}, "ErrorCode",
         FailureCategory::NetworkInstability},
        {"connection broken", {"connection broken", "broken pipe"}, "Event",
         FailureCategory::NetworkInstability},
        {"connection refused", {"connection refused"}, "Event",
         FailureCategory::NetworkInstability},
        {"connection reset", {"connection reset"}, "Event",
         FailureCategory::NetworkInstability},
        {"connection timeout", {"connection timeout", "timed out", "read timeout"},
         "Event", FailureCategory::NetworkInstability},
        {"lease renewal failure", {"failed to renew lease"}, "Event",
         FailureCategory::TaskContention},
        {"container killed", {"container killed"}, "Event",
         FailureCategory::TaskContention},
        {"task attempt failure", {"task attempt failed", "attempt failed"},
         "Event", FailureCategory::TaskContention},
        {"cache parity error", {"cache parity error", "parity error"},
         "ErrorCode", FailureCategory::FirmwareEvent},
        {"tlb error", {"tlb error"}, "ErrorCode", FailureCategory::FirmwareEvent},
        {"machine check", {"machine check"}, "Event",
         FailureCategory::FirmwareEvent},
        {"kernel panic", {"kernel panic"}, "Event",
         FailureCategory::FirmwareEvent},
        {"kernel terminated", {"kernel terminated"}, "Event",
         FailureCategory::FirmwareEvent},
        {"bad message header", {"bad message header"}, "ErrorCode",
         FailureCategory::FirmwareEvent},
        {"response time spike", {"response time spike"}, "Metric",
         FailureCategory::NetworkInstability},
        {"bandwidth anomaly", {"bandwidth anomaly"}, "Metric",
         FailureCategory::NetworkInstability},
        {"unhealthy status", {"unhealthy status"}, "Event",
         FailureCategory::NetworkInstability},
        {"state transition", {"state change", "transitioning"},
         "StateTransition", FailureCategory::TaskContention},
    };
    return rules;
}

inline FailureCategory classify_label(const std::string& label) {
    for (const auto& r : extraction_rules())
        if (r.label == label) return r.category;
    return FailureCategory::Unclassified;
}

// Causal relation table for the scripted Phi. Pairs are (cause, effect).
inline const std::vector<std::pair<std::string, std::string>>& relation_rules() {
    static const std::vector<std::pair<std::string, std::string>> rules = {
        {"cpu saturation", "response time spike"},
        {"memory saturation", "response time spike"},
        {"bandwidth anomaly", "response time spike"},
        {"response time spike", "unhealthy status"},
        {"cpu saturation", "unhealthy status"},
        {"memory saturation", "unhealthy status"},
        {"bandwidth anomaly", "unhealthy status"},
        {"thermal warning", "cpu saturation"},
        {"channel open failure", "connection broken"},
        {"end of stream", "connection broken"},
        {"connection timeout", "connection broken"},
        {"connection broken", "session expired"},
        {"connection timeout", "session expired"},
        {"connection refused", "task attempt failure"},
        {"connection reset", "task attempt failure"},
        {"disk full", "write failed"},
        {"write failed", "task attempt failure"},
        {"disk full", "task attempt failure"},
        {"lease renewal failure", "task attempt failure"},
        {"task attempt failure", "container killed"},
        {"invalid user", "failed password"},
        {"failed password", "auth failure"},
        {"failed password", "max auth attempts"},
        {"auth failure", "max auth attempts"},
        {"failed password", "possible break-in"},
        {"max auth attempts", "disconnect"},
        {"auth failure", "disconnect"},
        {"cache parity error", "machine check"},
        {"tlb error", "machine check"},
        {"machine check", "kernel panic"},
        {"machine check", "kernel terminated"},
        {"bad message header", "kernel terminated"},
    };
    return rules;
}

// Corrective action per failure class, consumed by the hypothesis template
// and scored by the evaluator's keyword features.
inline std::string solution_for_category(FailureCategory c) {
    switch (c) {
        case FailureCategory::ResourceOverload:
            return "throttle workload and rebalance tasks across the plug";
        case FailureCategory::NetworkInstability:
            return "reroute traffic through healthy links and restart the endpoint service";
        case FailureCategory::TaskContention:
            return "restart affected tasks with backoff and reduce concurrency";
        case FailureCategory::ThermalAnomaly:
            return "reduce clock rate and improve cooling before reload";
        case FailureCategory::FirmwareEvent:
            return "quarantine node and schedule firmware remediation";
        case FailureCategory::Unclassified:
            return "collect more telemetry and retry diagnosis";
    }
    return "collect more telemetry and retry diagnosis";
}

// --- embeddings -----------------------------------------------------------

constexpr int kEmbeddingDim = 256;

// Bag-of-tokens hash embedding: lowercase alnum tokens, FNV-1a into 256
// bins, L2-normalized. Token-disjoint texts are exactly orthogonal.
inline std::vector<double> scripted_embedding(const std::string& text) {
    std::vector<double> v(kEmbeddingDim, 0.0);
    std::string token;
    auto flush = [&]() {
        if (token.empty()) return;
        v[detail::fnv1a(token) % kEmbeddingDim] += 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

// --- scripted backend -----------------------------------------------------

class ScriptedBackend : public ReasonerBackend {
public:
    explicit ScriptedBackend(double synthetic_latency = 0.0)
        : latency_(synthetic_latency) {}

    std::string name() const override { return "scripted"; }
    double latency() const override { return latency_; }

    Json handle(const ReasonerRequest& req) override {
        switch (req.kind) {
            case RequestKind::Extract: return handle_extract(req.payload);
            case RequestKind::Relation: return handle_relation(req.payload);
            case RequestKind::Hypothesize: return handle_hypothesize(req.payload);
            case RequestKind::Evaluate: return handle_evaluate(req.payload);
            case RequestKind::Embed: return handle_embed(req.payload);
        }
        throw SchemaViolation("unknown request kind");
    }

private:
    static Json handle_extract(const Json& payload) {
        // Line-template matching; rows from the cloud CSV additionally get
        // threshold-derived synthetic entities.
        Json variables = Json::array();
        std::map<std::string, size_t> seen;  // label -> index in variables
        const bool cloud = payload.value("dialect", "") == "cloud-stateless";
        long idx = 0;
        for (const auto& rec : payload["records"]) {
            std::vector<std::string> hits;
            std::string text = rec.value("text", "");
            std::string lower = detail::to_lower(text);
            if (cloud) {
                for (const auto& h : cloud_row_hits(rec)) hits.push_back(h);
            }
            for (const auto& rule : extraction_rules()) {
                bool matched = false;
                for (const auto& needle : rule.needles) {
                    if (lower.find(needle) != std::string::npos) {
                        matched = true;
                        break;
                    }
                }
                if (matched) {
                    hits.push_back(rule.label);
                    break;  // first rule wins per line
                }
            }
            for (const auto& label : hits) {
                auto it = seen.find(label);
                if (it == seen.end()) {
                    Json entry;
                    entry["label"] = label;
                    entry["kind"] = kind_for_label(label);
                    entry["evidence"] = Json::array({idx});
                    seen[label] = variables.size();
                    variables.push_back(std::move(entry));
                } else {
                    variables[it->second]["evidence"].push_back(idx);
                }
            }
            ++idx;
        }
        Json out;
        out["variables"] = variables;
        return out;
    }

    static std::string kind_for_label(const std::string& label) {
        for (const auto& r : extraction_rules())
            if (r.label == label) return r.kind;
        return "Event";
    }

    static std::vector<std::string> cloud_row_hits(const Json& rec) {
        std::vector<std::string> hits;
        if (!rec.contains("fields")) return hits;
        const Json& f = rec["fields"];
        auto num = [&](const char* key) -> double {
            if (!f.contains(key)) return 0.0;
            try {
                return std::stod(f[key].get<std::string>());
            } catch (...) {
                return 0.0;
            }
        };
        if (f.contains("status") && f["status"] == "1")
            hits.push_back("unhealthy status");
        if (num("response_time") > 0.5) hits.push_back("response time spike");
        if (num("cpu_usage") > 90.0) hits.push_back("cpu saturation");
        if (num("memory_usage") > 90.0) hits.push_back("memory saturation");
        if (num("bandwidth_inbound") > 100.0 || num("bandwidth_outbound") > 100.0)
            hits.push_back("bandwidth anomaly");
        return hits;
    }

    static Json handle_relation(const Json& payload) {
        std::string src = payload["src"].value("label", "");
        std::string dst = payload["dst"].value("label", "");
        Json out;
        for (const auto& [cause, effect] : relation_rules()) {
            if (cause == src && effect == dst) {
                out["related"] = 1;
                out["confidence"] = 1.0;
                out["rationale"] = "rule: " + cause + " precedes and induces " + effect;
                return out;
            }
        }
        out["related"] = 0;
        out["confidence"] = 0.0;
        out["rationale"] = "no causal template for this pair";
        return out;
    }

    static Json handle_hypothesize(const Json& payload) {
        std::vector<std::string> labels;
        for (const auto& step : payload["path"])
            labels.push_back(step.value("label", ""));
        if (labels.empty()) throw SchemaViolation("hypothesize path is empty");
        FailureCategory cat = classify_label(labels.back());
        std::string topic = category_name(cat);
        std::string reason;
        for (size_t i = 0; i < labels.size(); ++i) {
            if (i) reason += " led to ";
            reason += labels[i];
        }
        reason += " on node " + payload.value("node", "");
        Json out;
        out["topic"] = topic;
        out["reason"] = reason;
        out["solution"] = solution_for_category(cat);
        return out;
    }

    static Json handle_evaluate(const Json& payload) {
        // Component scores from structural features of the hypothesis:
        // depth drives coherence, the solution's action keywords drive
        // safety, evidence volume drives utility.
        long depth = payload.value("depth", 1L);
        long evidence = payload.value("evidence_count", 0L);
        std::string solution = detail::to_lower(payload.value("solution", ""));
        double coherence =
            std::min(1.0, 0.55 + 0.15 * static_cast<double>(std::max(0L, depth - 1)));
        double safety = 0.5;
        auto bump = [&](const char* needle, double score) {
            if (solution.find(needle) != std::string::npos)
                safety = std::max(safety, score);
        };
        bump("throttle", 0.9);
        bump("reroute", 0.9);
        bump("restart", 0.85);
        bump("cooling", 0.85);
        bump("quarantine", 0.8);
        double utility =
            std::min(1.0, 0.4 + 0.15 * static_cast<double>(std::max(0L, evidence)));
        Json out;
        out["coherence"] = coherence;
        out["safety"] = safety;
        out["utility"] = utility;
        return out;
    }

    static Json handle_embed(const Json& payload) {
        std::string text = payload.value("text", "");
        if (text.empty()) throw SchemaViolation("embed text is empty");
        Json out;
        out["vector"] = scripted_embedding(text);
        return out;
    }

    double latency_;
};

// --- replay backend --------------------------------------------------------

// Serves responses from a recorded transcript in order; any divergence in
// kind or payload is a hard error so silent drift cannot happen.
class ReplayBackend : public ReasonerBackend {
public:
    explicit ReplayBackend(Transcript transcript)
        : transcript_(std::move(transcript)) {}

    std::string name() const override { return "replay"; }

    Json handle(const ReasonerRequest& req) override {
        if (cursor_ >= transcript_.records().size())
            throw ReasonerUnavailable("transcript exhausted at record " +
                                      std::to_string(cursor_));
        const TranscriptRecord& rec = transcript_.records()[cursor_];
        if (rec.kind != req.kind || rec.payload != req.payload)
            throw ReasonerUnavailable("replay divergence at record " +
                                      std::to_string(cursor_));
        last_latency_ = rec.latency;
        ++cursor_;
        return rec.response;
    }

    double latency() const override { return last_latency_; }

private:
    Transcript transcript_;
    size_t cursor_ = 0;
    double last_latency_ = 0.0;
};

// --- dispatcher -------------------------------------------------------------

struct ReasonerCounters {
    long calls = 0;
    long calls_extract = 0;
    long calls_relation = 0;
    long calls_hypothesize = 0;
    long calls_evaluate = 0;
    long calls_embed = 0;
    double simulated_latency = 0.0;
};

class Reasoner {
public:
    explicit Reasoner(std::shared_ptr<ReasonerBackend> backend)
        : backend_(std::move(backend)), backend_name_storage_(backend_->name()) {
        transcript_.set_context(backend_name_storage_, "");
    }

    // Requests that do not pin their own seed inherit the run seed.
    void set_default_seed(std::uint64_t seed) { default_seed_ = seed; }

    Json dispatch(ReasonerRequest req) {
        if (req.seed == 0) req.seed = default_seed_;
        validate_request(req);
        std::string dumped = req.payload.dump();
        if (req.budget.max_payload_bytes > 0 &&
            static_cast<long>(dumped.size()) > req.budget.max_payload_bytes)
            throw BudgetExceeded("payload of " + std::to_string(dumped.size()) +
                                 " bytes exceeds budget");
        if (req.budget.max_calls > 0 && counters_.calls >= req.budget.max_calls)
            throw BudgetExceeded("call budget exhausted");

        Json response;
        int attempts = 0;
        for (;;) {
            try {
                response = backend_->handle(req);
                break;
            } catch (const SchemaViolation&) {
                if (++attempts > 2) throw ReasonerUnavailable("malformed response after retries");
            }
        }
        ++counters_.calls;
        switch (req.kind) {
            case RequestKind::Extract: ++counters_.calls_extract; break;
            case RequestKind::Relation: ++counters_.calls_relation; break;
            case RequestKind::Hypothesize: ++counters_.calls_hypothesize; break;
            case RequestKind::Evaluate: ++counters_.calls_evaluate; break;
            case RequestKind::Embed: ++counters_.calls_embed; break;
        }
        double lat = backend_->latency();
        counters_.simulated_latency += lat;
        transcript_.append(req.kind, req.payload, response, lat, backend_->name());
        return response;
    }

    const ReasonerCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = {}; }
    Transcript& transcript() { return transcript_; }
    const Transcript& transcript() const { return transcript_; }
    const std::string& backend_name() const { return backend_name_storage_; }

private:
    std::shared_ptr<ReasonerBackend> backend_;
    Transcript transcript_;
    ReasonerCounters counters_;
    std::string backend_name_storage_;
    std::uint64_t default_seed_ = 0;
};

}  // namespace recist
