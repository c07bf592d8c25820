#pragma once
// Remote oracle backend: POSTs {kind, payload, constraints} as JSON to an
// HTTP endpoint and parses the response into the kind's schema. Kept in its
// own header so offline builds never pull in the HTTP client.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>

#include "recist/errors.hpp"
#include "recist/reasoner.hpp"

namespace recist {

struct RemoteOptions {
    std::string endpoint;       // http://host:port/path
    std::string auth_env;       // env var holding the bearer token
    double timeout_seconds = 30.0;
};

// Parses a response body; the server may wrap the result in {"response": x}.
// Missing mandatory keys raise SchemaViolation so dispatch retries. Relation
// confidence may arrive as verbal certainty, mapped onto {0.5, 0.75, 1.0}.
inline Json parse_remote_response(RequestKind kind, const std::string& body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) throw SchemaViolation("response is not JSON");
    if (j.contains("response")) j = j["response"];
    auto need = [&](const char* key) {
        if (!j.is_object() || !j.contains(key))
            throw SchemaViolation(std::string("response missing '") + key + "'");
    };
    if (kind == RequestKind::Relation && j.is_object() &&
        j.contains("confidence") && j["confidence"].is_string()) {
        std::string verbal = j["confidence"].get<std::string>();
        if (verbal == "high" || verbal == "certain") j["confidence"] = 1.0;
        else if (verbal == "medium" || verbal == "likely") j["confidence"] = 0.75;
        else j["confidence"] = 0.5;
    }
    switch (kind) {
        case RequestKind::Extract: need("variables"); break;
        case RequestKind::Relation: need("related"); break;
        case RequestKind::Hypothesize:
            need("topic");
            need("reason");
            need("solution");
            break;
        case RequestKind::Evaluate:
            need("coherence");
            need("safety");
            need("utility");
            break;
        case RequestKind::Embed: need("vector"); break;
    }
    return j;
}

class RemoteBackend : public ReasonerBackend {
public:
    explicit RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
        auto scheme_end = options_.endpoint.find("://");
        std::string rest = scheme_end == std::string::npos
                               ? options_.endpoint
                               : options_.endpoint.substr(scheme_end + 3);
        auto slash = rest.find('/');
        host_ = slash == std::string::npos ? rest : rest.substr(0, slash);
        path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    }

    std::string name() const override { return "remote"; }
    double latency() const override { return last_latency_; }

    Json handle(const ReasonerRequest& req) override {
        Json doc;
        doc["kind"] = request_kind_name(req.kind);
        doc["payload"] = req.payload;
        doc["constraints"] = {{"max_payload_bytes", req.budget.max_payload_bytes},
                              {"seed", req.seed}};

        httplib::Client client(host_);
        client.set_read_timeout(static_cast<time_t>(options_.timeout_seconds), 0);
        httplib::Headers headers;
        if (!options_.auth_env.empty()) {
            if (const char* token = std::getenv(options_.auth_env.c_str()))
                headers.emplace("Authorization", std::string("Bearer ") + token);
        }

        auto start = std::chrono::steady_clock::now();
        auto res = client.Post(path_, headers, doc.dump(), "application/json");
        auto stop = std::chrono::steady_clock::now();
        last_latency_ =
            std::chrono::duration<double>(stop - start).count();
        if (!res)
            throw ReasonerUnavailable("no response from " + options_.endpoint);
        if (res->status != 200)
            throw ReasonerUnavailable("endpoint returned status " +
                                      std::to_string(res->status));
        return parse_remote_response(req.kind, res->body);
    }

private:
    RemoteOptions options_;
    std::string host_;
    std::string path_;
    double last_latency_ = 0.0;
};

}  // namespace recist
