#pragma once
// Telemetry: the ordered event stream every layer reports into, and the
// derived metrics — recovery records, decision-quality rates (Best /
// Accepted / Rejected / Harmful / RDR), and agent CPU series.

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "recist/detail/strings.hpp"
#include "recist/errors.hpp"
#include "recist/model.hpp"

namespace recist {

struct TelemetryEvent {
    long seq = 0;
    SimTime time = 0.0;
    std::string layer;  // containment, diagnosis, meta, knowledge, telemetry
    std::string kind;   // flag, negotiate, redistribute, verdict, ...
    NodeId node;
    std::map<std::string, std::string> detail;
};

// Append-only, totally ordered by (time, node, seq). An event that travels
// backwards in time is rejected and replaced by an order-violation marker.
class TelemetryStream {
public:
    bool record_event(SimTime time, const std::string& layer,
                      const std::string& kind, const NodeId& node,
                      std::map<std::string, std::string> detail = {}) {
        if (!events_.empty() && time < last_time_) {
            TelemetryEvent marker;
            marker.seq = next_seq_++;
            marker.time = last_time_;
            marker.layer = "telemetry";
            marker.kind = "order-violation";
            marker.node = node;
            marker.detail = {{"rejected_kind", kind},
                             {"rejected_time", detail::format_decimal(time)}};
            events_.push_back(std::move(marker));
            return false;
        }
        TelemetryEvent ev;
        ev.seq = next_seq_++;
        ev.time = time;
        ev.layer = layer;
        ev.kind = kind;
        ev.node = node;
        ev.detail = std::move(detail);
        last_time_ = time;
        events_.push_back(std::move(ev));
        return true;
    }

    const std::vector<TelemetryEvent>& events() const { return events_; }
    bool empty() const { return events_.empty(); }

private:
    std::vector<TelemetryEvent> events_;
    long next_seq_ = 0;
    SimTime last_time_ = 0.0;
};

struct RecoveryRecord {
    NodeId node;
    SimTime flag_time = 0.0;
    SimTime recovery_time = 0.0;
    double elapsed = 0.0;
    double containment_span = 0.0;
    double diagnosis_span = 0.0;
    double meta_span = 0.0;
    double knowledge_span = 0.0;
    int subtree_path_count = 0;
    int micro_agent_calls = 0;
    std::map<std::string, int> verdict_counts;
    bool escalated = false;
};

inline std::vector<RecoveryRecord> derive_recovery_records(
    const TelemetryStream& stream) {
    std::map<NodeId, RecoveryRecord> open;
    std::vector<RecoveryRecord> done;
    auto stat = [](const TelemetryEvent& ev, const char* key) {
        auto it = ev.detail.find(key);
        return it == ev.detail.end() ? 0.0 : std::stod(it->second);
    };
    for (const auto& ev : stream.events()) {
        if (ev.kind == "flag") {
            RecoveryRecord r;
            r.node = ev.node;
            r.flag_time = ev.time;
            open[ev.node] = r;
        } else if (ev.kind == "layer-span" && open.count(ev.node)) {
            auto& r = open[ev.node];
            if (ev.layer == "containment") r.containment_span += stat(ev, "span");
            if (ev.layer == "diagnosis") r.diagnosis_span += stat(ev, "span");
            if (ev.layer == "meta") r.meta_span += stat(ev, "span");
            if (ev.layer == "knowledge") r.knowledge_span += stat(ev, "span");
        } else if (ev.kind == "paths" && open.count(ev.node)) {
            open[ev.node].subtree_path_count = static_cast<int>(stat(ev, "count"));
        } else if (ev.kind == "verdict" && open.count(ev.node)) {
            auto& r = open[ev.node];
            ++r.micro_agent_calls;
            auto it = ev.detail.find("verdict");
            if (it != ev.detail.end()) ++r.verdict_counts[it->second];
        } else if ((ev.kind == "recovered" || ev.kind == "escalated") &&
                   open.count(ev.node)) {
            auto& r = open[ev.node];
            r.recovery_time = ev.time;
            r.elapsed = ev.time - r.flag_time;
            r.escalated = ev.kind == "escalated";
            done.push_back(r);
            open.erase(ev.node);
        }
    }
    return done;
}

// Table-style decision quality: category rates over verdict events plus the
// reasoning-depth rate (system-level invocations / spawned agents).
struct DecisionQualityRates {
    double best = 0.0;
    double accepted = 0.0;
    double rejected = 0.0;
    double harmful = 0.0;
    double rdr = 0.0;
    long denominator = 0;  // total verdict responses in scope
};

// scope: empty = whole run, otherwise matches the event's "scope" detail
// (the pipeline stamps dataset ids there).
inline DecisionQualityRates compute_rates(const TelemetryStream& stream,
                                          const std::string& scope = "") {
    long best = 0, accepted = 0, rejected = 0, harmful = 0;
    long spawned = 0, system_invocations = 0;
    for (const auto& ev : stream.events()) {
        if (!scope.empty()) {
            auto it = ev.detail.find("scope");
            if (it == ev.detail.end() || it->second != scope) continue;
        }
        if (ev.kind == "agent-spawn") {
            ++spawned;
        } else if (ev.kind == "verdict") {
            auto it = ev.detail.find("verdict");
            if (it == ev.detail.end()) continue;
            if (it->second == "best") ++best;
            else if (it->second == "accepted") ++accepted;
            else if (it->second == "rejected") ++rejected;
            else if (it->second == "harmful") ++harmful;
            auto lvl = ev.detail.find("level");
            if (lvl != ev.detail.end() && lvl->second == "system")
                ++system_invocations;
        }
    }
    long total = best + accepted + rejected + harmful;
    if (total == 0) throw EmptyScope("no verdict events in scope '" + scope + "'");
    DecisionQualityRates r;
    r.denominator = total;
    r.best = static_cast<double>(best) / static_cast<double>(total);
    r.accepted = static_cast<double>(accepted) / static_cast<double>(total);
    r.rejected = static_cast<double>(rejected) / static_cast<double>(total);
    r.harmful = static_cast<double>(harmful) / static_cast<double>(total);
    r.rdr = spawned > 0 ? static_cast<double>(system_invocations) /
                              static_cast<double>(spawned)
                        : 0.0;
    return r;
}

struct CpuSample {
    double at = 0.0;       // interval start (sim seconds or wall seconds)
    double percent = 0.0;  // CPU share during the interval
};

struct CpuSeries {
    std::vector<CpuSample> samples;
    bool synthetic = false;
    double mean() const {
        if (samples.empty()) return 0.0;
        double s = 0.0;
        for (const auto& x : samples) s += x.percent;
        return s / static_cast<double>(samples.size());
    }
    double max() const {
        double m = 0.0;
        for (const auto& x : samples) m = std::max(m, x.percent);
        return m;
    }
};

// Synthetic series: oracle-call events bucketed per interval of simulated
// time, unit cost per call, capped at 100%.
inline CpuSeries synthetic_cpu_series(const TelemetryStream& stream,
                                      double interval,
                                      double unit_cost_percent = 1.0) {
    CpuSeries series;
    series.synthetic = true;
    if (interval <= 0.0) throw ConfigError("interval must be positive");
    std::map<long, double> buckets;
    for (const auto& ev : stream.events()) {
        if (ev.kind != "oracle-calls") continue;
        auto it = ev.detail.find("count");
        double calls = it == ev.detail.end() ? 0.0 : std::stod(it->second);
        buckets[static_cast<long>(ev.time / interval)] += calls;
    }
    for (const auto& [bucket, calls] : buckets) {
        series.samples.push_back({static_cast<double>(bucket) * interval,
                                  std::min(100.0, calls * unit_cost_percent)});
    }
    return series;
}

// Host sampler: process CPU share over wall intervals via std::clock. Falls
// back to the synthetic series (flagged) when the host clock is unusable.
inline CpuSeries sample_cpu(const TelemetryStream& stream, double interval,
                            int samples = 3) {
    std::clock_t c0 = std::clock();
    if (c0 == static_cast<std::clock_t>(-1))
        return synthetic_cpu_series(stream, interval);
    CpuSeries series;
    for (int i = 0; i < samples; ++i) {
        std::clock_t before = std::clock();
        double spin_sink = 0.0;
        for (int spin = 0; spin < 1000; ++spin) spin_sink += spin;
        std::clock_t after = std::clock();
        if (spin_sink < 0.0) return series;  // keeps the spin loop observable
        double used = static_cast<double>(after - before) / CLOCKS_PER_SEC;
        series.samples.push_back(
            {static_cast<double>(i) * interval,
             std::min(100.0, 100.0 * used / std::max(interval, 1e-9))});
    }
    return series;
}

// --- export / import -------------------------------------------------------

namespace detail {

inline std::string csv_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case ',': out += "%2C"; break;
            case ';': out += "%3B"; break;
            case '=': out += "%3D"; break;
            case '%': out += "%25"; break;
            case '\n': out += "%0A"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    return out;
}

inline std::string csv_unescape(const std::string& s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() + 1 && i + 2 <= s.size()) {
            std::string code = s.substr(i + 1, 2);
            if (code == "2C") { out += ','; i += 2; continue; }
            if (code == "3B") { out += ';'; i += 2; continue; }
            if (code == "3D") { out += '='; i += 2; continue; }
            if (code == "25") { out += '%'; i += 2; continue; }
            if (code == "0A") { out += '\n'; i += 2; continue; }
        }
        out += s[i];
    }
    return out;
}

}  // namespace detail

enum class ExportFormat { CSV, JSONL };

// CSV columns carry the Table-style rate names; the rate cells are filled on
// "rates" summary events and empty elsewhere.
inline std::string export_stream(const TelemetryStream& stream, ExportFormat fmt) {
    std::ostringstream out;
    if (fmt == ExportFormat::CSV) {
        out << "recist-metrics v1\n";
        out << "seq,time,layer,kind,node,Best,Accepted,Rejected,Harmful,RDR,detail\n";
        for (const auto& ev : stream.events()) {
            std::string rates[5];
            static const char* keys[5] = {"best", "accepted", "rejected",
                                          "harmful", "rdr"};
            std::string detail_join;
            for (const auto& [k, v] : ev.detail) {
                bool is_rate = false;
                if (ev.kind == "rates") {
                    for (int i = 0; i < 5; ++i)
                        if (k == keys[i]) {
                            rates[i] = v;
                            is_rate = true;
                        }
                }
                if (is_rate) continue;
                if (!detail_join.empty()) detail_join += ";";
                detail_join += detail::csv_escape(k) + "=" + detail::csv_escape(v);
            }
            out << ev.seq << "," << detail::format_decimal(ev.time) << ","
                << ev.layer << "," << ev.kind << "," << ev.node << ","
                << rates[0] << "," << rates[1] << "," << rates[2] << ","
                << rates[3] << "," << rates[4] << "," << detail_join << "\n";
        }
        return out.str();
    }
    out << R"({"metrics":"recist v1"})" << "\n";
    for (const auto& ev : stream.events()) {
        std::ostringstream line;
        line << "{\"seq\":" << ev.seq << ",\"time\":"
             << detail::format_decimal(ev.time) << ",\"layer\":\"" << ev.layer
             << "\",\"kind\":\"" << ev.kind << "\",\"node\":\"" << ev.node
             << "\",\"detail\":{";
        bool first = true;
        for (const auto& [k, v] : ev.detail) {
            if (!first) line << ",";
            first = false;
            line << "\"" << detail::json_escape(k) << "\":\""
                 << detail::json_escape(v) << "\"";
        }
        line << "}}";
        out << line.str() << "\n";
    }
    return out.str();
}

inline TelemetryStream import_stream_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "recist-metrics v1")
        throw MalformedHeader("expected 'recist-metrics v1'");
    if (!std::getline(in, line)) throw MalformedHeader("missing column header");
    TelemetryStream stream;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split(line, ',');
        if (cells.size() != 11) throw IoError("bad metrics row: " + line);
        std::map<std::string, std::string> det;
        static const char* keys[5] = {"best", "accepted", "rejected", "harmful",
                                      "rdr"};
        for (int i = 0; i < 5; ++i)
            if (!cells[5 + static_cast<size_t>(i)].empty())
                det[keys[i]] = cells[5 + static_cast<size_t>(i)];
        if (!cells[10].empty()) {
            for (const auto& kv : detail::split(cells[10], ';')) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                det[detail::csv_unescape(kv.substr(0, eq))] =
                    detail::csv_unescape(kv.substr(eq + 1));
            }
        }
        stream.record_event(std::stod(cells[1]), cells[2], cells[3], cells[4],
                            std::move(det));
    }
    return stream;
}

}  // namespace recist
