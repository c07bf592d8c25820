#pragma once
// Log ingestion for the evaluation corpora: Cloud Stateless CSV and
// Loghub-style ZooKeeper / Hadoop / OpenSSH / BGL text logs, plus the
// per-node diagnosis window extraction.
//
// Parsers never throw once past a valid header/preamble; lines that do not
// match their dialect degrade to records that inherit the previous
// timestamp and carry a parse-degraded flag.

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "recist/detail/strings.hpp"
#include "recist/detail/time.hpp"
#include "recist/errors.hpp"
#include "recist/model.hpp"

namespace recist {

enum class LogSource { Sys, Net, Custom };

inline const char* log_source_name(LogSource s) {
    switch (s) {
        case LogSource::Sys: return "sys";
        case LogSource::Net: return "net";
        case LogSource::Custom: return "custom";
    }
    return "sys";
}

enum class LogDialect { ZooKeeper, Hadoop, OpenSSH, BGL, CloudStateless };

inline const char* dialect_name(LogDialect d) {
    switch (d) {
        case LogDialect::ZooKeeper: return "zookeeper";
        case LogDialect::Hadoop: return "hadoop";
        case LogDialect::OpenSSH: return "openssh";
        case LogDialect::BGL: return "bgl";
        case LogDialect::CloudStateless: return "cloud-stateless";
    }
    return "zookeeper";
}

inline std::optional<LogDialect> dialect_from_name(const std::string& s) {
    if (s == "zookeeper") return LogDialect::ZooKeeper;
    if (s == "hadoop") return LogDialect::Hadoop;
    if (s == "openssh") return LogDialect::OpenSSH;
    if (s == "bgl") return LogDialect::BGL;
    if (s == "cloud-stateless") return LogDialect::CloudStateless;
    return std::nullopt;
}

struct LogRecord {
    Instant timestamp = 0;
    LogSource source = LogSource::Sys;
    std::string node_hint;      // empty when the dialect carries none
    std::string severity;       // empty when absent
    std::string component;
    std::string text;           // raw message, byte exact
    std::map<std::string, std::string> fields;  // structured rows
    bool unhealthy = false;     // Cloud Stateless status=1
    bool parse_degraded = false;
};

struct LogBundle {
    NodeId node;
    Instant window_start = 0;   // t - delta_d
    Instant window_end = 0;     // t
    std::vector<LogRecord> records;  // time ordered, input order on ties
};

struct ParseStats {
    long parsed = 0;
    long degraded = 0;
    long skipped = 0;   // malformed CSV rows
    long scan_ops = 0;  // single-pass cost counter
};

// --- Cloud Stateless CSV ------------------------------------------------

inline const std::vector<std::string>& cloud_stateless_columns() {
    static const std::vector<std::string> cols = {
        "timestamp",          "cpu_usage",     "memory_usage",
        "bandwidth_inbound",  "bandwidth_outbound", "tps",
        "response_time",      "status"};
    return cols;
}

inline std::vector<LogRecord> parse_cloud_stateless(std::istream& in,
                                                    ParseStats* stats = nullptr) {
    std::string header;
    if (!std::getline(in, header))
        throw MalformedHeader("empty cloud-stateless stream");
    auto cols = detail::split(detail::trim(header), ',');
    for (auto& c : cols) c = detail::trim(c);
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < cols.size(); ++i) index[detail::to_lower(cols[i])] = i;
    for (const auto& required : cloud_stateless_columns()) {
        if (!index.count(required))
            throw MalformedHeader("cloud-stateless header missing column '" +
                                  required + "'");
    }

    std::vector<LogRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (stats) ++stats->scan_ops;
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        auto cells = detail::split(t, ',');
        if (cells.size() != cols.size()) {
            if (stats) ++stats->skipped;
            continue;
        }
        auto ts = detail::parse_mdY_stamp(detail::trim(cells[index["timestamp"]]));
        if (!ts) ts = detail::parse_iso_like(detail::trim(cells[index["timestamp"]]));
        if (!ts) {
            if (stats) ++stats->skipped;
            continue;
        }
        LogRecord r;
        r.timestamp = *ts;
        r.source = LogSource::Custom;
        r.text = t;
        for (size_t i = 0; i < cols.size(); ++i)
            r.fields[detail::to_lower(cols[i])] = detail::trim(cells[i]);
        r.unhealthy = detail::trim(cells[index["status"]]) == "1";
        if (index.count("node")) r.node_hint = detail::trim(cells[index["node"]]);
        out.push_back(std::move(r));
        if (stats) ++stats->parsed;
    }
    return out;
}

// --- Loghub text dialects -----------------------------------------------

namespace detail {

inline void degrade(LogRecord& r, Instant last_ts) {
    r.timestamp = last_ts;
    r.parse_degraded = true;
}

// "2015-07-29 17:41:41,648 - INFO  [main:QuorumPeer@738] - message"
inline LogRecord parse_zookeeper_line(const std::string& line, Instant last_ts) {
    LogRecord r;
    r.text = line;
    r.source = LogSource::Sys;
    if (line.size() < 23) {
        degrade(r, last_ts);
        return r;
    }
    auto ts = parse_iso_like(line.substr(0, 23));
    if (!ts) {
        degrade(r, last_ts);
        return r;
    }
    r.timestamp = *ts;
    auto rest = trim(line.substr(23));
    if (starts_with(rest, "- ")) rest = trim(rest.substr(2));
    auto tok = split_ws(rest);
    if (!tok.empty()) r.severity = tok[0];
    auto lb = rest.find('[');
    auto rb = rest.find(']');
    if (lb != std::string::npos && rb != std::string::npos && rb > lb)
        r.component = rest.substr(lb + 1, rb - lb - 1);
    return r;
}

// "2015-10-18 18:01:47,978 INFO [main] org.apache.hadoop...: message"
inline LogRecord parse_hadoop_line(const std::string& line, Instant last_ts) {
    LogRecord r;
    r.text = line;
    r.source = LogSource::Sys;
    if (line.size() < 23) {
        degrade(r, last_ts);
        return r;
    }
    auto ts = parse_iso_like(line.substr(0, 23));
    if (!ts) {
        degrade(r, last_ts);
        return r;
    }
    r.timestamp = *ts;
    auto tok = split_ws(line.substr(23));
    if (!tok.empty()) r.severity = tok[0];
    if (tok.size() >= 3) r.component = tok[2];
    return r;
}

// "Dec 10 12:21:26 LabSZ sshd[24200]: message" — no year in the stamp.
// Year comes from base_year and rolls over when the month wraps backwards.
inline LogRecord parse_openssh_line(const std::string& line, Instant last_ts,
                                    int base_year, int& year_offset,
                                    int& last_month) {
    LogRecord r;
    r.text = line;
    r.source = LogSource::Net;
    auto tok = split_ws(line);
    if (tok.size() < 5) {
        degrade(r, last_ts);
        return r;
    }
    int month = month_from_abbrev(tok[0]);
    if (month == 0) {
        degrade(r, last_ts);
        return r;
    }
    if (last_month != 0 && month < last_month) ++year_offset;
    last_month = month;
    auto ts = parse_syslog_stamp(tok[0], tok[1], tok[2], base_year + year_offset);
    if (!ts) {
        degrade(r, last_ts);
        return r;
    }
    r.timestamp = *ts;
    r.node_hint = tok[3];
    r.component = tok[4];
    if (!r.component.empty() && r.component.back() == ':') r.component.pop_back();
    auto bracket = r.component.find('[');
    if (bracket != std::string::npos) r.component = r.component.substr(0, bracket);
    return r;
}

// "- 1117838570 2005.06.03 R02-M1-N0 2005-06-03-15.42.50.363779 R02-M1-N0
//  RAS KERNEL INFO message" — alert-coded lines carry a label instead of -.
inline LogRecord parse_bgl_line(const std::string& line, Instant last_ts) {
    LogRecord r;
    r.text = line;
    r.source = LogSource::Sys;
    auto tok = split_ws(line);
    if (tok.size() < 9) {
        degrade(r, last_ts);
        return r;
    }
    auto ts = parse_bgl_stamp(tok[4]);
    if (!ts) {
        degrade(r, last_ts);
        return r;
    }
    r.timestamp = *ts;
    if (tok[0] != "-") r.fields["alert"] = tok[0];
    r.node_hint = tok[3];
    r.component = tok[7];  // KERNEL, APP, ...
    r.severity = tok[8];   // INFO, FATAL, ...
    return r;
}

}  // namespace detail

struct LoghubOptions {
    int base_year = 2023;  // applied to dialects lacking a year (OpenSSH)
};

inline std::vector<LogRecord> parse_loghub(std::istream& in, LogDialect dialect,
                                           const LoghubOptions& opts = {},
                                           ParseStats* stats = nullptr) {
    if (dialect == LogDialect::CloudStateless)
        throw UnknownDialect("cloud-stateless is a CSV corpus, use parse_cloud_stateless");
    std::vector<LogRecord> out;
    std::string line;
    Instant last_ts = 0;
    int year_offset = 0;
    int last_month = 0;
    while (std::getline(in, line)) {
        if (stats) ++stats->scan_ops;
        if (detail::trim(line).empty()) continue;
        LogRecord r;
        switch (dialect) {
            case LogDialect::ZooKeeper:
                r = detail::parse_zookeeper_line(line, last_ts);
                break;
            case LogDialect::Hadoop:
                r = detail::parse_hadoop_line(line, last_ts);
                break;
            case LogDialect::OpenSSH:
                r = detail::parse_openssh_line(line, last_ts, opts.base_year,
                                               year_offset, last_month);
                break;
            case LogDialect::BGL:
                r = detail::parse_bgl_line(line, last_ts);
                break;
            default:
                throw UnknownDialect(dialect_name(dialect));
        }
        last_ts = r.timestamp;
        if (stats) {
            ++stats->parsed;
            if (r.parse_degraded) ++stats->degraded;
        }
        out.push_back(std::move(r));
    }
    return out;
}

// Closed window [t - delta_d, t]. Records carrying a node hint must match;
// hintless records attribute to the node whose failure triggered extraction.
inline LogBundle extract_window(const std::vector<LogRecord>& records,
                                const NodeId& node, Instant t, Instant delta_d,
                                ParseStats* stats = nullptr) {
    if (delta_d <= 0) throw ConfigError("delta_d must be positive");
    LogBundle bundle;
    bundle.node = node;
    bundle.window_start = t - delta_d;
    bundle.window_end = t;
    for (const auto& r : records) {
        if (stats) ++stats->scan_ops;
        if (r.timestamp < bundle.window_start || r.timestamp > bundle.window_end)
            continue;
        if (!r.node_hint.empty() && r.node_hint != node) continue;
        bundle.records.push_back(r);
    }
    std::stable_sort(bundle.records.begin(), bundle.records.end(),
                     [](const LogRecord& a, const LogRecord& b) {
                         return a.timestamp < b.timestamp;
                     });
    return bundle;
}

// Canonical line form used by golden tests and the parse subcommand.
inline std::string canonical_record(const LogRecord& r) {
    std::ostringstream out;
    out << detail::format_instant(r.timestamp) << "\t" << log_source_name(r.source)
        << "\t" << (r.node_hint.empty() ? "-" : r.node_hint) << "\t"
        << (r.severity.empty() ? "-" : r.severity) << "\t"
        << (r.component.empty() ? "-" : r.component) << "\t"
        << (r.unhealthy ? "unhealthy" : (r.parse_degraded ? "degraded" : "ok"))
        << "\t" << r.text;
    return out.str();
}

inline std::string serialize_cloud_stateless(const std::vector<LogRecord>& records) {
    std::ostringstream out;
    const auto& cols = cloud_stateless_columns();
    for (size_t i = 0; i < cols.size(); ++i)
        out << (i ? "," : "") << cols[i];
    out << "\n";
    for (const auto& r : records) {
        for (size_t i = 0; i < cols.size(); ++i) {
            auto it = r.fields.find(cols[i]);
            out << (i ? "," : "") << (it == r.fields.end() ? "" : it->second);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace recist
