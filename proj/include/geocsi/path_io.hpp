#pragma once

// Path database and location files.
//
// paths.csv:      ut_index,kind,plane_id,aaod,eaod,aaoa,eaoa,delay_s,rss_dbm,existent
//                 kind is "los" or "reflection"; plane_id is empty for LoS;
//                 rss_dbm is the literal token -inf for non-existent paths.
// locations.csv:  ut_index,x,y,z   (meters)

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geocsi/error.hpp"
#include "geocsi/raytrace.hpp"

namespace geocsi {

/// Shortest text that parses back to the same double; "-inf"/"inf" for infinities.
inline std::string format_number(double v) {
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline double parse_number(const std::string& s) {
    if (s == "-inf") return kNegInf;
    if (s == "inf") return -kNegInf;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw ParseError("not a number: '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline constexpr const char* kPathDbHeader = "ut_index,kind,plane_id,aaod,eaod,aaoa,eaoa,delay_s,rss_dbm,existent";

inline void write_path_db(std::ostream& out, std::span<const PathRecord> paths) {
    out << kPathDbHeader << "\n";
    for (const auto& p : paths) {
        out << p.ut_index << ',' << (p.kind == PathKind::LineOfSight ? "los" : "reflection") << ',';
        if (p.plane_id) out << *p.plane_id;
        out << ',' << format_number(p.aaod) << ',' << format_number(p.eaod) << ',' << format_number(p.aaoa)
            << ',' << format_number(p.eaoa) << ',' << format_number(p.delay_s) << ','
            << format_number(p.rss_dbm) << ',' << (p.existent ? 1 : 0) << "\n";
    }
}

inline std::vector<PathRecord> read_path_db(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kPathDbHeader) throw ParseError("path database: bad header", 1);
    std::vector<PathRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 10) throw ParseError("path database: expected 10 columns", line_no);
        try {
            PathRecord r;
            r.ut_index = std::stoi(f[0]);
            if (f[1] == "los") r.kind = PathKind::LineOfSight;
            else if (f[1] == "reflection") r.kind = PathKind::Reflection;
            else throw ParseError("unknown kind '" + f[1] + "'");
            if (!f[2].empty()) r.plane_id = std::stoi(f[2]);
            r.aaod = parse_number(f[3]);
            r.eaod = parse_number(f[4]);
            r.aaoa = parse_number(f[5]);
            r.eaoa = parse_number(f[6]);
            r.delay_s = parse_number(f[7]);
            r.rss_dbm = parse_number(f[8]);
            r.existent = f[9] == "1";
            r.status = r.existent ? PathStatus::Existent : PathStatus::Occluded;
            if (!r.encoding_consistent()) throw ParseError("record violates the existence encoding");
            out.push_back(r);
        } catch (const ParseError& e) {
            throw ParseError(std::string("path database: ") + e.what(), line_no);
        } catch (const std::exception& e) {
            throw ParseError(std::string("path database: ") + e.what(), line_no);
        }
    }
    return out;
}

inline void write_locations(std::ostream& out, std::span<const Point3> locations) {
    out << "ut_index,x,y,z\n";
    for (std::size_t i = 0; i < locations.size(); ++i)
        out << i << ',' << format_number(locations[i].x) << ',' << format_number(locations[i].y) << ','
            << format_number(locations[i].z) << "\n";
}

inline std::vector<Point3> read_locations(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "ut_index,x,y,z") throw ParseError("locations: bad header", 1);
    std::vector<Point3> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4 || std::stoul(f[0]) != out.size())
            throw ParseError("locations: malformed row", line_no);
        out.push_back({parse_number(f[1]), parse_number(f[2]), parse_number(f[3])});
    }
    return out;
}

inline nlohmann::ordered_json summary_json(const TraceSummary& s) {
    nlohmann::ordered_json j;
    j["feasible_locations"] = s.feasible;
    j["blocked_locations"] = s.blocked;
    j["linked_locations"] = s.linked;
    j["coverage_ratio"] = s.coverage_ratio();
    j["max_paths_per_pair"] = s.max_paths_per_pair;
    j["all_paths"] = s.total_paths;
    j["non_existent_paths"] = s.non_existent;
    j["existent_paths"] = s.existent;
    return j;
}

}  // namespace geocsi
