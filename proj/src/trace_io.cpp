#include <fmt/core.h>

#include "spgnm/error.hpp"
#include "spgnm/harness.hpp"
#include "spgnm/mdp_io.hpp"

namespace spgnm {

using nlohmann::json;

namespace {

std::string number(double x) { return fmt::format("{:.17g}", x); }

std::string optional_number(const std::optional<double>& x) { return x ? number(*x) : std::string(); }

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

std::optional<double> optional_double(const json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

}  // namespace

std::string trace_to_csv(const RunTrace& trace) {
    const std::size_t n_states = trace.records.empty() ? trace.final_params.logits.rows()
                                                       : trace.records.front().values.size();
    std::string out = "t,objective,omega_objective";
    for (std::size_t s = 0; s < n_states; ++s) out += fmt::format(",V_s{}", s);
    out += ",gap,wall_ms\n";
    for (const auto& r : trace.records) {
        out += fmt::format("{},{},{}", r.t, number(r.objective), optional_number(r.omega_objective));
        for (double v : r.values) out += "," + number(v);
        out += "," + optional_number(r.gap) + "," + optional_number(r.wall_ms) + "\n";
    }
    return out;
}

json trace_to_json(const RunTrace& trace) {
    json records = json::array();
    for (const auto& r : trace.records) {
        records.push_back({{"t", r.t},
                           {"objective", r.objective},
                           {"omega_objective", optional_json(r.omega_objective)},
                           {"values", r.values},
                           {"gap", optional_json(r.gap)},
                           {"wall_ms", optional_json(r.wall_ms)}});
    }
    json doc;
    doc["config"] = config_to_json(trace.config);
    doc["failed"] = trace.failed;
    doc["failure"] = trace.failure;
    doc["accepted"] = trace.accepted ? json(*trace.accepted) : json(nullptr);
    doc["overflow_rejections"] = trace.overflow_rejections ? json(*trace.overflow_rejections) : json(nullptr);
    doc["final_params"] = trace.final_params.logits.to_rows();
    doc["records"] = std::move(records);
    return doc;
}

RunTrace trace_from_json(const json& doc) {
    try {
        RunTrace t;
        t.config = config_from_json(doc.at("config"));
        t.failed = doc.at("failed").get<bool>();
        t.failure = doc.at("failure").get<std::string>();
        if (!doc.at("accepted").is_null()) t.accepted = doc.at("accepted").get<long>();
        if (!doc.at("overflow_rejections").is_null())
            t.overflow_rejections = doc.at("overflow_rejections").get<long>();
        t.final_params = PolicyParams(Table::from_rows(doc.at("final_params").get<std::vector<numvec>>()));
        for (const auto& r : doc.at("records")) {
            TraceRecord rec;
            rec.t = r.at("t").get<long>();
            rec.objective = r.at("objective").get<double>();
            rec.omega_objective = optional_double(r.at("omega_objective"));
            rec.values = r.at("values").get<numvec>();
            rec.gap = optional_double(r.at("gap"));
            rec.wall_ms = optional_double(r.at("wall_ms"));
            t.records.push_back(std::move(rec));
        }
        return t;
    } catch (const json::exception& e) {
        throw InvalidInput(fmt::format("malformed trace document: {}", e.what()));
    }
}

void serialize_trace(const RunTrace& trace, TraceFormat format, const std::filesystem::path& destination) {
    const std::string body = format == TraceFormat::csv ? trace_to_csv(trace) : trace_to_json(trace).dump(2) + "\n";
    write_file_atomic(destination, body);
}

}  // namespace spgnm
