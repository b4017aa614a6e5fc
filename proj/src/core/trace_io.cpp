#include "trace_io.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace fxm {

using nlohmann::ordered_json;

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

// Doubles pass through raw so the JSON layer prints shortest round-trip form;
// keys are customer ids as decimal strings.
ordered_json decision_json(const MatchDecision& decision) {
    ordered_json j = ordered_json::object();
    for (const auto& [id, split] : decision.entries) {
        ordered_json entry;
        entry["rs"] = split.renewable;
        entry["gs"] = split.grid;
        j[std::to_string(id)] = entry;
    }
    return j;
}

}  // namespace

void write_trace_jsonl(std::ostream& out, const EpochTrace& trace, std::uint64_t epoch_index) {
    for (const auto& period : trace.periods) {
        const auto& state = period.state;
        ordered_json j;
        j["epoch"] = epoch_index;
        j["period"] = state.current_period();
        j["active_ids"] = state.active_ids();
        j["r"] = state.current_renewable();
        ordered_json pi = ordered_json::object();
        for (CustomerId id : state.active_ids()) pi[std::to_string(id)] = state.willingness(id);
        j["pi"] = pi;
        ordered_json m = ordered_json::object();
        for (std::size_t i = 0; i < period.match.size(); ++i)
            m[std::to_string(period.match.ids[i])] = static_cast<int>(period.match.flags[i]);
        j["m"] = m;
        j["decision"] = decision_json(period.decision);
        j["welfare"] = period.welfare;
        out << j.dump() << '\n';
    }
}

void write_curve_tsv(std::ostream& out, const std::vector<CurvePoint>& curve) {
    out << "# epoch\twelfare\trunning_avg\n";
    for (const auto& point : curve)
        out << point.epoch << '\t' << format_number(point.welfare) << '\t'
            << format_number(point.running_avg) << '\n';
}

std::vector<CurvePoint> read_curve_tsv(std::istream& in) {
    std::vector<CurvePoint> curve;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        CurvePoint point;
        if (!(row >> point.epoch >> point.welfare >> point.running_avg))
            throw std::runtime_error("malformed curve row: " + line);
        curve.push_back(point);
    }
    return curve;
}

}  // namespace fxm
