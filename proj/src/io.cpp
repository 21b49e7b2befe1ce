#include "tara/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tara/error.hpp"

namespace tara {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

template <typename T>
T parse_number(const std::string& s, const fs::path& path, std::size_t lineno) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
    return v;
}

// Yields (line number, fields) for every non-empty data row after checking the header.
template <typename Fn>
void for_each_csv_row(const fs::path& path, const std::string& header, std::size_t columns, Fn&& fn) {
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw FormatError(path.string() + ": expected header '" + header + "'");
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv(line);
        if (fields.size() != columns)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                              " fields");
        fn(lineno, fields);
    }
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    auto in = open_in(path);
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            ManifestEntry e;
            e.frame_id = j.at("frame_id").get<std::string>();
            e.station_id = j.at("station_id").get<std::string>();
            e.timestamp = j.at("timestamp").get<double>();
            e.cloud_path = j.at("cloud_path").get<std::string>();
            out.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    auto out = open_out(path);
    for (const auto& e : entries) {
        json j;
        j["frame_id"] = e.frame_id;
        j["station_id"] = e.station_id;
        j["timestamp"] = e.timestamp;
        j["cloud_path"] = e.cloud_path;
        out << j.dump() << '\n';
    }
}

std::vector<RfidRecord> read_rfid_csv(const fs::path& path) {
    std::vector<RfidRecord> out;
    for_each_csv_row(path, "animal_id,station_id,start_ts,end_ts", 4, [&](std::size_t lineno, const auto& f) {
        RfidRecord r;
        r.animal_id = parse_number<int>(f[0], path, lineno);
        r.station_id = f[1];
        r.start_ts = parse_number<double>(f[2], path, lineno);
        r.end_ts = parse_number<double>(f[3], path, lineno);
        if (!(r.start_ts < r.end_ts))
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": start_ts must precede end_ts");
        out.push_back(std::move(r));
    });
    return out;
}

void write_rfid_csv(const fs::path& path, const std::vector<RfidRecord>& records) {
    auto out = open_out(path);
    out << "animal_id,station_id,start_ts,end_ts\n";
    for (const auto& r : records)
        out << r.animal_id << ',' << r.station_id << ',' << format_double(r.start_ts) << ','
            << format_double(r.end_ts) << '\n';
}

std::vector<GroundTruthRow> read_ground_truth_csv(const fs::path& path) {
    std::vector<GroundTruthRow> out;
    for_each_csv_row(path, "visit_id,true_id,contaminated,switch_frame", 4, [&](std::size_t lineno, const auto& f) {
        GroundTruthRow r;
        r.visit_id = f[0];
        r.true_id = parse_number<int>(f[1], path, lineno);
        r.contaminated = parse_number<int>(f[2], path, lineno) != 0;
        r.switch_frame = f[3].empty() ? -1 : parse_number<int>(f[3], path, lineno);
        out.push_back(std::move(r));
    });
    return out;
}

void write_ground_truth_csv(const fs::path& path, const std::vector<GroundTruthRow>& rows) {
    auto out = open_out(path);
    out << "visit_id,true_id,contaminated,switch_frame\n";
    for (const auto& r : rows) {
        out << r.visit_id << ',' << r.true_id << ',' << (r.contaminated ? 1 : 0) << ',';
        if (r.switch_frame >= 0) out << r.switch_frame;
        out << '\n';
    }
}

std::vector<DroppedFrame> read_drop_log(const fs::path& path) {
    std::vector<DroppedFrame> out;
    for_each_csv_row(path, "frame_id,station_id,timestamp,stage,cause", 5, [&](std::size_t lineno, const auto& f) {
        DroppedFrame d;
        d.frame_id = f[0];
        d.station_id = f[1];
        d.timestamp = parse_number<double>(f[2], path, lineno);
        d.stage = preprocess_stage_from_string(f[3]);
        d.cause = f[4];
        out.push_back(std::move(d));
    });
    return out;
}

void write_drop_log(const fs::path& path, const std::vector<DroppedFrame>& rows) {
    auto out = open_out(path);
    out << "frame_id,station_id,timestamp,stage,cause\n";
    for (const auto& d : rows) {
        std::string cause = d.cause;
        for (char& ch : cause) {
            if (ch == ',') ch = ';';
            if (ch == '\n' || ch == '\r') ch = ' ';
        }
        out << d.frame_id << ',' << d.station_id << ',' << format_double(d.timestamp) << ',' << to_string(d.stage) << ','
            << cause << '\n';
    }
}

json to_json(const ConsensusResult& r) {
    json j;
    j["visit_id"] = r.visit_id;
    j["valid_count"] = r.valid_count;
    json counts = json::object();
    for (const auto& [c, n] : r.counts) counts[std::to_string(c)] = n;
    j["counts"] = counts;
    j["majority"] = r.majority ? json(*r.majority) : json(nullptr);
    j["strength"] = r.strength;
    j["assigned"] = r.assigned ? json(*r.assigned) : json(nullptr);
    j["abstain_reason"] = std::string(to_string(r.abstain_reason));
    json valid = json::array();
    for (const auto& f : r.valid) valid.push_back({f.frame_index, f.label});
    j["valid_frames"] = valid;
    return j;
}

ConsensusResult consensus_from_json(const json& j) {
    ConsensusResult r;
    r.visit_id = j.at("visit_id").get<std::string>();
    r.valid_count = j.at("valid_count").get<int>();
    for (const auto& [k, v] : j.at("counts").items()) r.counts[std::stoi(k)] = v.get<int>();
    if (!j.at("majority").is_null()) r.majority = j.at("majority").get<int>();
    r.strength = j.at("strength").get<double>();
    if (!j.at("assigned").is_null()) r.assigned = j.at("assigned").get<int>();
    r.abstain_reason = abstain_reason_from_string(j.at("abstain_reason").get<std::string>());
    for (const auto& f : j.at("valid_frames")) r.valid.push_back({f.at(0).get<std::size_t>(), f.at(1).get<int>()});
    return r;
}

void write_consensus_report(const fs::path& path, const std::vector<ConsensusResult>& results) {
    auto out = open_out(path);
    for (const auto& r : results) out << to_json(r).dump() << '\n';
}

std::vector<ConsensusResult> read_consensus_report(const fs::path& path) {
    auto in = open_in(path);
    std::vector<ConsensusResult> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(consensus_from_json(json::parse(line)));
        } catch (const json::exception& ex) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

json to_json(const MetricsReport& m) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["frame_accuracy"] = opt(m.frame_accuracy);
    j["visit_accuracy"] = opt(m.visit_accuracy);
    j["conversion"] = opt(m.conversion);
    j["confident_frames"] = m.confident_frames;
    j["correct_frames"] = m.correct_frames;
    j["assigned_labeled_visits"] = m.assigned_labeled_visits;
    j["correct_visits"] = m.correct_visits;
    j["assigned_visits"] = m.assigned_visits;
    j["total_visits"] = m.total_visits;
    return j;
}

std::vector<Frame> load_frames(const fs::path& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();
    std::vector<Frame> frames;
    frames.reserve(entries.size());
    for (const auto& e : entries) {
        const fs::path p = fs::path(e.cloud_path).is_absolute() ? fs::path(e.cloud_path) : base / e.cloud_path;
        frames.push_back({e.frame_id, e.timestamp, e.station_id, read_cloud(p)});
    }
    return frames;
}

}  // namespace tara
