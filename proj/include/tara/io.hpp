#pragma once

// File formats shared by the CLI stages: frame manifest (JSON lines), RFID
// log and ground-truth tables (CSV), consensus reports (JSON lines).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tara/consensus.hpp"
#include "tara/evaluation.hpp"
#include "tara/pipeline.hpp"
#include "tara/stream.hpp"

namespace tara {

struct ManifestEntry {
    std::string frame_id;
    std::string station_id;
    double timestamp = 0.0;
    std::string cloud_path;  ///< relative to the manifest's directory unless absolute
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

std::vector<RfidRecord> read_rfid_csv(const std::filesystem::path& path);
void write_rfid_csv(const std::filesystem::path& path, const std::vector<RfidRecord>& records);

struct GroundTruthRow {
    std::string visit_id;
    int true_id = 0;
    bool contaminated = false;
    int switch_frame = -1;
};

std::vector<GroundTruthRow> read_ground_truth_csv(const std::filesystem::path& path);
void write_ground_truth_csv(const std::filesystem::path& path, const std::vector<GroundTruthRow>& rows);

/// Columns frame_id,station_id,timestamp,stage,cause. Commas and line
/// breaks inside the cause are written as ';' and ' '.
std::vector<DroppedFrame> read_drop_log(const std::filesystem::path& path);
void write_drop_log(const std::filesystem::path& path, const std::vector<DroppedFrame>& rows);

nlohmann::json to_json(const ConsensusResult& r);
ConsensusResult consensus_from_json(const nlohmann::json& j);
void write_consensus_report(const std::filesystem::path& path, const std::vector<ConsensusResult>& results);
std::vector<ConsensusResult> read_consensus_report(const std::filesystem::path& path);

/// null for undefined metrics.
nlohmann::json to_json(const MetricsReport& m);

/// Loads every manifest frame's cloud (paths resolved against the manifest dir).
std::vector<Frame> load_frames(const std::filesystem::path& manifest_path);

/// Decimal rendering used in CSV outputs: shortest exact round-trip form.
std::string format_double(double v);

}  // namespace tara
