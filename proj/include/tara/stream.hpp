#pragma once

// Frame streams, visit segmentation and RFID ground-truth alignment.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tara/pointcloud.hpp"

namespace tara {

struct Frame {
    std::string frame_id;
    double timestamp = 0.0;  // seconds
    std::string station_id;
    PointCloud cloud;  // preprocessed
};

struct Visit {
    std::string visit_id;
    std::string station_id;
    std::vector<Frame> frames;
    double start_ts = 0.0;
    double end_ts = 0.0;
    std::optional<int> true_label;
    /// Set by align_ground_truth when no single RFID record contains the visit.
    bool discarded_for_training = false;
};

struct RfidRecord {
    int animal_id = 0;
    std::string station_id;
    double start_ts = 0.0;
    double end_ts = 0.0;
};

inline constexpr double kDefaultGapThreshold = 5.0;

/// Splits each station's stream wherever the inter-frame gap is >= gap_threshold.
/// Visits come out grouped by station (stations in lexicographic order), in
/// stream order within a station. visit_id = "<station>/<first frame_id>".
/// Throws UnsortedStream if a station's timestamps decrease.
std::vector<Visit> segment_visits(std::span<const Frame> frames, double gap_threshold = kDefaultGapThreshold);

/// Labels a visit only when exactly one RFID record at its station overlaps it,
/// that record contains it (closed intervals), and the record does not overlap
/// another record at the same station. Everything else is returned unlabeled
/// and flagged discarded_for_training.
std::vector<Visit> align_ground_truth(std::vector<Visit> visits, std::span<const RfidRecord> rfid);

/// Copies with true_label cleared; used wherever ground truth must not leak.
std::vector<Visit> strip_labels(std::span<const Visit> visits);

}  // namespace tara
