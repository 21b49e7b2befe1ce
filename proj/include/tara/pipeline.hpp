#pragma once

// Glue between raw frame streams and the per-day visit dataset used by
// training, inference and the re-calibration experiment.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tara/pointcloud.hpp"
#include "tara/recalibration.hpp"
#include "tara/stream.hpp"
#include "tara/synthdata.hpp"

namespace tara {

struct DroppedFrame {
    std::string frame_id;
    std::string station_id;
    double timestamp = 0.0;
    PreprocessStage stage = PreprocessStage::voxel;
    std::string cause;
};

struct PreprocessOutcome {
    std::vector<Frame> frames;  ///< survivors, input order preserved
    std::vector<DroppedFrame> dropped;
};

/// Per-frame resampling seed: a function of the run seed and the frame id only.
std::uint64_t frame_seed(std::uint64_t run_seed, const std::string& frame_id);

/// preprocess_frame on every frame; failures become drop-log entries.
PreprocessOutcome preprocess_frames(std::vector<Frame> raw, const PreprocessConfig& cfg, std::uint64_t run_seed,
                                    unsigned threads = 0);

/// Renders and preprocesses every scenario frame without touching disk.
PreprocessOutcome preprocess_scenario(const Scenario& scenario, const PreprocessConfig& cfg, std::uint64_t run_seed,
                                      unsigned threads = 0);

/// Segments the full capture timeline (survivors plus dropped frames), then
/// removes the dropped frames. A failed frame is still a capture event, so it
/// never opens a gap that splits a visit. Visits left without frames vanish;
/// ids and time bounds refer to the surviving frames.
std::vector<Visit> segment_captures(std::span<const Frame> frames, std::span<const DroppedFrame> dropped,
                                    double gap_threshold);

/// Segments visits, aligns them with the RFID log and partitions them by
/// the 1-based day of their first frame, counted from `origin`.
std::vector<DayVisits> assemble_days(std::span<const Frame> frames, std::span<const DroppedFrame> dropped,
                                     std::span<const RfidRecord> rfid, double gap_threshold, double origin);

/// Midnight (UTC) of the earliest timestamp.
double day_origin(std::span<const Frame> frames);

}  // namespace tara
