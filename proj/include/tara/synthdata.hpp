#pragma once

// Seeded generator of multi-day, multi-individual depth-frame streams with
// morphological drift, sensor clipping and identity contamination.
//
// Every random draw is derived from the master seed along the path
// scenario -> individual -> day -> visit -> frame, so identical configs give
// identical bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tara/pointcloud.hpp"
#include "tara/stream.hpp"

namespace tara {

/// Dorsal surface model: upper half-ellipsoid with a low-frequency sinusoidal
/// height perturbation (the individual's geometric signature).
struct IndividualProfile {
    int id = 0;
    double a = 0.30, b = 0.18, c = 0.14;  ///< semi-axes (m): length, width, height
    double bump_amplitude = 0.0;  ///< m
    double bump_phase[3] = {0.0, 0.0, 0.0};
    double growth_rate = 0.0;  ///< delta: fractional axis growth per day
    double bump_growth = 0.0;  ///< m of bump amplitude gained per day

    void validate() const;
};

struct ScenarioConfig {
    int individuals = 9;
    int days = 4;
    int visits_per_individual_per_day = 4;
    int min_frames_per_visit = 18;
    int max_frames_per_visit = 40;
    int stations = 3;
    double frame_interval = 2.0;  ///< s between captured frames
    double min_visit_gap = 20.0;  ///< s of idle time between visits at a station
    double max_visit_gap = 240.0;
    int points_per_frame = 3000;
    double noise_sigma = 0.003;
    double drop_probability = 0.197;  ///< chance that a frame is depth-clipped
    double contamination_probability = 0.05;
    double contamination_min_fraction = 0.1;  ///< contaminated tail, fraction of visit frames
    double contamination_max_fraction = 0.4;
    double growth_rate = 0.02;  ///< mean delta
    double bump_growth = 0.0035;  ///< mean bump amplitude growth per day (m)
    /// Individual growth rates are the means times U(1 - spread, 1 + spread).
    double growth_spread = 0.5;
    double phase_jitter = 0.0;  ///< rad, sd of an individual's bump phases around the herd's
    double pose_jitter = 0.03;  ///< m of horizontal placement jitter
    double yaw_jitter = 0.08;  ///< rad
    std::uint64_t seed = 2024;

    /// Throws InfeasibleConfig naming the offending field.
    void validate() const;
};

struct FrameSpec {
    std::string frame_id;
    std::string station_id;
    double timestamp = 0.0;
    int day = 0;  ///< 0-based
    int individual = 0;  ///< who is actually under the sensor
    bool clipped = false;
    std::uint64_t seed = 0;
};

struct VisitTruth {
    std::string visit_id;
    int day = 0;
    std::string station_id;
    int true_id = 0;
    bool contaminated = false;
    int switch_frame = -1;  ///< first frame index showing the other individual
    int other_id = -1;
    std::vector<std::size_t> frames;  ///< indices into Scenario::frames, in order
};

struct ScenarioSummary {
    std::size_t frames = 0;
    std::size_t clipped_frames = 0;
    std::size_t visits = 0;
    std::size_t contaminated_visits = 0;
    double drop_fraction() const { return frames ? static_cast<double>(clipped_frames) / static_cast<double>(frames) : 0.0; }
};

struct Scenario {
    ScenarioConfig config;
    std::vector<IndividualProfile> profiles;
    std::vector<FrameSpec> frames;  ///< sorted by (timestamp, station)
    std::vector<RfidRecord> rfid;
    std::vector<VisitTruth> truth;

    ScenarioSummary summary() const;
};

/// Epoch second of midnight opening day 0.
inline constexpr double kScenarioEpoch = 1'700'006'400.0;
inline constexpr double kSecondsPerDay = 86'400.0;

std::vector<IndividualProfile> make_profiles(const ScenarioConfig& cfg);

/// Frame metadata, RFID log and ground truth. Clouds are rendered on demand.
Scenario generate_scenario(const ScenarioConfig& cfg);

/// Object-frame surface samples: x along the body, y across, z = height
/// above the rim plane. Axes are scaled by (1 + delta * day) and the bump
/// amplitude is bump_amplitude + bump_growth * day.
PointCloud sample_surface(const IndividualProfile& profile, int day, std::size_t n_points, std::uint64_t seed,
                          double noise_sigma = 0.0);

/// Sensor-frame raw cloud (z = depth from the camera), including stall clutter
/// and floor returns; clipped frames collapse nearer than the ROI.
/// Coordinates are quantised to 10 micrometres so files round-trip exactly.
PointCloud render_frame(const Scenario& scenario, const FrameSpec& frame);

/// Writes manifest.jsonl, clouds/<frame_id>.xyz, rfid.csv and ground_truth.csv.
void write_scenario(const Scenario& scenario, const std::filesystem::path& dir, unsigned threads = 0);

/// 1-based day number of a timestamp, relative to the scenario epoch.
int day_of(double timestamp, double origin = kScenarioEpoch);

}  // namespace tara
