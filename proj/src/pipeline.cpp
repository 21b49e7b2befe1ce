#include "tara/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "tara/parallel.hpp"
#include "tara/rng.hpp"

namespace tara {

std::uint64_t frame_seed(std::uint64_t run_seed, const std::string& frame_id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : frame_id) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(run_seed, {h});
}

PreprocessOutcome preprocess_frames(std::vector<Frame> raw, const PreprocessConfig& cfg, std::uint64_t run_seed,
                                    unsigned threads) {
    cfg.validate();
    std::vector<std::optional<DroppedFrame>> failures(raw.size());
    parallel_for(raw.size(), threads, [&](std::size_t i) {
        try {
            raw[i].cloud = preprocess_frame(raw[i].cloud, cfg, frame_seed(run_seed, raw[i].frame_id));
        } catch (const FramePreprocessFailed& e) {
            failures[i] = DroppedFrame{raw[i].frame_id, raw[i].station_id, raw[i].timestamp, e.stage(), e.cause()};
            raw[i].cloud = {};
        }
    });
    PreprocessOutcome out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (failures[i])
            out.dropped.push_back(std::move(*failures[i]));
        else
            out.frames.push_back(std::move(raw[i]));
    }
    return out;
}

PreprocessOutcome preprocess_scenario(const Scenario& scenario, const PreprocessConfig& cfg, std::uint64_t run_seed,
                                      unsigned threads) {
    cfg.validate();
    const auto& specs = scenario.frames;
    std::vector<Frame> frames(specs.size());
    std::vector<std::optional<DroppedFrame>> failures(specs.size());
    parallel_for(specs.size(), threads, [&](std::size_t i) {
        Frame& f = frames[i];
        f.frame_id = specs[i].frame_id;
        f.station_id = specs[i].station_id;
        f.timestamp = specs[i].timestamp;
        try {
            f.cloud = preprocess_frame(render_frame(scenario, specs[i]), cfg, frame_seed(run_seed, f.frame_id));
        } catch (const FramePreprocessFailed& e) {
            failures[i] = DroppedFrame{f.frame_id, f.station_id, f.timestamp, e.stage(), e.cause()};
        }
    });
    PreprocessOutcome out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (failures[i])
            out.dropped.push_back(std::move(*failures[i]));
        else
            out.frames.push_back(std::move(frames[i]));
    }
    return out;
}

double day_origin(std::span<const Frame> frames) {
    if (frames.empty()) return 0.0;
    double lo = frames[0].timestamp;
    for (const auto& f : frames) lo = std::min(lo, f.timestamp);
    return std::floor(lo / kSecondsPerDay) * kSecondsPerDay;
}

std::vector<Visit> segment_captures(std::span<const Frame> frames, std::span<const DroppedFrame> dropped,
                                    double gap_threshold) {
    if (dropped.empty()) return segment_visits(frames, gap_threshold);
    std::set<std::string> dropped_ids;
    std::vector<Frame> timeline(frames.begin(), frames.end());
    for (const auto& d : dropped) {
        timeline.push_back({d.frame_id, d.timestamp, d.station_id, {}});
        dropped_ids.insert(d.frame_id);
    }
    std::stable_sort(timeline.begin(), timeline.end(),
                     [](const Frame& a, const Frame& b) { return a.timestamp < b.timestamp; });

    std::vector<Visit> out;
    for (auto& v : segment_visits(timeline, gap_threshold)) {
        std::erase_if(v.frames, [&](const Frame& f) { return dropped_ids.contains(f.frame_id); });
        if (v.frames.empty()) continue;
        v.visit_id = v.station_id + "/" + v.frames.front().frame_id;
        v.start_ts = v.frames.front().timestamp;
        v.end_ts = v.frames.back().timestamp;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<DayVisits> assemble_days(std::span<const Frame> frames, std::span<const DroppedFrame> dropped,
                                     std::span<const RfidRecord> rfid, double gap_threshold, double origin) {
    auto visits = align_ground_truth(segment_captures(frames, dropped, gap_threshold), rfid);
    int last_day = 0;
    for (const auto& v : visits) last_day = std::max(last_day, day_of(v.start_ts, origin));
    std::vector<DayVisits> days(static_cast<std::size_t>(last_day));
    for (int d = 0; d < last_day; ++d) days[static_cast<std::size_t>(d)].day = d + 1;
    for (auto& v : visits) {
        const int d = day_of(v.start_ts, origin);
        if (d < 1) continue;
        days[static_cast<std::size_t>(d - 1)].visits.push_back(std::move(v));
    }
    return days;
}

}  // namespace tara
