#include "tara/stream.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tara {

std::vector<Visit> segment_visits(std::span<const Frame> frames, double gap_threshold) {
    std::map<std::string, std::vector<const Frame*>> by_station;
    for (const auto& f : frames) {
        if (!std::isfinite(f.timestamp)) throw UnsortedStream("frame " + f.frame_id + " has a non-finite timestamp");
        by_station[f.station_id].push_back(&f);
    }

    std::vector<Visit> visits;
    for (const auto& [station, stream] : by_station) {
        Visit current;
        for (const Frame* f : stream) {
            if (!current.frames.empty()) {
                const double gap = f->timestamp - current.end_ts;
                if (gap < 0.0)
                    throw UnsortedStream("station " + station + ": frame " + f->frame_id + " goes back in time");
                if (gap >= gap_threshold) {
                    visits.push_back(std::move(current));
                    current = Visit{};
                }
            }
            if (current.frames.empty()) {
                current.visit_id = station + "/" + f->frame_id;
                current.station_id = station;
                current.start_ts = f->timestamp;
            }
            current.end_ts = f->timestamp;
            current.frames.push_back(*f);
        }
        if (!current.frames.empty()) visits.push_back(std::move(current));
    }
    return visits;
}

namespace {

bool closed_overlap(double a0, double a1, double b0, double b1) { return a0 <= b1 && b0 <= a1; }

}  // namespace

std::vector<Visit> align_ground_truth(std::vector<Visit> visits, std::span<const RfidRecord> rfid) {
    std::map<std::string, std::vector<std::size_t>> by_station;
    for (std::size_t i = 0; i < rfid.size(); ++i) by_station[rfid[i].station_id].push_back(i);

    // Records that overlap another record at the same station are unusable.
    // Touching endpoints (one ends where the next begins) is not an overlap.
    std::vector<bool> conflicted(rfid.size(), false);
    for (auto& [station, idx] : by_station) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rfid[a].start_ts < rfid[b].start_ts; });
        double reach = -INFINITY;
        std::size_t reach_owner = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& r = rfid[idx[k]];
            if (k > 0 && r.start_ts < reach) {
                conflicted[idx[k]] = true;
                conflicted[reach_owner] = true;
            }
            if (r.end_ts > reach) {
                reach = r.end_ts;
                reach_owner = idx[k];
            }
        }
    }

    for (auto& v : visits) {
        v.true_label.reset();
        v.discarded_for_training = true;
        auto it = by_station.find(v.station_id);
        if (it == by_station.end()) continue;

        const RfidRecord* candidate = nullptr;
        std::size_t candidate_idx = 0;
        int overlapping = 0;
        for (std::size_t i : it->second) {
            const auto& r = rfid[i];
            if (closed_overlap(v.start_ts, v.end_ts, r.start_ts, r.end_ts)) {
                ++overlapping;
                candidate = &r;
                candidate_idx = i;
            }
        }
        if (overlapping != 1 || conflicted[candidate_idx]) continue;
        if (candidate->start_ts <= v.start_ts && v.end_ts <= candidate->end_ts) {
            v.true_label = candidate->animal_id;
            v.discarded_for_training = false;
        }
    }
    return visits;
}

std::vector<Visit> strip_labels(std::span<const Visit> visits) {
    std::vector<Visit> out(visits.begin(), visits.end());
    for (auto& v : out) v.true_label.reset();
    return out;
}

}  // namespace tara
