#include "doctest.h"

#include <algorithm>
#include <map>

#include "oracles.hpp"
#include "tara/pipeline.hpp"
#include "tara/stream.hpp"

using namespace tara;

namespace {

std::vector<Frame> frames_at(std::vector<double> ts, const std::string& station = "s") {
    std::vector<Frame> out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        Frame f;
        f.frame_id = station + std::to_string(i);
        f.timestamp = ts[i];
        f.station_id = station;
        out.push_back(f);
    }
    return out;
}

std::vector<std::vector<double>> shape(const std::vector<Visit>& visits) {
    std::vector<std::vector<double>> s;
    for (const auto& v : visits) {
        s.emplace_back();
        for (const auto& f : v.frames) s.back().push_back(f.timestamp);
    }
    return s;
}

Visit visit_between(double a, double b, const std::string& station = "s") {
    Visit v;
    v.visit_id = "v";
    v.station_id = station;
    v.start_ts = a;
    v.end_ts = b;
    return v;
}

}  // namespace

TEST_CASE("segment_visits examples") {
    CHECK(shape(segment_visits(frames_at({0, 2, 4, 20, 22}))) ==
          std::vector<std::vector<double>>{{0, 2, 4}, {20, 22}});
    CHECK(segment_visits(frames_at({7})).size() == 1);
    CHECK(segment_visits(frames_at({0, 5.0})).size() == 2);
    CHECK(segment_visits(frames_at({0, 4.999})).size() == 1);
    CHECK(segment_visits(std::vector<Frame>{}).empty());
}

TEST_CASE("segment_visits ids and bounds") {
    auto frames = frames_at({10, 12, 30});
    const auto b = frames_at({11}, "a");
    frames.insert(frames.begin() + 1, b.begin(), b.end());
    const auto visits = segment_visits(frames);
    REQUIRE(visits.size() == 3);
    CHECK(visits[0].visit_id == "a/a0");
    CHECK(visits[1].visit_id == "s/s0");
    CHECK(visits[1].start_ts == 10);
    CHECK(visits[1].end_ts == 12);
    CHECK(visits[2].visit_id == "s/s2");
}

TEST_CASE("segment_visits rejects time going backwards within a station") {
    CHECK_THROWS_AS(segment_visits(frames_at({0, 3, 2})), UnsortedStream);
    // Other stations may interleave freely.
    auto f = frames_at({0, 10});
    auto g = frames_at({5}, "t");
    f.push_back(g[0]);
    CHECK_NOTHROW(segment_visits(f));
}

TEST_CASE("align_ground_truth examples") {
    const std::vector<RfidRecord> one{{7, "s", 5, 40}};
    auto out = align_ground_truth({visit_between(10, 30)}, one);
    CHECK(out[0].true_label == 7);
    CHECK_FALSE(out[0].discarded_for_training);

    const std::vector<RfidRecord> split{{7, "s", 5, 20}, {8, "s", 20, 40}};
    out = align_ground_truth({visit_between(10, 30)}, split);
    CHECK_FALSE(out[0].true_label.has_value());
    CHECK(out[0].discarded_for_training);

    out = align_ground_truth({visit_between(100, 130)}, one);
    CHECK_FALSE(out[0].true_label.has_value());
    CHECK(out[0].discarded_for_training);
}

TEST_CASE("align_ground_truth boundary conventions") {
    // Touching endpoints count as contained.
    CHECK(align_ground_truth({visit_between(5, 40)}, std::vector<RfidRecord>{{7, "s", 5, 40}})[0].true_label == 7);
    // A record at another station never labels.
    CHECK_FALSE(align_ground_truth({visit_between(10, 30)}, std::vector<RfidRecord>{{7, "t", 0, 50}})[0].true_label);
    // Overlapping records poison every visit that overlaps either of them.
    const std::vector<RfidRecord> clash{{7, "s", 0, 50}, {8, "s", 45, 90}};
    CHECK_FALSE(align_ground_truth({visit_between(10, 30)}, clash)[0].true_label);
    CHECK_FALSE(align_ground_truth({visit_between(60, 80)}, clash)[0].true_label);
    // Records that merely touch do not conflict; a visit touching both is ambiguous.
    const std::vector<RfidRecord> touch{{7, "s", 0, 50}, {8, "s", 50, 90}};
    CHECK(align_ground_truth({visit_between(10, 30)}, touch)[0].true_label == 7);
    CHECK(align_ground_truth({visit_between(60, 80)}, touch)[0].true_label == 8);
    CHECK_FALSE(align_ground_truth({visit_between(40, 50)}, touch)[0].true_label);
    // Partial overlap with a single record is not containment.
    CHECK_FALSE(align_ground_truth({visit_between(10, 30)}, std::vector<RfidRecord>{{7, "s", 15, 50}})[0].true_label);
}

TEST_CASE("stream properties on random timelines") {
    Rng rng(101);
    for (int trial = 0; trial < 300; ++trial) {
        const auto t = oracle::random_timeline(rng);
        const auto visits = segment_visits(t.frames);

        // Partition: each station's visits concatenate back to its stream.
        std::map<std::string, std::vector<std::string>> stream, rebuilt;
        for (const auto& f : t.frames) stream[f.station_id].push_back(f.frame_id);
        for (const auto& v : visits) {
            REQUIRE_FALSE(v.frames.empty());
            CHECK(v.start_ts == v.frames.front().timestamp);
            CHECK(v.end_ts == v.frames.back().timestamp);
            for (std::size_t i = 0; i < v.frames.size(); ++i) {
                CHECK(v.frames[i].station_id == v.station_id);
                if (i) CHECK(v.frames[i].timestamp - v.frames[i - 1].timestamp < kDefaultGapThreshold);
                rebuilt[v.station_id].push_back(v.frames[i].frame_id);
            }
        }
        CHECK(rebuilt == stream);
        // Consecutive visits at a station are separated by at least the threshold.
        for (std::size_t i = 1; i < visits.size(); ++i)
            if (visits[i].station_id == visits[i - 1].station_id)
                CHECK(visits[i].start_ts - visits[i - 1].end_ts >= kDefaultGapThreshold);

        // Shift invariance.
        auto shifted = t.frames;
        for (auto& f : shifted) f.timestamp += 1000.0;
        const auto sv = segment_visits(shifted);
        REQUIRE(sv.size() == visits.size());
        for (std::size_t i = 0; i < sv.size(); ++i) CHECK(sv[i].frames.size() == visits[i].frames.size());

        // Alignment matches the rule, and labels are conservative.
        const auto aligned = align_ground_truth(visits, t.rfid);
        for (const auto& v : aligned) {
            const auto expected = oracle::brute_label(v, t.rfid);
            CHECK(v.true_label == expected);
            CHECK(v.discarded_for_training == !expected.has_value());
        }
    }
}

TEST_CASE("strip_labels clears every label") {
    auto v = visit_between(0, 1);
    v.true_label = 3;
    const std::vector<Visit> in{v, v};
    for (const auto& s : strip_labels(in)) CHECK_FALSE(s.true_label);
}

TEST_CASE("segment_captures keeps dropped frames on the timeline") {
    // Captures every 2 s; frames 3..5 were dropped. Without them the gap
    // 4 -> 12 would split the visit.
    const auto all = frames_at({0, 2, 4, 6, 8, 10, 12, 14, 40});
    std::vector<Frame> kept;
    std::vector<DroppedFrame> dropped;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (i >= 3 && i <= 5)
            dropped.push_back({all[i].frame_id, all[i].station_id, all[i].timestamp, PreprocessStage::roi, "clipped"});
        else
            kept.push_back(all[i]);
    }
    CHECK(segment_visits(kept).size() == 3);
    const auto visits = segment_captures(kept, dropped, kDefaultGapThreshold);
    REQUIRE(visits.size() == 2);
    CHECK(visits[0].frames.size() == 5);
    CHECK(visits[0].start_ts == 0);
    CHECK(visits[0].end_ts == 14);
    CHECK(visits[1].visit_id == "s/s8");

    // A visit made only of dropped frames vanishes; ids follow survivors.
    std::vector<DroppedFrame> head{{all[0].frame_id, "s", 0, PreprocessStage::roi, "x"}};
    std::vector<Frame> rest(all.begin() + 1, all.end());
    const auto v2 = segment_captures(rest, head, kDefaultGapThreshold);
    REQUIRE(v2.size() == 2);
    CHECK(v2[0].visit_id == "s/s1");
    CHECK(v2[0].start_ts == 2);

    std::vector<Frame> only_last(all.end() - 1, all.end());
    std::vector<DroppedFrame> lots;
    for (std::size_t i = 0; i + 1 < all.size(); ++i)
        lots.push_back({all[i].frame_id, "s", all[i].timestamp, PreprocessStage::roi, "x"});
    CHECK(segment_captures(only_last, lots, kDefaultGapThreshold).size() == 1);
}

TEST_CASE("segment_captures without drops equals segment_visits") {
    Rng rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        const auto t = oracle::random_timeline(rng);
        const auto a = segment_visits(t.frames);
        const auto b = segment_captures(t.frames, {}, kDefaultGapThreshold);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].visit_id == b[i].visit_id);
            CHECK(a[i].frames.size() == b[i].frames.size());
        }
    }
}
