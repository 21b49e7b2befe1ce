#include "doctest.h"

#include <stdexcept>

#include "tara/recalibration.hpp"
#include "tara/synthdata.hpp"

using namespace tara;

namespace {

ConsensusResult assigned(const std::string& id, std::optional<int> label, double strength = 1.0,
                         std::vector<ConfidentFrame> valid = {}) {
    ConsensusResult r;
    r.visit_id = id;
    r.assigned = label;
    r.majority = label;
    r.strength = strength;
    r.valid = std::move(valid);
    r.valid_count = static_cast<int>(r.valid.size());
    r.abstain_reason = label ? AbstainReason::none : AbstainReason::low_consensus;
    return r;
}

Visit visit(const std::string& id, int frames) {
    Visit v;
    v.visit_id = id;
    v.station_id = "s";
    for (int i = 0; i < frames; ++i) {
        Frame f;
        f.frame_id = id + "-" + std::to_string(i);
        f.cloud.points.push_back({double(i), 0, 0});
        v.frames.push_back(f);
    }
    return v;
}

ModelConfig tiny_model(int classes, std::size_t points) {
    ModelConfig mc;
    mc.num_classes = classes;
    mc.num_points = points;
    mc.point_widths = {16, 32};
    mc.head_widths = {16};
    mc.input_transform = true;
    mc.transform_point_widths = {8, 16};
    mc.transform_head_widths = {8};
    return mc;
}

// Two easily told apart body shapes, four days of labeled visits.
std::vector<DayVisits> toy_days(double growth) {
    IndividualProfile slim, broad;
    slim.b = slim.a * 0.45;
    broad.id = 1;
    broad.b = broad.a * 0.85;
    slim.growth_rate = broad.growth_rate = growth;
    std::vector<DayVisits> days;
    std::uint64_t seed = 0;
    for (int d = 1; d <= 4; ++d) {
        DayVisits dv;
        dv.day = d;
        for (int k = 0; k < 2; ++k)
            for (int j = 0; j < 3; ++j) {
                Visit v;
                v.visit_id = "d" + std::to_string(d) + "-" + std::to_string(k) + "-" + std::to_string(j);
                v.station_id = "s";
                v.true_label = k;
                for (int f = 0; f < 12; ++f) {
                    Frame fr;
                    fr.frame_id = v.visit_id + "-" + std::to_string(f);
                    const auto raw = sample_surface(k ? broad : slim, d - 1, 128, ++seed, 0.002);
                    fr.cloud = resample_fixed(normalize_unit_sphere(raw), 64, seed);
                    v.frames.push_back(fr);
                }
                dv.visits.push_back(v);
            }
        days.push_back(dv);
    }
    return days;
}

ExperimentConfig toy_experiment() {
    ExperimentConfig cfg;
    cfg.model = tiny_model(2, 64);
    cfg.train.epochs = 20;
    cfg.train.batch_size = 8;
    cfg.train.learning_rate = 3e-3;
    cfg.fine_tune = cfg.train;
    cfg.fine_tune.epochs = 2;
    cfg.fine_tune.learning_rate = 1e-3;
    cfg.consensus.tau = 0.8;
    cfg.consensus.min_frames = 5;
    cfg.threads = 1;
    return cfg;
}

}  // namespace

TEST_CASE("harvest keeps exactly the assigned visits") {
    const std::vector<Visit> visits{visit("a", 3), visit("b", 2), visit("c", 4)};
    const std::vector<ConsensusResult> results{assigned("a", 2), assigned("b", std::nullopt), assigned("c", 0)};
    const auto pool = harvest_pseudo_labels(results, visits);
    REQUIRE(pool.size() == 2);
    CHECK(pool[0].visit_id == "a");
    CHECK(pool[0].pseudo_label == 2);
    CHECK(pool[0].frames.size() == 3);
    CHECK(pool[1].visit_id == "c");
    CHECK(pool[1].pseudo_label == 0);

    const auto examples = examples_from(pool);
    CHECK(examples.size() == 7);
    for (std::size_t i = 0; i < 3; ++i) CHECK(examples[i].label == 2);

    const std::vector<ConsensusResult> none{assigned("a", std::nullopt), assigned("b", std::nullopt),
                                            assigned("c", std::nullopt)};
    CHECK(harvest_pseudo_labels(none, visits).empty());
}

TEST_CASE("harvest labels every frame or only the confident ones") {
    const std::vector<Visit> visits{visit("a", 5)};
    const std::vector<ConsensusResult> results{assigned("a", 1, 0.58, {{0, 1}, {3, 1}, {4, 0}})};
    const auto all = harvest_pseudo_labels(results, visits, HarvestMode::all_frames);
    REQUIRE(all.size() == 1);
    CHECK(all[0].frames.size() == 5);
    CHECK(all[0].strength == 0.58);
    const auto some = harvest_pseudo_labels(results, visits, HarvestMode::confident_frames);
    REQUIRE(some[0].frames.size() == 3);
    CHECK(some[0].frames[1].frame_id == "a-3");
    for (const auto& e : examples_from(some)) CHECK(e.label == 1);
}

TEST_CASE("harvest refuses ground truth and mismatched inputs") {
    auto v = visit("a", 2);
    v.true_label = 1;
    std::vector<Visit> labeled{v};
    const std::vector<ConsensusResult> r{assigned("a", 1)};
    CHECK_THROWS_AS(harvest_pseudo_labels(r, labeled), std::invalid_argument);
    CHECK_NOTHROW(harvest_pseudo_labels(r, strip_labels(labeled)));
    const std::vector<Visit> other{visit("b", 2)};
    CHECK_THROWS_AS(harvest_pseudo_labels(r, other), std::invalid_argument);
}

TEST_CASE("run_recalibration_round") {
    const auto days = toy_days(0.0);
    const auto params = init_params(tiny_model(2, 64), 1e-3, 2);
    const auto unlabeled = strip_labels(days[1].visits);
    std::vector<ConsensusResult> results;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) results.push_back(assigned(unlabeled[i].visit_id, int(i % 2)));
    const auto pool = harvest_pseudo_labels(results, unlabeled);
    const auto replay = examples_from(days[0].visits);

    TrainConfig tc;
    tc.epochs = 1;
    tc.learning_rate = 0.0;
    const auto copy = params;
    CHECK(run_recalibration_round(params, pool, replay, tc) == params);
    tc.learning_rate = 1e-3;
    CHECK(run_recalibration_round(params, pool, replay, tc) != params);
    CHECK(params == copy);

    CHECK_THROWS_AS(run_recalibration_round(params, {}, replay, tc), EmptyPool);
    std::vector<PseudoLabeledVisit> hollow(1);
    CHECK_THROWS_AS(run_recalibration_round(params, hollow, replay, tc), EmptyPool);
}

TEST_CASE("standard schedule") {
    const auto s = RecalibrationSchedule::standard(4);
    CHECK(s.train_day == 1);
    CHECK(s.base_eval_days == std::vector<int>{2, 3});
    REQUIRE(s.rounds.size() == 2);
    CHECK(s.rounds[0].source_day == 2);
    CHECK(s.rounds[0].eval_days == std::vector<int>{3, 4});
    CHECK(s.rounds[1].source_day == 3);
    CHECK(s.rounds[1].eval_days == std::vector<int>{4});
    CHECK_NOTHROW(s.validate(4));
    CHECK_THROWS_AS(s.validate(3), InfeasibleConfig);

    RecalibrationSchedule bad = s;
    bad.rounds[0].eval_days = {2};
    CHECK_THROWS_AS(bad.validate(4), InfeasibleConfig);
    bad = s;
    bad.rounds[1].source_day = 2;
    CHECK_THROWS_AS(bad.validate(4), InfeasibleConfig);
}

TEST_CASE("run_experiment shape, isolation and determinism") {
    const auto days = toy_days(0.01);
    const auto schedule = RecalibrationSchedule::standard(4);
    const auto cfg = toy_experiment();
    const auto a = run_experiment(days, schedule, cfg);

    REQUIRE(a.report.rows.size() == 5);
    CHECK(a.report.rows[0].round == 0);
    CHECK(a.report.rows[0].test_day == 2);
    CHECK(a.report.rows[0].model_state == "Base Model (Day 1 Training)");
    CHECK(a.report.rows[2].model_state == "Re-calib. 1 (Pseudo Day 2)");
    CHECK(a.report.rows[4].model_state == "Re-calib. 2 (Pseudo Day 3)");
    CHECK(a.report.find(2, 4) == &a.report.rows[4]);
    CHECK(a.report.find(2, 3) == nullptr);
    CHECK(a.snapshots.size() == 3);
    REQUIRE(a.report.rounds.size() == 2);
    CHECK(a.report.rounds[1].pool_visits >= a.report.rounds[0].pool_visits);

    // Base rows equal a standalone evaluation of the base snapshot.
    for (int d : {2, 3}) {
        const auto& visits = days[static_cast<std::size_t>(d - 1)].visits;
        const auto m = score_day(visits, classify_visits(visits, a.snapshots[0], cfg.consensus));
        CHECK(a.report.find(0, d)->metrics == m);
    }

    const auto b = run_experiment(days, schedule, cfg);
    CHECK(to_csv(a.report) == to_csv(b.report));
    auto ja = to_json(a.report), jb = to_json(b.report);
    ja.erase("wall_clock");
    jb.erase("wall_clock");
    CHECK(ja.dump() == jb.dump());
    CHECK(a.snapshots == b.snapshots);

    const std::string csv = to_csv(a.report);
    CHECK(csv.starts_with("Model State,Test Set,Frame %,Visit %,Conv. %\n"));
}

TEST_CASE("run_experiment rejects malformed datasets") {
    auto days = toy_days(0.0);
    const auto cfg = toy_experiment();
    auto dup = days;
    dup[2].visits.push_back(dup[1].visits[0]);
    CHECK_THROWS_AS(run_experiment(dup, RecalibrationSchedule::standard(4), cfg), InfeasibleConfig);
    auto shuffled = days;
    std::swap(shuffled[0], shuffled[1]);
    CHECK_THROWS_AS(run_experiment(shuffled, RecalibrationSchedule::standard(4), cfg), InfeasibleConfig);
}
