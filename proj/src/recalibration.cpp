#include "tara/recalibration.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "tara/error.hpp"
#include "tara/io.hpp"
#include "tara/parallel.hpp"
#include "tara/rng.hpp"

namespace tara {

using nlohmann::json;

std::vector<PseudoLabeledVisit> harvest_pseudo_labels(std::span<const ConsensusResult> results,
                                                      std::span<const Visit> visits, HarvestMode mode) {
    if (results.size() != visits.size()) throw std::invalid_argument("results and visits differ in length");
    std::vector<PseudoLabeledVisit> pool;
    for (std::size_t i = 0; i < visits.size(); ++i) {
        const Visit& v = visits[i];
        const ConsensusResult& r = results[i];
        if (v.true_label) throw std::invalid_argument("harvest received a labeled visit: " + v.visit_id);
        if (r.visit_id != v.visit_id) throw std::invalid_argument("result " + r.visit_id + " does not match visit " + v.visit_id);
        if (!r.assigned) continue;

        PseudoLabeledVisit p;
        p.visit_id = v.visit_id;
        p.pseudo_label = *r.assigned;
        p.strength = r.strength;
        if (mode == HarvestMode::all_frames) {
            p.frames = v.frames;
        } else {
            for (const auto& f : r.valid) p.frames.push_back(v.frames.at(f.frame_index));
        }
        pool.push_back(std::move(p));
    }
    return pool;
}

std::vector<Example> examples_from(std::span<const PseudoLabeledVisit> pool) {
    std::vector<Example> out;
    for (const auto& p : pool)
        for (const auto& f : p.frames) out.push_back({&f.cloud, p.pseudo_label});
    return out;
}

std::vector<Example> examples_from(std::span<const Visit> visits) {
    std::vector<Example> out;
    for (const auto& v : visits) {
        if (!v.true_label) continue;
        for (const auto& f : v.frames) out.push_back({&f.cloud, *v.true_label});
    }
    return out;
}

ModelParams run_recalibration_round(const ModelParams& params, std::span<const PseudoLabeledVisit> pool,
                                    std::span<const Example> replay, const TrainConfig& cfg) {
    const auto examples = examples_from(pool);
    if (examples.empty()) throw EmptyPool();
    return fine_tune(params, examples, replay, cfg);
}

RecalibrationSchedule RecalibrationSchedule::standard(int num_days) {
    RecalibrationSchedule s;
    for (int d = 2; d <= std::min(3, num_days); ++d) s.base_eval_days.push_back(d);
    for (int k = 1; k + 1 < num_days; ++k) {
        RecalibrationRound r;
        r.source_day = k + 1;
        for (int d = k + 2; d <= std::min(k + 3, num_days); ++d) r.eval_days.push_back(d);
        s.rounds.push_back(r);
    }
    return s;
}

void RecalibrationSchedule::validate(int num_days) const {
    auto in_range = [&](int d) { return d >= 1 && d <= num_days; };
    if (!in_range(train_day)) throw InfeasibleConfig("schedule.train_day outside the dataset");
    for (int d : base_eval_days)
        if (!in_range(d)) throw InfeasibleConfig("schedule.base_eval_days lists a missing day");
    int previous_source = train_day;
    for (const auto& r : rounds) {
        if (!in_range(r.source_day)) throw InfeasibleConfig("schedule round source day outside the dataset");
        if (r.source_day <= previous_source)
            throw InfeasibleConfig("schedule round source days must increase and follow the training day");
        previous_source = r.source_day;
        for (int d : r.eval_days)
            if (!in_range(d) || d <= r.source_day)
                throw InfeasibleConfig("schedule evaluation days must exist and follow their source day");
    }
}

const ExperimentRow* ExperimentReport::find(int round, int test_day) const {
    for (const auto& r : rows)
        if (r.round == round && r.test_day == test_day) return &r;
    return nullptr;
}

std::vector<ConsensusResult> classify_visits(std::span<const Visit> visits, const ModelParams& params,
                                             const ConsensusConfig& cfg, unsigned threads) {
    std::vector<ConsensusResult> results(visits.size());
    parallel_for(visits.size(), threads, [&](std::size_t i) { results[i] = classify_visit(visits[i], params, cfg); });
    return results;
}

MetricsReport score_day(std::span<const Visit> visits, std::span<const ConsensusResult> results) {
    std::vector<std::optional<int>> truth;
    truth.reserve(visits.size());
    for (const auto& v : visits) truth.push_back(v.true_label);
    return evaluate_metrics(results, truth);
}

ExperimentResult run_experiment(std::span<const DayVisits> dataset, const RecalibrationSchedule& schedule,
                                const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.consensus.validate();
    const int num_days = static_cast<int>(dataset.size());
    schedule.validate(num_days);
    std::set<std::string> ids;
    for (int d = 0; d < num_days; ++d) {
        if (dataset[static_cast<std::size_t>(d)].day != d + 1) throw InfeasibleConfig("dataset days must be 1..D in order");
        for (const auto& v : dataset[static_cast<std::size_t>(d)].visits)
            if (!ids.insert(v.visit_id).second) throw InfeasibleConfig("visit " + v.visit_id + " appears on two days");
    }
    auto day = [&](int d) -> std::span<const Visit> { return dataset[static_cast<std::size_t>(d - 1)].visits; };

    const auto replay = examples_from(day(schedule.train_day));
    TrainConfig train_cfg = cfg.train;
    train_cfg.threads = cfg.threads;
    TrainResult base = train(replay, cfg.model, train_cfg);

    ExperimentResult out;
    out.report.base_training = base.report;
    out.snapshots.push_back(base.params);

    auto evaluate_round = [&](int round, const std::string& state, const std::vector<int>& days) {
        for (int d : days) {
            const auto results = classify_visits(day(d), out.snapshots.back(), cfg.consensus, cfg.threads);
            out.report.rows.push_back({state, round, d, score_day(day(d), results)});
        }
    };
    evaluate_round(0, "Base Model (Day " + std::to_string(schedule.train_day) + " Training)", schedule.base_eval_days);

    TrainConfig tune_cfg = cfg.fine_tune;
    tune_cfg.threads = cfg.threads;
    std::vector<PseudoLabeledVisit> pool;
    for (std::size_t k = 0; k < schedule.rounds.size(); ++k) {
        const auto& round = schedule.rounds[k];
        const int index = static_cast<int>(k + 1);
        const auto unlabeled = strip_labels(day(round.source_day));
        const auto results = classify_visits(unlabeled, out.snapshots.back(), cfg.consensus, cfg.threads);
        auto harvested = harvest_pseudo_labels(results, unlabeled, cfg.harvest);

        RoundSummary summary;
        summary.round = index;
        summary.source_day = round.source_day;
        summary.harvested_visits = harvested.size();
        for (auto& p : harvested) pool.push_back(std::move(p));
        summary.pool_visits = pool.size();
        for (const auto& p : pool) summary.pool_frames += p.frames.size();
        out.report.rounds.push_back(summary);

        // Distinct seed stream per round.
        TrainConfig round_cfg = tune_cfg;
        round_cfg.seed = derive_seed(tune_cfg.seed, {static_cast<std::uint64_t>(index)});
        out.snapshots.push_back(run_recalibration_round(out.snapshots.back(), pool, replay, round_cfg));
        evaluate_round(index, "Re-calib. " + std::to_string(index) + " (Pseudo Day " + std::to_string(round.source_day) + ")",
                       round.eval_days);
    }

    out.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

json to_json(const TrainReport& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"val_loss", e.val_loss},
                          {"val_accuracy", e.val_accuracy}});
    return {{"epochs", epochs},
            {"best_epoch", r.best_epoch},
            {"best_val_accuracy", r.best_val_accuracy},
            {"train_examples", r.train_examples},
            {"val_examples", r.val_examples}};
}

json to_json(const ExperimentReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"model_state", row.model_state},
                        {"round", row.round},
                        {"test_day", row.test_day},
                        {"metrics", to_json(row.metrics)}});
    json rounds = json::array();
    for (const auto& s : r.rounds)
        rounds.push_back({{"round", s.round},
                          {"source_day", s.source_day},
                          {"harvested_visits", s.harvested_visits},
                          {"pool_visits", s.pool_visits},
                          {"pool_frames", s.pool_frames}});
    return {{"base_training", to_json(r.base_training)},
            {"rows", rows},
            {"rounds", rounds},
            {"wall_clock", {{"elapsed_seconds", r.wall_clock_seconds}}}};
}

std::string to_csv(const ExperimentReport& r) {
    auto pct = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
        return std::string(buf);
    };
    std::string s = "Model State,Test Set,Frame %,Visit %,Conv. %\n";
    for (const auto& row : r.rows)
        s += row.model_state + ",Day " + std::to_string(row.test_day) + "," + pct(row.metrics.frame_accuracy) + "," +
             pct(row.metrics.visit_accuracy) + "," + pct(row.metrics.conversion) + "\n";
    return s;
}

}  // namespace tara
