#pragma once

// Autonomous re-calibration: harvest consensus-assigned visits as
// pseudo-labels, fine-tune the classifier on them, and repeat day over day.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tara/classifier.hpp"
#include "tara/consensus.hpp"
#include "tara/evaluation.hpp"
#include "tara/stream.hpp"

namespace tara {

struct PseudoLabeledVisit {
    std::string visit_id;
    int pseudo_label = 0;
    double strength = 0.0;
    std::vector<Frame> frames;  ///< the frames that carry pseudo_label
};

enum class HarvestMode {
    all_frames,  ///< every frame of an assigned visit, confident or not
    confident_frames,  ///< only the frames that passed the tau filter
};

/// Keeps exactly the assigned visits. `visits` must be label-free (see
/// strip_labels); a labeled visit is rejected with std::invalid_argument so
/// ground truth cannot reach the training pool.
std::vector<PseudoLabeledVisit> harvest_pseudo_labels(std::span<const ConsensusResult> results,
                                                      std::span<const Visit> visits,
                                                      HarvestMode mode = HarvestMode::all_frames);

std::vector<Example> examples_from(std::span<const PseudoLabeledVisit> pool);
/// Every frame of every labeled visit, tagged with the visit's label.
std::vector<Example> examples_from(std::span<const Visit> visits);

/// fine_tune on the pool plus replay; `params` is left untouched.
/// Throws EmptyPool when the pool holds no frames.
ModelParams run_recalibration_round(const ModelParams& params, std::span<const PseudoLabeledVisit> pool,
                                    std::span<const Example> replay, const TrainConfig& cfg);

struct RecalibrationRound {
    int source_day = 0;  ///< 1-based day whose consensus identities become pseudo-labels
    std::vector<int> eval_days;
};

struct RecalibrationSchedule {
    int train_day = 1;
    std::vector<int> base_eval_days;
    std::vector<RecalibrationRound> rounds;

    /// Base model evaluated on days 2-3; round k harvests day k + 1 and is
    /// evaluated on days k + 2 and k + 3 (clipped to the available days).
    static RecalibrationSchedule standard(int num_days);
    void validate(int num_days) const;
};

struct DayVisits {
    int day = 0;  ///< 1-based
    std::vector<Visit> visits;
};

struct ExperimentConfig {
    ModelConfig model;
    TrainConfig train;
    TrainConfig fine_tune;
    ConsensusConfig consensus;
    HarvestMode harvest = HarvestMode::all_frames;
    unsigned threads = 0;
};

struct ExperimentRow {
    std::string model_state;  ///< e.g. "Base Model (Day 1 Training)"
    int round = 0;  ///< 0 = base model
    int test_day = 0;
    MetricsReport metrics;
};

struct RoundSummary {
    int round = 0;
    int source_day = 0;
    std::size_t harvested_visits = 0;
    std::size_t pool_visits = 0;  ///< accumulated over rounds
    std::size_t pool_frames = 0;
};

struct ExperimentReport {
    TrainReport base_training;
    std::vector<ExperimentRow> rows;
    std::vector<RoundSummary> rounds;
    double wall_clock_seconds = 0.0;  ///< the only non-deterministic field

    const ExperimentRow* find(int round, int test_day) const;
};

struct ExperimentResult {
    ExperimentReport report;
    std::vector<ModelParams> snapshots;  ///< [0] = base model, [k] = after round k
};

/// Classifies every visit of a day and scores it against the visits' labels.
std::vector<ConsensusResult> classify_visits(std::span<const Visit> visits, const ModelParams& params,
                                             const ConsensusConfig& cfg, unsigned threads = 0);
MetricsReport score_day(std::span<const Visit> visits, std::span<const ConsensusResult> results);

/// Trains on the labeled visits of schedule.train_day, then for the base model
/// and every round evaluates the current parameters on the round's
/// evaluation days. Each round harvests its source day with the current
/// model, adds the visits to an accumulating pool and fine-tunes from the
/// current parameters with Day-1 replay.
ExperimentResult run_experiment(std::span<const DayVisits> dataset, const RecalibrationSchedule& schedule,
                                const ExperimentConfig& cfg);

nlohmann::json to_json(const TrainReport& r);
nlohmann::json to_json(const ExperimentReport& r);
/// Columns: Model State, Test Set, Frame %, Visit %, Conv. %
std::string to_csv(const ExperimentReport& r);

}  // namespace tara
