#pragma once

// Run configuration shared by every CLI command.
//
// File format: one `key = value` per line, `#` starts a comment, blank lines
// are ignored. Keys are dotted (`train.epochs`); lists are comma-separated
// (`model.point_widths = 64, 128, 256`). Unknown keys and unparsable values are
// errors that name the key. Later assignments override earlier ones.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tara/classifier.hpp"
#include "tara/consensus.hpp"
#include "tara/pointcloud.hpp"
#include "tara/recalibration.hpp"
#include "tara/synthdata.hpp"

namespace tara {

struct RunConfig {
    /// Master seed. Scenario, preprocessing, training and fine-tuning seeds
    /// are derived from it.
    std::uint64_t seed = 2024;
    /// 0 = hardware concurrency. Results never depend on it.
    unsigned threads = 0;

    PreprocessConfig preprocess;
    ScenarioConfig scenario;
    ModelConfig model;  ///< num_classes 0 = taken from the data (largest RFID id + 1)
    TrainConfig train;
    TrainConfig fine_tune;
    ConsensusConfig consensus;
    HarvestMode harvest = HarvestMode::all_frames;
    double gap_threshold = kDefaultGapThreshold;

    int train_day = 1;
    /// Empty lists select the standard schedule: base model on days 2-3,
    /// rounds harvesting days 2..D-1.
    std::vector<int> base_eval_days;
    std::vector<int> round_source_days;
    int eval_window = 2;  ///< a round is evaluated on the next eval_window days

    int infer_day = 0;  ///< day scored by infer/evaluate; 0 = every day

    std::filesystem::path dataset;  ///< raw dataset directory (synth output)
    std::filesystem::path preprocessed;  ///< preprocess output directory
    std::filesystem::path checkpoint;
    std::filesystem::path consensus_report;

    RunConfig();

    /// Applies one assignment; throws InfeasibleConfig naming the key.
    void set(std::string_view key, std::string_view value);
    /// Nested validation plus cross-field checks.
    void validate() const;

    std::uint64_t preprocess_seed() const;
    std::uint64_t scenario_seed() const { return seed; }
    ScenarioConfig resolved_scenario() const;
    ModelConfig resolved_model(int num_classes_from_data) const;
    TrainConfig resolved_train() const;
    TrainConfig resolved_fine_tune() const;
    ExperimentConfig experiment_config(int num_classes_from_data) const;
    RecalibrationSchedule schedule(int num_days) const;

    /// Every key with its current value, in file syntax.
    std::string dump() const;
    static std::vector<std::string> keys();
};

RunConfig parse_run_config(std::string_view text, std::string_view origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace tara
