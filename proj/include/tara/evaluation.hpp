#pragma once

// Frame accuracy over confident frames, visit accuracy over assigned visits,
// and the visit conversion rate. Empty denominators yield std::nullopt.

#include <cstddef>
#include <optional>
#include <span>

#include "tara/consensus.hpp"

namespace tara {

struct MetricsReport {
    std::optional<double> frame_accuracy;  ///< eta_fr
    std::optional<double> visit_accuracy;  ///< eta_vis
    std::optional<double> conversion;
    std::size_t confident_frames = 0;  ///< M: confident frames in labeled visits
    std::size_t correct_frames = 0;
    std::size_t assigned_labeled_visits = 0;  ///< |V|
    std::size_t correct_visits = 0;
    std::size_t assigned_visits = 0;
    std::size_t total_visits = 0;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// `truth[i]` is the ground-truth identity of results[i]'s visit, if known.
// Unlabeled visits are skipped by both accuracies but still count toward
// conversion.

std::optional<double> frame_accuracy(std::span<const ConsensusResult> results,
                                     std::span<const std::optional<int>> truth);

std::optional<double> visit_accuracy(std::span<const ConsensusResult> results,
                                     std::span<const std::optional<int>> truth);

std::optional<double> conversion_rate(std::span<const ConsensusResult> results);

MetricsReport evaluate_metrics(std::span<const ConsensusResult> results, std::span<const std::optional<int>> truth);

}  // namespace tara
