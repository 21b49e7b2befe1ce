#include "tara/evaluation.hpp"

#include <stdexcept>

namespace tara {

namespace {

void check_sizes(std::span<const ConsensusResult> results, std::span<const std::optional<int>> truth) {
    if (results.size() != truth.size()) throw std::invalid_argument("results and ground truth differ in length");
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport evaluate_metrics(std::span<const ConsensusResult> results, std::span<const std::optional<int>> truth) {
    check_sizes(results, truth);
    MetricsReport m;
    m.total_visits = results.size();
    for (std::size_t v = 0; v < results.size(); ++v) {
        const auto& r = results[v];
        if (r.assigned) ++m.assigned_visits;
        if (!truth[v]) continue;
        for (const auto& f : r.valid) {
            ++m.confident_frames;
            if (f.label == *truth[v]) ++m.correct_frames;
        }
        if (r.assigned) {
            ++m.assigned_labeled_visits;
            if (*r.assigned == *truth[v]) ++m.correct_visits;
        }
    }
    m.frame_accuracy = ratio(m.correct_frames, m.confident_frames);
    m.visit_accuracy = ratio(m.correct_visits, m.assigned_labeled_visits);
    m.conversion = ratio(m.assigned_visits, m.total_visits);
    return m;
}

std::optional<double> frame_accuracy(std::span<const ConsensusResult> results,
                                     std::span<const std::optional<int>> truth) {
    return evaluate_metrics(results, truth).frame_accuracy;
}

std::optional<double> visit_accuracy(std::span<const ConsensusResult> results,
                                     std::span<const std::optional<int>> truth) {
    return evaluate_metrics(results, truth).visit_accuracy;
}

std::optional<double> conversion_rate(std::span<const ConsensusResult> results) {
    std::size_t assigned = 0;
    for (const auto& r : results)
        if (r.assigned) ++assigned;
    return ratio(assigned, results.size());
}

}  // namespace tara
