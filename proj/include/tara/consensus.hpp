#pragma once

// Visit-level temporal consensus: confidence filtering, vote counting,
// consensus strength and the gated identity assignment.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tara {

struct ModelParams;
struct Visit;

struct ConsensusConfig {
    double tau = 0.99;  ///< per-frame confidence threshold, max_c p(c) >= tau
    int min_frames = 10;  ///< K: minimum number of confident frames
    double gamma = 0.50;  ///< minimum consensus strength

    void validate() const;
};

enum class AbstainReason { none, too_few_frames, tie, low_consensus };

std::string_view to_string(AbstainReason reason);
AbstainReason abstain_reason_from_string(std::string_view s);

struct ConfidentFrame {
    std::size_t frame_index = 0;
    int label = 0;

    friend bool operator==(const ConfidentFrame&, const ConfidentFrame&) = default;
};

struct ConsensusResult {
    std::string visit_id;
    /// The confident frames (J_v) with their predicted classes.
    std::vector<ConfidentFrame> valid;
    int valid_count = 0;  ///< M_v
    std::map<int, int> counts;  ///< n_v(c), only classes that received votes
    std::optional<int> majority;  ///< c_v*, lowest index among tied maxima
    double strength = 0.0;  ///< rho_v, 0 when M_v = 0
    std::optional<int> assigned;  ///< Y_v, empty when abstaining
    AbstainReason abstain_reason = AbstainReason::too_few_frames;

    friend bool operator==(const ConsensusResult&, const ConsensusResult&) = default;
};

/// argmax with ties broken toward the lowest class index.
int argmax(std::span<const double> probs);

std::vector<ConfidentFrame> filter_confident(std::span<const std::vector<double>> preds, double tau);

/// Counts votes over the predicted classes of the confident frames.
/// Abstain reasons are checked in priority order too_few_frames, tie, low_consensus.
ConsensusResult visit_consensus(std::span<const int> valid_preds, const ConsensusConfig& cfg);

/// filter_confident + visit_consensus, keeping the frame indices.
ConsensusResult consensus_from_probs(std::string visit_id, std::span<const std::vector<double>> preds,
                                     const ConsensusConfig& cfg);

/// forward on every frame of the visit, then consensus_from_probs.
ConsensusResult classify_visit(const Visit& visit, const ModelParams& params, const ConsensusConfig& cfg);

}  // namespace tara
