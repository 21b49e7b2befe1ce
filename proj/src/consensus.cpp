#include "tara/consensus.hpp"

#include <algorithm>
#include <stdexcept>

#include "tara/classifier.hpp"
#include "tara/error.hpp"
#include "tara/stream.hpp"

namespace tara {

void ConsensusConfig::validate() const {
    if (!(tau > 0.0 && tau <= 1.0)) throw InfeasibleConfig("consensus.tau must be in (0, 1]");
    if (min_frames < 1) throw InfeasibleConfig("consensus.min_frames must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InfeasibleConfig("consensus.gamma must be in (0, 1]");
}

std::string_view to_string(AbstainReason reason) {
    switch (reason) {
        case AbstainReason::none: return "none";
        case AbstainReason::too_few_frames: return "too_few_frames";
        case AbstainReason::tie: return "tie";
        case AbstainReason::low_consensus: return "low_consensus";
    }
    return "none";
}

AbstainReason abstain_reason_from_string(std::string_view s) {
    for (auto r : {AbstainReason::none, AbstainReason::too_few_frames, AbstainReason::tie, AbstainReason::low_consensus})
        if (to_string(r) == s) return r;
    throw FormatError("unknown abstain reason '" + std::string(s) + "'");
}

int argmax(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("argmax of empty vector");
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<ConfidentFrame> filter_confident(std::span<const std::vector<double>> preds, double tau) {
    std::vector<ConfidentFrame> kept;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int c = argmax(preds[i]);
        if (preds[i][static_cast<std::size_t>(c)] >= tau) kept.push_back({i, c});
    }
    return kept;
}

ConsensusResult visit_consensus(std::span<const int> valid_preds, const ConsensusConfig& cfg) {
    ConsensusResult r;
    r.valid_count = static_cast<int>(valid_preds.size());
    for (int c : valid_preds) ++r.counts[c];

    int top = 0;
    int ties = 0;
    for (const auto& [c, n] : r.counts) {
        if (n > top) {
            top = n;
            r.majority = c;
            ties = 1;
        } else if (n == top) {
            ++ties;
        }
    }
    if (r.valid_count > 0) r.strength = static_cast<double>(top) / r.valid_count;

    if (r.valid_count < cfg.min_frames) {
        r.abstain_reason = AbstainReason::too_few_frames;
    } else if (ties > 1) {
        r.abstain_reason = AbstainReason::tie;
    } else if (r.strength < cfg.gamma) {
        r.abstain_reason = AbstainReason::low_consensus;
    } else {
        r.abstain_reason = AbstainReason::none;
        r.assigned = r.majority;
    }
    return r;
}

ConsensusResult consensus_from_probs(std::string visit_id, std::span<const std::vector<double>> preds,
                                     const ConsensusConfig& cfg) {
    auto valid = filter_confident(preds, cfg.tau);
    std::vector<int> labels;
    labels.reserve(valid.size());
    for (const auto& v : valid) labels.push_back(v.label);
    ConsensusResult r = visit_consensus(labels, cfg);
    r.visit_id = std::move(visit_id);
    r.valid = std::move(valid);
    return r;
}

ConsensusResult classify_visit(const Visit& visit, const ModelParams& params, const ConsensusConfig& cfg) {
    std::vector<std::vector<double>> probs;
    probs.reserve(visit.frames.size());
    for (const auto& f : visit.frames) probs.push_back(forward(params, f.cloud));
    return consensus_from_probs(visit.visit_id, probs, cfg);
}

}  // namespace tara
