#pragma once

// Central finite-difference check of the classifier gradient on a toy model.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tara/classifier.hpp"
#include "tara/rng.hpp"

namespace tara::oracle {

struct GradCheck {
    std::vector<std::string> tensor;
    std::vector<double> max_rel_error;  ///< per tensor
    std::vector<std::size_t> checked;  ///< entries compared per tensor
    std::size_t skipped = 0;  ///< entries whose perturbation crossed a kink
};

/// 2 classes, 8 points, small widths, input transform on. The transform's
/// output layer is pushed away from its identity start so every tensor gets
/// a non-trivial gradient. Biases are made nonzero: with zero biases a point
/// whose first-layer units are all off feeds exactly 0 into the next layer,
/// which puts it on the ReLU kink for every perturbation of that layer's bias.
inline ModelParams toy_model(std::uint64_t seed, bool transform = true) {
    ModelConfig mc;
    mc.num_classes = 2;
    mc.num_points = 8;
    mc.point_widths = {8, 12};
    mc.head_widths = {6};
    mc.input_transform = transform;
    mc.transform_point_widths = {6, 8};
    mc.transform_head_widths = {5};
    ModelParams p = init_params(mc, 0.1, seed);
    Rng rng(derive_seed(seed, {99}));
    std::normal_distribution<double> g(0.0, 0.1);
    std::normal_distribution<double> small(0.0, 0.02);
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
        if (p.names[t].starts_with("transform.out"))
            for (Eigen::Index i = 0; i < p.tensors[t].size(); ++i) p.tensors[t].data()[i] += g(rng);
        else if (p.names[t].ends_with(".bias"))
            for (Eigen::Index i = 0; i < p.tensors[t].size(); ++i) p.tensors[t].data()[i] += small(rng);
    }
    return p;
}

inline std::vector<PointCloud> toy_clouds(std::uint64_t seed, int count, std::size_t points) {
    Rng rng(derive_seed(seed, {7}));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<PointCloud> out(static_cast<std::size_t>(count));
    for (auto& c : out)
        for (std::size_t i = 0; i < points; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
    return out;
}

/// Relative error per entry: |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
inline GradCheck check_gradients(const ModelParams& params, const std::vector<Example>& batch, double eps = 1e-4) {
    GradCheck r;
    const LossGradient lg = loss_and_gradient(params, batch);
    std::vector<std::uint64_t> base;
    for (const auto& ex : batch) base.push_back(activation_pattern(params, *ex.cloud));
    auto same_pattern = [&](const ModelParams& p) {
        for (std::size_t i = 0; i < batch.size(); ++i)
            if (activation_pattern(p, *batch[i].cloud) != base[i]) return false;
        return true;
    };

    ModelParams probe = params;
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        r.tensor.push_back(params.names[t]);
        double worst = 0.0;
        std::size_t n = 0;
        for (Eigen::Index i = 0; i < params.tensors[t].size(); ++i) {
            double& w = probe.tensors[t].data()[i];
            const double w0 = w;
            w = w0 + eps;
            const bool up_ok = same_pattern(probe);
            const double lp = loss(probe, batch);
            w = w0 - eps;
            const bool down_ok = same_pattern(probe);
            const double lm = loss(probe, batch);
            w = w0;
            if (!up_ok || !down_ok) {
                ++r.skipped;
                continue;
            }
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic = lg.grads[t].data()[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
            ++n;
        }
        r.max_rel_error.push_back(worst);
        r.checked.push_back(n);
    }
    return r;
}

}  // namespace tara::oracle
