#pragma once

// Frame-level point-set classifier: an optional 3x3 input transform network,
// a shared per-point MLP, channel-wise max-pool and a fully connected head.
// Trained with categorical cross-entropy plus an orthogonality penalty on the
// predicted input transform.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tara/pointcloud.hpp"

namespace tara {

struct ModelConfig {
    int num_classes = 2;
    std::size_t num_points = 1500;
    std::vector<int> point_widths{64, 128, 256};
    std::vector<int> head_widths{128};
    bool input_transform = true;
    std::vector<int> transform_point_widths{32, 64};
    std::vector<int> transform_head_widths{32};

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    /// Per-step cosine annealing from learning_rate to 0 over the run.
    bool cosine_decay = true;
    std::uint64_t seed = 1;
    double reg_weight = 1e-3;  ///< lambda on ||I - A A^T||_F^2
    double validation_fraction = 0.2;
    OptimizerKind optimizer = OptimizerKind::adam;
    /// Replay examples drawn per pool example when fine-tuning.
    double replay_ratio = 1.0;
    /// Worker threads for per-sample gradients; 0 = hardware concurrency.
    /// Results do not depend on this value.
    unsigned threads = 0;

    void validate() const;
};

/// All learnable tensors plus the metadata needed to rebuild the network.
/// Biases are stored as 1 x n matrices; weights as fan_in x fan_out.
struct ModelParams {
    ModelConfig config;
    double reg_weight = 1e-3;
    std::uint64_t config_hash = 0;
    std::vector<std::string> names;
    std::vector<Eigen::MatrixXd> tensors;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Seeded uniform(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases. The input
/// transform's last layer starts at zero weights and an identity bias, so a
/// fresh model applies exactly A = I.
ModelParams init_params(const ModelConfig& config, double reg_weight, std::uint64_t seed);

struct Example {
    const PointCloud* cloud = nullptr;
    int label = 0;
};

/// Class posterior for one cloud. The cloud is canonicalised (sorted) before
/// evaluation so the result is exactly invariant to point order.
/// Throws ShapeMismatch if cloud.size() != config.num_points.
std::vector<double> forward(const ModelParams& params, const PointCloud& cloud);

/// The 3x3 input transform predicted for a cloud (identity when disabled).
Eigen::Matrix3d input_transform(const ModelParams& params, const PointCloud& cloud);

/// ||I - A A^T||_F^2.
double orthogonality_penalty(const Eigen::Matrix3d& a);

/// Mean cross-entropy over the batch + reg_weight * mean orthogonality penalty.
double loss(const ModelParams& params, std::span<const Example> batch);

struct LossGradient {
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> grads;  // parallel to ModelParams::tensors
    int correct = 0;  // argmax hits in the batch, for training curves
};

LossGradient loss_and_gradient(const ModelParams& params, std::span<const Example> batch, unsigned threads = 1);

/// Hash of every ReLU on/off state and max-pool winner for this input; changes
/// exactly when a parameter perturbation crosses a non-differentiable point.
std::uint64_t activation_pattern(const ModelParams& params, const PointCloud& cloud);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;

    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based; 0 when no epoch ran
    double best_val_accuracy = 0.0;
    std::size_t train_examples = 0;
    std::size_t val_examples = 0;

    friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

/// Stratified seeded train/validation split, mini-batch descent for
/// cfg.epochs, returns the parameters of the best validation epoch (highest
/// accuracy, ties broken by lower validation loss).
/// Throws ClassMissing if a class has no training example and
/// LabelOutOfRange for labels outside [0, num_classes).
TrainResult train(std::span<const Example> data, const ModelConfig& model, const TrainConfig& cfg);

/// Continues optimisation from `params` on the pool plus a seeded replay
/// sample of round(replay_ratio * |pool|) examples drawn from `replay`.
/// All epochs run; the final parameters are returned.
ModelParams fine_tune(const ModelParams& params, std::span<const Example> pool, std::span<const Example> replay,
                      const TrainConfig& cfg);

/// Frame accuracy of plain argmax predictions (no confidence filter).
double accuracy(const ModelParams& params, std::span<const Example> data);

std::uint64_t config_hash(const ModelConfig& model, const TrainConfig& train);

// Binary checkpoint; layout documented in docs/checkpoint_format.md.
void save_checkpoint(std::ostream& out, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace tara
