#include "tara/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tara/error.hpp"
#include "tara/parallel.hpp"
#include "tara/rng.hpp"

namespace tara {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

// Index map of one point-set network inside ModelParams::tensors:
// per-point layers, then head layers, then the final linear layer,
// each as a (weight, bias) pair.
struct NetLayout {
    std::size_t first = 0;
    int in = 3;
    std::vector<int> point;
    std::vector<int> head;
    int out = 0;

    std::size_t point_w(std::size_t l) const { return first + 2 * l; }
    std::size_t head_w(std::size_t k) const { return first + 2 * (point.size() + k); }
    std::size_t final_w() const { return first + 2 * (point.size() + head.size()); }
    std::size_t tensor_count() const { return 2 * (point.size() + head.size() + 1); }
};

struct Layouts {
    bool has_transform = false;
    NetLayout transform;
    NetLayout main;
};

Layouts layouts_for(const ModelConfig& cfg) {
    Layouts l;
    l.has_transform = cfg.input_transform;
    std::size_t offset = 0;
    if (cfg.input_transform) {
        l.transform = NetLayout{0, 3, cfg.transform_point_widths, cfg.transform_head_widths, 9};
        offset = l.transform.tensor_count();
    }
    l.main = NetLayout{offset, 3, cfg.point_widths, cfg.head_widths, cfg.num_classes};
    return l;
}

struct NetCache {
    std::vector<MatrixXd> acts;  // acts[0] = input rows, acts[l + 1] = ReLU output of point layer l
    std::vector<Index> winners;  // max-pool winning row per channel
    std::vector<RowVectorXd> head;  // head[0] = pooled, head[k + 1] = ReLU output of head layer k
    RowVectorXd out;
};

// Buffers in `c` are reused across calls to avoid reallocating the large
// per-point activations.
template <typename Input>
void run_net(const ModelParams& p, const NetLayout& net, const Input& input, NetCache& c) {
    const auto& t = p.tensors;
    c.acts.resize(net.point.size() + 1);
    c.acts[0].noalias() = input;
    for (std::size_t l = 0; l < net.point.size(); ++l) {
        MatrixXd& z = c.acts[l + 1];
        z.resize(c.acts[l].rows(), t[net.point_w(l)].cols());
        z.noalias() = c.acts[l] * t[net.point_w(l)];
        z = (z.rowwise() + t[net.point_w(l) + 1].row(0)).cwiseMax(0.0);
    }

    // Channel-wise max with a fixed top-to-bottom scan: first maximal row wins.
    const MatrixXd& last = c.acts.back();
    c.winners.assign(static_cast<std::size_t>(last.cols()), 0);
    c.head.resize(net.head.size() + 1);
    c.head[0].resize(last.cols());
    for (Index j = 0; j < last.cols(); ++j) {
        Index best = 0;
        double v = last(0, j);
        for (Index i = 1; i < last.rows(); ++i) {
            if (last(i, j) > v) {
                v = last(i, j);
                best = i;
            }
        }
        c.winners[static_cast<std::size_t>(j)] = best;
        c.head[0](j) = v;
    }

    for (std::size_t k = 0; k < net.head.size(); ++k) {
        RowVectorXd z = c.head[k] * t[net.head_w(k)] + t[net.head_w(k) + 1];
        c.head[k + 1] = z.cwiseMax(0.0);
    }
    c.out = c.head.back() * t[net.final_w()] + t[net.final_w() + 1];
}

// Backpropagates d(out) through one network, accumulating into grads. Only
// rows that win at least one max-pool channel receive gradient; those rows
// are returned in `rows` (ascending) together with d(input) restricted to them.
MatrixXd backprop_net(const ModelParams& p, const NetLayout& net, const NetCache& c, const RowVectorXd& dout,
                      std::vector<MatrixXd>& g, std::vector<Index>& rows) {
    const auto& t = p.tensors;
    g[net.final_w()].noalias() += c.head.back().transpose() * dout;
    g[net.final_w() + 1] += dout;
    RowVectorXd dh = dout * t[net.final_w()].transpose();
    for (std::size_t k = net.head.size(); k-- > 0;) {
        RowVectorXd dz = dh.cwiseProduct((c.head[k + 1].array() > 0.0).cast<double>().matrix());
        g[net.head_w(k)].noalias() += c.head[k].transpose() * dz;
        g[net.head_w(k) + 1] += dz;
        dh = dz * t[net.head_w(k)].transpose();
    }

    rows = c.winners;
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

    const Index width = c.acts.back().cols();
    MatrixXd dact = MatrixXd::Zero(static_cast<Index>(rows.size()), width);
    for (Index j = 0; j < width; ++j) {
        const auto pos = std::lower_bound(rows.begin(), rows.end(), c.winners[static_cast<std::size_t>(j)]) - rows.begin();
        dact(pos, j) += dh(j);
    }

    for (std::size_t l = net.point.size(); l-- > 0;) {
        const MatrixXd out_rows = c.acts[l + 1](rows, Eigen::all);
        const MatrixXd in_rows = c.acts[l](rows, Eigen::all);
        MatrixXd dz = dact.cwiseProduct((out_rows.array() > 0.0).cast<double>().matrix());
        g[net.point_w(l)].noalias() += in_rows.transpose() * dz;
        g[net.point_w(l) + 1] += dz.colwise().sum();
        dact = dz * t[net.point_w(l)].transpose();
    }
    return dact;
}

struct ForwardPass {
    MatrixXd points;  // canonical N x 3
    NetCache transform;
    Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
    NetCache main;
    RowVectorXd probs;
    double log_sum_exp = 0.0;
};

MatrixXd to_matrix(const PointCloud& cloud) {
    const PointCloud* src = &cloud;
    PointCloud canon;
    if (!is_sorted(cloud)) {
        canon = sorted(cloud);
        src = &canon;
    }
    MatrixXd m(static_cast<Index>(src->size()), 3);
    for (Index i = 0; i < m.rows(); ++i) {
        const Point& q = src->points[static_cast<std::size_t>(i)];
        m(i, 0) = q.x;
        m(i, 1) = q.y;
        m(i, 2) = q.z;
    }
    return m;
}

void run_forward(const ModelParams& p, const PointCloud& cloud, ForwardPass& f) {
    if (cloud.size() != p.config.num_points)
        throw ShapeMismatch("cloud has " + std::to_string(cloud.size()) + " points, model expects " +
                            std::to_string(p.config.num_points));
    const Layouts lay = layouts_for(p.config);
    f.points = to_matrix(cloud);
    if (lay.has_transform) {
        run_net(p, lay.transform, f.points, f.transform);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) f.a(r, c) = f.transform.out(3 * r + c);
        run_net(p, lay.main, f.points * f.a, f.main);
    } else {
        f.a.setIdentity();
        run_net(p, lay.main, f.points, f.main);
    }
    const RowVectorXd& logits = f.main.out;
    const double mx = logits.maxCoeff();
    const RowVectorXd e = (logits.array() - mx).exp().matrix();
    const double s = e.sum();
    f.probs = e / s;
    f.log_sum_exp = mx + std::log(s);
}

struct SampleTerms {
    double loss = 0.0;
    bool correct = false;
};

// Per-sample objective CE + lambda * penalty, scaled by `scale`, gradient
// accumulated into g.
SampleTerms sample_gradient(const ModelParams& p, const Example& ex, double scale, std::vector<MatrixXd>& g) {
    thread_local ForwardPass f;
    run_forward(p, *ex.cloud, f);
    const Layouts lay = layouts_for(p.config);
    SampleTerms out;
    out.loss = f.log_sum_exp - f.main.out(ex.label);
    Index best = 0;
    f.probs.maxCoeff(&best);
    out.correct = best == ex.label;

    RowVectorXd dlogits = f.probs;
    dlogits(ex.label) -= 1.0;
    dlogits *= scale;

    std::vector<Index> rows;
    const MatrixXd dinput = backprop_net(p, lay.main, f.main, dlogits, g, rows);
    if (lay.has_transform) {
        const Eigen::Matrix3d e = Eigen::Matrix3d::Identity() - f.a * f.a.transpose();
        const double penalty = e.squaredNorm();
        out.loss += p.reg_weight * penalty;
        Eigen::Matrix3d da = f.points(rows, Eigen::all).transpose() * dinput;
        da += (scale * p.reg_weight * -4.0) * (e * f.a);
        RowVectorXd dout(9);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) dout(3 * r + c) = da(r, c);
        std::vector<Index> transform_rows;
        backprop_net(p, lay.transform, f.transform, dout, g, transform_rows);
    }
    return out;
}

void check_labels(const ModelParams& p, std::span<const Example> batch) {
    for (const auto& ex : batch) {
        if (ex.label < 0 || ex.label >= p.config.num_classes)
            throw LabelOutOfRange("label " + std::to_string(ex.label) + " outside [0, " +
                                  std::to_string(p.config.num_classes) + ")");
        if (ex.cloud == nullptr) throw std::invalid_argument("example without a cloud");
    }
}

std::vector<MatrixXd> zeros_like(const std::vector<MatrixXd>& tensors) {
    std::vector<MatrixXd> z;
    z.reserve(tensors.size());
    for (const auto& t : tensors) z.push_back(MatrixXd::Zero(t.rows(), t.cols()));
    return z;
}

class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, const std::vector<MatrixXd>& like) : kind_(cfg.optimizer) {
        if (kind_ == OptimizerKind::adam) {
            m_ = zeros_like(like);
            v_ = zeros_like(like);
        }
    }

    void step(std::vector<MatrixXd>& params, const std::vector<MatrixXd>& grads, double lr) {
        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
            return;
        }
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++t_;
        const double c1 = 1.0 - std::pow(beta1, t_);
        const double c2 = 1.0 - std::pow(beta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1 * m_[i] + (1.0 - beta1) * grads[i];
            v_[i] = beta2 * v_[i] + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
            params[i].array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
        }
    }

private:
    OptimizerKind kind_;
    int t_ = 0;
    std::vector<MatrixXd> m_, v_;
};

struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalStats evaluate(const ModelParams& p, std::span<const Example> data, unsigned threads) {
    if (data.empty()) return {};
    std::vector<double> losses(data.size());
    std::vector<char> hits(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        thread_local ForwardPass f;
        run_forward(p, *data[i].cloud, f);
        double l = f.log_sum_exp - f.main.out(data[i].label);
        if (p.config.input_transform)
            l += p.reg_weight * orthogonality_penalty(f.a);
        losses[i] = l;
        Index best = 0;
        f.probs.maxCoeff(&best);
        hits[i] = best == data[i].label;
    });
    EvalStats s;
    for (std::size_t i = 0; i < data.size(); ++i) {
        s.loss += losses[i];
        s.accuracy += hits[i];
    }
    s.loss /= static_cast<double>(data.size());
    s.accuracy /= static_cast<double>(data.size());
    return s;
}

// Runs mini-batch descent over `examples` for cfg.epochs; calls on_epoch
// after each epoch with the epoch stats (train side only).
template <typename OnEpoch>
void descend(ModelParams& params, std::span<const Example> examples, const TrainConfig& cfg, std::uint64_t stream,
             OnEpoch&& on_epoch) {
    Optimizer opt(cfg, params.tensors);
    std::vector<std::size_t> order(examples.size());
    std::vector<Example> batch;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>((examples.size() + bs - 1) / bs);
    double step = 0.0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(cfg.seed, {stream, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        int correct = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
            LossGradient lg = loss_and_gradient(params, batch, cfg.threads);
            loss_sum += lg.loss * static_cast<double>(batch.size());
            correct += lg.correct;
            const double lr = cfg.cosine_decay
                                  ? 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * step / total_steps))
                                  : cfg.learning_rate;
            opt.step(params.tensors, lg.grads, lr);
            step += 1.0;
        }
        EpochStats st;
        st.epoch = epoch;
        if (!order.empty()) {
            st.train_loss = loss_sum / static_cast<double>(order.size());
            st.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        }
        on_epoch(st);
    }
}

// FNV-1a over a byte string.
std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string join_widths(const std::vector<int>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
    return s;
}

}  // namespace

void ModelConfig::validate() const {
    if (num_classes < 2) throw InfeasibleConfig("model.num_classes must be >= 2");
    if (num_points < 1) throw InfeasibleConfig("model.num_points must be >= 1");
    auto positive = [](const std::vector<int>& w, const char* name, bool allow_empty) {
        if (!allow_empty && w.empty()) throw InfeasibleConfig(std::string(name) + " must not be empty");
        for (int x : w)
            if (x < 1) throw InfeasibleConfig(std::string(name) + " entries must be >= 1");
    };
    positive(point_widths, "model.point_widths", false);
    positive(head_widths, "model.head_widths", true);
    if (input_transform) {
        positive(transform_point_widths, "model.transform_point_widths", false);
        positive(transform_head_widths, "model.transform_head_widths", true);
    }
}

void TrainConfig::validate() const {
    if (epochs < 0) throw InfeasibleConfig("train.epochs must be >= 0");
    if (batch_size < 1) throw InfeasibleConfig("train.batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw InfeasibleConfig("train.learning_rate must be >= 0");
    if (!(reg_weight >= 0.0)) throw InfeasibleConfig("train.reg_weight must be >= 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw InfeasibleConfig("train.validation_fraction must be in (0, 1)");
    if (!(replay_ratio >= 0.0)) throw InfeasibleConfig("train.replay_ratio must be >= 0");
}

ModelParams init_params(const ModelConfig& config, double reg_weight, std::uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.reg_weight = reg_weight;
    const Layouts lay = layouts_for(config);
    Rng rng(derive_seed(seed, {0x1417}));

    auto add_net = [&](const NetLayout& net, const std::string& prefix, bool identity_out) {
        int fan_in = net.in;
        auto add_layer = [&](const std::string& name, int out, bool zero) {
            // He-uniform weights keep activation scale through the ReLU stack.
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> u(-bound, bound);
            MatrixXd w(fan_in, out), b = MatrixXd::Zero(1, out);
            for (Index r = 0; r < w.rows(); ++r)
                for (Index c = 0; c < w.cols(); ++c) w(r, c) = zero ? 0.0 : u(rng);
            p.names.push_back(prefix + name + ".weight");
            p.tensors.push_back(std::move(w));
            p.names.push_back(prefix + name + ".bias");
            p.tensors.push_back(std::move(b));
            fan_in = out;
        };
        for (std::size_t l = 0; l < net.point.size(); ++l) add_layer("point" + std::to_string(l), net.point[l], false);
        for (std::size_t k = 0; k < net.head.size(); ++k) add_layer("head" + std::to_string(k), net.head[k], false);
        add_layer("out", net.out, identity_out);
        if (identity_out) {
            MatrixXd& bias = p.tensors.back();
            bias(0, 0) = bias(0, 4) = bias(0, 8) = 1.0;
        }
    };
    if (lay.has_transform) add_net(lay.transform, "transform.", true);
    add_net(lay.main, "", false);
    return p;
}

std::vector<double> forward(const ModelParams& params, const PointCloud& cloud) {
    thread_local ForwardPass f;
    run_forward(params, cloud, f);
    return {f.probs.data(), f.probs.data() + f.probs.size()};
}

Eigen::Matrix3d input_transform(const ModelParams& params, const PointCloud& cloud) {
    ForwardPass f;
    run_forward(params, cloud, f);
    return f.a;
}

double orthogonality_penalty(const Eigen::Matrix3d& a) {
    return (Eigen::Matrix3d::Identity() - a * a.transpose()).squaredNorm();
}

double loss(const ModelParams& params, std::span<const Example> batch) {
    check_labels(params, batch);
    if (batch.empty()) throw std::invalid_argument("loss of an empty batch");
    return evaluate(params, batch, 1).loss;
}

LossGradient loss_and_gradient(const ModelParams& params, std::span<const Example> batch, unsigned threads) {
    check_labels(params, batch);
    if (batch.empty()) throw std::invalid_argument("gradient of an empty batch");
    const double scale = 1.0 / static_cast<double>(batch.size());

    std::vector<std::vector<MatrixXd>> per_sample(batch.size());
    std::vector<SampleTerms> terms(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        per_sample[i] = zeros_like(params.tensors);
        terms[i] = sample_gradient(params, batch[i], scale, per_sample[i]);
    });

    // Fixed summation order keeps the result independent of thread count.
    LossGradient out;
    out.grads = std::move(per_sample[0]);
    for (std::size_t i = 1; i < batch.size(); ++i)
        for (std::size_t k = 0; k < out.grads.size(); ++k) out.grads[k] += per_sample[i][k];
    for (const auto& t : terms) {
        out.loss += t.loss;
        out.correct += t.correct ? 1 : 0;
    }
    out.loss *= scale;
    return out;
}

std::uint64_t activation_pattern(const ModelParams& params, const PointCloud& cloud) {
    ForwardPass f;
    run_forward(params, cloud, f);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    auto feed_net = [&](const NetCache& c) {
        for (std::size_t l = 1; l < c.acts.size(); ++l)
            for (Index j = 0; j < c.acts[l].cols(); ++j)
                for (Index i = 0; i < c.acts[l].rows(); ++i) feed(c.acts[l](i, j) > 0.0);
        for (Index w : c.winners) feed(static_cast<std::uint64_t>(w));
        for (std::size_t k = 1; k < c.head.size(); ++k)
            for (Index j = 0; j < c.head[k].size(); ++j) feed(c.head[k](j) > 0.0);
    };
    if (params.config.input_transform) feed_net(f.transform);
    feed_net(f.main);
    return h;
}

TrainResult train(std::span<const Example> data, const ModelConfig& model, const TrainConfig& cfg) {
    model.validate();
    cfg.validate();
    for (const auto& ex : data)
        if (ex.label < 0 || ex.label >= model.num_classes)
            throw LabelOutOfRange("label " + std::to_string(ex.label) + " outside [0, " +
                                  std::to_string(model.num_classes) + ")");

    // Stratified split: each class contributes floor(fraction * n_c) examples
    // to validation, always leaving at least one for training.
    std::vector<Example> train_set, val_set;
    for (int c = 0; c < model.num_classes; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data[i].label == c) idx.push_back(i);
        if (idx.empty()) throw ClassMissing("class " + std::to_string(c) + " has no training examples");
        Rng rng = make_rng(cfg.seed, {0x5b117, static_cast<std::uint64_t>(c)});
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(idx.size())));
        n_val = std::min(n_val, idx.size() - 1);
        for (std::size_t k = 0; k < idx.size(); ++k) (k < n_val ? val_set : train_set).push_back(data[idx[k]]);
    }

    TrainResult result;
    ModelParams params = init_params(model, cfg.reg_weight, derive_seed(cfg.seed, {0x1a17}));
    params.config_hash = config_hash(model, cfg);
    result.params = params;
    result.report.train_examples = train_set.size();
    result.report.val_examples = val_set.size();

    double best = -1.0;
    double best_loss = INFINITY;
    descend(params, train_set, cfg, 0x7a1, [&](EpochStats st) {
        if (!val_set.empty()) {
            const EvalStats v = evaluate(params, val_set, cfg.threads);
            st.val_loss = v.loss;
            st.val_accuracy = v.accuracy;
        } else {
            st.val_accuracy = st.train_accuracy;
        }
        result.report.epochs.push_back(st);
        // Best validation accuracy; ties go to the lower validation loss.
        if (st.val_accuracy > best || (st.val_accuracy == best && st.val_loss < best_loss)) {
            best = st.val_accuracy;
            best_loss = st.val_loss;
            result.report.best_epoch = st.epoch;
            result.report.best_val_accuracy = st.val_accuracy;
            result.params = params;
        }
    });
    return result;
}

ModelParams fine_tune(const ModelParams& params, std::span<const Example> pool, std::span<const Example> replay,
                      const TrainConfig& cfg) {
    cfg.validate();
    if (pool.empty()) throw EmptyPool();
    check_labels(params, pool);
    check_labels(params, replay);

    std::vector<Example> mixed(pool.begin(), pool.end());
    const auto want = static_cast<std::size_t>(std::llround(cfg.replay_ratio * static_cast<double>(pool.size())));
    const std::size_t take = std::min(want, replay.size());
    if (take > 0) {
        Rng rng = make_rng(cfg.seed, {0x4e91a7});
        std::sample(replay.begin(), replay.end(), std::back_inserter(mixed), take, rng);
    }

    ModelParams tuned = params;
    descend(tuned, mixed, cfg, 0xf17e, [](const EpochStats&) {});
    return tuned;
}

double accuracy(const ModelParams& params, std::span<const Example> data) {
    check_labels(params, data);
    return evaluate(params, data, 0).accuracy;
}

std::uint64_t config_hash(const ModelConfig& model, const TrainConfig& train) {
    std::ostringstream s;
    s.precision(17);
    s << "classes=" << model.num_classes << ";points=" << model.num_points
      << ";point=" << join_widths(model.point_widths) << ";head=" << join_widths(model.head_widths)
      << ";transform=" << model.input_transform << ";tpoint=" << join_widths(model.transform_point_widths)
      << ";thead=" << join_widths(model.transform_head_widths) << ";epochs=" << train.epochs
      << ";batch=" << train.batch_size << ";lr=" << train.learning_rate << ";seed=" << train.seed
      << ";reg=" << train.reg_weight << ";val=" << train.validation_fraction
      << ";opt=" << (train.optimizer == OptimizerKind::adam ? "adam" : "sgd") << ";cosine=" << train.cosine_decay;
    return fnv1a(s.str());
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[8] = {'T', 'A', 'R', 'A', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated checkpoint");
    return v;
}

void put_widths(std::ostream& out, const std::vector<int>& w) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
    for (int x : w) put<std::int32_t>(out, x);
}

std::vector<int> get_widths(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > 64) throw FormatError("implausible layer count in checkpoint");
    std::vector<int> w(n);
    for (auto& x : w) x = get<std::int32_t>(in);
    return w;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& p) {
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put<std::int32_t>(out, p.config.num_classes);
    put<std::uint64_t>(out, p.config.num_points);
    put<std::uint8_t>(out, p.config.input_transform ? 1 : 0);
    put_widths(out, p.config.point_widths);
    put_widths(out, p.config.head_widths);
    put_widths(out, p.config.transform_point_widths);
    put_widths(out, p.config.transform_head_widths);
    put<double>(out, p.reg_weight);
    put<std::uint64_t>(out, p.config_hash);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensors.size()));
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        const auto& name = p.names[i];
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        const MatrixXd& t = p.tensors[i];
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
        for (Index r = 0; r < t.rows(); ++r)
            for (Index c = 0; c < t.cols(); ++c) put<double>(out, t(r, c));
    }
    if (!out) throw FormatError("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    save_checkpoint(out, params);
}

ModelParams load_checkpoint(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("not a checkpoint file");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

    ModelParams p;
    p.config.num_classes = get<std::int32_t>(in);
    p.config.num_points = get<std::uint64_t>(in);
    p.config.input_transform = get<std::uint8_t>(in) != 0;
    p.config.point_widths = get_widths(in);
    p.config.head_widths = get_widths(in);
    p.config.transform_point_widths = get_widths(in);
    p.config.transform_head_widths = get_widths(in);
    p.config.validate();
    p.reg_weight = get<double>(in);
    p.config_hash = get<std::uint64_t>(in);

    // The tensor list must match what the stored config implies.
    const ModelParams expected = init_params(p.config, p.reg_weight, 0);
    const auto count = get<std::uint32_t>(in);
    if (count != expected.tensors.size()) throw FormatError("checkpoint tensor count does not match its config");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get<std::uint32_t>(in);
        if (len > 256) throw FormatError("implausible tensor name length");
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto rows = get<std::uint32_t>(in);
        const auto cols = get<std::uint32_t>(in);
        if (name != expected.names[i] || rows != expected.tensors[i].rows() || cols != expected.tensors[i].cols())
            throw FormatError("checkpoint tensor '" + name + "' does not match its config");
        MatrixXd t(rows, cols);
        for (Index r = 0; r < t.rows(); ++r)
            for (Index c = 0; c < t.cols(); ++c) {
                t(r, c) = get<double>(in);
                if (!std::isfinite(t(r, c))) throw FormatError("non-finite value in tensor '" + name + "'");
            }
        p.names.push_back(std::move(name));
        p.tensors.push_back(std::move(t));
    }
    return p;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint not found: " + path.string());
    return load_checkpoint(in);
}

}  // namespace tara
