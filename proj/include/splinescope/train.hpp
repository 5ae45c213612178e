#ifndef SPLINESCOPE_TRAIN_HPP
#define SPLINESCOPE_TRAIN_HPP

#include "splinescope/dataset.hpp"
#include "splinescope/network.hpp"
#include "splinescope/rng.hpp"
#include "splinescope/threadpool.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace splinescope {

enum class LossKind { cross_entropy, mse };

struct TrainConfig {
    long steps = 0;
    int batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    std::vector<long> checkpoints; // strictly increasing steps in [1, steps]
    LossKind loss = LossKind::cross_entropy;

    void validate(const Dataset& train_ds) const {
        if (steps < 0) throw DimensionError("steps must be >= 0");
        if (batch_size < 1 || batch_size > train_ds.size())
            throw DimensionError("batch_size must lie in [1, n]");
        if (!(lr >= 0.0)) throw DimensionError("lr must be >= 0");
        if (!(weight_decay >= 0.0)) throw DimensionError("weight_decay must be >= 0");
        long prev = 0;
        for (long c : checkpoints) {
            if (c <= prev || c > steps)
                throw DimensionError("checkpoints must be strictly increasing within [1, steps]");
            prev = c;
        }
        if (train_ds.regression() && loss == LossKind::cross_entropy)
            throw DimensionError("cross-entropy needs a classification dataset");
    }
};

// Denser early: the interesting phases span several decades of steps.
inline std::vector<long> log_spaced_checkpoints(long steps, int count = 60) {
    std::vector<long> out;
    if (steps < 1 || count < 1) return out;
    std::set<long> seen;
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        const long s = std::lround(std::exp(t * std::log(static_cast<double>(steps))));
        seen.insert(std::clamp(s, 1L, steps));
    }
    seen.insert(steps);
    out.assign(seen.begin(), seen.end());
    return out;
}

// Bias-corrected Adam update plus decoupled weight decay; the decay uses
// the pre-step parameter value.
template <typename Derived, typename Other>
inline void adam_update(Eigen::MatrixBase<Derived>& param, Eigen::MatrixBase<Derived>& m,
                        Eigen::MatrixBase<Derived>& v, const Eigen::MatrixBase<Other>& grad,
                        long t, double lr, double beta1, double beta2, double eps,
                        double weight_decay) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v.array() = beta2 * v.array() + (1.0 - beta2) * grad.array().square();
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    param.array() -= lr * weight_decay * param.array();
    param.array() -= lr * m_hat / (v_hat.sqrt() + eps);
}

struct LcStat {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double ci = std::numeric_limits<double>::quiet_NaN(); // CI half-width
};

struct TrajectoryRow {
    long step = 0;
    double train_acc = std::numeric_limits<double>::quiet_NaN();
    double test_acc = std::numeric_limits<double>::quiet_NaN();
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> adv_acc; // parallel to TrajectoryLog::eps_list
    LcStat lc_train, lc_test, lc_rand;
    double wall_clock = 0.0; // seconds since training start
};

struct TrajectoryLog {
    std::vector<TrajectoryRow> rows;
    std::vector<double> eps_list; // epsilons of the adv_acc columns
    std::string config_hash = "0";
    bool aborted = false;
    long aborted_at_step = -1;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_eps(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace detail

// CSV, one row per checkpoint. The config hash rides in a comment line so
// the column schema stays fixed; wall_clock is last so byte comparisons
// can strip it.
inline void write_trajectory_csv(const TrajectoryLog& log, std::ostream& os) {
    os << "# config_hash=" << log.config_hash << "\n";
    os << "step,train_acc,test_acc,train_loss";
    for (double eps : log.eps_list) os << ",adv_acc_eps_" << detail::fmt_eps(eps);
    os << ",lc_train_mean,lc_train_ci,lc_test_mean,lc_test_ci,lc_rand_mean,lc_rand_ci,wall_clock\n";
    for (const auto& row : log.rows) {
        os << row.step << ',' << detail::fmt_double(row.train_acc) << ','
           << detail::fmt_double(row.test_acc) << ',' << detail::fmt_double(row.train_loss);
        for (size_t e = 0; e < log.eps_list.size(); ++e)
            os << ',' << detail::fmt_double(e < row.adv_acc.size()
                                                ? row.adv_acc[e]
                                                : std::numeric_limits<double>::quiet_NaN());
        os << ',' << detail::fmt_double(row.lc_train.mean) << ',' << detail::fmt_double(row.lc_train.ci)
           << ',' << detail::fmt_double(row.lc_test.mean) << ',' << detail::fmt_double(row.lc_test.ci)
           << ',' << detail::fmt_double(row.lc_rand.mean) << ',' << detail::fmt_double(row.lc_rand.ci)
           << ',' << detail::fmt_double(row.wall_clock) << "\n";
    }
}

inline nlohmann::json trajectory_to_json(const TrajectoryLog& log) {
    nlohmann::json j;
    j["config_hash"] = log.config_hash;
    j["eps_list"] = log.eps_list;
    j["aborted"] = log.aborted;
    if (log.aborted) j["aborted_at_step"] = log.aborted_at_step;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : log.rows) {
        nlohmann::json r;
        r["step"] = row.step;
        r["train_acc"] = row.train_acc;
        r["test_acc"] = row.test_acc;
        r["train_loss"] = row.train_loss;
        r["adv_acc"] = row.adv_acc;
        r["lc_train"] = {{"mean", row.lc_train.mean}, {"ci", row.lc_train.ci}};
        r["lc_test"] = {{"mean", row.lc_test.mean}, {"ci", row.lc_test.ci}};
        r["lc_rand"] = {{"mean", row.lc_rand.mean}, {"ci", row.lc_rand.ci}};
        r["wall_clock"] = row.wall_clock;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

// Called with a frozen copy of the parameters at every scheduled
// checkpoint; fills in the probe/attack columns of the row.
using CheckpointHook = std::function<void(long step, const Network& frozen, TrajectoryRow& row)>;

namespace detail {

struct BatchLoss {
    double loss = 0.0;
    Mat cotangent;
};

inline BatchLoss loss_and_cotangent(const Mat& output, const Mat& targets,
                                    const std::vector<int>& labels, LossKind kind) {
    BatchLoss out;
    const double n = static_cast<double>(output.rows());
    if (kind == LossKind::mse) {
        const Mat diff = output - targets;
        const double denom = n * static_cast<double>(output.cols());
        out.loss = diff.array().square().sum() / denom;
        out.cotangent = (2.0 / denom) * diff;
        return out;
    }
    // cross entropy over logits, log-sum-exp stabilized
    out.cotangent.resize(output.rows(), output.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < output.rows(); ++i) {
        Eigen::RowVectorXd row = output.row(i);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        total += lse - row(labels[i]);
        Eigen::RowVectorXd soft = (row.array() - lse).exp();
        soft(labels[i]) -= 1.0;
        out.cotangent.row(i) = soft / n;
    }
    out.loss = total / n;
    return out;
}

inline double dataset_accuracy(const Network& net, const Dataset& ds) {
    if (ds.regression()) return std::numeric_limits<double>::quiet_NaN();
    const Mat out = forward_output(net, ds.inputs);
    long correct = 0;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Eigen::Index best;
        out.row(i).maxCoeff(&best);
        if (static_cast<int>(best) == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(out.rows());
}

inline double dataset_loss(const Network& net, const Dataset& ds, LossKind kind) {
    const Mat out = forward_output(net, ds.inputs);
    return loss_and_cotangent(out, ds.targets, ds.labels, kind).loss;
}

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
inline void shuffle_indices(std::vector<Eigen::Index>& idx, Rng& rng) {
    for (size_t i = idx.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace detail

// Minibatch Adam with decoupled weight decay and seeded epoch shuffling.
// At each scheduled checkpoint the hooks run against a frozen copy of the
// parameters; a non-finite batch loss aborts, keeping the log so far.
inline TrajectoryLog train(Network& net, const Dataset& train_ds, const Dataset* test_ds,
                           const TrainConfig& cfg, const std::vector<CheckpointHook>& hooks = {}) {
    net.validate();
    train_ds.validate();
    cfg.validate(train_ds);
    if (!train_ds.regression() && net.output_dim() < train_ds.num_classes)
        throw DimensionError("network output dim smaller than class count");

    TrajectoryLog log;
    const auto t0 = std::chrono::steady_clock::now();

    Gradients m = Gradients::zeros_like(net);
    Gradients v = Gradients::zeros_like(net);
    Gradients grads = Gradients::zeros_like(net);

    // a layer's stored BN stats hold the running average; per-step batch
    // statistics are swapped in around the gradient computation
    long bn_batches_seen = 0;
    const bool has_bn = std::any_of(net.layers.begin(), net.layers.end(),
                                    [](const Layer& l) { return l.bn.has_value(); });

    std::vector<Eigen::Index> order(train_ds.size());
    for (Eigen::Index i = 0; i < train_ds.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5f0e));
    size_t cursor = order.size(); // forces a shuffle before the first batch

    size_t next_checkpoint = 0;
    for (long step = 1; step <= cfg.steps; ++step) {
        if (cursor + cfg.batch_size > order.size()) {
            detail::shuffle_indices(order, shuffle_rng);
            cursor = 0;
        }
        Mat batch(cfg.batch_size, train_ds.dim());
        Mat batch_targets;
        std::vector<int> batch_labels;
        if (train_ds.regression()) batch_targets.resize(cfg.batch_size, train_ds.targets.cols());
        for (int b = 0; b < cfg.batch_size; ++b) {
            const Eigen::Index src = order[cursor + b];
            batch.row(b) = train_ds.inputs.row(src);
            if (train_ds.regression())
                batch_targets.row(b) = train_ds.targets.row(src);
            else
                batch_labels.push_back(train_ds.labels[src]);
        }
        cursor += cfg.batch_size;

        std::vector<std::pair<Vec, Vec>> saved_stats; // (mu, sigma) running averages
        if (has_bn) {
            for (auto& layer : net.layers) {
                if (!layer.bn) continue;
                saved_stats.emplace_back(layer.bn->mu, layer.bn->sigma);
            }
            // swap batch statistics in (updates running averages as a side effect)
            Mat cur = batch;
            size_t slot = 0;
            for (auto& layer : net.layers) {
                if (layer.bn) {
                    Mat raw = cur * layer.weight.transpose();
                    raw.rowwise() += layer.bias.transpose();
                    BNParams& bn = *layer.bn;
                    const double n = static_cast<double>(raw.rows());
                    Vec mu = raw.colwise().mean();
                    Vec var =
                        ((raw.rowwise() - mu.transpose()).array().square().colwise().sum() / n)
                            .transpose();
                    Vec sigma = (var.array() + bn.epsilon_stab * bn.epsilon_stab).sqrt();
                    const double t = static_cast<double>(bn_batches_seen);
                    const Vec run_mu = (saved_stats[slot].first * t + mu) / (t + 1.0);
                    const Vec run_sigma = (saved_stats[slot].second * t + sigma) / (t + 1.0);
                    saved_stats[slot] = {run_mu, run_sigma};
                    bn.mu = std::move(mu);
                    bn.sigma = std::move(sigma);
                    ++slot;
                }
                cur = layer.act.apply(layer_preact(layer, cur));
            }
            bn_batches_seen++;
        }

        const ForwardWorkspace ws = forward_workspace(net, batch);
        const detail::BatchLoss bl =
            detail::loss_and_cotangent(ws.output, batch_targets, batch_labels, cfg.loss);
        if (!std::isfinite(bl.loss)) {
            log.aborted = true;
            log.aborted_at_step = step;
            break;
        }
        for (auto& g : grads.weight) g.setZero();
        for (auto& g : grads.bias) g.setZero();
        backward_from_workspace(net, ws, bl.cotangent, &grads);

        for (size_t k = 0; k < net.layers.size(); ++k) {
            adam_update(net.layers[k].weight, m.weight[k], v.weight[k], grads.weight[k], step,
                        cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
            adam_update(net.layers[k].bias, m.bias[k], v.bias[k], grads.bias[k], step, cfg.lr,
                        cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
        }

        if (has_bn) { // restore running averages for eval-mode use
            size_t slot = 0;
            for (auto& layer : net.layers) {
                if (!layer.bn) continue;
                layer.bn->mu = saved_stats[slot].first;
                layer.bn->sigma = saved_stats[slot].second;
                ++slot;
            }
        }

        if (next_checkpoint < cfg.checkpoints.size() && cfg.checkpoints[next_checkpoint] == step) {
            ++next_checkpoint;
            TrajectoryRow row;
            row.step = step;
            row.train_acc = detail::dataset_accuracy(net, train_ds);
            row.train_loss = detail::dataset_loss(net, train_ds, cfg.loss);
            if (test_ds) row.test_acc = detail::dataset_accuracy(net, *test_ds);
            const Network frozen = net;
            for (const auto& hook : hooks) hook(step, frozen, row);
            row.wall_clock =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log.rows.push_back(std::move(row));
        }
    }
    return log;
}

} // namespace splinescope

#endif
