#ifndef SPLINESCOPE_ATTACK_HPP
#define SPLINESCOPE_ATTACK_HPP

#include "splinescope/network.hpp"
#include "splinescope/rng.hpp"
#include "splinescope/threadpool.hpp"

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace splinescope {

struct AttackConfig {
    double epsilon = 0.06; // L-inf budget
    double alpha = 0.0156; // step size
    int steps = 10;
    uint64_t seed = 0;
    bool random_start = true;
    std::pair<double, double> data_range{0.0, 1.0};

    void validate() const {
        if (!(epsilon >= 0.0)) throw DimensionError("attack epsilon must be >= 0");
        if (epsilon > 0.0 && !(alpha > 0.0 && alpha <= epsilon))
            throw DimensionError("attack alpha must satisfy 0 < alpha <= epsilon");
        if (steps < 1) throw DimensionError("attack needs at least 1 step");
        if (!(data_range.first <= data_range.second))
            throw DimensionError("attack data range is inverted");
    }
};

namespace detail {

// Row-wise softmax of logits, stabilized by the row max.
inline Mat softmax_rows(const Mat& logits) {
    Mat out = logits;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Eigen::RowVectorXd row = out.row(i);
        row.array() -= row.maxCoeff();
        row = row.array().exp();
        out.row(i) = row / row.sum();
    }
    return out;
}

inline std::vector<int> argmax_rows(const Mat& logits) {
    std::vector<int> out(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best;
        logits.row(i).maxCoeff(&best);
        out[i] = static_cast<int>(best);
    }
    return out;
}

} // namespace detail

// Batched L-inf PGD ascending cross-entropy on the logits; all samples
// iterate together. Every returned row is clamped to the epsilon ball
// around its clean input and to the data range. Random starts use seeds
// derived from (cfg.seed, index_offset + row), so a batch attacked in
// chunks produces bitwise the same iterates as one attacked whole.
inline Mat pgd_attack_batch(const Network& net, const Mat& clean, const std::vector<int>& labels,
                            const AttackConfig& cfg, uint64_t index_offset = 0) {
    cfg.validate();
    if (static_cast<size_t>(clean.rows()) != labels.size())
        throw DimensionError("attack labels must match batch rows");
    const Eigen::Index classes = net.output_dim();
    for (int label : labels)
        if (label < 0 || label >= classes) throw DimensionError("attack label out of range");

    const double lo = cfg.data_range.first;
    const double hi = cfg.data_range.second;
    Mat x = clean;
    if (cfg.random_start && cfg.epsilon > 0.0) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            Rng rng(derive_seed(cfg.seed, index_offset + static_cast<uint64_t>(i)));
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                x(i, j) += rng.uniform(-cfg.epsilon, cfg.epsilon);
        }
        x = x.cwiseMax(lo).cwiseMin(hi);
        x = x.array().max(clean.array() - cfg.epsilon).min(clean.array() + cfg.epsilon).matrix();
    }

    for (int step = 0; step < cfg.steps; ++step) {
        const ForwardWorkspace ws = forward_workspace(net, x);
        Mat cotangent = detail::softmax_rows(ws.output);
        for (Eigen::Index i = 0; i < cotangent.rows(); ++i) cotangent(i, labels[i]) -= 1.0;
        const Mat grad = backward_from_workspace(net, ws, cotangent, nullptr);
        if (!all_finite(grad))
            throw DimensionError("non-finite attack gradient at step " + std::to_string(step));
        x += cfg.alpha * grad.unaryExpr([](double v) {
            return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        });
        x = x.array().max(clean.array() - cfg.epsilon).min(clean.array() + cfg.epsilon).matrix();
        x = x.cwiseMax(lo).cwiseMin(hi);
    }
    return x;
}

// Single-sample attack returning whichever of {final iterate, clean input}
// is misclassified, preferring the iterate. The clean input is always a
// feasible output, which makes robust accuracy <= clean accuracy by
// construction.
inline Vec pgd_attack(const Network& net, const Vec& x, int label, const AttackConfig& cfg) {
    const Mat adv = pgd_attack_batch(net, x.transpose(), {label}, cfg);
    if (detail::argmax_rows(forward_output(net, adv))[0] != label) return adv.row(0).transpose();
    if (detail::argmax_rows(forward_output(net, x.transpose()))[0] != label) return x;
    return adv.row(0).transpose();
}

inline double clean_accuracy(const Network& net, const Mat& inputs, const std::vector<int>& labels) {
    if (inputs.rows() == 0) throw DimensionError("empty dataset");
    const std::vector<int> pred = detail::argmax_rows(forward_output(net, inputs));
    long correct = 0;
    for (size_t i = 0; i < labels.size(); ++i)
        if (pred[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// Robustness against the union of several attack configurations: a point
// counts as robust only if it survives every attack in the set (and is
// clean-correct). Growing the set can only lower the result, which makes
// accuracy monotone in nested epsilon sweeps.
inline double robust_accuracy_envelope(const Network& net, const Mat& inputs,
                                       const std::vector<int>& labels,
                                       const std::vector<AttackConfig>& cfgs) {
    if (inputs.rows() == 0) throw DimensionError("empty dataset");
    if (static_cast<size_t>(inputs.rows()) != labels.size())
        throw DimensionError("labels must match dataset rows");
    std::vector<char> robust(inputs.rows(), 1);
    {
        const std::vector<int> pred = detail::argmax_rows(forward_output(net, inputs));
        for (Eigen::Index i = 0; i < inputs.rows(); ++i)
            if (pred[i] != labels[i]) robust[i] = 0;
    }
    for (const auto& cfg : cfgs) {
        const Mat adv = pgd_attack_batch(net, inputs, labels, cfg);
        const std::vector<int> pred = detail::argmax_rows(forward_output(net, adv));
        for (Eigen::Index i = 0; i < inputs.rows(); ++i)
            if (pred[i] != labels[i]) robust[i] = 0;
    }
    long correct = 0;
    for (char r : robust) correct += r;
    return static_cast<double>(correct) / static_cast<double>(inputs.rows());
}

// Fraction of points still classified correctly after the attack. A point
// counts as robust only when both the attacked iterate and the clean input
// classify correctly (the attack may return either).
inline double robust_accuracy(const Network& net, const Mat& inputs, const std::vector<int>& labels,
                              const AttackConfig& cfg, const ThreadPool& pool = serial_pool()) {
    if (inputs.rows() == 0) throw DimensionError("empty dataset");
    if (static_cast<size_t>(inputs.rows()) != labels.size())
        throw DimensionError("labels must match dataset rows");
    const Eigen::Index n = inputs.rows();

    const Eigen::Index chunk = std::max<Eigen::Index>(1, (n + pool.size() - 1) / pool.size());
    const size_t chunks = static_cast<size_t>((n + chunk - 1) / chunk);
    std::vector<long> correct(chunks, 0);
    pool.parallel_for(chunks, [&](size_t ci) {
        const Eigen::Index begin = static_cast<Eigen::Index>(ci) * chunk;
        const Eigen::Index count = std::min(chunk, n - begin);
        const Mat block = inputs.middleRows(begin, count);
        const std::vector<int> block_labels(labels.begin() + begin,
                                            labels.begin() + begin + count);
        const Mat adv =
            pgd_attack_batch(net, block, block_labels, cfg, static_cast<uint64_t>(begin));
        const std::vector<int> pred_adv = detail::argmax_rows(forward_output(net, adv));
        const std::vector<int> pred_clean = detail::argmax_rows(forward_output(net, block));
        long c = 0;
        for (Eigen::Index i = 0; i < count; ++i)
            if (pred_adv[i] == block_labels[i] && pred_clean[i] == block_labels[i]) ++c;
        correct[ci] = c;
    });
    long total = 0;
    for (long c : correct) total += c;
    return static_cast<double>(total) / static_cast<double>(n);
}

} // namespace splinescope

#endif
