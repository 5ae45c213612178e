#ifndef SPLINESCOPE_NETWORK_HPP
#define SPLINESCOPE_NETWORK_HPP

#include "splinescope/activation.hpp"
#include "splinescope/common.hpp"
#include "splinescope/rng.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace splinescope {

// Batch-norm statistics and affine parameters for one layer. In eval mode
// the layer is affine: z ->  gamma * (z - mu) / sigma + beta.
struct BNParams {
    Vec mu;
    Vec sigma;
    Vec gamma;
    Vec beta;
    double epsilon_stab = 1e-5;

    void validate(Eigen::Index dim) const {
        if (mu.size() != dim || sigma.size() != dim || gamma.size() != dim || beta.size() != dim)
            throw DimensionError("bn parameter vectors must all have the layer's output dimension");
        if (!(epsilon_stab > 0.0))
            throw DimensionError("bn epsilon_stab must be positive");
        if ((sigma.array() < epsilon_stab).any())
            throw DimensionError("bn sigma entries must be >= epsilon_stab");
    }
};

struct Layer {
    Mat weight; // out_dim x in_dim
    Vec bias;   // out_dim
    Activation act;
    std::optional<BNParams> bn;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }

    void validate() const {
        if (weight.rows() < 1 || weight.cols() < 1)
            throw DimensionError("layer weight must be at least 1x1");
        if (bias.size() != weight.rows())
            throw DimensionError("layer bias length must equal weight row count");
        if (bn) bn->validate(weight.rows());
    }

    // Eval-mode batch norm folded into an equivalent (scale, shift) on the
    // raw pre-activation; identity scale when no bn is attached.
    std::pair<Vec, Vec> bn_fold() const {
        if (!bn) return {Vec::Ones(out_dim()), Vec::Zero(out_dim())};
        const Vec scale = bn->gamma.array() / bn->sigma.array();
        const Vec shift = bn->beta.array() - scale.array() * bn->mu.array();
        return {scale, shift};
    }

    // Effective affine parameters seen by the activation in eval mode.
    std::pair<Mat, Vec> effective_affine() const {
        if (!bn) return {weight, bias};
        auto [scale, shift] = bn_fold();
        Mat w = scale.asDiagonal() * weight;
        Vec b = scale.array() * bias.array() + shift.array();
        return {std::move(w), std::move(b)};
    }
};

struct Network {
    std::vector<Layer> layers;
    int input_dim = 0;

    Eigen::Index output_dim() const {
        return layers.empty() ? 0 : layers.back().out_dim();
    }
    size_t depth() const { return layers.size(); }

    void validate() const {
        if (layers.empty()) throw DimensionError("network has no layers");
        if (input_dim < 1) throw DimensionError("input_dim must be >= 1");
        Eigen::Index prev = input_dim;
        for (size_t k = 0; k < layers.size(); ++k) {
            layers[k].validate();
            if (layers[k].in_dim() != prev)
                throw DimensionError("layer " + std::to_string(k) + " input dim " +
                                     std::to_string(layers[k].in_dim()) + " does not chain from " +
                                     std::to_string(prev));
            prev = layers[k].out_dim();
        }
    }

    bool piecewise_linear() const {
        for (const auto& l : layers)
            if (!l.act.piecewise_linear()) return false;
        return true;
    }
};

// Pre-activations per layer (after eval-mode BN where present, before the
// activation) plus the final output. These are the values whose sign
// changes the probes count.
struct ForwardTrace {
    std::vector<Mat> preacts; // one entry per layer, batch x out_dim
    Mat output;               // batch x out_dim of last layer
};

// Raw pre-activation of one layer with eval-mode BN applied.
inline Mat layer_preact(const Layer& layer, const Mat& input) {
    Mat raw = input * layer.weight.transpose();
    raw.rowwise() += layer.bias.transpose();
    if (layer.bn) {
        auto [scale, shift] = layer.bn_fold();
        raw.array().rowwise() *= scale.transpose().array();
        raw.array().rowwise() += shift.transpose().array();
    }
    return raw;
}

inline ForwardTrace forward(const Network& net, const Mat& batch) {
    if (batch.cols() != net.input_dim)
        throw DimensionError("batch has " + std::to_string(batch.cols()) +
                             " columns, network expects " + std::to_string(net.input_dim));
    if (!all_finite(batch)) throw DimensionError("batch contains non-finite entries");
    ForwardTrace trace;
    trace.preacts.reserve(net.layers.size());
    Mat cur = batch;
    for (const auto& layer : net.layers) {
        Mat pre = layer_preact(layer, cur);
        cur = layer.act.apply(pre);
        trace.preacts.push_back(std::move(pre));
    }
    trace.output = std::move(cur);
    return trace;
}

inline Mat forward_output(const Network& net, const Mat& batch) {
    if (batch.cols() != net.input_dim)
        throw DimensionError("batch has " + std::to_string(batch.cols()) +
                             " columns, network expects " + std::to_string(net.input_dim));
    Mat cur = batch;
    for (const auto& layer : net.layers)
        cur = layer.act.apply(layer_preact(layer, cur));
    return cur;
}

struct Gradients {
    std::vector<Mat> weight;
    std::vector<Vec> bias;

    static Gradients zeros_like(const Network& net) {
        Gradients g;
        g.weight.reserve(net.layers.size());
        g.bias.reserve(net.layers.size());
        for (const auto& l : net.layers) {
            g.weight.emplace_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
            g.bias.emplace_back(Vec::Zero(l.bias.size()));
        }
        return g;
    }
};

// Forward pass retaining everything a reverse pass needs.
struct ForwardWorkspace {
    std::vector<Mat> inputs;  // activation input (previous layer output) per layer
    std::vector<Mat> preacts; // after eval-mode BN, before activation
    Mat output;
};

inline ForwardWorkspace forward_workspace(const Network& net, const Mat& batch) {
    ForwardWorkspace ws;
    const size_t depth = net.layers.size();
    ws.inputs.resize(depth);
    ws.preacts.resize(depth);
    Mat cur = batch;
    for (size_t k = 0; k < depth; ++k) {
        ws.inputs[k] = cur;
        ws.preacts[k] = layer_preact(net.layers[k], cur);
        cur = net.layers[k].act.apply(ws.preacts[k]);
    }
    ws.output = std::move(cur);
    return ws;
}

// Reverse-mode pass over a prepared workspace. Parameter gradients (when
// requested) are summed over the batch; the return value is the batch of
// input gradients. BN layers differentiate in eval mode, i.e. mu/sigma are
// treated as constants; gamma/beta are not trained.
inline Mat backward_from_workspace(const Network& net, const ForwardWorkspace& ws,
                                   const Mat& cotangent, Gradients* param_grads = nullptr) {
    if (cotangent.rows() != ws.output.rows() || cotangent.cols() != net.output_dim())
        throw DimensionError("cotangent shape must be batch x output_dim");
    const size_t depth = net.layers.size();
    Mat grad = cotangent; // d loss / d activation-output of layer k
    for (size_t ri = 0; ri < depth; ++ri) {
        const size_t k = depth - 1 - ri;
        const Layer& layer = net.layers[k];
        Mat gz = grad.cwiseProduct(layer.act.apply_derivative(ws.preacts[k]));
        if (layer.bn) {
            auto [scale, shift] = layer.bn_fold();
            (void)shift;
            gz.array().rowwise() *= scale.transpose().array();
        }
        if (param_grads) {
            param_grads->weight[k] += gz.transpose() * ws.inputs[k];
            param_grads->bias[k] += gz.colwise().sum().transpose();
        }
        grad = gz * layer.weight;
    }
    return grad;
}

inline Mat backward_batch(const Network& net, const Mat& batch, const Mat& cotangent,
                          Gradients* param_grads = nullptr) {
    const ForwardWorkspace ws = forward_workspace(net, batch);
    return backward_from_workspace(net, ws, cotangent, param_grads);
}

inline std::pair<Vec, Gradients> backward(const Network& net, const Vec& x, const Vec& cotangent) {
    Gradients grads = Gradients::zeros_like(net);
    Mat input_grad = backward_batch(net, x.transpose(), cotangent.transpose(), &grads);
    return {input_grad.row(0).transpose(), grads};
}

// Fan-in-scaled uniform init: weights and biases ~ U[-1/sqrt(in), 1/sqrt(in)],
// then both multiplied by `scale`. scale=1 is the baseline; large scales
// reproduce the scaled-initialization runs.
inline Network init_network(const std::vector<int>& dims, Activation hidden_act,
                            uint64_t seed, double scale = 1.0) {
    if (dims.size() < 2) throw DimensionError("architecture needs at least input and output dims");
    if (!(scale > 0.0)) throw DimensionError("init scale must be positive");
    for (int d : dims)
        if (d < 1) throw DimensionError("all layer sizes must be >= 1");

    Rng rng(seed);
    Network net;
    net.input_dim = dims.front();
    net.layers.reserve(dims.size() - 1);
    for (size_t k = 0; k + 1 < dims.size(); ++k) {
        const int in = dims[k];
        const int out = dims[k + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer layer;
        layer.weight.resize(out, in);
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j)
                layer.weight(i, j) = scale * rng.uniform(-bound, bound);
        layer.bias.resize(out);
        for (int i = 0; i < out; ++i) layer.bias(i) = scale * rng.uniform(-bound, bound);
        layer.act = (k + 2 < dims.size()) ? hidden_act : Activation::identity();
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

// Training-mode batch norm: normalizes `preact_raw` by the mini-batch
// mean/std (biased, 1/N) and folds the stabilizer into sigma. The layer's
// stored statistics are updated as a plain running average over calls.
inline Mat bn_apply_train(Layer& layer, const Mat& preact_raw, long& bn_batches_seen) {
    if (!layer.bn) throw DimensionError("bn_apply requires a bn-equipped layer");
    if (preact_raw.rows() < 2)
        throw DimensionError("training-mode bn needs a batch of size >= 2");
    BNParams& bn = *layer.bn;
    const double n = static_cast<double>(preact_raw.rows());
    Vec mu = preact_raw.colwise().mean();
    Vec var = ((preact_raw.rowwise() - mu.transpose()).array().square().colwise().sum() / n)
                  .transpose();
    Vec sigma = (var.array() + bn.epsilon_stab * bn.epsilon_stab).sqrt();

    // plain running average of the per-batch statistics
    const double t = static_cast<double>(bn_batches_seen);
    bn.mu = (bn.mu * t + mu) / (t + 1.0);
    bn.sigma = (bn.sigma * t + sigma) / (t + 1.0);
    ++bn_batches_seen;

    Mat out = preact_raw;
    out.array().rowwise() -= mu.transpose().array();
    out.array().rowwise() /= sigma.transpose().array();
    out.array().rowwise() *= bn.gamma.transpose().array();
    out.array().rowwise() += bn.beta.transpose().array();
    return out;
}

// Eval-mode batch norm on a raw pre-activation.
inline Mat bn_apply(const Layer& layer, const Mat& preact_raw) {
    if (!layer.bn) throw DimensionError("bn_apply requires a bn-equipped layer");
    Mat out = preact_raw;
    auto [scale, shift] = layer.bn_fold();
    out.array().rowwise() *= scale.transpose().array();
    out.array().rowwise() += shift.transpose().array();
    return out;
}

// Identity behind batch norm's placement of hyperplanes: with mu_k set to
// the mean of <w_k, v> over the points, the mean squared point-to-hyperplane
// distance equals sigma_k^2 / ||w_k||^2. Returns (lhs, rhs).
inline std::pair<double, double> bn_distance_check(const Network& net, size_t layer_index,
                                                   Eigen::Index neuron, const Mat& points) {
    if (layer_index >= net.layers.size()) throw DimensionError("layer index out of range");
    const Layer& layer = net.layers[layer_index];
    if (neuron < 0 || neuron >= layer.out_dim()) throw DimensionError("neuron index out of range");
    if (points.cols() != layer.in_dim())
        throw DimensionError("points must live in the layer's input space");
    const Vec w = layer.weight.row(neuron).transpose();
    const double w_norm2 = w.squaredNorm();
    if (!(w_norm2 > 0.0)) throw DimensionError("bn_distance_check requires a nonzero weight row");

    const Vec proj = points * w;
    const double mu = proj.mean();
    const double n = static_cast<double>(points.rows());
    const double sigma2 = (proj.array() - mu).square().sum() / n;

    const double lhs = ((proj.array() - mu).square() / w_norm2).sum() / n;
    const double rhs = sigma2 / w_norm2;
    return {lhs, rhs};
}

} // namespace splinescope

#endif
