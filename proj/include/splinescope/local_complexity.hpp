#ifndef SPLINESCOPE_LOCAL_COMPLEXITY_HPP
#define SPLINESCOPE_LOCAL_COMPLEXITY_HPP

#include "splinescope/neighborhood.hpp"
#include "splinescope/network.hpp"
#include "splinescope/threadpool.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace splinescope {

namespace detail {
// Test hook for the validation battery's mutation check; never set in
// normal operation.
inline bool corrupt_sign_predicate = false;
} // namespace detail

// Count of neurons (columns) whose pre-activation is not of one strict sign
// over the vertex set. An exact zero counts as a crossing, which keeps the
// zero-bias recovery check exact instead of float-luck dependent.
inline int layer_crossings(const Mat& preacts_at_vertices) {
    if (!all_finite(preacts_at_vertices))
        throw DimensionError("non-finite pre-activations in crossing count");
    int count = 0;
    for (Eigen::Index j = 0; j < preacts_at_vertices.cols(); ++j) {
        const double lo = preacts_at_vertices.col(j).minCoeff();
        const double hi = preacts_at_vertices.col(j).maxCoeff();
        if (detail::corrupt_sign_predicate) {
            if (lo > 0.0) ++count; // inverted logic, counts constant-sign columns
        } else {
            if (lo <= 0.0 && hi >= 0.0) ++count;
        }
    }
    return count;
}

// Per-probe crossing counts. Layers are indexed as in the network; the
// final layer is excluded when it is the Identity logit map, since it
// carries no nonlinearity.
struct LCReport {
    std::vector<int> per_layer;
    long total = 0;
    ProbeConfig config;
    Vec center;
};

inline size_t lc_layer_count(const Network& net) {
    size_t n = net.layers.size();
    if (n > 0 && net.layers.back().act.kind == ActKind::Identity) --n;
    return n;
}

inline LCReport local_complexity(const Network& net, const Neighborhood& nb,
                                 const ProbeConfig& cfg) {
    net.validate();
    if (nb.center.size() != net.input_dim)
        throw DimensionError("probe center dimension does not match network input");
    const size_t probed = lc_layer_count(net);

    LCReport report;
    report.config = cfg;
    report.center = nb.center;
    report.per_layer.reserve(probed);

    Mat vertices = nb.vertices;
    for (size_t k = 0; k < probed; ++k) {
        const Layer& layer = net.layers[k];
        Mat pre = layer_preact(layer, vertices);
        if (!all_finite(pre))
            throw DimensionError("non-finite activations at layer " + std::to_string(k));
        report.per_layer.push_back(layer_crossings(pre));
        if (k + 1 < probed) vertices = layer.act.apply(pre);
    }
    report.total = 0;
    for (int n : report.per_layer) report.total += n;
    return report;
}

inline LCReport local_complexity(const Network& net, const Vec& x, const ProbeConfig& cfg) {
    return local_complexity(net, make_neighborhood(x, cfg), cfg);
}

enum class PointClass { train, test, random_points };

inline std::string point_class_name(PointClass c) {
    switch (c) {
    case PointClass::train: return "train";
    case PointClass::test: return "test";
    case PointClass::random_points: return "random";
    }
    return "?";
}

// Mean and 99% normal-approximation confidence interval over per-point
// totals. One independent neighborhood per point, seed derived from
// (cfg.seed, point index) so batches are order-stable.
struct LCAggregate {
    double mean = 0.0;
    double stderr_ = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::vector<long> per_point;
    std::vector<std::vector<int>> per_point_layers; // point-major crossing counts
    PointClass point_class = PointClass::train;
};

inline constexpr double kCi99Z = 2.576;

inline LCAggregate batch_lc(const Network& net, const Mat& points, const ProbeConfig& cfg,
                            PointClass point_class, const ThreadPool& pool = serial_pool()) {
    if (points.rows() < 2) throw DimensionError("batch_lc needs at least 2 points");
    LCAggregate agg;
    agg.point_class = point_class;
    agg.per_point.assign(points.rows(), 0);
    agg.per_point_layers.assign(points.rows(), {});
    pool.parallel_for(static_cast<size_t>(points.rows()), [&](size_t i) {
        ProbeConfig point_cfg = cfg;
        point_cfg.seed = derive_seed(cfg.seed, i);
        LCReport report = local_complexity(net, points.row(i).transpose(), point_cfg);
        agg.per_point[i] = report.total;
        agg.per_point_layers[i] = std::move(report.per_layer);
    });

    const double n = static_cast<double>(agg.per_point.size());
    double sum = 0.0;
    for (long v : agg.per_point) sum += static_cast<double>(v);
    agg.mean = sum / n;
    double ss = 0.0;
    for (long v : agg.per_point) {
        const double d = static_cast<double>(v) - agg.mean;
        ss += d * d;
    }
    agg.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    agg.ci_lo = agg.mean - kCi99Z * agg.stderr_;
    agg.ci_hi = agg.mean + kCi99Z * agg.stderr_;
    return agg;
}

// Mean LC along the segment (1-t)*start + t*end for t on a uniform grid.
// Each grid point is probed with `reps` independent neighborhoods.
inline std::vector<std::pair<double, double>> shift_sweep(const Network& net, const Vec& start,
                                                          const Vec& end, int steps,
                                                          const ProbeConfig& cfg, int reps = 8,
                                                          const ThreadPool& pool = serial_pool()) {
    if (steps < 2) throw DimensionError("shift_sweep needs at least 2 steps");
    if (start.size() != end.size() || start.size() != net.input_dim)
        throw DimensionError("shift_sweep endpoint dimensions must match network input");
    if (reps < 2) reps = 2;

    std::vector<std::pair<double, double>> out(steps);
    for (int s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
        const Vec center = (1.0 - t) * start + t * end;
        Mat batch(reps, center.size());
        for (int rep = 0; rep < reps; ++rep) batch.row(rep) = center.transpose();
        ProbeConfig step_cfg = cfg;
        step_cfg.seed = derive_seed(cfg.seed, static_cast<uint64_t>(s));
        const LCAggregate agg = batch_lc(net, batch, step_cfg, PointClass::random_points, pool);
        out[s] = {t, agg.mean};
    }
    return out;
}

} // namespace splinescope

#endif
