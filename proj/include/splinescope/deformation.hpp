#ifndef SPLINESCOPE_DEFORMATION_HPP
#define SPLINESCOPE_DEFORMATION_HPP

#include "splinescope/local_complexity.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace splinescope {

// How much each layer distorts the probe neighborhood, measured on the
// graph over the 2P embedded vertices where every pair is adjacent except
// the antipodal ones. Entry 0 is the input space, entry l the image after
// layer l. Growth of these numbers bounds how far the convex-hull
// approximation can be trusted through depth.
struct DeformationReport {
    std::vector<double> avg_eccentricity;
    std::vector<double> diameter;
};

namespace detail {

// Shortest paths by Floyd-Warshall; the graphs are small (2P nodes) and
// dense, so this is the simplest correct choice.
inline void graph_stats(const Mat& verts, double& avg_ecc, double& diam) {
    const Eigen::Index n = verts.rows();
    const double inf = std::numeric_limits<double>::infinity();
    Mat dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const bool antipodal = (i / 2 == j / 2);
            const double d = antipodal ? inf : (verts.row(i) - verts.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double dik = dist(i, k);
            if (dik == inf) continue;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double alt = dik + dist(k, j);
                if (alt < dist(i, j)) dist(i, j) = alt;
            }
        }
    double sum = 0.0;
    diam = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ecc = dist.row(i).maxCoeff();
        sum += ecc;
        if (ecc > diam) diam = ecc;
    }
    // the mean of values <= diam cannot exceed diam; keep that exact under rounding
    avg_ecc = std::min(sum / static_cast<double>(n), diam);
}

} // namespace detail

inline DeformationReport deformation(const Network& net, const Neighborhood& nb) {
    net.validate();
    DeformationReport report;
    report.avg_eccentricity.reserve(net.layers.size() + 1);
    report.diameter.reserve(net.layers.size() + 1);

    Mat vertices = nb.vertices;
    double ecc = 0.0, diam = 0.0;
    detail::graph_stats(vertices, ecc, diam);
    report.avg_eccentricity.push_back(ecc);
    report.diameter.push_back(diam);

    for (const auto& layer : net.layers) {
        vertices = layer.act.apply(layer_preact(layer, vertices));
        detail::graph_stats(vertices, ecc, diam);
        report.avg_eccentricity.push_back(ecc);
        report.diameter.push_back(diam);
    }
    return report;
}

inline DeformationReport deformation(const Network& net, const Vec& x, const ProbeConfig& cfg) {
    return deformation(net, make_neighborhood(x, cfg));
}

} // namespace splinescope

#endif
