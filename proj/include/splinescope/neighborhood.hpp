#ifndef SPLINESCOPE_NEIGHBORHOOD_HPP
#define SPLINESCOPE_NEIGHBORHOOD_HPP

#include "splinescope/common.hpp"
#include "splinescope/rng.hpp"

#include <cstdint>

namespace splinescope {

struct ProbeConfig {
    int P = 25;        // neighborhood dimensionality
    double r = 0.005;  // radius
    uint64_t seed = 0;

    void validate() const {
        if (P < 1) throw DimensionError("probe P must be >= 1");
        if (!(r > 0.0)) throw DimensionError("probe radius must be positive");
    }
};

// Cross-polytope frame around a probe center: P orthonormal directions and
// the 2P vertices x +- r*v_p. Vertex rows are interleaved so that rows
// (2p, 2p+1) are an antipodal pair.
struct Neighborhood {
    Vec center;
    Mat directions; // P x D, orthonormal rows
    Mat vertices;   // 2P x D
};

inline Neighborhood neighborhood_with_directions(const Vec& x, const Mat& directions, double r) {
    if (directions.cols() != x.size())
        throw DimensionError("direction columns must match center dimension");
    if (!(r > 0.0)) throw DimensionError("probe radius must be positive");
    Neighborhood nb;
    nb.center = x;
    nb.directions = directions;
    const Eigen::Index p_count = directions.rows();
    nb.vertices.resize(2 * p_count, x.size());
    for (Eigen::Index p = 0; p < p_count; ++p) {
        nb.vertices.row(2 * p) = x.transpose() + r * directions.row(p);
        nb.vertices.row(2 * p + 1) = x.transpose() - r * directions.row(p);
    }
    return nb;
}

// P i.i.d. standard-normal vectors orthonormalized by modified Gram-Schmidt;
// a draw that collapses under projection is rejected and redrawn.
inline Neighborhood make_neighborhood(const Vec& x, const ProbeConfig& cfg) {
    cfg.validate();
    const Eigen::Index dim = x.size();
    if (cfg.P > dim)
        throw DimensionError("probe P (" + std::to_string(cfg.P) + ") exceeds input dimension (" +
                             std::to_string(dim) + ")");

    Rng rng(cfg.seed);
    Mat dirs(cfg.P, dim);
    for (int p = 0; p < cfg.P; ++p) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 64)
                throw DimensionError("failed to draw an independent probe direction");
            Vec v(dim);
            for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.normal();
            for (int q = 0; q < p; ++q) v -= dirs.row(q).dot(v) * dirs.row(q).transpose();
            const double norm = v.norm();
            if (norm > 1e-10) {
                dirs.row(p) = v.transpose() / norm;
                break;
            }
        }
    }
    return neighborhood_with_directions(x, dirs, cfg.r);
}

} // namespace splinescope

#endif
