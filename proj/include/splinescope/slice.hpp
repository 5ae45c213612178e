#ifndef SPLINESCOPE_SLICE_HPP
#define SPLINESCOPE_SLICE_HPP

#include "splinescope/geometry2d.hpp"
#include "splinescope/network.hpp"
#include "splinescope/threadpool.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace splinescope {

// 2D affine slice of input space: x(u) = origin + basis * u, with an
// axis-aligned working rectangle in slice coordinates.
struct Slice {
    Vec origin;
    Mat basis; // D x 2, orthonormal columns
    Rect bounds;

    Vec2 project(const Vec& p) const {
        return (basis.transpose() * (p - origin)).head<2>();
    }
    Vec lift(const Vec2& u) const { return origin + basis * u; }
};

inline Slice slice_through(const Vec& p0, const Vec& p1, const Vec& p2, double margin) {
    if (p0.size() != p1.size() || p0.size() != p2.size())
        throw DimensionError("slice anchors must share a dimension");
    Vec e1 = p1 - p0;
    Vec e2 = p2 - p0;
    const double n1 = e1.norm();
    if (n1 < 1e-12) throw DimensionError("slice anchors p0 and p1 coincide");
    e1 /= n1;
    e2 -= e1.dot(e2) * e1;
    const double n2 = e2.norm();
    if (n2 < 1e-12) throw DimensionError("slice anchors are collinear");
    e2 /= n2;

    Slice slice;
    slice.origin = (p0 + p1 + p2) / 3.0;
    slice.basis.resize(p0.size(), 2);
    slice.basis.col(0) = e1;
    slice.basis.col(1) = e2;

    double lo_u = 0, hi_u = 0, lo_v = 0, hi_v = 0;
    bool first = true;
    for (const Vec* p : {&p0, &p1, &p2}) {
        const Vec2 u = slice.project(*p);
        if (first) {
            lo_u = hi_u = u.x();
            lo_v = hi_v = u.y();
            first = false;
        } else {
            lo_u = std::min(lo_u, u.x());
            hi_u = std::max(hi_u, u.x());
            lo_v = std::min(lo_v, u.y());
            hi_v = std::max(hi_v, u.y());
        }
    }
    slice.bounds = {lo_u - margin, lo_v - margin, hi_u + margin, hi_v + margin};
    return slice;
}

// Axis-aligned slice of a 2D input space (basis = identity).
inline Slice plane_slice(const Rect& bounds) {
    Slice slice;
    slice.origin = Vec::Zero(2);
    slice.basis = Mat::Identity(2, 2);
    slice.bounds = bounds;
    return slice;
}

struct Region {
    Polygon polygon; // convex, CCW
    // Activation side per processed layer, 1 = positive half-space;
    // Identity layers contribute an empty entry.
    std::vector<std::vector<uint8_t>> pattern;
    Mat A; // output_dim x 2 affine map on this region
    Vec c;
};

// One chord of a neuron's zero-set through a region, kept for rendering
// and for exact crossing counts on the slice.
struct TaggedSegment {
    int layer = 0;
    int neuron = 0;
    Vec2 a{0.0, 0.0};
    Vec2 b{0.0, 0.0};
};

struct SlicePartition {
    Slice slice;
    std::vector<Region> regions;
    int layer_count_used = 0;
    std::vector<TaggedSegment> cuts;
};

namespace detail {

struct WorkRegion {
    Polygon poly;
    Mat A;
    Vec c;
    std::vector<std::vector<uint8_t>> pattern;
};

// Split every piece of `frontier` by the line g.u + h = 0, tagging chords.
inline void split_frontier(std::vector<Polygon>& frontier, const Vec2& g, double h, int layer,
                           int neuron, double area_eps, std::vector<TaggedSegment>& cuts) {
    const double len = g.norm();
    if (len < 1e-14) return; // line at infinity: constant sign inside the slice
    const double a = g.x() / len;
    const double b = g.y() / len;
    const double c = h / len;

    std::vector<Polygon> next;
    next.reserve(frontier.size() + 4);
    for (auto& piece : frontier) {
        PolygonSplit split = split_polygon(piece, a, b, c);
        const double neg_area = split.neg.size() >= 3 ? polygon_area(split.neg) : 0.0;
        const double pos_area = split.pos.size() >= 3 ? polygon_area(split.pos) : 0.0;
        if (neg_area > area_eps && pos_area > area_eps) {
            if (split.has_chord)
                cuts.push_back({layer, neuron, split.chord_a, split.chord_b});
            next.push_back(std::move(split.neg));
            next.push_back(std::move(split.pos));
        } else {
            // sliver below resolution: keep the parent on the dominant side
            next.push_back(std::move(piece));
        }
    }
    frontier = std::move(next);
}

} // namespace detail

// Exact spline partition of the network restricted to the slice, by
// iterative convex subdivision. Within a region the map into every layer
// is affine, so each neuron contributes a single line; children inherit
// the activation slopes read off at their centroid. Only piecewise-linear
// activations are supported.
//
// With `up_to_layer` = k, hyperplanes of layers 1..k are applied and each
// region's (A, c) maps slice coordinates to the output of layer k; by
// default all layers are processed and (A, c) is the network's output map.
inline SlicePartition compute_partition(const Network& net, const Slice& slice,
                                        std::optional<int> up_to_layer = std::nullopt,
                                        const ThreadPool& pool = serial_pool()) {
    net.validate();
    for (const auto& layer : net.layers)
        if (!layer.act.piecewise_linear())
            throw UnsupportedError("exact partitions require piecewise-linear activations (got " +
                                   layer.act.name() + ")");
    if (slice.basis.rows() != net.input_dim)
        throw DimensionError("slice basis dimension does not match network input");
    const int total_layers = static_cast<int>(net.layers.size());
    const int layers_used = up_to_layer ? std::clamp(*up_to_layer, 0, total_layers) : total_layers;
    const double area_eps = 1e-12 * slice.bounds.area();

    SlicePartition part;
    part.slice = slice;
    part.layer_count_used = layers_used;

    std::vector<detail::WorkRegion> work;
    work.push_back({slice.bounds.corners(), slice.basis, slice.origin, {}});

    for (int k = 0; k < layers_used; ++k) {
        const Layer& layer = net.layers[k];
        auto [w_eff, b_eff] = layer.effective_affine();

        std::vector<std::vector<detail::WorkRegion>> children(work.size());
        std::vector<std::vector<TaggedSegment>> child_cuts(work.size());
        pool.parallel_for(work.size(), [&](size_t ri) {
            detail::WorkRegion& region = work[ri];
            const Mat lines_g = w_eff * region.A; // out x 2
            const Vec lines_h = w_eff * region.c + b_eff;

            std::vector<Polygon> frontier{std::move(region.poly)};
            if (layer.act.kind != ActKind::Identity) {
                for (Eigen::Index i = 0; i < lines_g.rows(); ++i)
                    detail::split_frontier(frontier, lines_g.row(i).transpose(), lines_h(i), k,
                                           static_cast<int>(i), area_eps, child_cuts[ri]);
            }

            children[ri].reserve(frontier.size());
            for (auto& poly : frontier) {
                detail::WorkRegion child;
                std::vector<uint8_t> active;
                Vec slopes;
                if (layer.act.kind == ActKind::Identity) {
                    slopes = Vec::Ones(lines_g.rows());
                } else {
                    const Vec2 uc = polygon_centroid(poly);
                    const Vec pre = lines_g * uc + lines_h;
                    active.resize(pre.size());
                    slopes.resize(pre.size());
                    for (Eigen::Index i = 0; i < pre.size(); ++i) {
                        const bool positive = pre(i) >= 0.0;
                        active[i] = positive ? 1 : 0;
                        slopes(i) = positive ? layer.act.slope_pos() : layer.act.slope_neg();
                    }
                }
                child.poly = std::move(poly);
                child.A = slopes.asDiagonal() * lines_g;
                child.c = slopes.asDiagonal() * lines_h;
                child.pattern = region.pattern;
                child.pattern.push_back(std::move(active));
                children[ri].push_back(std::move(child));
            }
        });

        std::vector<detail::WorkRegion> next;
        for (auto& group : children)
            for (auto& child : group) next.push_back(std::move(child));
        for (auto& group : child_cuts)
            for (auto& cut : group) part.cuts.push_back(cut);
        work = std::move(next);
    }

    part.regions.reserve(work.size());
    for (auto& wr : work) {
        Region region;
        region.polygon = std::move(wr.poly);
        region.pattern = std::move(wr.pattern);
        region.A = std::move(wr.A);
        region.c = std::move(wr.c);
        part.regions.push_back(std::move(region));
    }
    return part;
}

struct RegionStats {
    size_t region_count = 0;
    std::vector<double> areas;
    std::vector<double> slope_fro; // Frobenius norm of each region's A
    double total_area = 0.0;
};

inline RegionStats region_stats(const SlicePartition& part) {
    RegionStats stats;
    stats.region_count = part.regions.size();
    stats.areas.reserve(part.regions.size());
    stats.slope_fro.reserve(part.regions.size());
    for (const auto& region : part.regions) {
        const double area = polygon_area(region.polygon);
        stats.areas.push_back(area);
        stats.slope_fro.push_back(region.A.norm());
        stats.total_area += area;
    }
    return stats;
}

// Regions per unit area, binned by region centroid.
struct DensityMap {
    Rect bounds;
    int nx = 0, ny = 0;
    std::vector<double> cells;
};

inline DensityMap region_density(const SlicePartition& part, int nx, int ny) {
    if (nx < 1 || ny < 1) throw DimensionError("density grid must be at least 1x1");
    DensityMap map;
    map.bounds = part.slice.bounds;
    map.nx = nx;
    map.ny = ny;
    map.cells.assign(static_cast<size_t>(nx) * ny, 0.0);
    const double cell_area = map.bounds.area() / (static_cast<double>(nx) * ny);
    for (const auto& region : part.regions) {
        const Vec2 c = polygon_centroid(region.polygon);
        int ix = static_cast<int>((c.x() - map.bounds.lo_u) / map.bounds.width() * nx);
        int iy = static_cast<int>((c.y() - map.bounds.lo_v) / map.bounds.height() * ny);
        ix = std::clamp(ix, 0, nx - 1);
        iy = std::clamp(iy, 0, ny - 1);
        map.cells[static_cast<size_t>(iy) * nx + ix] += 1.0 / cell_area;
    }
    return map;
}

using Segment = std::pair<Vec2, Vec2>;

// Locus where logits `class_a` and `class_b` are equal, clipped per region.
inline std::vector<Segment> decision_boundary(const SlicePartition& part, int class_a,
                                              int class_b) {
    if (part.regions.empty()) return {};
    const Eigen::Index out = part.regions.front().A.rows();
    if (class_a < 0 || class_b < 0 || class_a >= out || class_b >= out)
        throw DimensionError("decision boundary class index out of range");
    std::vector<Segment> segments;
    for (const auto& region : part.regions) {
        const Vec2 g(region.A(class_a, 0) - region.A(class_b, 0),
                     region.A(class_a, 1) - region.A(class_b, 1));
        const double h = region.c(class_a) - region.c(class_b);
        const double len = g.norm();
        if (len < 1e-14) continue; // logits parallel on this region
        const PolygonSplit split =
            split_polygon(region.polygon, g.x() / len, g.y() / len, h / len);
        if (split.has_chord && split.neg.size() >= 3 && split.pos.size() >= 3)
            segments.push_back({split.chord_a, split.chord_b});
    }
    return segments;
}

// Exact slice analogue of the probe count: the number of distinct neurons
// whose zero-set intersects the cross-polytope cross-section (the l1 ball
// of the given radius, axis-aligned in slice coordinates) around center_u.
inline int crossing_count_in_disk(const SlicePartition& part, const Vec2& center_u,
                                  double radius) {
    if (!(radius > 0.0)) throw DimensionError("disk radius must be positive");
    const Rect& bb = part.slice.bounds;
    if (center_u.x() - radius < bb.lo_u || center_u.x() + radius > bb.hi_u ||
        center_u.y() - radius < bb.lo_v || center_u.y() + radius > bb.hi_v)
        throw DimensionError("disk must lie within the slice bounds");

    // |u - cu| + |v - cv| <= r as four half-planes
    const double cu = center_u.x();
    const double cv = center_u.y();
    const double halfplanes[4][3] = {
        {-1.0, -1.0, cu + cv + radius},
        {1.0, -1.0, -cu + cv + radius},
        {-1.0, 1.0, cu - cv + radius},
        {1.0, 1.0, -cu - cv + radius},
    };

    std::set<std::pair<int, int>> crossed;
    for (const auto& cut : part.cuts) {
        if (crossed.count({cut.layer, cut.neuron})) continue;
        Vec2 p = cut.a;
        Vec2 q = cut.b;
        bool alive = true;
        for (const auto& hp : halfplanes) {
            if (!clip_segment_halfplane(p, q, hp[0], hp[1], hp[2])) {
                alive = false;
                break;
            }
        }
        if (alive) crossed.insert({cut.layer, cut.neuron});
    }
    return static_cast<int>(crossed.size());
}

} // namespace splinescope

#endif
