#ifndef SPLINESCOPE_GEOMETRY2D_HPP
#define SPLINESCOPE_GEOMETRY2D_HPP

#include "splinescope/common.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace splinescope {

// Convex polygon in slice coordinates, vertices counter-clockwise.
using Polygon = std::vector<Vec2>;

struct Rect {
    double lo_u = 0.0, lo_v = 0.0, hi_u = 0.0, hi_v = 0.0;

    double width() const { return hi_u - lo_u; }
    double height() const { return hi_v - lo_v; }
    double area() const { return width() * height(); }
    bool contains(const Vec2& p) const {
        return p.x() >= lo_u && p.x() <= hi_u && p.y() >= lo_v && p.y() <= hi_v;
    }
    Polygon corners() const {
        return {Vec2(lo_u, lo_v), Vec2(hi_u, lo_v), Vec2(hi_u, hi_v), Vec2(lo_u, hi_v)};
    }
};

inline double polygon_area(const Polygon& poly) {
    double twice = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        twice += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * twice;
}

inline Vec2 polygon_centroid(const Polygon& poly) {
    // area-weighted centroid; falls back to the vertex mean for degenerate input
    double twice = 0.0;
    Vec2 acc(0.0, 0.0);
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        const double cross = a.x() * b.y() - b.x() * a.y();
        twice += cross;
        acc += (a + b) * cross;
    }
    if (std::abs(twice) < 1e-300) {
        Vec2 mean(0.0, 0.0);
        for (const auto& p : poly) mean += p;
        return mean / static_cast<double>(n);
    }
    return acc / (3.0 * twice);
}

inline bool point_in_polygon(const Polygon& poly, const Vec2& p, double eps = 1e-12) {
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        if (cross < -eps) return false; // CCW polygons keep interior to the left
    }
    return true;
}

// Result of cutting a convex polygon with the oriented line
// a*u + b*v + c = 0 (gradient normalized by the caller). `chord` is the
// segment of the line inside the polygon when both sides are non-empty.
struct PolygonSplit {
    Polygon neg;
    Polygon pos;
    Vec2 chord_a{0.0, 0.0};
    Vec2 chord_b{0.0, 0.0};
    bool has_chord = false;
};

inline PolygonSplit split_polygon(const Polygon& poly, double a, double b, double c,
                                  double eps = 1e-12) {
    PolygonSplit out;
    const size_t n = poly.size();
    std::vector<double> side(n);
    for (size_t i = 0; i < n; ++i) side[i] = a * poly[i].x() + b * poly[i].y() + c;

    std::vector<Vec2> crossings;
    for (size_t i = 0; i < n; ++i) {
        const size_t j = (i + 1) % n;
        const double si = side[i];
        const double sj = side[j];
        if (si >= -eps) out.pos.push_back(poly[i]);
        if (si <= eps) out.neg.push_back(poly[i]);
        const bool on_i = std::abs(si) <= eps;
        const bool on_j = std::abs(sj) <= eps;
        if (on_i) crossings.push_back(poly[i]);
        if (!on_i && !on_j && ((si > 0.0) != (sj > 0.0))) {
            const double t = si / (si - sj);
            const Vec2 p = poly[i] + t * (poly[j] - poly[i]);
            out.pos.push_back(p);
            out.neg.push_back(p);
            crossings.push_back(p);
        }
    }
    if (crossings.size() >= 2) {
        // farthest pair among the (few) recorded crossing points
        double best = -1.0;
        for (size_t i = 0; i < crossings.size(); ++i)
            for (size_t j = i + 1; j < crossings.size(); ++j) {
                const double d = (crossings[i] - crossings[j]).squaredNorm();
                if (d > best) {
                    best = d;
                    out.chord_a = crossings[i];
                    out.chord_b = crossings[j];
                }
            }
        out.has_chord = best > 0.0;
    }
    return out;
}

inline bool segments_share_point(const Vec2& a, const Vec2& b, double tol) {
    return (a - b).norm() <= tol;
}

// Clip a segment against a half-plane a*u + b*v + c >= 0. Returns false if
// nothing remains.
inline bool clip_segment_halfplane(Vec2& p, Vec2& q, double a, double b, double c) {
    double sp = a * p.x() + b * p.y() + c;
    double sq = a * q.x() + b * q.y() + c;
    if (sp < 0.0 && sq < 0.0) return false;
    if (sp >= 0.0 && sq >= 0.0) return true;
    const double t = sp / (sp - sq);
    const Vec2 cut = p + t * (q - p);
    if (sp < 0.0)
        p = cut;
    else
        q = cut;
    return true;
}

} // namespace splinescope

#endif
