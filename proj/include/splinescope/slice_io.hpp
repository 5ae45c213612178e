#ifndef SPLINESCOPE_SLICE_IO_HPP
#define SPLINESCOPE_SLICE_IO_HPP

#include "splinescope/rng.hpp"
#include "splinescope/slice.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace splinescope {

// JSON schema:
//   {bounds: [lo_u, lo_v, hi_u, hi_v], basis: [[..],[..]], origin: [..],
//    regions: [{polygon: [[u,v],...], slope_fro: f64}, ...],
//    boundary: [[[u,v],[u,v]], ...]}
inline nlohmann::json partition_to_json(const SlicePartition& part,
                                        const std::vector<Segment>& boundary = {}) {
    nlohmann::json j;
    const Rect& b = part.slice.bounds;
    j["bounds"] = {b.lo_u, b.lo_v, b.hi_u, b.hi_v};
    nlohmann::json basis = nlohmann::json::array();
    for (Eigen::Index i = 0; i < part.slice.basis.rows(); ++i)
        basis.push_back({part.slice.basis(i, 0), part.slice.basis(i, 1)});
    j["basis"] = std::move(basis);
    nlohmann::json origin = nlohmann::json::array();
    for (Eigen::Index i = 0; i < part.slice.origin.size(); ++i)
        origin.push_back(part.slice.origin(i));
    j["origin"] = std::move(origin);

    nlohmann::json regions = nlohmann::json::array();
    for (const auto& region : part.regions) {
        nlohmann::json poly = nlohmann::json::array();
        for (const auto& p : region.polygon) poly.push_back({p.x(), p.y()});
        regions.push_back({{"polygon", std::move(poly)}, {"slope_fro", region.A.norm()}});
    }
    j["regions"] = std::move(regions);

    nlohmann::json bnd = nlohmann::json::array();
    for (const auto& seg : boundary)
        bnd.push_back({{seg.first.x(), seg.first.y()}, {seg.second.x(), seg.second.y()}});
    j["boundary"] = std::move(bnd);
    return j;
}

struct LoadedPartition {
    Rect bounds;
    std::vector<Polygon> polygons;
    std::vector<double> slope_fro;
    std::vector<Segment> boundary;
};

inline LoadedPartition partition_from_json(const nlohmann::json& j) {
    LoadedPartition out;
    try {
        const auto& b = j.at("bounds");
        out.bounds = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                      b.at(3).get<double>()};
        for (const auto& region : j.at("regions")) {
            Polygon poly;
            for (const auto& p : region.at("polygon"))
                poly.push_back(Vec2(p.at(0).get<double>(), p.at(1).get<double>()));
            out.polygons.push_back(std::move(poly));
            out.slope_fro.push_back(region.at("slope_fro").get<double>());
        }
        for (const auto& seg : j.at("boundary"))
            out.boundary.push_back({Vec2(seg.at(0).at(0).get<double>(), seg.at(0).at(1).get<double>()),
                                    Vec2(seg.at(1).at(0).get<double>(), seg.at(1).at(1).get<double>())});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("partition json: ") + e.what());
    }
    return out;
}

enum class SliceColorMode { random_fill, slope_norm };

namespace detail {

inline std::string svg_color(double r, double g, double b) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(r * 255.0),
                  static_cast<int>(g * 255.0), static_cast<int>(b * 255.0));
    return buf;
}

// blue -> white -> red ramp for slope norms
inline std::string slope_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    if (t < 0.5) {
        const double s = t * 2.0;
        return svg_color(0.2 + 0.8 * s, 0.3 + 0.7 * s, 1.0);
    }
    const double s = (t - 0.5) * 2.0;
    return svg_color(1.0, 1.0 - 0.7 * s, 1.0 - 0.8 * s);
}

} // namespace detail

inline std::string partition_to_svg(const SlicePartition& part,
                                    const std::vector<Segment>& boundary = {},
                                    SliceColorMode mode = SliceColorMode::random_fill,
                                    uint64_t color_seed = 0) {
    const Rect& b = part.slice.bounds;
    const double stroke = 0.002 * std::max(b.width(), b.height());
    std::string svg;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.17g %.17g %.17g %.17g\">\n",
                  b.lo_u, b.lo_v, b.width(), b.height());
    svg += buf;

    double max_fro = 0.0;
    if (mode == SliceColorMode::slope_norm)
        for (const auto& region : part.regions) max_fro = std::max(max_fro, region.A.norm());

    Rng rng(color_seed);
    for (const auto& region : part.regions) {
        std::string fill;
        if (mode == SliceColorMode::slope_norm) {
            fill = detail::slope_color(max_fro > 0.0 ? region.A.norm() / max_fro : 0.0);
        } else {
            fill = detail::svg_color(0.35 + 0.6 * rng.next_double(), 0.35 + 0.6 * rng.next_double(),
                                     0.35 + 0.6 * rng.next_double());
        }
        svg += "<polygon points=\"";
        for (const auto& p : region.polygon) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g ", p.x(), p.y());
            svg += buf;
        }
        std::snprintf(buf, sizeof buf, "\" fill=\"%s\" stroke=\"black\" stroke-width=\"%.17g\"/>\n",
                      fill.c_str(), stroke);
        svg += buf;
    }
    if (!boundary.empty()) {
        svg += "<path d=\"";
        for (const auto& seg : boundary) {
            std::snprintf(buf, sizeof buf, "M %.17g %.17g L %.17g %.17g ", seg.first.x(),
                          seg.first.y(), seg.second.x(), seg.second.y());
            svg += buf;
        }
        std::snprintf(buf, sizeof buf, "\" stroke=\"red\" fill=\"none\" stroke-width=\"%.17g\"/>\n",
                      3.0 * stroke);
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

enum class SliceFormat { json, svg };

inline void emit_partition(const SlicePartition& part, const std::string& path, SliceFormat format,
                           const std::vector<Segment>& boundary = {},
                           SliceColorMode mode = SliceColorMode::random_fill,
                           uint64_t color_seed = 0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    if (format == SliceFormat::json)
        os << partition_to_json(part, boundary).dump(); // full precision round-trip
    else
        os << partition_to_svg(part, boundary, mode, color_seed);
    os.flush();
    if (!os) throw IoError("failed writing '" + path + "'");
}

} // namespace splinescope

#endif
