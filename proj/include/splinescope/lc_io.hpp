#ifndef SPLINESCOPE_LC_IO_HPP
#define SPLINESCOPE_LC_IO_HPP

#include "splinescope/deformation.hpp"
#include "splinescope/local_complexity.hpp"

#include <json.hpp>

#include <cstdio>
#include <ostream>
#include <utility>
#include <vector>

namespace splinescope {

namespace detail {
inline std::string lc_fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

// Shared aggregate schema: one row per (step or sweep position, class).
inline void write_lc_csv(const std::vector<std::pair<double, LCAggregate>>& rows,
                         std::ostream& os) {
    os << "step-or-t,class,mean,ci_lo,ci_hi\n";
    for (const auto& [at, agg] : rows)
        os << detail::lc_fmt(at) << ',' << point_class_name(agg.point_class) << ','
           << detail::lc_fmt(agg.mean) << ',' << detail::lc_fmt(agg.ci_lo) << ','
           << detail::lc_fmt(agg.ci_hi) << "\n";
}

inline nlohmann::json lc_aggregate_to_json(const LCAggregate& agg) {
    nlohmann::json j;
    j["class"] = point_class_name(agg.point_class);
    j["mean"] = agg.mean;
    j["stderr"] = agg.stderr_;
    j["ci_lo"] = agg.ci_lo;
    j["ci_hi"] = agg.ci_hi;
    j["per_point"] = agg.per_point;
    return j;
}

inline nlohmann::json shift_sweep_to_json(const std::vector<std::pair<double, double>>& sweep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [t, mean] : sweep) rows.push_back({{"t", t}, {"mean", mean}});
    return rows;
}

inline void write_deformation_csv(const DeformationReport& report, std::ostream& os) {
    os << "layer,avg_eccentricity,diameter\n";
    for (size_t l = 0; l < report.avg_eccentricity.size(); ++l)
        os << l << ',' << detail::lc_fmt(report.avg_eccentricity[l]) << ','
           << detail::lc_fmt(report.diameter[l]) << "\n";
}

} // namespace splinescope

#endif
