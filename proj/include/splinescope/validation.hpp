#ifndef SPLINESCOPE_VALIDATION_HPP
#define SPLINESCOPE_VALIDATION_HPP

#include "splinescope/deformation.hpp"
#include "splinescope/local_complexity.hpp"
#include "splinescope/slice.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace splinescope {

// Built-in self checks, each with an oracle independent of the code path it
// exercises. `splinescope validate` prints one pass/fail line per entry.
struct ValidationCheck {
    std::string name;
    bool pass = false;
    std::string details;
};

namespace detail {

inline Network zero_bias_stack(int dim, int width, int depth, int out, uint64_t seed) {
    std::vector<int> dims{dim};
    for (int k = 0; k < depth; ++k) dims.push_back(width);
    dims.push_back(out);
    Network net = init_network(dims, Activation::identity(), seed);
    for (auto& layer : net.layers) layer.bias.setZero();
    return net;
}

inline size_t validation_grid_patterns(const Network& net, const Rect& box, int grid) {
    std::set<uint64_t> patterns;
    for (int gy = 0; gy < grid; ++gy) {
        Mat row(grid, 2);
        const double v = box.lo_v + box.height() * (gy + 0.5) / grid;
        for (int gx = 0; gx < grid; ++gx) {
            row(gx, 0) = box.lo_u + box.width() * (gx + 0.5) / grid;
            row(gx, 1) = v;
        }
        const ForwardTrace trace = forward(net, row);
        for (int gx = 0; gx < grid; ++gx) {
            uint64_t key = 0;
            int bit = 0;
            for (size_t k = 0; k < net.layers.size(); ++k) {
                if (net.layers[k].act.kind == ActKind::Identity) continue;
                for (Eigen::Index i = 0; i < trace.preacts[k].cols(); ++i, ++bit)
                    if (trace.preacts[k](gx, i) >= 0.0) key |= (uint64_t{1} << bit);
            }
            patterns.insert(key);
        }
    }
    return patterns.size();
}

} // namespace detail

inline std::vector<ValidationCheck> run_validation_battery(const std::string& inject_fault = "") {
    std::vector<ValidationCheck> checks;
    detail::corrupt_sign_predicate = (inject_fault == "sign");

    {
        // a zero-bias linear stack must report its full width at the origin
        // for any radius and neighborhood dimensionality
        ValidationCheck check{.name = "zero_bias_recovery"};
        const Network net = detail::zero_bias_stack(784, 200, 10, 10, 12345);
        bool ok = true;
        std::ostringstream details;
        for (double r : {1e-3, 1.0}) {
            for (int p : {2, 25}) {
                const LCReport report =
                    local_complexity(net, Vec::Zero(784), ProbeConfig{.P = p, .r = r, .seed = 7});
                for (int n : report.per_layer)
                    if (n != 200) ok = false;
                details << "r=" << r << ",P=" << p << ":total=" << report.total << " ";
            }
        }
        check.pass = ok;
        check.details = details.str();
        checks.push_back(check);
    }
    detail::corrupt_sign_predicate = false;

    {
        // LC decays when the probe center leaves the hyperplane-rich origin
        ValidationCheck check{.name = "shift_sweep_endpoints"};
        std::vector<int> dims{100, 60, 60, 60, 60, 60, 60, 60, 60, 10};
        const Network net = init_network(dims, Activation::leaky_relu(0.01), 99);
        const auto sweep = shift_sweep(net, Vec::Zero(100), Vec::Constant(100, 10.0), 3,
                                       ProbeConfig{.P = 10, .r = 1.0, .seed = 5}, 6);
        check.pass = sweep.front().second > sweep.back().second;
        std::ostringstream details;
        details << "lc(0)=" << sweep.front().second << " lc(1)=" << sweep.back().second;
        check.details = details.str();
        checks.push_back(check);
    }

    {
        // cross-polytope graph geometry in closed form at the input layer
        ValidationCheck check{.name = "eccentricity_closed_form"};
        Network identity_net;
        identity_net.input_dim = 8;
        for (int k = 0; k < 3; ++k)
            identity_net.layers.push_back(
                {Mat::Identity(8, 8), Vec::Zero(8), Activation::identity(), std::nullopt});
        const double r = 0.3;
        const DeformationReport report =
            deformation(identity_net, Vec::Zero(8), ProbeConfig{.P = 5, .r = r, .seed = 3});
        const double expected = 2.0 * std::sqrt(2.0) * r;
        bool ok = true;
        for (size_t l = 0; l < report.avg_eccentricity.size(); ++l) {
            if (std::abs(report.avg_eccentricity[l] - expected) > 1e-10) ok = false;
            if (std::abs(report.diameter[l] - expected) > 1e-10) ok = false;
        }
        check.pass = ok;
        std::ostringstream details;
        details << "expected=" << expected << " got=" << report.avg_eccentricity[0];
        check.details = details.str();
        checks.push_back(check);
    }

    {
        // mean squared point-to-hyperplane distance identity
        ValidationCheck check{.name = "bn_identity"};
        Rng rng(77);
        bool ok = true;
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            Mat w(1, 8);
            for (Eigen::Index j = 0; j < 8; ++j) w(0, j) = rng.normal();
            Network net;
            net.input_dim = 8;
            net.layers.push_back({w, Vec::Zero(1), Activation::identity(), std::nullopt});
            Mat points(40, 8);
            for (Eigen::Index i = 0; i < points.size(); ++i) points(i) = 3.0 * rng.normal();
            const auto [lhs, rhs] = bn_distance_check(net, 0, 0, points);
            const double rel = std::abs(lhs - rhs) / rhs;
            worst = std::max(worst, rel);
            if (rel >= 1e-10) ok = false;
        }
        check.pass = ok;
        std::ostringstream details;
        details << "worst relative error " << worst;
        check.details = details.str();
        checks.push_back(check);
    }

    {
        // exact subdivision vs brute-force activation patterns on a grid
        ValidationCheck check{.name = "partition_grid_oracle"};
        const Network net = init_network({2, 8, 6, 2}, Activation::relu(), 23);
        const Rect box{-2.0, -2.0, 2.0, 2.0};
        const SlicePartition part = compute_partition(net, plane_slice(box));
        const size_t patterns = detail::validation_grid_patterns(net, box, 500);
        const double regions = static_cast<double>(part.regions.size());
        const double diff = std::abs(regions - static_cast<double>(patterns));
        check.pass = diff <= std::max(2.0, 0.02 * regions);
        std::ostringstream details;
        details << "regions=" << part.regions.size() << " grid_patterns=" << patterns;
        check.details = details.str();
        checks.push_back(check);
    }

    return checks;
}

inline nlohmann::json validation_report_json(const std::vector<ValidationCheck>& checks) {
    nlohmann::json j;
    nlohmann::json entries = nlohmann::json::array();
    bool all = true;
    for (const auto& check : checks) {
        entries.push_back(
            {{"name", check.name}, {"pass", check.pass}, {"details", check.details}});
        all = all && check.pass;
    }
    j["checks"] = std::move(entries);
    j["all_pass"] = all;
    return j;
}

} // namespace splinescope

#endif
