// Command-line front end: train runs with probes attached, standalone LC
// sweeps, exact partition slices, PGD evaluation, and the built-in
// validation battery.
//
// Exit codes: 0 success, 1 internal error, 2 input/config error,
// 3 unsupported feature.

#include "splinescope/experiment.hpp"
#include "splinescope/validation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace splinescope;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitUnsupported = 3;

Mat read_points_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open points file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("points file '" + path + "': bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("points file '" + path + "': ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("points file '" + path + "' is empty");
    Mat out(rows.size(), rows.front().size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct LayerStat {
    double mean = 0.0, ci_lo = 0.0, ci_hi = 0.0;
};

LayerStat stat_from(const std::vector<double>& values) {
    LayerStat st;
    const double n = static_cast<double>(values.size());
    for (double v : values) st.mean += v;
    st.mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    const double stderr_ = n > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    st.ci_lo = st.mean - kCi99Z * stderr_;
    st.ci_hi = st.mean + kCi99Z * stderr_;
    return st;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 < 1e-300) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

int run_train(const std::string& config_path, const std::string& seed_override,
              const std::string& threads_override, const std::string& out_override) {
    ConfigFile file = ConfigFile::parse_file(config_path);
    if (!seed_override.empty()) file.set("experiment", "seed", seed_override);
    if (!threads_override.empty()) file.set("experiment", "threads", threads_override);
    if (!out_override.empty()) file.set("experiment", "out", out_override);
    const ExperimentConfig cfg = parse_experiment(file);
    run_experiment(cfg, std::cout);
    return kExitOk;
}

int run_lc(const std::string& weights_path, const std::string& images, const std::string& labels,
           long limit, const std::string& csv_points, bool origin, long origin_count, int P,
           double r, uint64_t seed, const std::string& cls, int threads,
           const std::string& out_path) {
    const Network net = load_weights(weights_path);

    Mat points;
    if (!csv_points.empty()) {
        points = read_points_csv(csv_points);
    } else if (!images.empty()) {
        const Dataset ds = load_mnist_idx(images, labels, limit);
        if (ds.size() < 2) throw ConfigError("need at least 2 points for LC aggregates");
        points = ds.inputs;
    } else if (origin) {
        points = Mat::Zero(std::max<long>(2, origin_count), net.input_dim);
    } else {
        throw ConfigError("lc needs a points source: --images/--labels, --csv or --origin");
    }
    if (points.cols() != net.input_dim)
        throw ConfigError("points have dimension " + std::to_string(points.cols()) +
                          ", network expects " + std::to_string(net.input_dim));
    if (P > points.cols())
        throw ConfigError("--P (" + std::to_string(P) + ") exceeds the input dimension (" +
                          std::to_string(points.cols()) + ")");

    PointClass point_class = PointClass::test;
    if (cls == "train") point_class = PointClass::train;
    else if (cls == "random") point_class = PointClass::random_points;
    else if (cls != "test") throw ConfigError("--class must be train, test or random");

    const ThreadPool pool(threads);
    const ProbeConfig cfg{.P = P, .r = r, .seed = seed};
    const LCAggregate agg = batch_lc(net, points, cfg, point_class, pool);

    std::ostringstream os;
    os << "layer,class,mean,ci_lo,ci_hi\n";
    const size_t layer_count = agg.per_point_layers.front().size();
    for (size_t l = 0; l < layer_count; ++l) {
        std::vector<double> vals;
        vals.reserve(agg.per_point_layers.size());
        for (const auto& per_layer : agg.per_point_layers)
            vals.push_back(static_cast<double>(per_layer[l]));
        const LayerStat st = stat_from(vals);
        os << (l + 1) << ',' << point_class_name(point_class) << ',' << fmt(st.mean) << ','
           << fmt(st.ci_lo) << ',' << fmt(st.ci_hi) << "\n";
    }
    os << "total," << point_class_name(point_class) << ',' << fmt(agg.mean) << ','
       << fmt(agg.ci_lo) << ',' << fmt(agg.ci_hi) << "\n";

    if (out_path.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot write '" + out_path + "'");
        out << os.str();
    }
    return kExitOk;
}

int run_slice(const std::string& weights_path, const std::vector<double>& plane,
              const std::vector<long>& anchors, const std::string& images,
              const std::string& labels, long limit, double margin, int up_to_layer,
              const std::vector<int>& classes, const std::string& color, uint64_t seed,
              const std::string& json_path, const std::string& svg_path) {
    const Network net = load_weights(weights_path);

    Slice slice;
    if (!plane.empty()) {
        if (plane.size() != 4) throw ConfigError("--plane expects lo_u,lo_v,hi_u,hi_v");
        if (net.input_dim != 2)
            throw ConfigError("--plane applies to 2-input networks; use --anchors");
        slice = plane_slice({plane[0], plane[1], plane[2], plane[3]});
    } else {
        if (anchors.size() != 3) throw ConfigError("--anchors expects three dataset indices");
        if (images.empty()) throw ConfigError("--anchors needs --images/--labels");
        const Dataset ds = load_mnist_idx(images, labels, limit);
        for (long a : anchors)
            if (a < 0 || a >= ds.size())
                throw ConfigError("anchor index " + std::to_string(a) + " out of range");
        slice = slice_through(ds.inputs.row(anchors[0]).transpose(),
                              ds.inputs.row(anchors[1]).transpose(),
                              ds.inputs.row(anchors[2]).transpose(), margin);
    }

    const std::optional<int> up_to =
        up_to_layer >= 0 ? std::optional<int>(up_to_layer) : std::nullopt;
    const SlicePartition part = compute_partition(net, slice, up_to);

    std::vector<Segment> boundary;
    if (net.output_dim() >= 2 && !up_to)
        boundary = decision_boundary(part, classes.at(0), classes.at(1));

    const SliceColorMode mode =
        color == "slope" ? SliceColorMode::slope_norm : SliceColorMode::random_fill;
    if (!json_path.empty()) emit_partition(part, json_path, SliceFormat::json, boundary);
    if (!svg_path.empty())
        emit_partition(part, svg_path, SliceFormat::svg, boundary, mode, seed);

    std::cout << "regions: " << part.regions.size() << "\n";
    if (!boundary.empty()) {
        const double band = 0.1 * std::hypot(slice.bounds.width(), slice.bounds.height());
        double near_area = 0.0, far_area = 0.0;
        long near_count = 0, far_count = 0;
        for (const auto& region : part.regions) {
            const Vec2 c = polygon_centroid(region.polygon);
            double dist = std::numeric_limits<double>::infinity();
            for (const auto& seg : boundary)
                dist = std::min(dist, point_segment_distance(c, seg.first, seg.second));
            const double area = polygon_area(region.polygon);
            if (dist <= band) {
                ++near_count;
                near_area += area;
            } else {
                ++far_count;
                far_area += area;
            }
        }
        std::cout << "density near boundary: "
                  << (near_area > 0 ? static_cast<double>(near_count) / near_area : 0.0)
                  << " regions per unit area (" << near_count << " regions)\n";
        std::cout << "density far from boundary: "
                  << (far_area > 0 ? static_cast<double>(far_count) / far_area : 0.0)
                  << " regions per unit area (" << far_count << " regions)\n";
    }
    return kExitOk;
}

int run_attack(const std::string& weights_path, const std::string& images,
               const std::string& labels, long limit, const std::vector<double>& epsilons,
               double alpha, int steps, bool no_random_start, double lo, double hi,
               uint64_t seed, int threads, const std::string& out_path) {
    const Network net = load_weights(weights_path);
    const Dataset ds = load_mnist_idx(images, labels, limit);
    if (ds.size() < 1) throw ConfigError("attack needs a non-empty dataset");
    if (epsilons.empty()) throw ConfigError("--eps expects at least one epsilon");
    const ThreadPool pool(threads);

    TrajectoryLog log;
    log.eps_list = epsilons;
    log.config_hash = "attack";
    TrajectoryRow row;
    row.step = 0;
    row.train_acc = std::numeric_limits<double>::quiet_NaN();
    row.test_acc = clean_accuracy(net, ds.inputs, ds.labels);
    for (double eps : epsilons) {
        AttackConfig cfg{.epsilon = eps,
                         .alpha = eps > 0 ? std::min(alpha, eps) : 0.0,
                         .steps = steps,
                         .seed = seed,
                         .random_start = !no_random_start,
                         .data_range = {lo, hi}};
        row.adv_acc.push_back(robust_accuracy(net, ds.inputs, ds.labels, cfg, pool));
    }
    log.rows.push_back(row);

    if (out_path.empty()) {
        write_trajectory_csv(log, std::cout);
    } else {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot write '" + out_path + "'");
        write_trajectory_csv(log, out);
    }
    return kExitOk;
}

int run_validate(const std::string& json_path, const std::string& inject_fault) {
    const auto checks = run_validation_battery(inject_fault);
    bool all = true;
    for (const auto& check : checks) {
        std::cout << (check.pass ? "PASS" : "FAIL") << "  " << check.name << "  ("
                  << check.details << ")\n";
        all = all && check.pass;
    }
    const nlohmann::json report = validation_report_json(checks);
    if (!json_path.empty()) {
        std::ofstream out(json_path);
        if (!out) throw IoError("cannot write '" + json_path + "'");
        out << report.dump(2) << "\n";
    }
    return all ? kExitOk : kExitInternal;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spline partition geometry probes for small dense networks"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    int threads = 0;
    app.add_option("--seed", seed, "global seed")->capture_default_str();
    app.add_option("--threads", threads, "worker pool size (0 = hardware)");

    // train
    auto* train_cmd = app.add_subcommand("train", "run a training experiment from a config file");
    std::string train_config, train_seed, train_threads, train_out;
    train_cmd->add_option("--config", train_config, "experiment config file")->required();
    train_cmd->add_option("--set-seed", train_seed, "override [experiment] seed");
    train_cmd->add_option("--set-threads", train_threads, "override [experiment] threads");
    train_cmd->add_option("--out", train_out, "override [experiment] out");

    // lc
    auto* lc_cmd = app.add_subcommand("lc", "local complexity aggregates for a weight file");
    std::string lc_weights, lc_images, lc_labels, lc_csv, lc_class = "test", lc_out;
    long lc_limit = -1, lc_origin_count = 8;
    bool lc_origin = false;
    int lc_P = 25;
    double lc_r = 0.005;
    lc_cmd->add_option("--weights", lc_weights, "network weight file")->required();
    lc_cmd->add_option("--images", lc_images, "idx images as probe points");
    lc_cmd->add_option("--labels", lc_labels, "idx labels for --images");
    lc_cmd->add_option("--limit", lc_limit, "probe point cap");
    lc_cmd->add_option("--csv", lc_csv, "headerless csv of probe points");
    lc_cmd->add_flag("--origin", lc_origin, "probe the input-space origin");
    lc_cmd->add_option("--count", lc_origin_count, "origin probe replicas");
    lc_cmd->add_option("--P", lc_P, "neighborhood dimensionality")->capture_default_str();
    lc_cmd->add_option("--r", lc_r, "neighborhood radius")->capture_default_str();
    lc_cmd->add_option("--class", lc_class, "point class tag (train|test|random)");
    lc_cmd->add_option("--out", lc_out, "csv output path (default stdout)");

    // slice
    auto* slice_cmd = app.add_subcommand("slice", "exact 2D partition slice of a weight file");
    std::string slice_weights, slice_images, slice_labels, slice_json, slice_svg,
        slice_color = "random";
    std::vector<double> slice_plane;
    std::vector<long> slice_anchors;
    std::vector<int> slice_classes{0, 1};
    long slice_limit = -1;
    double slice_margin = 1.0;
    int slice_up_to = -1;
    slice_cmd->add_option("--weights", slice_weights, "network weight file")->required();
    slice_cmd->add_option("--plane", slice_plane, "lo_u,lo_v,hi_u,hi_v for 2-input nets")
        ->delimiter(',');
    slice_cmd->add_option("--anchors", slice_anchors, "three dataset indices")->delimiter(',');
    slice_cmd->add_option("--images", slice_images, "idx images for --anchors");
    slice_cmd->add_option("--labels", slice_labels, "idx labels for --anchors");
    slice_cmd->add_option("--limit", slice_limit, "dataset cap for --anchors");
    slice_cmd->add_option("--margin", slice_margin, "bounds inflation")->capture_default_str();
    slice_cmd->add_option("--up-to-layer", slice_up_to, "stop subdividing after this layer");
    slice_cmd->add_option("--classes", slice_classes, "logit pair for the decision boundary")
        ->delimiter(',');
    slice_cmd->add_option("--color", slice_color, "svg fill: random|slope");
    slice_cmd->add_option("--json", slice_json, "partition json output");
    slice_cmd->add_option("--svg", slice_svg, "partition svg output");

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "PGD robust accuracy for a weight file");
    std::string attack_weights, attack_images, attack_labels, attack_out;
    std::vector<double> attack_eps;
    long attack_limit = -1;
    double attack_alpha = 0.0156, attack_lo = 0.0, attack_hi = 1.0;
    int attack_steps = 10;
    bool attack_no_random_start = false;
    attack_cmd->add_option("--weights", attack_weights, "network weight file")->required();
    attack_cmd->add_option("--images", attack_images, "idx images")->required();
    attack_cmd->add_option("--labels", attack_labels, "idx labels")->required();
    attack_cmd->add_option("--limit", attack_limit, "sample cap");
    attack_cmd->add_option("--eps", attack_eps, "epsilon list")->delimiter(',')->required();
    attack_cmd->add_option("--alpha", attack_alpha, "step size")->capture_default_str();
    attack_cmd->add_option("--steps", attack_steps, "PGD steps")->capture_default_str();
    attack_cmd->add_flag("--no-random-start", attack_no_random_start, "start at the clean input");
    attack_cmd->add_option("--lo", attack_lo, "data range lower clamp")->capture_default_str();
    attack_cmd->add_option("--hi", attack_hi, "data range upper clamp")->capture_default_str();
    attack_cmd->add_option("--out", attack_out, "csv output path (default stdout)");

    // validate
    auto* validate_cmd = app.add_subcommand("validate", "run the built-in validation battery");
    std::string validate_json, validate_fault;
    validate_cmd->add_option("--json", validate_json, "machine-readable report path");
    validate_cmd->add_option("--inject-fault", validate_fault,
                             "corrupt an internal predicate (testing hook)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (train_cmd->parsed())
            return run_train(train_config, train_seed, train_threads, train_out);
        if (lc_cmd->parsed())
            return run_lc(lc_weights, lc_images, lc_labels, lc_limit, lc_csv, lc_origin,
                          lc_origin_count, lc_P, lc_r, seed, lc_class, threads, lc_out);
        if (slice_cmd->parsed())
            return run_slice(slice_weights, slice_plane, slice_anchors, slice_images,
                             slice_labels, slice_limit, slice_margin, slice_up_to, slice_classes,
                             slice_color, seed, slice_json, slice_svg);
        if (attack_cmd->parsed())
            return run_attack(attack_weights, attack_images, attack_labels, attack_limit,
                              attack_eps, attack_alpha, attack_steps, attack_no_random_start,
                              attack_lo, attack_hi, seed, threads, attack_out);
        if (validate_cmd->parsed()) return run_validate(validate_json, validate_fault);
    } catch (const UnsupportedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnsupported;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
