#ifndef SPLINESCOPE_EXPERIMENT_HPP
#define SPLINESCOPE_EXPERIMENT_HPP

#include "splinescope/attack.hpp"
#include "splinescope/config.hpp"
#include "splinescope/dataset.hpp"
#include "splinescope/lc_io.hpp"
#include "splinescope/serialize.hpp"
#include "splinescope/slice_io.hpp"
#include "splinescope/train.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace splinescope {

// Fully resolved description of one run; everything an experiment does is
// derived from this plus the seed.
struct ExperimentConfig {
    uint64_t seed = 0;
    int threads = 0; // 0 = hardware concurrency
    std::string out_dir;

    // dataset
    std::string source; // mnist | piecewise | modular | blobs | xor
    std::string images, labels, test_images, test_labels;
    long limit = -1, test_limit = -1;
    double randomize_fraction = 0.0;
    long synth_n = 1024;
    int modular_p = 13;
    double blob_separation = 4.0;
    double xor_noise = 0.1;

    // architecture
    std::vector<int> hidden;
    Activation activation = Activation::relu();
    double init_scale = 1.0;

    // training
    TrainConfig train_cfg;
    bool loss_explicit = false;
    int checkpoint_count = 60;

    // probes
    bool probe_enabled = true;
    int probe_P = 25;
    double probe_r = 0.005;
    long probe_n_train = 256, probe_n_test = 256, probe_n_random = 256;

    // attacks
    std::vector<double> attack_epsilons;
    double attack_alpha = 0.0156;
    int attack_steps = 10;
    bool attack_random_start = true;
    long attack_eval_points = 512;
    double data_lo = 0.0, data_hi = 1.0;

    // slice snapshots
    bool slice_present = false;
    long slice_anchor[3] = {0, 1, 2};
    double slice_margin = 1.0;
    bool slice_at_final_only = false;
    std::string slice_color = "random";

    std::string config_hash = "0";
};

inline ExperimentConfig parse_experiment(const ConfigFile& file) {
    ExperimentConfig cfg;
    cfg.seed = static_cast<uint64_t>(file.get_int("experiment", "seed", 0));
    cfg.threads = static_cast<int>(file.get_int("experiment", "threads", 0));
    cfg.out_dir = file.get_string("experiment", "out", "");

    cfg.source = file.get_string("dataset", "source");
    if (cfg.source == "mnist") {
        cfg.images = file.get_string("dataset", "images");
        cfg.labels = file.get_string("dataset", "labels");
        cfg.test_images = file.get_string("dataset", "test_images", "");
        cfg.test_labels = file.get_string("dataset", "test_labels", "");
        cfg.limit = file.get_int("dataset", "limit", -1);
        cfg.test_limit = file.get_int("dataset", "test_limit", -1);
    } else if (cfg.source == "piecewise" || cfg.source == "blobs" || cfg.source == "xor") {
        cfg.synth_n = file.get_int("dataset", "n", 1024);
        cfg.blob_separation = file.get_real("dataset", "separation", 4.0);
        cfg.xor_noise = file.get_real("dataset", "noise", 0.1);
    } else if (cfg.source == "modular") {
        cfg.modular_p = static_cast<int>(file.get_int("dataset", "p", 13));
    } else {
        throw ConfigError("config field [dataset] source: unknown source '" + cfg.source + "'");
    }
    cfg.randomize_fraction = file.get_real("dataset", "randomize_fraction", 0.0);
    if (cfg.randomize_fraction < 0.0 || cfg.randomize_fraction > 1.0)
        throw ConfigError("config field [dataset] randomize_fraction must lie in [0, 1]");

    if (file.has("arch", "hidden")) {
        for (long h : file.get_int_list("arch", "hidden")) cfg.hidden.push_back(static_cast<int>(h));
    } else {
        const long width = file.require_int("arch", "width");
        const long depth = file.require_int("arch", "depth"); // hidden layer count
        if (width < 1 || depth < 1)
            throw ConfigError("config fields [arch] width/depth must be positive");
        cfg.hidden.assign(static_cast<size_t>(depth), static_cast<int>(width));
    }
    cfg.activation = parse_activation(file.get_string("arch", "activation", "relu"));
    cfg.init_scale = file.get_real("arch", "init_scale", 1.0);

    cfg.train_cfg.steps = file.get_int("train", "steps", 0);
    cfg.train_cfg.batch_size = static_cast<int>(file.get_int("train", "batch_size", 32));
    cfg.train_cfg.lr = file.get_real("train", "lr", 1e-3);
    cfg.train_cfg.weight_decay = file.get_real("train", "weight_decay", 0.0);
    cfg.train_cfg.beta1 = file.get_real("train", "beta1", 0.9);
    cfg.train_cfg.beta2 = file.get_real("train", "beta2", 0.999);
    cfg.train_cfg.adam_eps = file.get_real("train", "adam_eps", 1e-8);
    cfg.train_cfg.seed = cfg.seed;
    cfg.checkpoint_count = static_cast<int>(file.get_int("train", "checkpoints", 60));
    const std::string loss = file.get_string("train", "loss", "auto");
    if (loss == "cross_entropy") {
        cfg.train_cfg.loss = LossKind::cross_entropy;
        cfg.loss_explicit = true;
    } else if (loss == "mse") {
        cfg.train_cfg.loss = LossKind::mse;
        cfg.loss_explicit = true;
    } else if (loss != "auto") {
        throw ConfigError("config field [train] loss: expected cross_entropy|mse|auto");
    }

    cfg.probe_enabled = file.get_bool("probe", "enabled", true);
    cfg.probe_P = static_cast<int>(file.get_int("probe", "P", 25));
    cfg.probe_r = file.get_real("probe", "r", 0.005);
    cfg.probe_n_train = file.get_int("probe", "n_train", 256);
    cfg.probe_n_test = file.get_int("probe", "n_test", 256);
    cfg.probe_n_random = file.get_int("probe", "n_random", 256);

    cfg.attack_epsilons = file.get_real_list("attack", "epsilons");
    cfg.attack_alpha = file.get_real("attack", "alpha", 0.0156);
    cfg.attack_steps = static_cast<int>(file.get_int("attack", "steps", 10));
    cfg.attack_random_start = file.get_bool("attack", "random_start", true);
    cfg.attack_eval_points = file.get_int("attack", "eval_points", 512);
    cfg.data_lo = file.get_real("attack", "data_lo", 0.0);
    cfg.data_hi = file.get_real("attack", "data_hi", 1.0);

    if (file.has_section("slice")) {
        cfg.slice_present = true;
        const auto anchors = file.get_int_list("slice", "anchors", {0, 1, 2});
        if (anchors.size() != 3)
            throw ConfigError("config field [slice] anchors: expected three indices");
        for (int i = 0; i < 3; ++i) cfg.slice_anchor[i] = anchors[i];
        cfg.slice_margin = file.get_real("slice", "margin", 1.0);
        cfg.slice_at_final_only = file.get_string("slice", "at", "all") == "final";
        cfg.slice_color = file.get_string("slice", "color", "random");
    }

    cfg.config_hash = file.hash();
    return cfg;
}

namespace detail {

// Seeded sample of `count` distinct rows (partial Fisher-Yates).
inline Mat sample_rows(const Mat& source, long count, uint64_t seed) {
    const long n = source.rows();
    count = std::min(count, n);
    std::vector<Eigen::Index> idx(n);
    for (long i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (long i = 0; i < count; ++i) {
        const long j = i + static_cast<long>(rng.next_below(static_cast<uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    Mat out(count, source.cols());
    for (long i = 0; i < count; ++i) out.row(i) = source.row(idx[i]);
    return out;
}

// Uniform points in the dataset's per-dimension bounding box; these stay
// fixed across checkpoints so the curves are comparable over a run.
inline Mat random_box_points(const Dataset& ds, long count, uint64_t seed) {
    auto [lo, hi] = ds.bounding_box();
    Rng rng(seed);
    Mat out(count, ds.dim());
    for (long i = 0; i < count; ++i)
        for (Eigen::Index j = 0; j < ds.dim(); ++j) out(i, j) = rng.uniform(lo(j), hi(j));
    return out;
}

} // namespace detail

struct ExperimentData {
    Dataset train;
    std::optional<Dataset> test;
};

inline ExperimentData build_datasets(const ExperimentConfig& cfg) {
    ExperimentData data;
    if (cfg.source == "mnist") {
        data.train = load_mnist_idx(cfg.images, cfg.labels, cfg.limit);
        data.train.split = "train";
        if (!cfg.test_images.empty()) {
            data.test = load_mnist_idx(cfg.test_images, cfg.test_labels, cfg.test_limit);
            data.test->split = "test";
        }
    } else if (cfg.source == "piecewise") {
        data.train = make_piecewise_regression(cfg.synth_n, derive_seed(cfg.seed, 1));
        data.test = make_piecewise_regression(std::max<long>(2, cfg.synth_n / 4),
                                              derive_seed(cfg.seed, 2));
    } else if (cfg.source == "blobs") {
        data.train = make_two_blobs(cfg.synth_n, cfg.blob_separation, derive_seed(cfg.seed, 1));
        data.test = make_two_blobs(std::max<long>(2, cfg.synth_n / 2), cfg.blob_separation,
                                   derive_seed(cfg.seed, 2));
    } else if (cfg.source == "xor") {
        data.train = make_xor(cfg.synth_n, cfg.xor_noise, derive_seed(cfg.seed, 1));
        data.test = make_xor(std::max<long>(4, cfg.synth_n / 2), cfg.xor_noise,
                             derive_seed(cfg.seed, 2));
    } else if (cfg.source == "modular") {
        data.train = make_modular_addition(cfg.modular_p);
        data.test = data.train; // exhaustive dataset; the smoke run watches train accuracy
    }
    if (cfg.randomize_fraction > 0.0)
        data.train = randomize_labels(data.train, cfg.randomize_fraction, data.train.num_classes,
                                      derive_seed(cfg.seed, 3));
    data.train.validate();
    if (data.test) data.test->validate();
    return data;
}

inline Network build_network(const ExperimentConfig& cfg, const ExperimentData& data) {
    std::vector<int> dims;
    dims.push_back(static_cast<int>(data.train.dim()));
    for (int h : cfg.hidden) dims.push_back(h);
    dims.push_back(data.train.regression() ? static_cast<int>(data.train.targets.cols())
                                           : data.train.num_classes);
    return init_network(dims, cfg.activation, derive_seed(cfg.seed, 4), cfg.init_scale);
}

// Orchestrates one training run with probe/attack/slice hooks and writes
// trajectory.csv, trajectory.json, weights_final.spln, run.json and any
// partition snapshots into the output directory.
inline TrajectoryLog run_experiment(const ExperimentConfig& cfg, std::ostream& status) {
    if (cfg.out_dir.empty()) throw ConfigError("config field [experiment] out is required");
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path out(cfg.out_dir);

    ExperimentData data = build_datasets(cfg);
    Network net = build_network(cfg, data);
    const ThreadPool pool(cfg.threads);

    TrainConfig tcfg = cfg.train_cfg;
    if (!cfg.loss_explicit)
        tcfg.loss = data.train.regression() ? LossKind::mse : LossKind::cross_entropy;
    tcfg.checkpoints = log_spaced_checkpoints(tcfg.steps, cfg.checkpoint_count);

    if (cfg.probe_enabled && cfg.probe_P > data.train.dim())
        throw ConfigError("config field [probe] P exceeds the dataset dimension");

    // probe point sets are fixed for the whole run
    Mat probe_train, probe_test, probe_random;
    if (cfg.probe_enabled) {
        probe_train = detail::sample_rows(data.train.inputs, cfg.probe_n_train,
                                          derive_seed(cfg.seed, 10));
        if (data.test)
            probe_test = detail::sample_rows(data.test->inputs, cfg.probe_n_test,
                                             derive_seed(cfg.seed, 11));
        probe_random =
            detail::random_box_points(data.train, cfg.probe_n_random, derive_seed(cfg.seed, 12));
    }

    std::vector<CheckpointHook> hooks;
    if (cfg.probe_enabled) {
        hooks.push_back([&, probe_train, probe_test, probe_random](long, const Network& frozen,
                                                                   TrajectoryRow& row) {
            ProbeConfig pc{.P = cfg.probe_P, .r = cfg.probe_r, .seed = derive_seed(cfg.seed, 20)};
            if (probe_train.rows() >= 2) {
                const LCAggregate agg = batch_lc(frozen, probe_train, pc, PointClass::train, pool);
                row.lc_train = {agg.mean, kCi99Z * agg.stderr_};
            }
            if (probe_test.rows() >= 2) {
                ProbeConfig pt = pc;
                pt.seed = derive_seed(cfg.seed, 21);
                const LCAggregate agg = batch_lc(frozen, probe_test, pt, PointClass::test, pool);
                row.lc_test = {agg.mean, kCi99Z * agg.stderr_};
            }
            if (probe_random.rows() >= 2) {
                ProbeConfig pr = pc;
                pr.seed = derive_seed(cfg.seed, 22);
                const LCAggregate agg =
                    batch_lc(frozen, probe_random, pr, PointClass::random_points, pool);
                row.lc_rand = {agg.mean, kCi99Z * agg.stderr_};
            }
        });
    }

    if (!cfg.attack_epsilons.empty() && !data.train.regression()) {
        const Dataset& eval_set = data.test ? *data.test : data.train;
        const long eval_n = std::min<long>(cfg.attack_eval_points, eval_set.size());
        Mat eval_inputs = eval_set.inputs.topRows(eval_n);
        std::vector<int> eval_labels(eval_set.labels.begin(), eval_set.labels.begin() + eval_n);
        hooks.push_back([&, eval_inputs, eval_labels](long, const Network& frozen,
                                                      TrajectoryRow& row) {
            row.adv_acc.clear();
            for (double eps : cfg.attack_epsilons) {
                AttackConfig ac{.epsilon = eps,
                                .alpha = std::min(cfg.attack_alpha, eps > 0 ? eps : 1.0),
                                .steps = cfg.attack_steps,
                                .seed = derive_seed(cfg.seed, 30),
                                .random_start = cfg.attack_random_start,
                                .data_range = {cfg.data_lo, cfg.data_hi}};
                row.adv_acc.push_back(robust_accuracy(frozen, eval_inputs, eval_labels, ac, pool));
            }
        });
    }

    std::optional<Slice> slice;
    if (cfg.slice_present) {
        for (int i = 0; i < 3; ++i)
            if (cfg.slice_anchor[i] < 0 || cfg.slice_anchor[i] >= data.train.size())
                throw ConfigError("config field [slice] anchors: index out of range");
        if (!net.piecewise_linear())
            throw UnsupportedError("slice snapshots need piecewise-linear activations");
        slice = slice_through(data.train.inputs.row(cfg.slice_anchor[0]).transpose(),
                              data.train.inputs.row(cfg.slice_anchor[1]).transpose(),
                              data.train.inputs.row(cfg.slice_anchor[2]).transpose(),
                              cfg.slice_margin);
        hooks.push_back([&, slice](long step, const Network& frozen, TrajectoryRow&) {
            if (cfg.slice_at_final_only && step != tcfg.steps) return;
            const SlicePartition part = compute_partition(frozen, *slice, std::nullopt, pool);
            std::vector<Segment> boundary;
            if (frozen.output_dim() >= 2) boundary = decision_boundary(part, 0, 1);
            const SliceColorMode mode = cfg.slice_color == "slope" ? SliceColorMode::slope_norm
                                                                   : SliceColorMode::random_fill;
            const std::string stem = "partition_step" + std::to_string(step);
            emit_partition(part, (out / (stem + ".json")).string(), SliceFormat::json, boundary);
            emit_partition(part, (out / (stem + ".svg")).string(), SliceFormat::svg, boundary,
                           mode, cfg.seed);
        });
    }

    status << "training: steps=" << tcfg.steps << " checkpoints=" << tcfg.checkpoints.size()
           << " hash=" << cfg.config_hash << "\n";
    TrajectoryLog log = train(net, data.train, data.test ? &*data.test : nullptr, tcfg, hooks);
    log.config_hash = cfg.config_hash;
    log.eps_list = cfg.attack_epsilons;

    {
        std::ofstream csv(out / "trajectory.csv");
        if (!csv) throw IoError("cannot write trajectory.csv");
        write_trajectory_csv(log, csv);
    }
    {
        std::ofstream js(out / "trajectory.json");
        nlohmann::json j = trajectory_to_json(log);
        j["tool_version"] = kToolVersion;
        js << j.dump(2) << "\n";
    }
    save_weights(net, (out / "weights_final.spln").string());
    {
        std::ofstream run(out / "run.json");
        nlohmann::json j;
        j["config_hash"] = cfg.config_hash;
        j["tool_version"] = kToolVersion;
        j["aborted"] = log.aborted;
        run << j.dump(2) << "\n";
    }
    status << (log.aborted ? "aborted at step " + std::to_string(log.aborted_at_step)
                           : "completed")
           << ", artifacts in " << cfg.out_dir << "\n";
    return log;
}

} // namespace splinescope

#endif
