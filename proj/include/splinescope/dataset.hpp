#ifndef SPLINESCOPE_DATASET_HPP
#define SPLINESCOPE_DATASET_HPP

#include "splinescope/common.hpp"
#include "splinescope/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace splinescope {

struct Dataset {
    Mat inputs;              // n x D
    std::vector<int> labels; // classification targets, empty for regression
    Mat targets;             // regression targets, 0x0 for classification
    int num_classes = 0;     // 0 for regression
    std::string split;       // free-form tag ("train", "test", ...)

    bool regression() const { return num_classes == 0; }
    Eigen::Index size() const { return inputs.rows(); }
    Eigen::Index dim() const { return inputs.cols(); }

    void validate() const {
        if (inputs.rows() < 1) throw DimensionError("dataset is empty");
        if (!all_finite(inputs)) throw DimensionError("dataset inputs contain non-finite values");
        if (regression()) {
            if (targets.rows() != inputs.rows())
                throw DimensionError("regression targets must match input rows");
        } else {
            if (static_cast<Eigen::Index>(labels.size()) != inputs.rows())
                throw DimensionError("labels must match input rows");
            for (int l : labels)
                if (l < 0 || l >= num_classes) throw DimensionError("label out of range");
        }
    }

    // Per-dimension bounding box of the inputs, used to draw random probe
    // points "from the domain of the data".
    std::pair<Vec, Vec> bounding_box() const {
        return {inputs.colwise().minCoeff().transpose(), inputs.colwise().maxCoeff().transpose()};
    }
};

namespace detail {

inline uint32_t read_be_u32(std::istream& is, const std::string& field) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw ParseError("idx file truncated while reading " + field);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

} // namespace detail

// IDX image/label pair (the MNIST container format). Pixels are scaled to
// [0,1] by /255 and flattened row-major; sample order is as stored.
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              long limit = -1,
                              const std::optional<std::vector<int>>& class_filter = std::nullopt) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open idx images '" + images_path + "'");
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open idx labels '" + labels_path + "'");

    const uint32_t img_magic = detail::read_be_u32(img, "images magic");
    if (img_magic != 0x00000803u)
        throw ParseError("images magic: expected 0x00000803, got " + std::to_string(img_magic));
    const uint32_t img_count = detail::read_be_u32(img, "images count");
    const uint32_t rows = detail::read_be_u32(img, "images rows");
    const uint32_t cols = detail::read_be_u32(img, "images cols");

    const uint32_t lab_magic = detail::read_be_u32(lab, "labels magic");
    if (lab_magic != 0x00000801u)
        throw ParseError("labels magic: expected 0x00000801, got " + std::to_string(lab_magic));
    const uint32_t lab_count = detail::read_be_u32(lab, "labels count");
    if (img_count != lab_count)
        throw ParseError("images count " + std::to_string(img_count) + " != labels count " +
                         std::to_string(lab_count));

    const size_t pixels = static_cast<size_t>(rows) * cols;
    std::vector<unsigned char> pixel_buf(pixels);

    std::vector<Vec> keep_inputs;
    std::vector<int> keep_labels;
    for (uint32_t i = 0; i < img_count; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixel_buf.data()), static_cast<std::streamsize>(pixels)))
            throw ParseError("idx file truncated at image " + std::to_string(i));
        char label_byte;
        if (!lab.read(&label_byte, 1))
            throw ParseError("idx file truncated at label " + std::to_string(i));
        const int label = static_cast<unsigned char>(label_byte);
        if (class_filter &&
            std::find(class_filter->begin(), class_filter->end(), label) == class_filter->end())
            continue;
        if (limit >= 0 && static_cast<long>(keep_labels.size()) >= limit) break;
        Vec row(pixels);
        for (size_t px = 0; px < pixels; ++px)
            row(static_cast<Eigen::Index>(px)) = static_cast<double>(pixel_buf[px]) / 255.0;
        keep_inputs.push_back(std::move(row));
        keep_labels.push_back(label);
    }

    Dataset ds;
    ds.num_classes = 10;
    ds.inputs.resize(static_cast<Eigen::Index>(keep_inputs.size()), static_cast<Eigen::Index>(pixels));
    for (size_t i = 0; i < keep_inputs.size(); ++i) ds.inputs.row(static_cast<Eigen::Index>(i)) = keep_inputs[i];
    ds.labels = std::move(keep_labels);
    return ds;
}

// x uniform on [-2pi, 2pi]^2, target (sin x1 + cos x2) on the half-plane
// x1 < 0 and exactly 0 elsewhere. A regressor trained on this has all its
// curvature on the left half, which is what the probes should see.
inline Dataset make_piecewise_regression(long n, uint64_t seed) {
    if (n < 1) throw DimensionError("dataset size must be >= 1");
    const double two_pi = 6.283185307179586476925286766559;
    Rng rng(seed);
    Dataset ds;
    ds.inputs.resize(n, 2);
    ds.targets.resize(n, 1);
    for (long i = 0; i < n; ++i) {
        const double x1 = rng.uniform(-two_pi, two_pi);
        const double x2 = rng.uniform(-two_pi, two_pi);
        ds.inputs(i, 0) = x1;
        ds.inputs(i, 1) = x2;
        ds.targets(i, 0) = x1 < 0.0 ? std::sin(x1) + std::cos(x2) : 0.0;
    }
    ds.num_classes = 0;
    return ds;
}

// Replace a seeded fraction of labels with uniform draws over the classes
// (a draw may coincide with the original label).
inline Dataset randomize_labels(const Dataset& ds, double fraction, int num_classes,
                                uint64_t seed) {
    if (ds.regression()) throw DimensionError("randomize_labels needs a classification dataset");
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw DimensionError("randomize fraction must lie in [0, 1]");
    Dataset out = ds;
    out.num_classes = std::max(ds.num_classes, num_classes);
    Rng rng(seed);
    for (auto& label : out.labels) {
        const double u = rng.next_double();
        const int draw = static_cast<int>(rng.next_below(static_cast<uint64_t>(num_classes)));
        if (u < fraction) label = draw;
    }
    return out;
}

// All p^2 pairs (a, b), encoded as concatenated one-hots (2p dims), label
// (a + b) mod p. Enumeration order is a-major.
inline Dataset make_modular_addition(int p) {
    if (p < 2) throw DimensionError("modular addition needs p >= 2");
    Dataset ds;
    const long n = static_cast<long>(p) * p;
    ds.inputs = Mat::Zero(n, 2 * p);
    ds.labels.resize(n);
    long row = 0;
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b, ++row) {
            ds.inputs(row, a) = 1.0;
            ds.inputs(row, p + b) = 1.0;
            ds.labels[row] = (a + b) % p;
        }
    ds.num_classes = p;
    return ds;
}

// Two-class Gaussian blobs on the plane, class means at (-sep/2, 0) and
// (+sep/2, 0). Small toy for boundary-geometry runs.
inline Dataset make_two_blobs(long n, double separation, uint64_t seed) {
    if (n < 2) throw DimensionError("dataset size must be >= 2");
    Rng rng(seed);
    Dataset ds;
    ds.inputs.resize(n, 2);
    ds.labels.resize(n);
    for (long i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);
        const double cx = cls == 0 ? -0.5 * separation : 0.5 * separation;
        ds.inputs(i, 0) = cx + rng.normal();
        ds.inputs(i, 1) = rng.normal();
        ds.labels[i] = cls;
    }
    ds.num_classes = 2;
    return ds;
}

// XOR clusters at (+-1, +-1) with Gaussian jitter; label by quadrant parity.
inline Dataset make_xor(long n, double noise, uint64_t seed) {
    if (n < 4) throw DimensionError("xor dataset needs n >= 4");
    Rng rng(seed);
    Dataset ds;
    ds.inputs.resize(n, 2);
    ds.labels.resize(n);
    for (long i = 0; i < n; ++i) {
        const int corner = static_cast<int>(i % 4);
        const double sx = (corner & 1) ? 1.0 : -1.0;
        const double sy = (corner & 2) ? 1.0 : -1.0;
        ds.inputs(i, 0) = sx + noise * rng.normal();
        ds.inputs(i, 1) = sy + noise * rng.normal();
        ds.labels[i] = (sx * sy > 0.0) ? 1 : 0;
    }
    ds.num_classes = 2;
    return ds;
}

} // namespace splinescope

#endif
