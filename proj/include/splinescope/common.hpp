#ifndef SPLINESCOPE_COMMON_HPP
#define SPLINESCOPE_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace splinescope {

// All core numerics are 64-bit. Batches are row-major in spirit:
// one sample per row, one feature per column.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or finiteness violations on numeric inputs.
struct DimensionError : Error {
    using Error::Error;
};

// Malformed external data (weight files, IDX files, partition JSON).
struct ParseError : Error {
    using Error::Error;
};

// Bad user configuration (CLI flags, experiment files).
struct ConfigError : Error {
    using Error::Error;
};

// Requested feature exists but not for these inputs (e.g. exact
// partitions of smooth activations).
struct UnsupportedError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

inline constexpr const char* kToolVersion = "0.1.0";

inline bool all_finite(const Mat& m) {
    return m.allFinite();
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

} // namespace splinescope

#endif
