#ifndef SPLINESCOPE_ACTIVATION_HPP
#define SPLINESCOPE_ACTIVATION_HPP

#include "splinescope/common.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace splinescope {

enum class ActKind : uint8_t {
    ReLU = 0,
    LeakyReLU = 1,
    GeLU = 2,
    Identity = 3,
};

// Element-wise nonlinearity. Subgradient choices at 0 are fixed so that
// gradient checks are deterministic: ReLU'(0) = 0, LeakyReLU'(0) = slope.
struct Activation {
    ActKind kind = ActKind::ReLU;
    double slope = 0.01; // LeakyReLU negative slope, ignored otherwise

    static Activation relu() { return {ActKind::ReLU, 0.0}; }
    static Activation leaky_relu(double slope) {
        if (!(slope >= 0.0) || !std::isfinite(slope))
            throw DimensionError("LeakyReLU slope must be finite and >= 0");
        return {ActKind::LeakyReLU, slope};
    }
    static Activation gelu() { return {ActKind::GeLU, 0.0}; }
    static Activation identity() { return {ActKind::Identity, 0.0}; }

    bool piecewise_linear() const { return kind != ActKind::GeLU; }

    // Slope on the positive / negative side of the hyperplane; only
    // meaningful for piecewise-linear kinds.
    double slope_pos() const { return 1.0; }
    double slope_neg() const {
        switch (kind) {
        case ActKind::ReLU: return 0.0;
        case ActKind::LeakyReLU: return slope;
        case ActKind::Identity: return 1.0;
        default: throw UnsupportedError("GeLU has no region slope");
        }
    }

    double value(double z) const {
        switch (kind) {
        case ActKind::ReLU: return z > 0.0 ? z : 0.0;
        case ActKind::LeakyReLU: return z > 0.0 ? z : slope * z;
        case ActKind::GeLU: {
            // exact Gaussian-CDF form
            return 0.5 * z * (1.0 + std::erf(z * 0.70710678118654752440));
        }
        case ActKind::Identity: return z;
        }
        return z;
    }

    double derivative(double z) const {
        switch (kind) {
        case ActKind::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case ActKind::LeakyReLU: return z > 0.0 ? 1.0 : slope;
        case ActKind::GeLU: {
            const double cdf = 0.5 * (1.0 + std::erf(z * 0.70710678118654752440));
            const double pdf = 0.39894228040143267794 * std::exp(-0.5 * z * z);
            return cdf + z * pdf;
        }
        case ActKind::Identity: return 1.0;
        }
        return 1.0;
    }

    Mat apply(const Mat& z) const {
        if (kind == ActKind::Identity) return z;
        return z.unaryExpr([this](double v) { return value(v); });
    }

    Mat apply_derivative(const Mat& z) const {
        return z.unaryExpr([this](double v) { return derivative(v); });
    }

    std::string name() const {
        switch (kind) {
        case ActKind::ReLU: return "relu";
        case ActKind::LeakyReLU: {
            std::ostringstream os;
            os << "leaky_relu(" << slope << ")";
            return os.str();
        }
        case ActKind::GeLU: return "gelu";
        case ActKind::Identity: return "identity";
        }
        return "?";
    }
};

inline Activation parse_activation(const std::string& text) {
    if (text == "relu") return Activation::relu();
    if (text == "gelu") return Activation::gelu();
    if (text == "identity" || text == "linear") return Activation::identity();
    if (text.rfind("leaky", 0) == 0) {
        const auto colon = text.find(':');
        double slope = 0.01;
        if (colon != std::string::npos) slope = std::stod(text.substr(colon + 1));
        return Activation::leaky_relu(slope);
    }
    throw ConfigError("unknown activation '" + text + "' (expected relu|leaky[:slope]|gelu|identity)");
}

} // namespace splinescope

#endif
