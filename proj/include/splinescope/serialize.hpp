#ifndef SPLINESCOPE_SERIALIZE_HPP
#define SPLINESCOPE_SERIALIZE_HPP

#include "splinescope/network.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace splinescope {

// Weight file, little-endian:
//   magic "SPLN", version u32
//   layer count u32
//   per layer: out u32, in u32, activation tag u8
//              (tag 1 = LeakyReLU, followed by f64 slope),
//              bn flag u8 (1 -> f64 vectors mu, sigma, gamma, beta of length out),
//              weight row-major f64[out*in], bias f64[out]
inline constexpr uint32_t kWeightFormatVersion = 1;

namespace detail {

static_assert(sizeof(double) == 8, "f64 storage assumed");

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline uint32_t get_u32(std::istream& is, const std::string& field) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw ParseError("weight file truncated while reading " + field);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint8_t get_u8(std::istream& is, const std::string& field) {
    char c;
    if (!is.read(&c, 1)) throw ParseError("weight file truncated while reading " + field);
    return static_cast<uint8_t>(c);
}

inline double get_f64(std::istream& is, const std::string& field) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw ParseError("weight file truncated while reading " + field);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline Vec get_vec(std::istream& is, Eigen::Index n, const std::string& field) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = get_f64(is, field);
    return v;
}

} // namespace detail

inline void save_weights(const Network& net, std::ostream& os) {
    net.validate();
    os.write("SPLN", 4);
    detail::put_u32(os, kWeightFormatVersion);
    detail::put_u32(os, static_cast<uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        detail::put_u32(os, static_cast<uint32_t>(layer.out_dim()));
        detail::put_u32(os, static_cast<uint32_t>(layer.in_dim()));
        os.put(static_cast<char>(layer.act.kind));
        if (layer.act.kind == ActKind::LeakyReLU) detail::put_f64(os, layer.act.slope);
        os.put(layer.bn ? 1 : 0);
        if (layer.bn) {
            for (const Vec* v : {&layer.bn->mu, &layer.bn->sigma, &layer.bn->gamma, &layer.bn->beta})
                for (Eigen::Index i = 0; i < v->size(); ++i) detail::put_f64(os, (*v)(i));
        }
        for (Eigen::Index i = 0; i < layer.out_dim(); ++i)
            for (Eigen::Index j = 0; j < layer.in_dim(); ++j) detail::put_f64(os, layer.weight(i, j));
        for (Eigen::Index i = 0; i < layer.out_dim(); ++i) detail::put_f64(os, layer.bias(i));
    }
    if (!os) throw IoError("failed writing weight stream");
}

inline void save_weights(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    save_weights(net, os);
    os.flush();
    if (!os) throw IoError("failed writing '" + path + "'");
}

inline Network load_weights(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "SPLN", 4) != 0)
        throw ParseError("bad magic: expected \"SPLN\"");
    const uint32_t version = detail::get_u32(is, "format version");
    if (version != kWeightFormatVersion)
        throw ParseError("unsupported weight format version " + std::to_string(version));
    const uint32_t layer_count = detail::get_u32(is, "layer count");
    if (layer_count == 0) throw ParseError("layer count must be >= 1");

    Network net;
    net.layers.reserve(layer_count);
    for (uint32_t k = 0; k < layer_count; ++k) {
        const std::string at = "layer " + std::to_string(k);
        const uint32_t out = detail::get_u32(is, at + " out dim");
        const uint32_t in = detail::get_u32(is, at + " in dim");
        if (out == 0 || in == 0) throw ParseError(at + " has zero dimension");
        const uint8_t tag = detail::get_u8(is, at + " activation tag");
        Layer layer;
        switch (tag) {
        case 0: layer.act = Activation::relu(); break;
        case 1: layer.act = Activation::leaky_relu(detail::get_f64(is, at + " leaky slope")); break;
        case 2: layer.act = Activation::gelu(); break;
        case 3: layer.act = Activation::identity(); break;
        default: throw ParseError(at + " has unknown activation tag " + std::to_string(tag));
        }
        const uint8_t bn_flag = detail::get_u8(is, at + " bn flag");
        if (bn_flag > 1) throw ParseError(at + " has invalid bn flag " + std::to_string(bn_flag));
        if (bn_flag == 1) {
            BNParams bn;
            bn.mu = detail::get_vec(is, out, at + " bn mu");
            bn.sigma = detail::get_vec(is, out, at + " bn sigma");
            bn.gamma = detail::get_vec(is, out, at + " bn gamma");
            bn.beta = detail::get_vec(is, out, at + " bn beta");
            layer.bn = std::move(bn);
        }
        layer.weight.resize(out, in);
        for (uint32_t i = 0; i < out; ++i)
            for (uint32_t j = 0; j < in; ++j)
                layer.weight(i, j) = detail::get_f64(is, at + " weight");
        layer.bias = detail::get_vec(is, out, at + " bias");
        net.layers.push_back(std::move(layer));
    }
    net.input_dim = static_cast<int>(net.layers.front().in_dim());
    net.validate(); // catches inter-layer dimension mismatches before anyone uses the net

    is.peek();
    if (!is.eof()) throw ParseError("trailing bytes after last layer");
    return net;
}

inline Network load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    return load_weights(is);
}

} // namespace splinescope

#endif
