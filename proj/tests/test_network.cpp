#include "splinescope/network.hpp"
#include "splinescope/serialize.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace splinescope;

namespace {

Network single_layer(Mat w, Vec b, Activation act) {
    Network net;
    net.input_dim = static_cast<int>(w.cols());
    net.layers.push_back({std::move(w), std::move(b), act, std::nullopt});
    net.validate();
    return net;
}

Network random_net(const std::vector<int>& dims, Activation act, uint64_t seed) {
    return init_network(dims, act, seed);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("forward: identity weights pass a batch through", "[netcore]") {
    Network net = single_layer(Mat::Identity(2, 2), Vec::Zero(2), Activation::relu());
    Mat batch(1, 2);
    batch << -1.0, 2.0;
    const ForwardTrace trace = forward(net, batch);
    CHECK(trace.preacts[0](0, 0) == -1.0);
    CHECK(trace.preacts[0](0, 1) == 2.0);
    CHECK(trace.output(0, 0) == 0.0);
    CHECK(trace.output(0, 1) == 2.0);
}

TEST_CASE("forward: zero-bias linear net is exactly zero at the origin", "[netcore]") {
    Network net = random_net({5, 7, 7, 3}, Activation::identity(), 11);
    for (auto& layer : net.layers) layer.bias.setZero();
    const ForwardTrace trace = forward(net, Mat::Zero(1, 5));
    for (const auto& pre : trace.preacts) CHECK(pre.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches a straight-line scalar evaluator", "[netcore]") {
    const Network net = random_net({4, 6, 5, 3}, Activation::relu(), 42);
    Rng rng(7);
    Mat batch(5, 4);
    for (Eigen::Index i = 0; i < batch.size(); ++i) batch(i) = rng.normal();
    const ForwardTrace trace = forward(net, batch);
    for (Eigen::Index s = 0; s < batch.rows(); ++s) {
        const Vec expect = oracles::naive_forward(net, batch.row(s).transpose());
        for (Eigen::Index j = 0; j < expect.size(); ++j)
            CHECK_THAT(trace.output(s, j),
                       Catch::Matchers::WithinRel(expect(j), 1e-12) ||
                           Catch::Matchers::WithinAbs(expect(j), 1e-15));
    }
}

TEST_CASE("forward rejects bad input", "[netcore]") {
    const Network net = random_net({3, 4, 2}, Activation::relu(), 1);
    CHECK_THROWS_AS(forward(net, Mat::Zero(2, 5)), DimensionError);
    Mat bad = Mat::Zero(1, 3);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(net, bad), DimensionError);
}

TEST_CASE("backward: scalar linear layer", "[netcore]") {
    Mat w(1, 1);
    w << 2.0;
    Network net = single_layer(w, Vec::Zero(1), Activation::identity());
    Vec x(1), cot(1);
    x << 3.0;
    cot << 1.0;
    const auto [input_grad, grads] = backward(net, x, cot);
    CHECK(input_grad(0) == 2.0);
    CHECK(grads.weight[0](0, 0) == 3.0);
    CHECK(grads.bias[0](0) == 1.0);
}

TEST_CASE("backward: all-positive ReLU region equals the linear composition", "[netcore]") {
    Network net = random_net({3, 4, 2}, Activation::relu(), 3);
    for (auto& layer : net.layers) layer.bias.array() += 5.0; // push preacts positive near x
    Network linear = net;
    for (auto& layer : linear.layers) layer.act = Activation::identity();

    const Vec x = Vec::Constant(3, 0.1);
    Vec cot(2);
    cot << 1.0, -0.5;
    REQUIRE(forward(net, x.transpose()).preacts[0].minCoeff() > 0.0);
    const auto [gi_a, g_a] = backward(net, x, cot);
    const auto [gi_b, g_b] = backward(linear, x, cot);
    CHECK((gi_a - gi_b).cwiseAbs().maxCoeff() == 0.0);
    for (size_t k = 0; k < g_a.weight.size(); ++k) {
        CHECK((g_a.weight[k] - g_b.weight[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((g_a.bias[k] - g_b.bias[k]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("backward matches central finite differences on all activations", "[netcore]") {
    for (Activation act :
         {Activation::leaky_relu(0.01), Activation::gelu(), Activation::identity()}) {
        const Network net = random_net({3, 5, 4, 2}, act, 17);
        Rng rng(23);
        Vec x(3), cot(2);
        for (Eigen::Index i = 0; i < 3; ++i) x(i) = rng.normal();
        for (Eigen::Index i = 0; i < 2; ++i) cot(i) = rng.normal();

        const auto [input_grad, grads] = backward(net, x, cot);
        const auto fd = oracles::fd_param_grads(
            net, [&](const Network& n) { return cot.dot(oracles::naive_forward(n, x)); });
        for (size_t k = 0; k < grads.weight.size(); ++k) {
            for (Eigen::Index i = 0; i < grads.weight[k].size(); ++i)
                CHECK_THAT(grads.weight[k](i), Catch::Matchers::WithinRel(fd.weight[k](i), 1e-5) ||
                                                   Catch::Matchers::WithinAbs(fd.weight[k](i), 1e-7));
            for (Eigen::Index i = 0; i < grads.bias[k].size(); ++i)
                CHECK_THAT(grads.bias[k](i), Catch::Matchers::WithinRel(fd.bias[k](i), 1e-5) ||
                                                 Catch::Matchers::WithinAbs(fd.bias[k](i), 1e-7));
        }
    }
}

TEST_CASE("local affinity: away from hyperplanes the map is linear in the step", "[netcore]") {
    const Network net = random_net({4, 8, 8, 3}, Activation::relu(), 5);
    Rng rng(99);
    Vec x(4), u(4);
    for (Eigen::Index i = 0; i < 4; ++i) {
        x(i) = rng.normal();
        u(i) = rng.normal();
    }
    const ForwardTrace at_x = forward(net, x.transpose());
    for (const auto& pre : at_x.preacts) REQUIRE(pre.cwiseAbs().minCoeff() > 1e-9);

    const double eps1 = 1e-7, eps2 = 2e-7;
    const Vec f0 = at_x.output.row(0).transpose();
    const Vec d1 = forward_output(net, (x + eps1 * u).transpose()).row(0).transpose() - f0;
    const Vec d2 = forward_output(net, (x + eps2 * u).transpose()).row(0).transpose() - f0;
    CHECK((d2 - 2.0 * d1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("init: scale multiplies every parameter exactly", "[netcore]") {
    const Network base = init_network({6, 10, 4}, Activation::relu(), 2024, 1.0);
    const Network scaled = init_network({6, 10, 4}, Activation::relu(), 2024, 8.0);
    for (size_t k = 0; k < base.layers.size(); ++k) {
        CHECK((scaled.layers[k].weight - 8.0 * base.layers[k].weight).cwiseAbs().maxCoeff() == 0.0);
        CHECK((scaled.layers[k].bias - 8.0 * base.layers[k].bias).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("init: same seed reproduces identical parameters", "[netcore]") {
    const Network a = init_network({6, 10, 4}, Activation::relu(), 77);
    const Network b = init_network({6, 10, 4}, Activation::relu(), 77);
    for (size_t k = 0; k < a.layers.size(); ++k) {
        CHECK(a.layers[k].weight == b.layers[k].weight);
        CHECK(a.layers[k].bias == b.layers[k].bias);
    }
    CHECK_THROWS_AS(init_network({5}, Activation::relu(), 0), DimensionError);
    CHECK_THROWS_AS(init_network({5, 3}, Activation::relu(), 0, 0.0), DimensionError);
}

TEST_CASE("bn_apply: training mode normalizes the batch", "[netcore]") {
    Layer layer;
    layer.weight = Mat::Identity(3, 3);
    layer.bias = Vec::Zero(3);
    layer.act = Activation::identity();
    layer.bn = BNParams{Vec::Zero(3), Vec::Ones(3), Vec::Ones(3), Vec::Zero(3), 1e-8};

    Rng rng(4);
    Mat raw(64, 3);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = 3.0 * rng.normal() + 1.0;

    long seen = 0;
    const Mat out = bn_apply_train(layer, raw, seen);
    for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK_THAT(out.col(j).mean(), Catch::Matchers::WithinAbs(0.0, 1e-6));
        const double var = (out.col(j).array() - out.col(j).mean()).square().sum() / 64.0;
        CHECK_THAT(std::sqrt(var), Catch::Matchers::WithinAbs(1.0, 1e-6));
    }
    CHECK(seen == 1);

    // two-pass mean/std oracle on the stored statistics
    for (Eigen::Index j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (Eigen::Index i = 0; i < 64; ++i) mean += raw(i, j);
        mean /= 64.0;
        double var = 0.0;
        for (Eigen::Index i = 0; i < 64; ++i) var += (raw(i, j) - mean) * (raw(i, j) - mean);
        var /= 64.0;
        CHECK_THAT(layer.bn->mu(j), Catch::Matchers::WithinAbs(mean, 1e-12));
        CHECK_THAT(layer.bn->sigma(j), Catch::Matchers::WithinRel(std::sqrt(var + 1e-16), 1e-9));
    }

    Mat tiny = raw.topRows(1);
    CHECK_THROWS_AS(bn_apply_train(layer, tiny, seen), DimensionError);
}

TEST_CASE("bn_apply: gamma=sigma beta=mu is the identity on the batch", "[netcore]") {
    Rng rng(9);
    Mat raw(32, 2);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = rng.normal() * 2.0 - 0.3;

    Vec mu = raw.colwise().mean();
    Vec sigma(2);
    for (Eigen::Index j = 0; j < 2; ++j)
        sigma(j) = std::sqrt((raw.col(j).array() - mu(j)).square().sum() / raw.rows());

    Layer layer;
    layer.weight = Mat::Identity(2, 2);
    layer.bias = Vec::Zero(2);
    layer.act = Activation::identity();
    layer.bn = BNParams{mu, sigma, sigma, mu, 1e-12};
    const Mat out = bn_apply(layer, raw);
    CHECK((out - raw).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("bn_distance_check: hand computations and the exact identity", "[netcore]") {
    SECTION("points on the hyperplane") {
        Mat w(1, 2);
        w << 1.0, 0.0;
        Network net = single_layer(w, Vec::Zero(1), Activation::identity());
        Mat points(3, 2);
        points << 4.0, -1.0, 4.0, 0.0, 4.0, 7.0;
        const auto [lhs, rhs] = bn_distance_check(net, 0, 0, points);
        CHECK(lhs == 0.0);
        CHECK(rhs == 0.0);
    }
    SECTION("hand-computed two-point batch") {
        Mat w(1, 2);
        w << 2.0, 0.0;
        Network net = single_layer(w, Vec::Zero(1), Activation::identity());
        Mat points(2, 2);
        points << 0.0, 0.0, 2.0, 0.0;
        const auto [lhs, rhs] = bn_distance_check(net, 0, 0, points);
        CHECK_THAT(lhs, Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(rhs, Catch::Matchers::WithinAbs(1.0, 1e-15));
    }
    SECTION("random batches satisfy the identity to 1e-10 relative") {
        Rng rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            Mat w(1, 6);
            for (Eigen::Index j = 0; j < 6; ++j) w(0, j) = rng.normal();
            Network net = single_layer(w, Vec::Zero(1), Activation::identity());
            Mat points(50, 6);
            for (Eigen::Index i = 0; i < points.size(); ++i) points(i) = 5.0 * rng.normal();
            const auto [lhs, rhs] = bn_distance_check(net, 0, 0, points);
            CHECK(std::abs(lhs - rhs) / rhs < 1e-10);
        }
    }
    SECTION("zero weight row is rejected") {
        Network net = single_layer(Mat::Zero(1, 2), Vec::Zero(1), Activation::identity());
        CHECK_THROWS_AS(bn_distance_check(net, 0, 0, Mat::Zero(3, 2)), DimensionError);
    }
}

TEST_CASE("weights: save/load round-trips bitwise", "[netcore][serialize]") {
    Network net = init_network({4, 6, 3}, Activation::leaky_relu(0.05), 123, 2.0);
    net.layers[0].bn = BNParams{Vec::Ones(6) * 0.1, Vec::Ones(6) * 2.0, Vec::Ones(6), Vec::Zero(6)};
    const std::string path = temp_path("splinescope_roundtrip.weights");
    save_weights(net, path);
    const Network loaded = load_weights(path);

    REQUIRE(loaded.layers.size() == net.layers.size());
    CHECK(loaded.input_dim == net.input_dim);
    for (size_t k = 0; k < net.layers.size(); ++k) {
        CHECK(loaded.layers[k].weight == net.layers[k].weight);
        CHECK(loaded.layers[k].bias == net.layers[k].bias);
        CHECK(loaded.layers[k].act.kind == net.layers[k].act.kind);
        CHECK(loaded.layers[k].act.slope == net.layers[k].act.slope);
    }
    REQUIRE(loaded.layers[0].bn.has_value());
    CHECK(loaded.layers[0].bn->sigma == net.layers[0].bn->sigma);

    // identical outputs after the round trip
    Mat probe(2, 4);
    probe << 0.3, -1.2, 0.0, 2.0, 1.0, 1.0, -1.0, 0.5;
    CHECK(forward_output(net, probe) == forward_output(loaded, probe));
    std::remove(path.c_str());
}

TEST_CASE("weights: malformed files produce structured errors", "[netcore][serialize]") {
    Network net = init_network({2, 3, 2}, Activation::relu(), 5);
    std::ostringstream buf;
    save_weights(net, buf);
    const std::string good = buf.str();

    SECTION("bad magic") {
        std::string bad = good;
        bad[0] = 'X';
        std::istringstream is(bad);
        CHECK_THROWS_MATCHES(load_weights(is), ParseError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("magic")));
    }
    SECTION("truncation names the field") {
        std::string bad = good.substr(0, good.size() - 4);
        std::istringstream is(bad);
        CHECK_THROWS_MATCHES(load_weights(is), ParseError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("truncated")));
    }
    SECTION("declared dimensions that do not chain") {
        // corrupt the second layer's in-dim (offset: magic+ver+count + layer0)
        std::string bad = good;
        const size_t layer0 = 4 + 4 + 1 + 1 + 8 * (3 * 2 + 3);
        const size_t offset = 12 + layer0 + 4; // second layer's in-dim field
        bad[offset] = 9;
        std::istringstream is(bad);
        CHECK_THROWS_AS(load_weights(is), Error);
    }
    SECTION("trailing bytes rejected") {
        std::string bad = good + "zz";
        std::istringstream is(bad);
        CHECK_THROWS_MATCHES(load_weights(is), ParseError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("trailing")));
    }
}

TEST_CASE("weights: hand-written one-layer file loads and evaluates", "[netcore][serialize]") {
    // 1 layer, 1x1, identity activation, w=2.5, b=-1.0
    std::string bytes;
    auto put_u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto put_f64 = [&](double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    };
    bytes += "SPLN";
    put_u32(1); // version
    put_u32(1); // layer count
    put_u32(1); // out
    put_u32(1); // in
    bytes.push_back(3); // identity
    bytes.push_back(0); // no bn
    put_f64(2.5);
    put_f64(-1.0);

    std::istringstream is(bytes);
    const Network net = load_weights(is);
    Mat x(1, 1);
    x << 1.0;
    CHECK(forward_output(net, x)(0, 0) == 1.5);
}
