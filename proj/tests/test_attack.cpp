#include "splinescope/attack.hpp"
#include "splinescope/dataset.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace splinescope;

namespace {

Network linear_two_class() {
    Network net;
    net.input_dim = 2;
    Mat w(2, 2);
    w << 1.0, -2.0, -1.0, 2.0;
    net.layers.push_back({w, Vec::Zero(2), Activation::identity(), std::nullopt});
    net.validate();
    return net;
}

} // namespace

TEST_CASE("pgd: single step on a linear model matches the closed form", "[adversarial]") {
    const Network net = linear_two_class();
    Vec x(2);
    x << 0.5, 0.5;
    AttackConfig cfg{.epsilon = 0.06, .alpha = 0.0156, .steps = 1, .seed = 0,
                     .random_start = false};

    // FGSM by hand: logits = Wx, p = softmax, grad_x = W^T (p - onehot)
    const Vec logits = net.layers[0].weight * x;
    Vec p(2);
    const double z = std::exp(logits(0)) + std::exp(logits(1));
    p << std::exp(logits(0)) / z, std::exp(logits(1)) / z;
    Vec cot = p;
    cot(0) -= 1.0; // true label 0
    const Vec grad = net.layers[0].weight.transpose() * cot;
    Vec expected = x;
    for (int i = 0; i < 2; ++i) {
        expected(i) += cfg.alpha * (grad(i) > 0 ? 1.0 : (grad(i) < 0 ? -1.0 : 0.0));
        expected(i) = std::clamp(expected(i), x(i) - cfg.epsilon, x(i) + cfg.epsilon);
        expected(i) = std::clamp(expected(i), 0.0, 1.0);
    }

    const Vec adv = pgd_attack(net, x, 0, cfg);
    CHECK((adv - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pgd: epsilon zero returns the input exactly", "[adversarial]") {
    const Network net = linear_two_class();
    Vec x(2);
    x << 0.3, 0.8;
    AttackConfig cfg{.epsilon = 0.0, .alpha = 0.0, .steps = 5, .seed = 9, .random_start = true};
    const Vec adv = pgd_attack(net, x, 1, cfg);
    CHECK(adv == x);
}

TEST_CASE("pgd: ball and range containment hold for every output", "[adversarial]") {
    const Network net = init_network({6, 12, 10, 3}, Activation::relu(), 77);
    Rng rng(4);
    Mat batch(16, 6);
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        for (Eigen::Index j = 0; j < 6; ++j) batch(i, j) = rng.next_double();
        labels.push_back(static_cast<int>(rng.next_below(3)));
    }
    for (double eps : {0.01, 0.1, 0.3}) {
        AttackConfig cfg{.epsilon = eps, .alpha = eps / 4.0, .steps = 12, .seed = 5,
                         .random_start = true};
        const Mat adv = pgd_attack_batch(net, batch, labels, cfg);
        CHECK((adv - batch).cwiseAbs().maxCoeff() <= eps + 1e-12);
        CHECK(adv.minCoeff() >= 0.0);
        CHECK(adv.maxCoeff() <= 1.0);
    }
}

TEST_CASE("pgd: alpha must not exceed epsilon", "[adversarial]") {
    AttackConfig cfg{.epsilon = 0.01, .alpha = 0.05, .steps = 1};
    CHECK_THROWS_AS(cfg.validate(), DimensionError);
}

TEST_CASE("robust accuracy: epsilon zero equals clean accuracy", "[adversarial]") {
    const Network net = init_network({4, 16, 2}, Activation::relu(), 21);
    const Dataset ds = make_two_blobs(64, 4.0, 3);
    Mat inputs(64, 4);
    inputs << ds.inputs, Mat::Zero(64, 2); // pad the blobs into 4 dims
    AttackConfig cfg{.epsilon = 0.0, .alpha = 0.0, .steps = 3, .seed = 1,
                     .random_start = false, .data_range = {-10.0, 10.0}};
    CHECK(robust_accuracy(net, inputs, ds.labels, cfg) ==
          clean_accuracy(net, inputs, ds.labels));
}

TEST_CASE("robust accuracy: never exceeds clean accuracy", "[adversarial]") {
    const Network net = init_network({2, 24, 24, 2}, Activation::relu(), 8);
    const Dataset ds = make_two_blobs(128, 3.0, 17);
    for (double eps : {0.05, 0.2, 0.5}) {
        AttackConfig cfg{.epsilon = eps, .alpha = eps / 3.0, .steps = 8, .seed = 2,
                         .random_start = true, .data_range = {-10.0, 10.0}};
        CHECK(robust_accuracy(net, ds.inputs, ds.labels, cfg) <=
              clean_accuracy(net, ds.inputs, ds.labels));
    }
}

TEST_CASE("robust accuracy: constant classifier keeps the class prior", "[adversarial]") {
    Network net;
    net.input_dim = 2;
    net.layers.push_back({Mat::Zero(2, 2), Vec::Zero(2), Activation::identity(), std::nullopt});
    const Dataset ds = make_two_blobs(100, 2.0, 5);
    double prior0 = 0.0;
    for (int l : ds.labels)
        if (l == 0) prior0 += 1.0;
    prior0 /= static_cast<double>(ds.labels.size());

    for (double eps : {0.0, 0.1, 0.5}) {
        AttackConfig cfg{.epsilon = eps, .alpha = eps > 0 ? eps / 2 : 0.0, .steps = 4,
                         .seed = 3, .random_start = true, .data_range = {-10.0, 10.0}};
        CHECK(robust_accuracy(net, ds.inputs, ds.labels, cfg) == prior0);
    }
}

TEST_CASE("robust accuracy: deterministic and chunking-independent", "[adversarial]") {
    const Network net = init_network({2, 20, 2}, Activation::relu(), 13);
    const Dataset ds = make_two_blobs(64, 2.5, 29);
    AttackConfig cfg{.epsilon = 0.2, .alpha = 0.05, .steps = 6, .seed = 11,
                     .random_start = true, .data_range = {-10.0, 10.0}};
    const double serial = robust_accuracy(net, ds.inputs, ds.labels, cfg);
    const ThreadPool pool(3);
    CHECK(robust_accuracy(net, ds.inputs, ds.labels, cfg, pool) == serial);
    CHECK(robust_accuracy(net, ds.inputs, ds.labels, cfg) == serial);
}

TEST_CASE("robust accuracy: envelope is monotone in the attack set", "[adversarial]") {
    const Network net = init_network({2, 24, 24, 2}, Activation::relu(), 41);
    const Dataset ds = make_two_blobs(96, 3.0, 7);
    auto cfg_for = [](double eps) {
        return AttackConfig{.epsilon = eps, .alpha = eps / 4.0, .steps = 10, .seed = 0,
                            .random_start = false, .data_range = {-10.0, 10.0}};
    };
    std::vector<AttackConfig> attacks;
    double prev = 1.0;
    for (double eps : {0.05, 0.1, 0.2, 0.4}) {
        attacks.push_back(cfg_for(eps));
        const double acc = robust_accuracy_envelope(net, ds.inputs, ds.labels, attacks);
        CHECK(acc <= prev);
        prev = acc;
    }
}

TEST_CASE("pgd: non-finite gradients are reported with the step index", "[adversarial]") {
    Network net;
    net.input_dim = 2;
    Mat w = Mat::Constant(2, 2, 1e308);
    net.layers.push_back({w, Vec::Zero(2), Activation::relu(), std::nullopt});
    net.layers.push_back({Mat::Constant(2, 2, 1e308), Vec::Zero(2), Activation::identity(),
                          std::nullopt});
    Vec x(2);
    x << 1.0, 1.0;
    AttackConfig cfg{.epsilon = 0.1, .alpha = 0.05, .steps = 2, .seed = 0, .random_start = false};
    CHECK_THROWS_MATCHES(pgd_attack(net, x, 0, cfg), DimensionError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("step")));
}
