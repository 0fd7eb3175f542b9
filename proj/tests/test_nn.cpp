#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pairvoice/errors.hpp"
#include "pairvoice/nn/common.hpp"
#include "pairvoice/nn/dense.hpp"
#include "pairvoice/nn/gradcheck.hpp"
#include "pairvoice/nn/metrics.hpp"
#include "pairvoice/nn/serialize.hpp"
#include "pairvoice/nn/train.hpp"
#include "test_helpers.hpp"

using namespace pairvoice;
using namespace pairvoice::nn;

namespace {

struct Sample {
    std::vector<double> x;
    int label = 0;
};

std::vector<Sample> blobs(std::size_t n, std::uint64_t seed, double sep = 2.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.4);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        const double c = y ? sep : -sep;
        out.push_back({{c + nd(rng), c + nd(rng)}, y});
    }
    return out;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix m(r, c);
    for (auto& x : m.flat()) x = nd(rng);
    return m;
}

double accuracy(const DenseNet3& net, const std::vector<Sample>& data) {
    const auto p = net.predict_positive(std::span<const Sample>(data));
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) ok += (p[i] >= 0.5) == (data[i].label == 1);
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("softmax rows sum to one") {
    std::mt19937_64 rng(1);
    Matrix logits = random_matrix(20, 5, rng);
    logits(0, 0) = 800.0;  // max shift keeps this finite
    const Matrix p = softmax_rows(logits);
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double s = 0.0;
        for (double v : p.row(r)) {
            CHECK(std::isfinite(v));
            s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("cross-entropy gradient") {
    std::mt19937_64 rng(2);
    Matrix logits = random_matrix(6, 2, rng);
    const std::vector<int> y{0, 1, 1, 0, 1, 0};
    Matrix g;
    softmax_cross_entropy(logits, y, &g);
    const auto r = gradient_check({&logits}, {g}, [&] { return softmax_cross_entropy(logits, y, nullptr); }, 0, 0);
    CHECK(r.max_rel_error < 1e-7);
}

TEST_CASE("zero network is undecided") {
    const DenseNet3 net = DenseNet3::zeros(4, 8, 3);
    std::mt19937_64 rng(3);
    const Matrix p = net.forward(random_matrix(10, 4, rng));
    for (double v : p.flat()) CHECK(v == 0.5);
    CHECK_THROWS_AS(net.forward(Matrix(2, 5)), ShapeError);
}

TEST_CASE("dense gradients match finite differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        DenseNet3 net(5, 7, 4, seed);  // 84 parameters, all checked
        std::mt19937_64 rng(seed + 100);
        const Matrix x = random_matrix(9, 5, rng);
        std::vector<int> y(9);
        for (auto& v : y) v = static_cast<int>(rng() % 2);
        std::vector<Matrix> g;
        net.loss_and_gradient(x, y, g);
        const auto r = gradient_check(net.parameters(), g, [&] { return net.loss(x, y); }, 200, seed);
        CHECK(r.checked == std::min<std::size_t>(200, 5 * 7 + 7 + 7 * 4 + 4 + 4 * 2 + 2));
        CHECK(r.max_rel_error < 1e-5);
    }
}

TEST_CASE("separable blobs are learned") {
    const auto data = blobs(64, 4);
    DenseNet3 net(2, 16, 8, 4);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.epochs = 200;
    cfg.batch = 64;
    const auto res = train(net, std::span<const Sample>(data), cfg);
    CHECK(accuracy(net, data) == 1.0);
    REQUIRE(res.loss_curve.size() == 200);
    for (std::size_t e = 3; e + 1 < res.loss_curve.size(); ++e) CHECK(res.loss_curve[e + 1] <= res.loss_curve[e]);
}

TEST_CASE("training determinism and the null update") {
    const auto data = blobs(40, 5, 1.0);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch = 8;
    cfg.seed = 11;
    DenseNet3 a(2, 8, 4, 1), b(2, 8, 4, 1);
    train(a, std::span<const Sample>(data), cfg);
    train(b, std::span<const Sample>(data), cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(*a.parameters()[i] == *b.parameters()[i]);

    DenseNet3 frozen(2, 8, 4, 1);
    const DenseNet3 before = frozen;
    cfg.lr = 0.0;
    train(frozen, std::span<const Sample>(data), cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(*frozen.parameters()[i] == *before.parameters()[i]);
}

TEST_CASE("training errors") {
    DenseNet3 net(2, 4, 2, 0);
    const std::vector<Sample> none;
    CHECK_THROWS_AS(train(net, std::span<const Sample>(none), TrainConfig{}), InsufficientDataError);
    std::vector<Sample> bad{{{std::nan(""), 0.0}, 1}, {{1.0, 1.0}, 0}};
    try {
        train(net, std::span<const Sample>(bad), TrainConfig{});
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    }
}

TEST_CASE("metrics arithmetic") {
    const Metrics m = metrics_from_counts(3, 1, 1, 5);
    CHECK(m.precision == 0.75);
    CHECK(m.recall == 0.75);
    CHECK(m.f1 == doctest::Approx(0.75));

    const std::vector<int> labels{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    std::vector<double> perfect;
    for (int y : labels) perfect.push_back(y ? 0.9 : 0.1);
    CHECK(evaluate(perfect, labels).f1 == 1.0);

    const std::vector<double> all_pos(10, 0.5);
    const Metrics ap = evaluate(all_pos, labels);
    CHECK(ap.precision == 0.5);
    CHECK(ap.recall == 1.0);
    CHECK(ap.f1 == doctest::Approx(2.0 / 3.0));

    const Metrics none = evaluate(std::vector<double>(10, 0.0), labels);
    CHECK(none.f1 == 0.0);
    CHECK(none.f1_undefined);
    CHECK_THROWS_AS(evaluate(std::vector<double>(3, 0.0), labels), ShapeError);
    CHECK_THROWS_AS(evaluate(std::vector<double>{}, std::vector<int>{}), InsufficientDataError);
}

TEST_CASE("evaluate is permutation invariant") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> p(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
        p[i] = u(rng);
        y[i] = static_cast<int>(rng() % 2);
    }
    const Metrics a = evaluate(p, y);
    for (int trial = 0; trial < 20; ++trial) {
        for (std::size_t i = 50; i > 1; --i) {
            const std::size_t j = rng() % i;
            std::swap(p[i - 1], p[j]);
            std::swap(y[i - 1], y[j]);
        }
        const Metrics b = evaluate(p, y);
        CHECK(b.tp == a.tp);
        CHECK(b.fp == a.fp);
        CHECK(b.f1 == a.f1);
    }
}

TEST_CASE("dense network JSON round trip") {
    const auto data = blobs(20, 9);
    DenseNet3 net(2, 6, 3, 21);
    TrainConfig cfg;
    cfg.epochs = 3;
    train(net, std::span<const Sample>(data), cfg);
    const DenseNet3 back = dense_from_json(to_json(net));
    CHECK(back.seed() == 21);
    CHECK(back.predict_positive(std::span<const Sample>(data)) == net.predict_positive(std::span<const Sample>(data)));

    testutil::TempDir dir("model");
    save_text(dir / "m.json", to_json(net));
    CHECK(dense_from_json(load_text(dir / "m.json")).predict_positive(std::span<const Sample>(data)) ==
          net.predict_positive(std::span<const Sample>(data)));

    CHECK_THROWS_AS(dense_from_json("{\"schema_version\": 99}"), SchemaError);
    CHECK_THROWS_AS(dense_from_json("not json"), SchemaError);
    CHECK_THROWS_AS(load_text(dir / "missing.json"), IoError);
}
