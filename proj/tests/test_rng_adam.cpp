#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "fcrl/adam.hpp"
#include "fcrl/rng.hpp"

using namespace fcrl;

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) {
        const double va = a.uniform();
        CHECK(va == b.uniform());
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    bool differs = false;
    Rng a2(123);
    for (int i = 0; i < 10; ++i) differs |= a2.uniform() != c.uniform();
    CHECK(differs);
}

TEST_CASE("uniform(a,b) stays inside its interval") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-2.5, 1.25);
        CHECK(v >= -2.5);
        CHECK(v <= 1.25);
    }
}

TEST_CASE("normal draws have the right first two moments") {
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == Catch::Approx(0.0).margin(0.01));
    CHECK(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("index is unbiased over small ranges") {
    Rng rng(5);
    const int n = 60000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < n; ++i) ++counts[rng.index(3)];
    for (int k = 0; k < 3; ++k)
        CHECK(static_cast<double>(counts[k]) / n == Catch::Approx(1.0 / 3.0).margin(0.01));
}

TEST_CASE("shuffle permutes without losing elements") {
    Rng rng(11);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto orig = v;
    rng.shuffle(v);
    CHECK(v != orig);  // astronomically unlikely to be identity
    std::sort(v.begin(), v.end());
    CHECK(v == orig);
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, 0) == derive_seed(1, 0));
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("adam first step moves by about the learning rate") {
    // with bias correction, |step 1| = lr * g / (|g| + eps) ~ lr * sign(g)
    Matrix p(1, 2, std::vector<double>{1.0, -3.0});
    Matrix g(1, 2, std::vector<double>{0.5, -2.0});
    AdamState opt({.lr = 0.01});
    opt.step(p, g);
    CHECK(p(0, 0) == Catch::Approx(1.0 - 0.01).margin(1e-6));
    CHECK(p(0, 1) == Catch::Approx(-3.0 + 0.01).margin(1e-6));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam converges on a quadratic") {
    // minimize sum (p_k - t_k)^2
    Matrix p(1, 3, 0.0);
    const std::vector<double> target = {1.0, -2.0, 0.25};
    AdamState opt({.lr = 0.05});
    for (int it = 0; it < 2000; ++it) {
        Matrix g(1, 3);
        for (std::size_t k = 0; k < 3; ++k) g.at_flat(k) = 2.0 * (p.at_flat(k) - target[k]);
        opt.step(p, g);
    }
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(p.at_flat(k) == Catch::Approx(target[k]).margin(1e-3));
}

TEST_CASE("adam rejects mismatched tensors") {
    Matrix p(2, 2, 0.0);
    Matrix g(2, 3, 0.0);
    AdamState opt;
    CHECK_THROWS_AS(opt.step(p, g), DimensionError);
    Matrix p2(1, 1, 0.0), g2(1, 1, 0.0);
    AdamState opt2;
    CHECK_THROWS_AS(opt2.step({&p2}, {&g2, &g2}), DimensionError);
}

TEST_CASE("adam restore resumes bit-exactly") {
    auto run = [](int split) {
        Matrix p(1, 2, std::vector<double>{2.0, -1.0});
        AdamState opt({.lr = 0.02});
        AdamState resumed;
        for (int it = 0; it < 20; ++it) {
            if (it == split) {
                resumed = AdamState({.lr = 0.02});
                resumed.restore(opt.first_moments(), opt.second_moments(), opt.step_count());
                std::swap(opt, resumed);
            }
            Matrix g(1, 2, std::vector<double>{p(0, 0), 3.0 * p(0, 1)});
            opt.step(p, g);
        }
        return p.data();
    };
    CHECK(run(10) == run(-1));
}
