#include <catch2/catch_amalgamated.hpp>

#include "fcrl/grad_check.hpp"
#include "fcrl/objective.hpp"

using namespace fcrl;

namespace {

Batch random_batch(std::size_t n, std::size_t p, std::size_t K, Rng& rng) {
    Batch b;
    b.X = Matrix(n, p);
    for (double& v : b.X.data()) v = rng.uniform();
    b.y.resize(n);
    b.c.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        b.y[i] = rng.uniform() < 0.5 ? 1 : 0;
        b.c[i] = static_cast<int>(rng.index(K));
    }
    // every group needs at least one member for the estimator to be total
    for (std::size_t k = 0; k < K && k < n; ++k) b.c[k] = static_cast<int>(k);
    return b;
}

}  // namespace

TEST_CASE("label loss examples") {
    CHECK(label_loss({1.0 - kProbClamp, kProbClamp}, {1, 0}) == Catch::Approx(kProbClamp).margin(1e-6));
    CHECK(label_loss({0.5, 0.5, 0.5}, {0, 1, 1}) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    // confidently wrong
    CHECK(label_loss({kProbClamp}, {1}) == Catch::Approx(-std::log(kProbClamp)).epsilon(1e-9));
}

TEST_CASE("rate term closed-form examples") {
    CHECK(rate_term(Matrix(3, 2, 0.0), Matrix(3, 2, 1.0)) == Catch::Approx(0.0).margin(1e-15));
    CHECK(rate_term(Matrix(1, 1, 1.0), Matrix(1, 1, 1.0)) == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(rate_term(Matrix(1, 1, 0.0), Matrix(1, 1, 2.0)) ==
          Catch::Approx(0.5 * (4.0 - 1.0 - 2.0 * std::log(2.0))).epsilon(1e-12));
}

TEST_CASE("rate term is nonnegative, zero only at the prior") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix mu(2, 3), sig(2, 3);
        for (double& v : mu.data()) v = rng.normal();
        for (double& v : sig.data()) v = std::exp(rng.normal());
        CHECK(rate_term(mu, sig) >= 0.0);
    }
}

TEST_CASE("rate term matches Monte-Carlo KL estimate") {
    // KL(N(mu,sigma^2) || N(0,1)) estimated by sampling log-density ratios
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const double mu = rng.uniform(-1.5, 1.5);
        const double sig = std::exp(rng.uniform(-0.7, 0.7));
        double acc = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            const double z = mu + sig * rng.normal();
            const double logq = -0.5 * std::pow((z - mu) / sig, 2) - std::log(sig);
            const double logp = -0.5 * z * z;
            acc += logq - logp;
        }
        acc /= n;
        CHECK(rate_term(Matrix(1, 1, mu), Matrix(1, 1, sig)) == Catch::Approx(acc).margin(1e-2));
    }
}

TEST_CASE("contrastive term examples") {
    SECTION("constant scorer gives zero") {
        Matrix S(3, 3, 0.7);
        std::vector<int> c = {0, 0, 1};
        CHECK(contrastive_term_from_scores(S, c) == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("singleton group contributes zero") {
        Matrix S(1, 1, 42.0);
        CHECK(contrastive_term_from_scores(S, {0}) == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("two same-group rows, hand arithmetic") {
        // exp-scores toward column 0: own 2, other 1
        Matrix S(2, 2);
        S(0, 0) = 2.0;
        S(1, 0) = 1.0;
        S(0, 1) = 1.0;
        S(1, 1) = 2.0;
        const double expect = std::log(2.0) - std::log(1.5);
        CHECK(contrastive_term_from_scores(S, {0, 0}) == Catch::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("contrastive term bounded by log of max group size") {
    Rng rng(3);
    Dims dims{.p = 4, .d = 3, .h = 5, .K = 2, .pred_hidden = 4};
    for (int trial = 0; trial < 20; ++trial) {
        auto model = init_model(dims, Objective::O2, rng);
        // exaggerate the scorer so the bound is stressed
        for (double& v : model.scorer.Wz.data()) v *= 10.0;
        Batch b = random_batch(8, dims.p, dims.K, rng);
        Matrix Z = rng.normal_matrix(8, dims.d);
        std::size_t max_m = 0;
        for (int k = 0; k < 2; ++k) {
            std::size_t m = 0;
            for (int ci : b.c) m += ci == k;
            max_m = std::max(max_m, m);
        }
        const double v = contrastive_term(model.scorer, Z, b.X, b.c);
        CHECK(v <= std::log(static_cast<double>(max_m)) + 1e-12);
    }
}

TEST_CASE("total loss gradients match finite differences") {
    Rng rng(17);
    int checked = 0;
    for (int trial = 0; trial < 10; ++trial) {
        Dims dims;
        dims.p = 2 + rng.index(3);
        dims.d = 1 + rng.index(2);
        dims.h = 3 + rng.index(3);
        dims.K = 2;
        dims.pred_hidden = 3;
        const Objective obj = trial % 2 ? Objective::O1 : Objective::O2;
        auto model = init_model(dims, obj, rng);
        Batch b = random_batch(4 + rng.index(3), dims.p, dims.K, rng);
        const Matrix eps = rng.normal_matrix(b.size(), dims.d);
        const double beta = rng.uniform(0.05, 1.0);
        const double lambda = rng.uniform(0.5, 2.5);

        auto res = total_loss_with_eps(model, b, beta, lambda, eps);
        const std::vector<double> analytic = res.grads.pack();
        auto loss_fn = [&](const std::vector<double>& flat) {
            FcrlModel m2 = model;
            m2.unpack(flat);
            return total_loss_with_eps(m2, b, beta, lambda, eps).breakdown.total;
        };
        const std::vector<double> numeric = finite_diff_grad(loss_fn, model.pack(), 1e-5);
        REQUIRE(analytic.size() == numeric.size());
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-4});
            CHECK(std::abs(analytic[i] - numeric[i]) / denom < 1e-4);
        }
        ++checked;
    }
    CHECK(checked == 10);
}

TEST_CASE("beta = 0 reduces to the label loss") {
    Rng rng(5);
    Dims dims{.p = 3, .d = 2, .h = 4, .K = 2, .pred_hidden = 3};
    auto model = init_model(dims, Objective::O2, rng);
    Batch b = random_batch(6, dims.p, dims.K, rng);
    const Matrix eps = rng.normal_matrix(6, dims.d);
    auto res = total_loss_with_eps(model, b, 0.0, 2.0, eps);
    CHECK(res.breakdown.total == Catch::Approx(res.breakdown.label_loss).epsilon(1e-12));
}

TEST_CASE("lambda enters linearly through the contrastive term") {
    Rng rng(9);
    Dims dims{.p = 3, .d = 2, .h = 4, .K = 2, .pred_hidden = 3};
    auto model = init_model(dims, Objective::O2, rng);
    Batch b = random_batch(6, dims.p, dims.K, rng);
    const Matrix eps = rng.normal_matrix(6, dims.d);
    const double beta = 0.3;
    auto r1 = total_loss_with_eps(model, b, beta, 1.0, eps);
    auto r2 = total_loss_with_eps(model, b, beta, 2.0, eps);
    CHECK(r1.breakdown.total - r2.breakdown.total ==
          Catch::Approx(beta * r1.breakdown.contrastive).epsilon(1e-10));
}
