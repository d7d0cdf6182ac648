#include <catch2/catch_amalgamated.hpp>

#include "fcrl/grad_check.hpp"
#include "fcrl/matrix.hpp"

using namespace fcrl;

TEST_CASE("matrix construction and element access") {
    Matrix m(2, 3, 1.5);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m.size() == 6);
    for (std::size_t k = 0; k < m.size(); ++k) CHECK(m.at_flat(k) == 1.5);
    m(1, 2) = -4.0;
    CHECK(m(1, 2) == -4.0);
    CHECK(m.at_flat(5) == -4.0);  // row-major layout

    Matrix from_data(2, 2, std::vector<double>{1.0, 2.0, 3.0, 4.0});
    CHECK(from_data(0, 1) == 2.0);
    CHECK(from_data(1, 0) == 3.0);
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("matmul worked example and shape checks") {
    Matrix a(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    Matrix b(3, 2, std::vector<double>{7, 8, 9, 10, 11, 12});
    Matrix c = matmul(a, b);
    REQUIRE(c.rows() == 2);
    REQUIRE(c.cols() == 2);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
    CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("transpose round trip") {
    Matrix a(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    Matrix t = transpose(a);
    CHECK(t.rows() == 3);
    CHECK(t.cols() == 2);
    CHECK(t(2, 1) == 6.0);
    CHECK(transpose(t).data() == a.data());
}

TEST_CASE("affine broadcasts the bias over rows") {
    Matrix x(2, 2, std::vector<double>{1, 0, 0, 1});
    Matrix w(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    Matrix b(1, 3, std::vector<double>{10, 20, 30});
    Matrix out = affine(x, w, b);
    CHECK(out(0, 0) == 11.0);
    CHECK(out(0, 2) == 33.0);
    CHECK(out(1, 1) == 25.0);
    Matrix bad_bias(2, 3, 0.0);
    CHECK_THROWS_AS(affine(x, w, bad_bias), DimensionError);
}

TEST_CASE("activations") {
    CHECK(apply_activation(Activation::Relu, -2.0) == 0.0);
    CHECK(apply_activation(Activation::Relu, 3.0) == 3.0);
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(700.0) == Catch::Approx(1.0));
    CHECK(sigmoid(-700.0) == Catch::Approx(0.0).margin(1e-300));
    CHECK(std::isfinite(sigmoid(-1000.0)));
    CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(softplus(100.0) == 100.0);  // overflow-safe branch
    CHECK(softplus(-40.0) == Catch::Approx(std::exp(-40.0)).epsilon(1e-6));
    // softplus' = sigmoid, spot-checked numerically
    for (double x : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
        const double h = 1e-6;
        const double num = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
        CHECK(num == Catch::Approx(sigmoid(x)).margin(1e-8));
    }
}

TEST_CASE("require_finite flags NaN and infinity") {
    Matrix m(1, 2, 1.0);
    CHECK_NOTHROW(m.require_finite("ctx"));
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(m.require_finite("ctx"), NumericError);
    m(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(m.require_finite("ctx"), NumericError);
}

TEST_CASE("finite difference gradient helper on a quadratic") {
    // f(w) = sum w_k^2 has gradient 2w
    auto f = [](const std::vector<double>& w) {
        double s = 0.0;
        for (double v : w) s += v * v;
        return s;
    };
    const std::vector<double> w = {1.0, -2.0, 0.5};
    const auto g = finite_diff_grad(f, w, 1e-5);
    REQUIRE(g.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(g[k] == Catch::Approx(2.0 * w[k]).margin(1e-8));
    CHECK_THROWS_AS(finite_diff_grad(f, w, 0.0), DomainError);
}
