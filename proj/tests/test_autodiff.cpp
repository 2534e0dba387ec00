#include <doctest.h>

#include "gisst/autodiff.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace gisst;
using ad::Var;
using oracle::fd_check;
using oracle::random_tensor;

namespace {

constexpr double kOpTol = 1e-4;

const std::vector<ad::Edge>& kEdges = fixture::small_edges();

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("matmul forward matches hand product") {
    ad::Tape tape;
    Var a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
    Var b = tape.constant(Tensor::matrix({{5, 6}, {7, 8}}));
    CHECK(ad::matmul(a, b).value() == Tensor::matrix({{19, 22}, {43, 50}}));
}

TEST_CASE("gradient of every op matches central differences") {
    for (const auto& c : fixture::op_gradient_cases()) {
        CAPTURE(c.name);
        CHECK(fd_check(c.f, c.inputs) <= kOpTol);
    }
}

TEST_CASE("composite expression shares a node between two paths") {
    auto f = [](ad::Tape&, const std::vector<Var>& x) {
        Var s = ad::sigmoid(x[0]);
        return ad::hadamard(s, ad::log(ad::add_scalar(s, 1.0)));
    };
    CHECK(fd_check(f, {random_tensor({5}, 11)}) <= kOpTol);
}

TEST_CASE("constants receive no gradient") {
    ad::Tape tape;
    Var c = tape.constant(Tensor::vector({1, 2}));
    Var p = tape.parameter(Tensor::vector({3, 4}));
    tape.backward(ad::sum(ad::hadamard(c, p)));
    CHECK_FALSE(c.grad().has_value());
    REQUIRE(p.grad().has_value());
    CHECK(p.grad()->values == std::vector<double>{1, 2});
}

TEST_CASE("backward requires a scalar") {
    ad::Tape tape;
    Var p = tape.parameter(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(tape.backward(p), dimension_error);
}

TEST_CASE("shape mismatches throw dimension_error") {
    ad::Tape tape;
    Var a = tape.constant(Tensor::zeros({2, 3}));
    Var b = tape.constant(Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(ad::matmul(a, a), dimension_error);
    CHECK_THROWS_AS(ad::add(a, b), dimension_error);
    CHECK_THROWS_AS(ad::hadamard(a, b), dimension_error);
    CHECK_THROWS_AS(ad::mul_cols(a, tape.constant(Tensor::zeros({2}))), dimension_error);
}

TEST_CASE("log of a non-positive entry throws numeric_error") {
    ad::Tape tape;
    CHECK_THROWS_AS(ad::log(tape.constant(Tensor::vector({1.0, 0.0}))), numeric_error);
}

TEST_CASE("softmax cross-entropy is stable for large logits") {
    ad::Tape tape;
    Var logits = tape.constant(Tensor::matrix({{1000.0, 0.0}, {0.0, 1000.0}}));
    const std::size_t rows[] = {0, 1};
    const double loss = ad::softmax_cross_entropy(logits, ad::one_hot(std::vector<int>{0, 0}, 2), rows).value().item();
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(500.0));
}

TEST_CASE("softmax cross-entropy preconditions") {
    ad::Tape tape;
    Var logits = tape.constant(Tensor::zeros({2, 2}));
    const Tensor y = ad::one_hot(std::vector<int>{0, 1}, 2);
    CHECK_THROWS_AS(ad::softmax_cross_entropy(logits, y, std::span<const std::size_t>{}), precondition_error);
    const std::size_t rows[] = {0};
    CHECK_THROWS_AS(ad::softmax_cross_entropy(tape.constant(Tensor::zeros({2, 1})),
                                              ad::one_hot(std::vector<int>{0, 0}, 1), rows),
                    precondition_error);
}

TEST_CASE("dropout is the identity outside training") {
    ad::Tape tape;
    auto rng = make_rng(1, 1);
    const Tensor x = random_tensor({4, 3}, 12);
    CHECK(ad::dropout(tape.constant(x), 0.5, false, rng).value() == x);
    CHECK(ad::dropout(tape.constant(x), 0.0, true, rng).value() == x);
}

TEST_CASE("inverted dropout keeps the expectation") {
    ad::Tape tape;
    auto rng = make_rng(1, 2);
    const Tensor x = Tensor::filled({200, 50}, 1.0);
    const auto out = ad::dropout(tape.constant(x), 0.3, true, rng).value();
    double mean = 0.0;
    for (double v : out.values) {
        CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.7)));
        mean += v;
    }
    mean /= static_cast<double>(out.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("scatter_aggregate matches a dense weighted adjacency product") {
    const Tensor src = random_tensor({4, 3}, 13);
    const Tensor w = random_tensor({kEdges.size()}, 14);
    ad::Tape tape;
    const Tensor out = ad::scatter_aggregate(tape.constant(w), tape.constant(src), kEdges).value();
    std::vector<std::vector<double>> a(4, std::vector<double>(4, 0.0));
    for (std::size_t e = 0; e < kEdges.size(); ++e) a[kEdges[e].target][kEdges[e].source] += w.values[e];
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            double ref = 0.0;
            for (std::size_t j = 0; j < 4; ++j) ref += a[i][j] * src.at(j, c);
            CHECK(std::abs(out.at(i, c) - ref) <= 1e-12);
        }
    }
}

TEST_CASE("one_hot validates labels") {
    CHECK(ad::one_hot(std::vector<int>{2, 0}, 3) == Tensor::matrix({{0, 0, 1}, {1, 0, 0}}));
    CHECK_THROWS(ad::one_hot(std::vector<int>{3}, 3));
}

}  // TEST_SUITE
