#include <cmath>

#include "doctest.h"
#include "ldc/rng.hpp"
#include "ldc/tensor.hpp"

using namespace ldc;

TEST_CASE("tensor shape and access") {
    Tensor t(2, 3, 4);
    CHECK(t.size() == 24);
    t.at(1, 2, 3) = 7.0;
    CHECK(t.data[23] == 7.0);
    CHECK(t.at(1, 2, 3) == 7.0);
    CHECK(t.same_shape(Tensor(2, 3, 4)));
    CHECK_FALSE(t.same_shape(Tensor(2, 4, 3)));
    CHECK_THROWS_AS(Tensor(0, 1, 1), std::invalid_argument);
}

TEST_CASE("tensor finiteness and binary checks") {
    Tensor t(1, 2, 2);
    CHECK(t.all_finite());
    CHECK(t.is_binary());
    t.at(0, 0, 0) = 1.0;
    CHECK(t.is_binary());
    t.at(0, 0, 1) = 0.5;
    CHECK_FALSE(t.is_binary());
    t.at(0, 1, 0) = std::nan("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("rng determinism and state round trip") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; i++) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.normal() == b.normal());
    }
    const std::string state = a.state_str();
    const double expect_u = a.uniform();
    const double expect_n = a.normal();
    Rng c;
    c.set_state_str(state);
    CHECK(c.uniform() == expect_u);
    CHECK(c.normal() == expect_n);
}

TEST_CASE("rng normal moments") {
    Rng rng(7);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; i++) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("rng uniform_int range") {
    Rng rng(3);
    int seen[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 5000; i++) {
        const int v = rng.uniform_int(5);
        REQUIRE(v >= 0);
        REQUIRE(v < 5);
        seen[v]++;
    }
    for (int c : seen) CHECK(c > 800);
}

TEST_CASE("seed mixing separates streams") {
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
}
