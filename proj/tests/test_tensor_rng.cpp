#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <icurisk/core.hpp>

using namespace icurisk;

TEST_CASE("tensor shapes, indexing, and flat layout") {
    Tensor t({2, 3, 4});
    REQUIRE(t.rank() == 3);
    REQUIRE(t.size() == 24);
    REQUIRE(t.dim(0) == 2);
    REQUIRE(t.dim(2) == 4);
    t(1, 2, 3) = 7.5;
    REQUIRE(t[23] == 7.5);  // row-major: last element
    t(0, 0, 0) = -1.0;
    REQUIRE(t[0] == -1.0);

    Tensor m = Tensor::mat(3, 2);
    m(2, 1) = 4.0;
    REQUIRE(m[5] == 4.0);
    REQUIRE(m(2, 1) == 4.0);

    Tensor v = Tensor::vec(5, 1.5);
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(v(i) == 1.5);
}

TEST_CASE("tensor equality and finiteness") {
    Tensor a({2, 2}, 1.0), b({2, 2}, 1.0);
    REQUIRE(a == b);
    b(1, 1) = 2.0;
    REQUIRE(!(a == b));
    REQUIRE(a.all_finite());
    a(0, 0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE(!a.all_finite());
    REQUIRE(!Tensor({2}).same_shape(Tensor({2, 1})));
}

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) differs |= (a2.next_u64() != c.next_u64());
    REQUIRE(differs);
}

TEST_CASE("child streams do not collide with the parent or each other") {
    Rng root(7);
    Rng c1 = root.child(1), c2 = root.child(2), c1b = root.child(1);
    REQUIRE(c1.next_u64() == c1b.next_u64());
    REQUIRE(root.child(1).next_u64() != c2.next_u64());
    std::set<std::uint64_t> firsts;
    for (std::uint64_t s = 0; s < 50; ++s) firsts.insert(root.child(s).next_u64());
    REQUIRE(firsts.size() == 50);
}

TEST_CASE("uniform stays in [0,1) with the right mean") {
    Rng rng(1);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    REQUIRE(std::fabs(sum / n - 0.5) < 0.01);
}

TEST_CASE("normal deviates have unit variance and zero mean") {
    Rng rng(2);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::fabs(mean) < 0.01);
    REQUIRE(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("below(n) is bounded and covers all residues") {
    Rng rng(3);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const std::uint64_t v = rng.below(7);
        REQUIRE(v < 7);
        ++hits[v];
    }
    for (int h : hits) REQUIRE(h > 800);
}

TEST_CASE("shuffle produces a permutation, deterministically") {
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<int> w = v;
    Rng r1(9), r2(9);
    r1.shuffle(v);
    r2.shuffle(w);
    REQUIRE(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("bernoulli respects the probability") {
    Rng rng(4);
    int ones = 0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) ones += rng.bernoulli(0.3) ? 1 : 0;
    REQUIRE(std::fabs(static_cast<double>(ones) / n - 0.3) < 0.01);
}

TEST_CASE("sigmoid and clamp basics") {
    REQUIRE(sigmoid(0.0) == 0.5);
    REQUIRE(sigmoid(100.0) == Catch::Approx(1.0));
    REQUIRE(sigmoid(-100.0) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(sigmoid(1.0) == Catch::Approx(1.0 / (1.0 + std::exp(-1.0))));
    REQUIRE(clamp(5.0, 0.0, 1.0) == 1.0);
    REQUIRE(clamp(-5.0, 0.0, 1.0) == 0.0);
    REQUIRE(clamp(0.25, 0.0, 1.0) == 0.25);
}

TEST_CASE("format_double round-trips and trims") {
    REQUIRE(format_double(0.5) == "0.5");
    REQUIRE(format_double(1.0) == "1");
    const double v = 0.1234567891234;
    REQUIRE(std::stod(format_double(v)) == Catch::Approx(v).epsilon(1e-9));
}

TEST_CASE("require_shape raises usage errors with context") {
    Tensor t({2, 3});
    REQUIRE_NOTHROW(require_shape(t, {2, 3}, "here"));
    REQUIRE_THROWS_AS(require_shape(t, {3, 2}, "here"), config_error);
}
