#include "doctest.h"

#include <cmath>

#include "freqprune/dct.hpp"
#include "freqprune/reference.hpp"
#include "test_util.hpp"

using namespace freqprune;

TEST_CASE("zigzag order matches the JPEG traversal") {
    ZigzagOrder z1(1);
    CHECK(z1.perm == std::vector<std::pair<int, int>>{{0, 0}});

    ZigzagOrder z2(2);
    CHECK(z2.perm == std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});

    ZigzagOrder z3(3);
    CHECK(z3.perm == std::vector<std::pair<int, int>>{{0, 0},
                                                      {0, 1},
                                                      {1, 0},
                                                      {2, 0},
                                                      {1, 1},
                                                      {0, 2},
                                                      {1, 2},
                                                      {2, 1},
                                                      {2, 2}});
}

TEST_CASE("zigzag perm is a bijection that starts at DC and ends at the corner") {
    for (int k = 1; k <= 8; ++k) {
        ZigzagOrder z(k);
        REQUIRE(static_cast<int>(z.perm.size()) == k * k);
        CHECK(z.perm.front() == std::pair<int, int>{0, 0});
        CHECK(z.perm.back() == std::pair<int, int>{k - 1, k - 1});
        std::vector<int> seen(k * k, 0);
        for (auto [u, v] : z.perm) {
            REQUIRE(u >= 0);
            REQUIRE(u < k);
            REQUIRE(v >= 0);
            REQUIRE(v < k);
            seen[u * k + v]++;
        }
        for (int s : seen) CHECK(s == 1);
        for (int q = 0; q < k * k; ++q)
            CHECK(z.index_of(z.perm[q].first, z.perm[q].second) == q);
    }
}

TEST_CASE("basis is orthonormal with a constant DC row") {
    for (int k = 1; k <= 8; ++k) {
        DctBasis<double> basis(k);
        for (int x = 0; x < k; ++x)
            CHECK(std::abs(basis.b[x] - 1.0 / std::sqrt(double(k))) < 1e-15);
        // B * B^T == I
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                double acc = 0;
                for (int x = 0; x < k; ++x) acc += basis.b[i * k + x] * basis.b[j * k + x];
                CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
        // the flattened filter bank inherits orthonormality
        const int kk = k * k;
        for (int i = 0; i < kk; ++i)
            for (int j = 0; j < kk; ++j) {
                double acc = 0;
                for (int x = 0; x < kk; ++x)
                    acc += basis.filters[i * kk + x] * basis.filters[j * kk + x];
                CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
    }
    CHECK_THROWS_AS(DctBasis<double>(9), validation_error);
    CHECK_THROWS_AS(DctBasis<double>(0), validation_error);
}

TEST_CASE("constant block transforms to DC = v*k") {
    for (int k : {1, 2, 3, 4, 7}) {
        const double v = 2.5;
        Tensor<double> t(1, 2, k, k);
        for (auto& x : t.data) x = v;
        auto f = dct_forward(t, MacroblockSpec(k));
        for (int c = 0; c < 2; ++c) {
            CHECK(std::abs(f.at(0, c, 0, 0, 0) - v * k) < 1e-12);
            for (int q = 1; q < k * k; ++q) CHECK(std::abs(f.at(0, c, q, 0, 0)) < 1e-12);
        }
    }
}

TEST_CASE("k=1 transform is the identity") {
    testutil::Rng rng(5);
    auto t = testutil::random_tensor<double>(2, 3, 4, 4, rng);
    auto f = dct_forward(t, MacroblockSpec(1));
    REQUIRE(f.data.size() == t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i)
        CHECK(f.data[i] == doctest::Approx(t.data[i]).epsilon(1e-15));
}

TEST_CASE("inverse undoes forward within dtype tolerance") {
    testutil::Rng rng(6);
    SUBCASE("f64") {
        for (int k : {2, 3, 4, 7, 8}) {
            auto t = testutil::random_tensor<double>(2, 2, 2 * k, 3 * k, rng);
            auto back = dct_inverse(dct_forward(t, MacroblockSpec(k)));
            CHECK(testutil::max_abs_diff(t, back) < 1e-12);
        }
    }
    SUBCASE("f32") {
        auto t = testutil::random_tensor<float>(1, 2, 6, 6, rng);
        auto back = dct_inverse(dct_forward(t, MacroblockSpec(3)));
        CHECK(testutil::max_abs_diff(t, back) < 1e-5);
    }
}

TEST_CASE("forward agrees with the serial matmul reference") {
    testutil::Rng rng(13);
    for (int k : {2, 3, 5, 8}) {
        auto t = testutil::random_tensor<double>(2, 3, k * 2, k * 2, rng);
        auto a = dct_forward(t, MacroblockSpec(k));
        auto b = ref::dct_forward(t, MacroblockSpec(k));
        CHECK(testutil::max_abs_diff(a, b) < 1e-12);
        auto xa = dct_inverse(a);
        auto xb = ref::dct_inverse(a);
        CHECK(testutil::max_abs_diff(xa, xb) < 1e-12);
    }
}

TEST_CASE("DC-only frequency tensor reconstructs a constant block") {
    const int k = 3;
    FreqTensor<double> f(1, 1, k, 2, 2);
    const double v = 1.75;
    for (int bi = 0; bi < 2; ++bi)
        for (int bj = 0; bj < 2; ++bj) f.at(0, 0, 0, bi, bj) = v * k;
    auto t = dct_inverse(f);
    for (auto x : t.data) CHECK(std::abs(x - v) < 1e-12);
}

TEST_CASE("all-zero frequency tensor reconstructs zeros") {
    FreqTensor<double> f(1, 2, 2, 2, 2);
    auto t = dct_inverse(f);
    for (auto x : t.data) CHECK(x == 0.0);
}

TEST_CASE("energy is conserved per block") {
    testutil::Rng rng(17);
    for (int k : {2, 4, 8}) {
        auto t = testutil::random_tensor<double>(1, 1, k, k, rng);
        auto f = dct_forward(t, MacroblockSpec(k));
        double ex = 0, ey = 0;
        for (auto v : t.data) ex += v * v;
        for (auto v : f.data) ey += v * v;
        CHECK(std::abs(ex - ey) / ex < 1e-9);
    }
}

TEST_CASE("transform is linear") {
    testutil::Rng rng(19);
    const MacroblockSpec spec(3);
    auto x = testutil::random_tensor<double>(1, 2, 6, 6, rng);
    auto y = testutil::random_tensor<double>(1, 2, 6, 6, rng);
    const double a = 1.7, b = -0.6;
    Tensor<double> mix(1, 2, 6, 6);
    for (std::size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = a * x.data[i] + b * y.data[i];
    auto fm = dct_forward(mix, spec);
    auto fx = dct_forward(x, spec);
    auto fy = dct_forward(y, spec);
    for (std::size_t i = 0; i < fm.data.size(); ++i)
        CHECK(std::abs(fm.data[i] - (a * fx.data[i] + b * fy.data[i])) < 1e-12);
}

TEST_CASE("truncated transform: retained prefix bit-exact, tail never produced") {
    testutil::Rng rng(23);
    const int k = 3;
    auto t = testutil::random_tensor<double>(2, 3, 6, 6, rng);
    auto full = dct_forward(t, MacroblockSpec(k));

    SUBCASE("m = k^2 equals the full transform") {
        auto f = dct_truncated(t, MacroblockSpec(k), {9, 9, 9});
        for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(f.data[i] == full.data[i]);
    }
    SUBCASE("m = 0 silences the channel") {
        auto f = dct_truncated(t, MacroblockSpec(k), {0, 9, 4});
        for (int bi = 0; bi < f.bh; ++bi)
            for (int bj = 0; bj < f.bw; ++bj)
                for (int q = 0; q < 9; ++q) CHECK(f.at(0, 0, q, bi, bj) == 0.0);
    }
    SUBCASE("m = 4: first four coefficients match, the rest are zero") {
        auto f = dct_truncated(t, MacroblockSpec(k), {4, 4, 4});
        for (int in = 0; in < 2; ++in)
            for (int c = 0; c < 3; ++c)
                for (int bi = 0; bi < f.bh; ++bi)
                    for (int bj = 0; bj < f.bw; ++bj)
                        for (int q = 0; q < 9; ++q) {
                            if (q < 4)
                                CHECK(f.at(in, c, q, bi, bj) == full.at(in, c, q, bi, bj));
                            else
                                CHECK(f.at(in, c, q, bi, bj) == 0.0);
                        }
    }
    SUBCASE("out-of-range counts are rejected") {
        CHECK_THROWS_AS(dct_truncated(t, MacroblockSpec(k), {10, 9, 9}), validation_error);
        CHECK_THROWS_AS(dct_truncated(t, MacroblockSpec(k), {-1, 9, 9}), validation_error);
    }
}

TEST_CASE("transform MAC accounting") {
    CHECK(transform_mac_count(32, 8, 8, 4) == 32768);
    // full retention vector matches the closed form
    std::vector<int> full(2, 4);
    CHECK(transform_mac_count(2, 4, 4, 2, &full) == transform_mac_count(2, 4, 4, 2));
    std::vector<int> m{1, 4};
    CHECK(transform_mac_count(2, 4, 4, 2, &m) == 80);
}
