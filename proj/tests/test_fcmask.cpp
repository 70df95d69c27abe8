#include "doctest.h"

#include <cmath>
#include <random>

#include "freqprune/fcmask.hpp"
#include "freqprune/masks.hpp"

using namespace freqprune;

TEST_CASE("coefmask endpoints") {
    for (int nc : {1, 4, 9, 16}) {
        for (double v : coefmask(0.0, nc)) CHECK(v == 0.0);
        for (double v : coefmask(1.0, nc)) CHECK(v == 1.0);
    }
}

TEST_CASE("coefmask worked case: fc = 0.9, four coefficients") {
    auto m = coefmask(0.9, 4);
    REQUIRE(m.size() == 4);
    CHECK(m[0] == 1.0);
    CHECK(m[1] == 1.0);
    CHECK(m[2] == 1.0);
    CHECK(m[3] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("coefmask is monotone and has at most one fractional entry") {
    const int nc = 9;
    double prev_sum = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double fc = i / 1000.0;
        auto m = coefmask(fc, nc);
        double sum = 0;
        int fractional = 0;
        for (int n = 0; n < nc; ++n) {
            CHECK(m[n] >= 0.0);
            CHECK(m[n] <= 1.0);
            if (n > 0) CHECK(m[n] <= m[n - 1]);  // nonincreasing in n
            if (m[n] > 0.0 && m[n] < 1.0) ++fractional;
            sum += m[n];
        }
        CHECK(fractional <= 1);
        CHECK(sum >= prev_sum - 1e-12);  // componentwise nondecreasing in fc
        prev_sum = sum;
    }
    CHECK_THROWS_AS(coefmask(1.5, 4), validation_error);
    CHECK_THROWS_AS(coefmask(-0.1, 4), validation_error);
}

TEST_CASE("coefmask_grad: ramp slope num_coefs, zero where saturated") {
    auto g = coefmask_grad(0.9, 4);
    CHECK(g == std::vector<double>{0, 0, 0, 4});
    for (double v : coefmask_grad(1.0, 4)) CHECK(v == 0.0);
    for (double v : coefmask_grad(0.0, 4)) CHECK(v == 0.0);
}

TEST_CASE("coefmask_grad matches central finite differences off the kinks") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> dist(0.01, 0.99);
    const int nc = 9;
    const double h = 1e-7;
    int checked = 0;
    while (checked < 100) {
        const double fc = dist(rng);
        // skip points within h of a kink (where the subgradient convention
        // and the finite difference legitimately disagree)
        bool near_kink = false;
        for (int n = 0; n <= nc; ++n) {
            const double kink = static_cast<double>(n) / nc;
            if (std::abs(fc - kink) < 4 * h || std::abs(fc - (kink + 1.0 / nc)) < 4 * h)
                near_kink = true;
        }
        if (near_kink) continue;
        auto lo = coefmask(fc - h, nc);
        auto hi = coefmask(fc + h, nc);
        auto g = coefmask_grad(fc, nc);
        for (int n = 0; n < nc; ++n) {
            const double fd = (hi[n] - lo[n]) / (2 * h);
            CHECK(std::abs(fd - g[n]) < 1e-6 * std::max(1.0, std::abs(g[n])));
        }
        ++checked;
    }
}

TEST_CASE("regularizer arithmetic") {
    CHECK(fcmask_regularizer<double>({{0.3, 0.6}, {0.9}}, 0.0) == 0.0);
    // two layers with mean 1.0 and 0.5 at lambda = 0.1
    CHECK(fcmask_regularizer<double>({{1.0, 1.0}, {0.5}}, 0.1) ==
          doctest::Approx(0.15).epsilon(1e-12));
    CHECK(fcmask_regularizer<double>({{0.0, 0.0}, {0.0}}, 2.0) == 0.0);
    CHECK_THROWS_AS(fcmask_regularizer<double>({{0.5}}, -1.0), validation_error);
}

TEST_CASE("regularizer strictly decreases when any fc decreases") {
    std::vector<std::vector<double>> fc{{0.8, 0.6, 0.4}, {1.0, 0.2}};
    const double before = fcmask_regularizer(fc, 0.3);
    fc[1][0] -= 0.05;
    CHECK(fcmask_regularizer(fc, 0.3) < before);
}

TEST_CASE("round_and_fix produces valid zigzag prefixes") {
    SUBCASE("endpoints and the worked case") {
        auto full = round_and_fix<double>({1.0, 1.0}, 4, 2);
        CHECK(full.band == std::vector<int>{4, 4});
        auto none = round_and_fix<double>({0.0}, 4, 2);
        CHECK(none.band == std::vector<int>{0});
        // fc = 0.9: soft masks [1, 1, 1, 0.6] all round up
        auto m = round_and_fix<double>({0.9}, 4, 2);
        CHECK(m.band == std::vector<int>{4});
    }
    SUBCASE("counting matches the closed form over a grid") {
        for (int nc : {4, 9, 16}) {
            const int k = nc == 4 ? 2 : nc == 9 ? 3 : 4;
            for (int i = 0; i <= 2000; ++i) {
                const double fc = i / 2000.0;
                auto m = round_and_fix<double>({fc}, nc, k);
                const int closed = std::min(
                    nc, std::max(0, static_cast<int>(std::floor(fc * nc + 0.5))));
                CHECK(m.band[0] == closed);
            }
        }
    }
    SUBCASE("always a contiguous band mask") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        std::vector<double> fc(16);
        for (auto& v : fc) v = dist(rng);
        auto m = round_and_fix(fc, 9, 3);
        CHECK(contiguity_fraction(m) == 1.0);
        CHECK(m.applies_to == MaskSide::Output);
    }
}
