#include "doctest.h"

#include <random>

#include "freqprune/bandexec.hpp"
#include "test_util.hpp"

using namespace freqprune;

namespace {

PruneMask random_band(int c, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dist(0, k * k);
    std::vector<int> band(c);
    for (auto& v : band) v = dist(rng);
    return PruneMask::band_mask(std::move(band), k);
}

}  // namespace

TEST_CASE("plan counts prefix memberships per coefficient") {
    auto in = PruneMask::band_mask({4, 2, 0}, 2);
    auto plan = plan_bands(&in, nullptr, 2, 3, 3, 4, 4);
    CHECK(plan.a_in == std::vector<int>{2, 2, 1, 1});
    CHECK(plan.a_out == std::vector<int>{3, 3, 3, 3});
    CHECK(plan.in_perm == std::vector<int>{0, 1, 2});
    CHECK(plan.p == 4);
}

TEST_CASE("full plan degenerates to the unpruned pointwise cost") {
    auto plan = plan_bands(nullptr, nullptr, 3, 4, 6, 6, 6);
    CHECK(banded_macs(plan) == 4ull * 6 * 36);  // c_in * c_out * h * w
    for (int q = 0; q < 9; ++q) {
        CHECK(plan.a_in[q] == 4);
        CHECK(plan.a_out[q] == 6);
    }
}

TEST_CASE("worked cost example") {
    auto in = PruneMask::band_mask({4, 2, 0}, 2);
    auto out = PruneMask::band_mask({4, 4, 4}, 2);
    auto plan = plan_bands(&in, &out, 2, 3, 3, 4, 4);
    CHECK(banded_macs(plan) == 72);
}

TEST_CASE("active counts are nonincreasing in q and permutation sorts by band") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto in = random_band(7, 3, rng);
        auto out = random_band(5, 3, rng);
        auto plan = plan_bands(&in, &out, 3, 7, 5, 6, 6);
        for (int q = 1; q < 9; ++q) {
            CHECK(plan.a_in[q] <= plan.a_in[q - 1]);
            CHECK(plan.a_out[q] <= plan.a_out[q - 1]);
        }
        for (int i = 1; i < 7; ++i)
            CHECK(in.band[plan.in_perm[i]] <= in.band[plan.in_perm[i - 1]]);
        // permutation round-trip
        std::vector<int> inv(5);
        for (int i = 0; i < 5; ++i) inv[plan.out_perm[i]] = i;
        for (int i = 0; i < 5; ++i) CHECK(plan.out_perm[inv[i]] == i);
    }
}

TEST_CASE("k mismatch between masks is rejected") {
    auto in = PruneMask::band_mask({1}, 2);
    auto out = PruneMask::band_mask({1}, 3);
    CHECK_THROWS_AS(plan_bands(&in, &out, 2, 1, 1, 4, 4), validation_error);
}

TEST_CASE("zero output mask produces a zero tensor at zero cost") {
    testutil::Rng rng(5);
    auto x = testutil::random_tensor<double>(1, 3, 4, 4, rng);
    auto f = dct_forward(x, MacroblockSpec(2));
    auto layer = testutil::random_weights<double>(3, 4, rng, false);
    auto out = PruneMask::band_mask({0, 0, 0, 0}, 2);
    auto plan = plan_bands(nullptr, &out, 2, 3, 4, 4, 4);
    CHECK(banded_macs(plan) == 0);
    auto y = execute_banded(f, layer, plan);
    for (auto v : y.data) CHECK(v == 0.0);
}

TEST_CASE("full plan equals the unbanded frequency conv") {
    testutil::Rng rng(7);
    auto x = testutil::random_tensor<double>(2, 5, 6, 6, rng);
    auto f = dct_forward(x, MacroblockSpec(3));
    auto layer = testutil::random_weights<double>(5, 4, rng, false);
    auto plan = plan_bands(nullptr, nullptr, 3, 5, 4, 6, 6, 2);
    auto banded = execute_banded(f, layer, plan);
    auto reference = conv1x1_freq(f, layer);
    CHECK(testutil::max_abs_diff(banded, reference) < 1e-10);
}

TEST_CASE("banded execution equals mask-then-convolve on random instances") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int c_in = 8, c_out = 6, k = 3;
        auto in_mask = random_band(c_in, k, rng);
        auto out_mask = random_band(c_out, k, rng);
        testutil::Rng trng(100 + trial);
        auto x = testutil::random_tensor<double>(2, c_in, 6, 6, trng);
        auto layer = testutil::random_weights<double>(c_in, c_out, trng, false);

        // inputs must honor the input mask's zero tail
        auto f = apply_mask(dct_forward(x, MacroblockSpec(k)), in_mask);
        auto plan = plan_bands(&in_mask, &out_mask, k, c_in, c_out, 6, 6, 2);
        auto banded = execute_banded(f, layer, plan);
        auto reference = apply_mask(conv1x1_freq(f, layer), out_mask);
        CHECK(testutil::max_abs_diff(banded, reference) < 1e-10);

        // cost never exceeds the dense pointwise cost
        CHECK(banded_macs(plan) <= pointwise_mac_count(c_in, 6, 6, c_out) * 2);
    }
}

TEST_CASE("componentwise-smaller masks never cost more") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        auto big = random_band(6, 3, rng);
        auto small = big;
        std::uniform_int_distribution<int> dist(0, 9);
        for (auto& v : small.band) v = std::min(v, dist(rng));
        auto out = random_band(4, 3, rng);
        auto plan_big = plan_bands(&big, &out, 3, 6, 4, 6, 6);
        auto plan_small = plan_bands(&small, &out, 3, 6, 4, 6, 6);
        CHECK(banded_macs(plan_small) <= banded_macs(plan_big));
    }
}

TEST_CASE("bands touch contiguous permuted channel intervals") {
    testutil::Rng rng(17);
    auto in_mask = PruneMask::band_mask({9, 5, 2, 7}, 3);
    auto out_mask = PruneMask::band_mask({3, 9, 1}, 3);
    auto x = testutil::random_tensor<double>(1, 4, 6, 6, rng);
    auto f = apply_mask(dct_forward(x, MacroblockSpec(3)), in_mask);
    auto layer = testutil::random_weights<double>(4, 3, rng, false);
    auto plan = plan_bands(&in_mask, &out_mask, 3, 4, 3, 6, 6);

    std::vector<BandTraceEntry> trace;
    set_band_trace(&trace);
    auto y = execute_banded(f, layer, plan);
    set_band_trace(nullptr);

    REQUIRE(trace.size() == 9);
    for (const auto& e : trace) {
        if (plan.a_in[e.q] > 0) {
            CHECK(e.in_first == 0);  // interval starts at the permuted prefix
            CHECK(e.in_last == plan.a_in[e.q] - 1);
        } else {
            CHECK(e.in_first == -1);
        }
        if (plan.a_out[e.q] > 0) {
            CHECK(e.out_first == 0);
            CHECK(e.out_last == plan.a_out[e.q] - 1);
        }
    }

    // entries beyond each output prefix are exactly zero
    for (int co = 0; co < 3; ++co)
        for (int q = out_mask.band[co]; q < 9; ++q)
            for (int bi = 0; bi < 2; ++bi)
                for (int bj = 0; bj < 2; ++bj) CHECK(y.at(0, co, q, bi, bj) == 0.0);
}

TEST_CASE("plan/tensor inconsistency is rejected") {
    testutil::Rng rng(19);
    auto x = testutil::random_tensor<double>(1, 3, 4, 4, rng);
    auto f = dct_forward(x, MacroblockSpec(2));
    auto layer = testutil::random_weights<double>(3, 2, rng, false);
    auto plan = plan_bands(nullptr, nullptr, 2, 3, 2, 6, 6);  // wrong spatial size
    CHECK_THROWS_AS(execute_banded(f, layer, plan), validation_error);
    auto plan2 = plan_bands(nullptr, nullptr, 2, 4, 2, 4, 4);  // wrong channel count
    CHECK_THROWS_AS(execute_banded(f, layer, plan2), validation_error);
}

TEST_CASE("plan serializes for inspection") {
    auto in = PruneMask::band_mask({4, 2}, 2);
    auto plan = plan_bands(&in, nullptr, 2, 2, 3, 4, 4);
    auto j = plan.to_json();
    CHECK(j.find("\"a_in\"") != std::string::npos);
    CHECK(j.find("\"macs\"") != std::string::npos);
}
