#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "freqprune/fbt1.hpp"
#include "freqprune/tensor.hpp"
#include "test_util.hpp"

using namespace freqprune;

TEST_CASE("tile extracts macroblocks by index arithmetic") {
    Tensor<double> t(1, 1, 4, 4);
    for (int i = 0; i < 16; ++i) t.data[i] = i;
    auto tt = tile(t, MacroblockSpec(2));
    // block (0,0) = [[0,1],[4,5]]
    CHECK(tt.at(0, 0, 0, 0, 0, 0) == 0);
    CHECK(tt.at(0, 0, 0, 0, 0, 1) == 1);
    CHECK(tt.at(0, 0, 0, 0, 1, 0) == 4);
    CHECK(tt.at(0, 0, 0, 0, 1, 1) == 5);
    // block (1,1) = [[10,11],[14,15]]
    CHECK(tt.at(0, 0, 1, 1, 0, 0) == 10);
    CHECK(tt.at(0, 0, 1, 1, 1, 1) == 15);
}

TEST_CASE("tile with k=1 is an identity reshape") {
    testutil::Rng rng(7);
    auto t = testutil::random_tensor<double>(2, 3, 3, 5, rng);
    auto tt = tile(t, MacroblockSpec(1));
    REQUIRE(tt.data.size() == t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) CHECK(tt.data[i] == t.data[i]);
}

TEST_CASE("tile/untile are bit-exact inverses") {
    testutil::Rng rng(42);
    for (int k : {1, 2, 3, 6}) {
        auto t = testutil::random_tensor<double>(1, 2, 6, 6, rng);
        MacroblockSpec spec(k);
        auto tt = tile(t, spec);
        auto back = untile(tt, spec);
        REQUIRE(back.same_shape(t));
        for (std::size_t i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);
        auto tt2 = tile(back, spec);
        for (std::size_t i = 0; i < tt.data.size(); ++i) CHECK(tt2.data[i] == tt.data[i]);
    }
}

TEST_CASE("tile preserves the multiset of values") {
    testutil::Rng rng(3);
    auto t = testutil::random_tensor<float>(2, 2, 4, 6, rng);
    auto tt = tile(t, MacroblockSpec(2));
    auto a = t.data;
    auto b = tt.data;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("single-block untile is a reshape") {
    testutil::Rng rng(9);
    auto t = testutil::random_tensor<double>(1, 1, 3, 3, rng);
    auto tt = tile(t, MacroblockSpec(3));
    for (std::size_t i = 0; i < t.data.size(); ++i) CHECK(tt.data[i] == t.data[i]);
}

TEST_CASE("non-divisible dims are rejected with the offending axis named") {
    Tensor<double> t(1, 1, 6, 4);
    CHECK_THROWS_WITH_AS(tile(t, MacroblockSpec(4)), doctest::Contains("axis h"),
                         validation_error);
    Tensor<double> t2(1, 1, 4, 6);
    CHECK_THROWS_WITH_AS(tile(t2, MacroblockSpec(4)), doctest::Contains("axis w"),
                         validation_error);
}

TEST_CASE("degenerate tensor dims are rejected") {
    CHECK_THROWS_AS(Tensor<double>(0, 1, 1, 1), validation_error);
    CHECK_THROWS_AS(Tensor<double>(1, 1, -2, 1), validation_error);
}

TEST_CASE("FBT1 round-trips tensors and records dtype") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "fbt1_test";
    fs::create_directories(dir);
    const auto path = (dir / "t.fbt").string();

    testutil::Rng rng(11);
    auto t = testutil::random_tensor<double>(2, 3, 4, 5, rng);
    fbt1::write(path, t);
    CHECK(fbt1::peek_dtype(path) == 1);
    auto back = fbt1::read<double>(path);
    REQUIRE(back.same_shape(t));
    for (std::size_t i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);

    CHECK_THROWS_AS(fbt1::read<float>(path), io_error);

    auto tf = testutil::random_tensor<float>(1, 1, 2, 2, rng);
    fbt1::write(path, tf);
    CHECK(fbt1::peek_dtype(path) == 0);
    auto backf = fbt1::read<float>(path);
    CHECK(backf.data == tf.data);

    CHECK_THROWS_AS(fbt1::read<double>((dir / "missing.fbt").string()), io_error);
    fs::remove_all(dir);
}
