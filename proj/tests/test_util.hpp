#pragma once

#include <cmath>
#include <random>

#include "freqprune/dct.hpp"
#include "freqprune/pointwise.hpp"
#include "freqprune/tensor.hpp"

namespace testutil {

using Rng = std::mt19937_64;

template <typename T>
freqprune::Tensor<T> random_tensor(int n, int c, int h, int w, Rng& rng, T lo = T(-1),
                                   T hi = T(1)) {
    freqprune::Tensor<T> t(n, c, h, w);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
    return t;
}

template <typename T>
freqprune::PointwiseWeights<T> random_weights(int c_in, int c_out, Rng& rng, bool with_bias) {
    freqprune::PointwiseWeights<T> layer(c_in, c_out);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : layer.weights) v = static_cast<T>(dist(rng));
    if (with_bias) {
        layer.bias.emplace(c_out);
        for (auto& v : *layer.bias) v = static_cast<T>(dist(rng));
    }
    return layer;
}

template <typename T>
double max_abs_diff(const freqprune::Tensor<T>& a, const freqprune::Tensor<T>& b) {
    REQUIRE(a.same_shape(b));
    double m = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
    return m;
}

template <typename T>
double max_abs_diff(const freqprune::FreqTensor<T>& a, const freqprune::FreqTensor<T>& b) {
    REQUIRE(a.same_shape(b));
    double m = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
    return m;
}

}  // namespace testutil
