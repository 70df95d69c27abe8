#pragma once

#include <vector>

#include "freqprune/dct.hpp"
#include "freqprune/pointwise.hpp"
#include "freqprune/tensor.hpp"

// Serial reference implementations. These take the textbook route
// (B * X * B^T matmuls per block, per-pixel dot products) rather than the
// filter-bank kernels in dct.hpp / pointwise.hpp, so the two paths share no
// arithmetic. The test suites compare them and the benchmark target times
// them against the parallel kernels.

namespace freqprune::ref {

template <typename T>
FreqTensor<T> dct_forward(const Tensor<T>& t, const MacroblockSpec& spec) {
    spec.check_divides(t.h, t.w);
    const int k = spec.k;
    const DctBasis<T> basis(k);
    FreqTensor<T> out(t.n, t.c, k, t.h / k, t.w / k);
    std::vector<T> tmp(static_cast<std::size_t>(k) * k), y(tmp.size());
    for (int in = 0; in < t.n; ++in)
        for (int ic = 0; ic < t.c; ++ic)
            for (int bi = 0; bi < out.bh; ++bi)
                for (int bj = 0; bj < out.bw; ++bj) {
                    // tmp = B * X
                    for (int u = 0; u < k; ++u)
                        for (int yy = 0; yy < k; ++yy) {
                            T acc = T(0);
                            for (int x = 0; x < k; ++x)
                                acc += basis.b[u * k + x] * t.at(in, ic, bi * k + x, bj * k + yy);
                            tmp[u * k + yy] = acc;
                        }
                    // y = tmp * B^T
                    for (int u = 0; u < k; ++u)
                        for (int v = 0; v < k; ++v) {
                            T acc = T(0);
                            for (int yy = 0; yy < k; ++yy) acc += tmp[u * k + yy] * basis.b[v * k + yy];
                            y[u * k + v] = acc;
                        }
                    for (int q = 0; q < k * k; ++q) {
                        const auto [u, v] = basis.zigzag.perm[q];
                        out.at(in, ic, q, bi, bj) = y[u * k + v];
                    }
                }
    return out;
}

template <typename T>
Tensor<T> dct_inverse(const FreqTensor<T>& f) {
    const int k = f.k;
    const DctBasis<T> basis(k);
    Tensor<T> out(f.n, f.c, f.bh * k, f.bw * k);
    std::vector<T> y(static_cast<std::size_t>(k) * k), tmp(y.size());
    for (int in = 0; in < f.n; ++in)
        for (int ic = 0; ic < f.c; ++ic)
            for (int bi = 0; bi < f.bh; ++bi)
                for (int bj = 0; bj < f.bw; ++bj) {
                    for (int q = 0; q < k * k; ++q) {
                        const auto [u, v] = basis.zigzag.perm[q];
                        y[u * k + v] = f.at(in, ic, q, bi, bj);
                    }
                    // tmp = B^T * Y
                    for (int x = 0; x < k; ++x)
                        for (int v = 0; v < k; ++v) {
                            T acc = T(0);
                            for (int u = 0; u < k; ++u) acc += basis.b[u * k + x] * y[u * k + v];
                            tmp[x * k + v] = acc;
                        }
                    // X = tmp * B
                    for (int x = 0; x < k; ++x)
                        for (int yy = 0; yy < k; ++yy) {
                            T acc = T(0);
                            for (int v = 0; v < k; ++v) acc += tmp[x * k + v] * basis.b[v * k + yy];
                            out.at(in, ic, bi * k + x, bj * k + yy) = acc;
                        }
                }
    return out;
}

/// Per-pixel dot-product form of the 1x1 convolution.
template <typename T>
Tensor<T> conv1x1_spatial(const Tensor<T>& x, const PointwiseWeights<T>& layer) {
    if (x.c != layer.c_in) throw validation_error("ref conv1x1: channel mismatch");
    Tensor<T> out(x.n, layer.c_out, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx)
                for (int co = 0; co < layer.c_out; ++co) {
                    T acc = layer.bias ? (*layer.bias)[co] : T(0);
                    for (int ci = 0; ci < layer.c_in; ++ci)
                        acc += layer.wat(co, ci) * x.at(in, ci, yy, xx);
                    out.at(in, co, yy, xx) = acc;
                }
    return out;
}

template <typename T>
FreqTensor<T> conv1x1_freq(const FreqTensor<T>& f, const PointwiseWeights<T>& layer) {
    if (f.c != layer.c_in) throw validation_error("ref conv1x1_freq: channel mismatch");
    FreqTensor<T> out(f.n, layer.c_out, f.k, f.bh, f.bw);
    for (int in = 0; in < f.n; ++in)
        for (int q = 0; q < f.ncoef(); ++q)
            for (int bi = 0; bi < f.bh; ++bi)
                for (int bj = 0; bj < f.bw; ++bj)
                    for (int co = 0; co < layer.c_out; ++co) {
                        T acc = T(0);
                        for (int ci = 0; ci < layer.c_in; ++ci)
                            acc += layer.wat(co, ci) * f.at(in, ci, q, bi, bj);
                        out.at(in, co, q, bi, bj) = acc;
                    }
    return out;
}

}  // namespace freqprune::ref
