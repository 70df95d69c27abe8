#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "freqprune/errors.hpp"

namespace freqprune {

/// Dense 4-D activation/weight tensor in row-major (n, c, h, w) order.
/// Immutable by convention once fully constructed; cheap to move.
template <typename T>
struct Tensor {
    static_assert(std::is_floating_point_v<T>);

    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;

    Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        if (n < 1 || c < 1 || h < 1 || w < 1) {
            throw validation_error("tensor dims must all be >= 1, got (" + std::to_string(n_) +
                                   "," + std::to_string(c_) + "," + std::to_string(h_) + "," +
                                   std::to_string(w_) + ")");
        }
        data.assign(numel(), T(0));
    }

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }

    std::size_t idx(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
    }

    T& at(int in, int ic, int iy, int ix) { return data[idx(in, ic, iy, ix)]; }
    const T& at(int in, int ic, int iy, int ix) const { return data[idx(in, ic, iy, ix)]; }

    /// Pointer to the (in, ic) channel plane of h*w contiguous scalars.
    T* plane(int in, int ic) { return data.data() + idx(in, ic, 0, 0); }
    const T* plane(int in, int ic) const { return data.data() + idx(in, ic, 0, 0); }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

/// Edge length of the square spatial tiles the DCT operates on.
struct MacroblockSpec {
    int k = 1;

    explicit MacroblockSpec(int k_) : k(k_) {
        if (k < 1) throw validation_error("macroblock size must be >= 1");
    }

    void check_divides(int h, int w) const {
        if (h % k != 0) {
            throw validation_error("macroblock size " + std::to_string(k) +
                                   " does not divide axis h = " + std::to_string(h));
        }
        if (w % k != 0) {
            throw validation_error("macroblock size " + std::to_string(k) +
                                   " does not divide axis w = " + std::to_string(w));
        }
    }
};

/// Macroblocked view of a Tensor: (n, c, h/k, w/k, k, k) row-major.
template <typename T>
struct TiledTensor {
    int n = 0, c = 0, bh = 0, bw = 0, k = 0;
    std::vector<T> data;

    TiledTensor() = default;
    TiledTensor(int n_, int c_, int bh_, int bw_, int k_)
        : n(n_), c(c_), bh(bh_), bw(bw_), k(k_) {
        data.assign(numel(), T(0));
    }

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * bh * bw * k * k;
    }

    std::size_t idx(int in, int ic, int bi, int bj, int r, int s) const {
        return ((((static_cast<std::size_t>(in) * c + ic) * bh + bi) * bw + bj) * k + r) * k + s;
    }

    T& at(int in, int ic, int bi, int bj, int r, int s) { return data[idx(in, ic, bi, bj, r, s)]; }
    const T& at(int in, int ic, int bi, int bj, int r, int s) const {
        return data[idx(in, ic, bi, bj, r, s)];
    }
};

/// Rearranges (n,c,h,w) into k-by-k macroblocks. Pure index permutation,
/// no arithmetic; untile() inverts it bit-exactly.
template <typename T>
TiledTensor<T> tile(const Tensor<T>& t, const MacroblockSpec& spec) {
    spec.check_divides(t.h, t.w);
    const int k = spec.k;
    TiledTensor<T> out(t.n, t.c, t.h / k, t.w / k, k);
    for (int in = 0; in < t.n; ++in)
        for (int ic = 0; ic < t.c; ++ic)
            for (int bi = 0; bi < out.bh; ++bi)
                for (int bj = 0; bj < out.bw; ++bj)
                    for (int r = 0; r < k; ++r)
                        for (int s = 0; s < k; ++s)
                            out.at(in, ic, bi, bj, r, s) = t.at(in, ic, bi * k + r, bj * k + s);
    return out;
}

template <typename T>
Tensor<T> untile(const TiledTensor<T>& tt, const MacroblockSpec& spec) {
    if (tt.k != spec.k) {
        throw validation_error("tiled tensor block size " + std::to_string(tt.k) +
                               " does not match spec k = " + std::to_string(spec.k));
    }
    const int k = tt.k;
    Tensor<T> out(tt.n, tt.c, tt.bh * k, tt.bw * k);
    for (int in = 0; in < tt.n; ++in)
        for (int ic = 0; ic < tt.c; ++ic)
            for (int bi = 0; bi < tt.bh; ++bi)
                for (int bj = 0; bj < tt.bw; ++bj)
                    for (int r = 0; r < k; ++r)
                        for (int s = 0; s < k; ++s)
                            out.at(in, ic, bi * k + r, bj * k + s) = tt.at(in, ic, bi, bj, r, s);
    return out;
}

}  // namespace freqprune
