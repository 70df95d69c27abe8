#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "freqprune/errors.hpp"
#include "freqprune/tensor.hpp"

namespace freqprune {

inline constexpr int kMaxMacroblock = 8;

/// JPEG-style diagonal traversal of a k x k coefficient grid, low to high
/// frequency. perm[q] = (row, col) of the q-th coefficient.
struct ZigzagOrder {
    int k = 0;
    std::vector<std::pair<int, int>> perm;

    explicit ZigzagOrder(int k_);

    int size() const { return k * k; }

    /// Zigzag index of 2-D coefficient (u, v).
    int index_of(int u, int v) const { return inverse_[u * k + v]; }

  private:
    std::vector<int> inverse_;
};

/// Orthonormal 1-D DCT-II basis for a k-point signal plus its separable
/// 2-D expansion. b[f*k + x] = a(f) * cos(pi*(2x+1)*f / (2k)) with
/// a(0) = sqrt(1/k), a(f>0) = sqrt(2/k), so the inverse is the transpose.
///
/// filters holds the k^2 x k^2 matrix acting on vectorized macroblocks:
/// row q (zigzag order) is outer(b_row(u_q), b_row(v_q)) flattened, i.e.
/// the size-k^2 frequency filter that produces coefficient q.
template <typename T>
struct DctBasis {
    int k = 0;
    std::vector<T> b;        // k x k
    std::vector<T> filters;  // k^2 x k^2, rows in zigzag order
    ZigzagOrder zigzag;

    explicit DctBasis(int k_) : k(k_), zigzag(k_) {
        if (k < 1 || k > kMaxMacroblock)
            throw validation_error("macroblock size out of supported range [1, " +
                                   std::to_string(kMaxMacroblock) + "]: " + std::to_string(k));
        b.resize(static_cast<std::size_t>(k) * k);
        std::vector<double> bd(b.size());
        const double a0 = std::sqrt(1.0 / k);
        const double af = std::sqrt(2.0 / k);
        for (int f = 0; f < k; ++f)
            for (int x = 0; x < k; ++x)
                bd[static_cast<std::size_t>(f) * k + x] =
                    (f == 0 ? a0 : af) * std::cos(M_PI * (2 * x + 1) * f / (2.0 * k));
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<T>(bd[i]);

        const int kk = k * k;
        filters.resize(static_cast<std::size_t>(kk) * kk);
        for (int q = 0; q < kk; ++q) {
            const auto [u, v] = zigzag.perm[q];
            for (int x = 0; x < k; ++x)
                for (int y = 0; y < k; ++y)
                    filters[static_cast<std::size_t>(q) * kk + x * k + y] =
                        static_cast<T>(bd[static_cast<std::size_t>(u) * k + x] *
                                       bd[static_cast<std::size_t>(v) * k + y]);
        }
    }
};

/// Frequency-domain activation tensor: (n, c, k^2, h/k, w/k) row-major,
/// coefficients along axis 2 in zigzag order.
template <typename T>
struct FreqTensor {
    int n = 0, c = 0, k = 0, bh = 0, bw = 0;
    std::vector<T> data;

    FreqTensor() = default;
    FreqTensor(int n_, int c_, int k_, int bh_, int bw_)
        : n(n_), c(c_), k(k_), bh(bh_), bw(bw_) {
        data.assign(numel(), T(0));
    }

    int ncoef() const { return k * k; }
    std::size_t blocks() const { return static_cast<std::size_t>(bh) * bw; }
    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * k * k * bh * bw;
    }

    std::size_t idx(int in, int ic, int q, int bi, int bj) const {
        return (((static_cast<std::size_t>(in) * c + ic) * (k * k) + q) * bh + bi) * bw + bj;
    }

    T& at(int in, int ic, int q, int bi, int bj) { return data[idx(in, ic, q, bi, bj)]; }
    const T& at(int in, int ic, int q, int bi, int bj) const {
        return data[idx(in, ic, q, bi, bj)];
    }

    /// Contiguous (bh*bw)-long slab of coefficient q for channel (in, ic).
    T* coef_plane(int in, int ic, int q) { return data.data() + idx(in, ic, q, 0, 0); }
    const T* coef_plane(int in, int ic, int q) const {
        return data.data() + idx(in, ic, q, 0, 0);
    }

    bool same_shape(const FreqTensor& o) const {
        return n == o.n && c == o.c && k == o.k && bh == o.bh && bw == o.bw;
    }
};

namespace detail {

/// Copies macroblock (bi, bj) of one channel plane into a dense k^2 scratch.
template <typename T>
inline void load_block(const T* plane, int w, int k, int bi, int bj, T* blk) {
    for (int r = 0; r < k; ++r) {
        const T* src = plane + static_cast<std::size_t>(bi * k + r) * w + bj * k;
        for (int s = 0; s < k; ++s) blk[r * k + s] = src[s];
    }
}

/// Produces per-channel zigzag-prefix coefficients for channels in [0, c).
/// retained == nullptr means full retention.
template <typename T>
void dct_channelwise(const Tensor<T>& t, const DctBasis<T>& basis, const int* retained,
                     FreqTensor<T>& out) {
    const int k = basis.k, kk = k * k;
    const int bh = out.bh, bw = out.bw;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < t.n; ++in) {
        for (int ic = 0; ic < t.c; ++ic) {
            const int m = retained ? retained[ic] : kk;
            if (m == 0) continue;
            T blk[kMaxMacroblock * kMaxMacroblock];
            const T* plane = t.plane(in, ic);
            for (int bi = 0; bi < bh; ++bi) {
                for (int bj = 0; bj < bw; ++bj) {
                    load_block(plane, t.w, k, bi, bj, blk);
                    for (int q = 0; q < m; ++q) {
                        const T* filt = basis.filters.data() + static_cast<std::size_t>(q) * kk;
                        T acc = T(0);
                        for (int i = 0; i < kk; ++i) acc += filt[i] * blk[i];
                        out.at(in, ic, q, bi, bj) = acc;
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Full forward transform: each macroblock multiplied by the k^2 frequency
/// filters, output flattened along the zigzag axis. Applied per channel.
template <typename T>
FreqTensor<T> dct_forward(const Tensor<T>& t, const MacroblockSpec& spec) {
    spec.check_divides(t.h, t.w);
    const DctBasis<T> basis(spec.k);
    FreqTensor<T> out(t.n, t.c, spec.k, t.h / spec.k, t.w / spec.k);
    detail::dct_channelwise(t, basis, nullptr, out);
    return out;
}

/// Truncated forward transform: for channel c only the first retained[c]
/// zigzag coefficients are computed (bit-exact with dct_forward on those);
/// the rest stay zero and cost nothing.
template <typename T>
FreqTensor<T> dct_truncated(const Tensor<T>& t, const MacroblockSpec& spec,
                            const std::vector<int>& retained) {
    spec.check_divides(t.h, t.w);
    if (static_cast<int>(retained.size()) != t.c)
        throw validation_error("retained counts size " + std::to_string(retained.size()) +
                               " != channels " + std::to_string(t.c));
    const int kk = spec.k * spec.k;
    for (int ic = 0; ic < t.c; ++ic)
        if (retained[ic] < 0 || retained[ic] > kk)
            throw validation_error("retained count out of range [0, " + std::to_string(kk) +
                                   "] for channel " + std::to_string(ic) + ": " +
                                   std::to_string(retained[ic]));
    const DctBasis<T> basis(spec.k);
    FreqTensor<T> out(t.n, t.c, spec.k, t.h / spec.k, t.w / spec.k);
    detail::dct_channelwise(t, basis, retained.data(), out);
    return out;
}

/// Inverse transform. Each coefficient scatters its size-k^2 filter back into
/// the spatial block; with the orthonormal basis this is the exact adjoint of
/// dct_forward. retained (optional) skips the known-zero tail per channel;
/// skipping zeros does not change the result.
template <typename T>
Tensor<T> dct_inverse(const FreqTensor<T>& f, const std::vector<int>* retained = nullptr) {
    if (retained && static_cast<int>(retained->size()) != f.c)
        throw validation_error("retained counts size does not match channels");
    const DctBasis<T> basis(f.k);
    const int k = f.k, kk = k * k;
    Tensor<T> out(f.n, f.c, f.bh * k, f.bw * k);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < f.n; ++in) {
        for (int ic = 0; ic < f.c; ++ic) {
            const int m = retained ? (*retained)[ic] : kk;
            T blk[kMaxMacroblock * kMaxMacroblock];
            T* plane = out.plane(in, ic);
            for (int bi = 0; bi < f.bh; ++bi) {
                for (int bj = 0; bj < f.bw; ++bj) {
                    for (int i = 0; i < kk; ++i) blk[i] = T(0);
                    for (int q = 0; q < m; ++q) {
                        const T y = f.at(in, ic, q, bi, bj);
                        const T* filt = basis.filters.data() + static_cast<std::size_t>(q) * kk;
                        for (int i = 0; i < kk; ++i) blk[i] += y * filt[i];
                    }
                    for (int r = 0; r < k; ++r) {
                        T* dst = plane + static_cast<std::size_t>(bi * k + r) * out.w + bj * k;
                        for (int s = 0; s < k; ++s) dst[s] = blk[r * k + s];
                    }
                }
            }
        }
    }
    return out;
}

/// MACs for one direction of the transform: every produced coefficient costs
/// k^2 multiplies per block. Full retention reduces to c * h * w * k^2.
inline std::uint64_t transform_mac_count(int c, int h, int w, int k,
                                         const std::vector<int>* retained = nullptr) {
    if (h % k != 0 || w % k != 0)
        throw validation_error("transform_mac_count: k must divide h and w");
    const std::uint64_t blocks = static_cast<std::uint64_t>(h / k) * (w / k);
    const std::uint64_t kk = static_cast<std::uint64_t>(k) * k;
    if (!retained) return static_cast<std::uint64_t>(c) * h * w * kk;
    if (static_cast<int>(retained->size()) != c)
        throw validation_error("transform_mac_count: retained size != channels");
    std::uint64_t total = 0;
    for (int ic = 0; ic < c; ++ic) total += blocks * kk * static_cast<std::uint64_t>((*retained)[ic]);
    return total;
}

}  // namespace freqprune
