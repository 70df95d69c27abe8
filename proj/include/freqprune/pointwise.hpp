#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "freqprune/dct.hpp"
#include "freqprune/errors.hpp"
#include "freqprune/masks.hpp"
#include "freqprune/tensor.hpp"

namespace freqprune {

/// A 1x1 convolution: per-pixel channel mix out = W * in (+ bias).
template <typename T>
struct PointwiseWeights {
    int c_in = 0, c_out = 0;
    std::vector<T> weights;               // c_out x c_in, row-major
    std::optional<std::vector<T>> bias;   // c_out

    PointwiseWeights() = default;
    PointwiseWeights(int c_in_, int c_out_) : c_in(c_in_), c_out(c_out_) {
        if (c_in < 1 || c_out < 1) throw validation_error("pointwise layer needs c_in, c_out >= 1");
        weights.assign(static_cast<std::size_t>(c_out) * c_in, T(0));
    }

    T wat(int co, int ci) const { return weights[static_cast<std::size_t>(co) * c_in + ci]; }
    T& wat(int co, int ci) { return weights[static_cast<std::size_t>(co) * c_in + ci]; }
};

inline std::uint64_t pointwise_mac_count(int c_in, int h, int w, int c_out) {
    return static_cast<std::uint64_t>(c_in) * h * w * c_out;
}

/// out[n,co,y,x] = sum_ci W[co,ci] * x[n,ci,y,x] + bias[co]
template <typename T>
Tensor<T> conv1x1_spatial(const Tensor<T>& x, const PointwiseWeights<T>& layer) {
    if (x.c != layer.c_in)
        throw validation_error("conv1x1: input channels " + std::to_string(x.c) +
                               " != layer c_in " + std::to_string(layer.c_in));
    Tensor<T> out(x.n, layer.c_out, x.h, x.w);
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < x.n; ++in) {
        for (int co = 0; co < layer.c_out; ++co) {
            T* dst = out.plane(in, co);
            const T b = layer.bias ? (*layer.bias)[co] : T(0);
            for (std::size_t p = 0; p < hw; ++p) dst[p] = b;
            for (int ci = 0; ci < layer.c_in; ++ci) {
                const T wv = layer.wat(co, ci);
                const T* src = x.plane(in, ci);
                for (std::size_t p = 0; p < hw; ++p) dst[p] += wv * src[p];
            }
        }
    }
    return out;
}

/// Same channel mix applied coefficient-wise in the frequency domain.
/// The optional mask zeroes output entries at masked (co, q); masked
/// coefficient rows are skipped, not computed. Bias must be absent here
/// (freq_wrapped owns bias placement on the DC coefficient).
template <typename T>
FreqTensor<T> conv1x1_freq(const FreqTensor<T>& f, const PointwiseWeights<T>& layer,
                           const PruneMask* mask = nullptr) {
    if (f.c != layer.c_in)
        throw validation_error("conv1x1_freq: input channels " + std::to_string(f.c) +
                               " != layer c_in " + std::to_string(layer.c_in));
    if (layer.bias)
        throw validation_error("conv1x1_freq: bias must be absent (applied by freq_wrapped)");
    if (mask) mask->check_compatible(layer.c_out, f.k);
    FreqTensor<T> out(f.n, layer.c_out, f.k, f.bh, f.bw);
    const std::size_t nb = f.blocks();
    const int kk = f.ncoef();
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < f.n; ++in) {
        for (int co = 0; co < layer.c_out; ++co) {
            for (int q = 0; q < kk; ++q) {
                if (mask && !mask->retains(co, q)) continue;
                T* dst = out.coef_plane(in, co, q);
                for (int ci = 0; ci < layer.c_in; ++ci) {
                    const T wv = layer.wat(co, ci);
                    const T* src = f.coef_plane(in, ci, q);
                    for (std::size_t p = 0; p < nb; ++p) dst[p] += wv * src[p];
                }
            }
        }
    }
    return out;
}

/// Input-side truncation implied by an output-side mask: coefficient q has
/// to be produced by the forward transform iff some output channel retains
/// it, so every input channel is truncated at the highest retained index.
inline std::vector<int> induced_input_band(const PruneMask* mask, int c_in, int k) {
    const int kk = k * k;
    int top = kk;
    if (mask) {
        top = 0;
        for (int q = kk - 1; q >= 0; --q) {
            bool any = false;
            for (int co = 0; co < mask->channels && !any; ++co) any = mask->retains(co, q);
            if (any) {
                top = q + 1;
                break;
            }
        }
    }
    return std::vector<int>(static_cast<std::size_t>(c_in), top);
}

/// Per-output-channel zigzag prefix that covers every retained coefficient,
/// used to skip known-zero tails in the inverse transform.
inline std::vector<int> output_cover_band(const PruneMask* mask, int c_out, int k) {
    const int kk = k * k;
    std::vector<int> cover(static_cast<std::size_t>(c_out), kk);
    if (!mask) return cover;
    for (int co = 0; co < c_out; ++co) {
        int m = 0;
        for (int q = kk - 1; q >= 0; --q)
            if (mask->retains(co, q)) {
                m = q + 1;
                break;
            }
        cover[co] = m;
    }
    return cover;
}

/// The full frequency-domain sandwich: forward transform (truncated to the
/// coefficients the mask can produce), masked channel mix, bias on the DC
/// coefficient, inverse transform. With full retention this equals
/// conv1x1_spatial; a bias b on a k x k block surfaces as b*k on DC under
/// the orthonormal basis.
template <typename T>
Tensor<T> freq_wrapped(const Tensor<T>& x, const PointwiseWeights<T>& layer,
                       const MacroblockSpec& spec, const PruneMask* mask = nullptr) {
    PointwiseWeights<T> unbiased = layer;
    unbiased.bias.reset();
    FreqTensor<T> f = dct_truncated(x, spec, induced_input_band(mask, layer.c_in, spec.k));
    FreqTensor<T> g = conv1x1_freq(f, unbiased, mask);
    if (layer.bias) {
        const std::size_t nb = g.blocks();
        for (int in = 0; in < g.n; ++in)
            for (int co = 0; co < g.c; ++co) {
                const T add = (*layer.bias)[co] * static_cast<T>(spec.k);
                T* dc = g.coef_plane(in, co, 0);
                for (std::size_t p = 0; p < nb; ++p) dc[p] += add;
            }
    }
    std::vector<int> cover = output_cover_band(mask, layer.c_out, spec.k);
    if (layer.bias)
        for (auto& m : cover) m = std::max(m, 1);  // DC now carries the bias
    return dct_inverse(g, &cover);
}

/// MACs of the wrapped op: forward transform + channel mix + inverse
/// transform, each per the per-coefficient filter accounting.
inline std::uint64_t freq_wrapped_mac_count(int c_in, int c_out, int h, int w, int k) {
    return transform_mac_count(c_in, h, w, k) + pointwise_mac_count(c_in, h, w, c_out) +
           transform_mac_count(c_out, h, w, k);
}

}  // namespace freqprune
