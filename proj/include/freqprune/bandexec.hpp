#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freqprune/dct.hpp"
#include "freqprune/errors.hpp"
#include "freqprune/masks.hpp"
#include "freqprune/pointwise.hpp"

namespace freqprune {

/// Dense execution plan for a band-pruned pointwise convolution. Channels
/// are ordered by descending band length on both sides, so for every zigzag
/// coefficient q the channels that still carry it form the prefix
/// [0, a_in(q)) / [0, a_out(q)) of the permuted order: each per-coefficient
/// product is a dense sub-GEMM over contiguous ranges.
struct BandPlan {
    int k = 0, c_in = 0, c_out = 0;
    int h = 0, w = 0, batch = 1;
    std::vector<int> in_perm;   // permuted slot -> original input channel
    std::vector<int> out_perm;  // permuted slot -> original output channel
    std::vector<int> a_in;      // active input channels per coefficient
    std::vector<int> a_out;     // active output channels per coefficient
    std::int64_t p = 0;         // block positions (h/k)*(w/k)

    std::uint64_t macs() const {
        std::uint64_t total = 0;
        for (std::size_t q = 0; q < a_in.size(); ++q)
            total += static_cast<std::uint64_t>(a_in[q]) * a_out[q] *
                     static_cast<std::uint64_t>(p) * batch;
        return total;
    }

    std::string to_json() const;
};

/// Builds the plan from per-channel zigzag prefix (Band) masks. Passing
/// nullptr for either side means full retention on that side.
BandPlan plan_bands(const PruneMask* input_mask, const PruneMask* output_mask, int k, int c_in,
                    int c_out, int h, int w, int batch = 1);

inline std::uint64_t banded_macs(const BandPlan& plan) { return plan.macs(); }

/// Test hook: when a sink is installed, execute_banded runs serially and
/// records the permuted channel interval each band touched.
struct BandTraceEntry {
    int q;
    int in_first, in_last;    // inclusive permuted input slots, -1/-1 if empty
    int out_first, out_last;  // inclusive permuted output slots
};
void set_band_trace(std::vector<BandTraceEntry>* sink);
std::vector<BandTraceEntry>* band_trace();

/// Runs the banded pointwise convolution. Precondition: input entries beyond
/// each channel's prefix are zero (the plan never reads them). Output entries
/// beyond each channel's prefix are exactly zero.
template <typename T>
FreqTensor<T> execute_banded(const FreqTensor<T>& f, const PointwiseWeights<T>& layer,
                             const BandPlan& plan) {
    if (f.k != plan.k || f.c != plan.c_in || f.n != plan.batch ||
        static_cast<std::int64_t>(f.blocks()) != plan.p)
        throw validation_error("execute_banded: tensor does not match plan (tensor k=" +
                               std::to_string(f.k) + " c=" + std::to_string(f.c) +
                               " n=" + std::to_string(f.n) + ")");
    if (layer.c_in != plan.c_in || layer.c_out != plan.c_out)
        throw validation_error("execute_banded: layer does not match plan");
    if (layer.bias) throw validation_error("execute_banded: bias must be absent");

    // Permute the weight matrix once so every sub-GEMM reads it contiguously.
    std::vector<T> wperm(static_cast<std::size_t>(plan.c_out) * plan.c_in);
    for (int o = 0; o < plan.c_out; ++o)
        for (int i = 0; i < plan.c_in; ++i)
            wperm[static_cast<std::size_t>(o) * plan.c_in + i] =
                layer.wat(plan.out_perm[o], plan.in_perm[i]);

    FreqTensor<T> out(f.n, plan.c_out, f.k, f.bh, f.bw);
    const std::size_t nb = f.blocks();
    const int kk = f.ncoef();

    auto run_band = [&](int in, int q) {
        const int ain = plan.a_in[q], aout = plan.a_out[q];
        for (int o = 0; o < aout; ++o) {
            T* dst = out.coef_plane(in, plan.out_perm[o], q);
            const T* wrow = wperm.data() + static_cast<std::size_t>(o) * plan.c_in;
            for (int i = 0; i < ain; ++i) {
                const T wv = wrow[i];
                const T* src = f.coef_plane(in, plan.in_perm[i], q);
                for (std::size_t pp = 0; pp < nb; ++pp) dst[pp] += wv * src[pp];
            }
        }
    };

    if (band_trace()) {
        for (int in = 0; in < f.n; ++in)
            for (int q = 0; q < kk; ++q) {
                run_band(in, q);
                band_trace()->push_back({q, plan.a_in[q] > 0 ? 0 : -1, plan.a_in[q] - 1,
                                         plan.a_out[q] > 0 ? 0 : -1, plan.a_out[q] - 1});
            }
        return out;
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < f.n; ++in)
        for (int q = 0; q < kk; ++q) run_band(in, q);
    return out;
}

}  // namespace freqprune
