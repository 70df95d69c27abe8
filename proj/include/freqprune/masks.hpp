#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "freqprune/dct.hpp"
#include "freqprune/errors.hpp"

namespace freqprune {

enum class MaskStrategy { Channel, Coefficient, ChannelCoefficient, Band };
enum class MaskSide { Input, Output };

const char* to_string(MaskStrategy s);
MaskStrategy mask_strategy_from_string(const std::string& s);

/// A pruning mask over (channel x zigzag coefficient). Four encodings:
///   Channel            - keep/drop whole channels
///   Coefficient        - one kept-coefficient set shared by all channels
///   ChannelCoefficient - arbitrary boolean c x k^2 matrix
///   Band               - per-channel zigzag prefix length m_c in [0, k^2]
/// channel_perm records the dense-packing channel order (kept-first for
/// Channel masks, band-descending for Band masks); it is metadata only,
/// application never reorders data.
struct PruneMask {
    MaskStrategy strategy = MaskStrategy::Band;
    int channels = 0;
    int k = 0;
    MaskSide applies_to = MaskSide::Input;
    std::string layer;

    std::vector<std::uint8_t> kept_channels;  // Channel: size c
    std::vector<std::uint8_t> kept_coefs;     // Coefficient: size k^2
    std::vector<std::uint8_t> matrix;         // ChannelCoefficient: c * k^2
    std::vector<int> band;                    // Band: size c, values in [0, k^2]
    std::vector<int> channel_perm;

    static PruneMask full(int c, int k, MaskStrategy s = MaskStrategy::Band);
    static PruneMask empty(int c, int k, MaskStrategy s = MaskStrategy::Band);
    static PruneMask band_mask(std::vector<int> m, int k);
    static PruneMask chan_coef_mask(std::vector<std::uint8_t> matrix, int c, int k);

    bool retains(int c, int q) const {
        switch (strategy) {
            case MaskStrategy::Channel: return kept_channels[c] != 0;
            case MaskStrategy::Coefficient: return kept_coefs[q] != 0;
            case MaskStrategy::ChannelCoefficient:
                return matrix[static_cast<std::size_t>(c) * k * k + q] != 0;
            case MaskStrategy::Band: return q < band[c];
        }
        return false;
    }

    void check_compatible(int c, int k_) const {
        if (channels != c || k != k_)
            throw validation_error("mask shape (c=" + std::to_string(channels) +
                                   ", k=" + std::to_string(k) + ") does not match tensor (c=" +
                                   std::to_string(c) + ", k=" + std::to_string(k_) + ")");
    }

    /// Expands any encoding to the boolean c x k^2 matrix form.
    std::vector<std::uint8_t> as_matrix() const;

    std::uint64_t retained_count() const;

    std::string to_json() const;
    static PruneMask from_json(const std::string& text);
};

/// Per-layer mean absolute coefficient magnitude at a wrapped layer's input,
/// accumulated over samples and block positions. Sums and counts are kept
/// separately so shard results merge exactly.
struct LayerProfile {
    std::string layer;
    int c = 0, k = 0;
    int h = 0, w = 0, c_out = 0;  // layer geometry, kept for MAC projections
    std::int64_t sample_count = 0;
    std::int64_t position_count = 0;      // samples * blocks accumulated
    std::vector<double> sum_abs;          // c * k^2

    LayerProfile() = default;
    LayerProfile(std::string layer_, int c_, int k_, int h_, int w_, int c_out_)
        : layer(std::move(layer_)), c(c_), k(k_), h(h_), w(w_), c_out(c_out_),
          sum_abs(static_cast<std::size_t>(c_) * k_ * k_, 0.0) {}

    template <typename T>
    void accumulate(const FreqTensor<T>& f) {
        if (f.c != c || f.k != k)
            throw validation_error("profile accumulate: shape mismatch for layer " + layer);
        const std::size_t nb = f.blocks();
        const int kk = k * k;
        for (int in = 0; in < f.n; ++in)
            for (int ic = 0; ic < c; ++ic)
                for (int q = 0; q < kk; ++q) {
                    const T* src = f.coef_plane(in, ic, q);
                    double s = 0.0;
                    for (std::size_t p = 0; p < nb; ++p) s += std::abs(static_cast<double>(src[p]));
                    sum_abs[static_cast<std::size_t>(ic) * kk + q] += s;
                }
        sample_count += f.n;
        position_count += static_cast<std::int64_t>(f.n) * static_cast<std::int64_t>(nb);
    }

    void merge(const LayerProfile& other);

    std::vector<double> mean_abs() const;
};

struct ProfileSet {
    std::vector<LayerProfile> layers;

    LayerProfile* find(const std::string& layer);
    std::string to_json() const;
    static ProfileSet from_json(const std::string& text);
};

/// Threshold-based mask construction at pruning fraction rho in [0, 1].
/// Ties break by (importance, channel index, zigzag index) ascending so the
/// result is deterministic.
PruneMask make_mask(const std::vector<double>& importance, int c, int k, MaskStrategy strategy,
                    double rho);

/// Largest all-retained zigzag prefix of each channel row; never retains a
/// coefficient the source mask dropped.
PruneMask band_from_chan_coef(const PruneMask& m);

/// Fraction of channel rows whose retained set is exactly a zigzag prefix.
/// An all-dropped row is the empty prefix and counts as contiguous.
double contiguity_fraction(const PruneMask& m);

/// Zeroes masked entries; retained entries pass through bit-exactly.
template <typename T>
FreqTensor<T> apply_mask(const FreqTensor<T>& f, const PruneMask& m) {
    m.check_compatible(f.c, f.k);
    FreqTensor<T> out = f;
    const std::size_t nb = f.blocks();
    const int kk = f.ncoef();
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < f.n; ++in)
        for (int ic = 0; ic < f.c; ++ic)
            for (int q = 0; q < kk; ++q) {
                if (m.retains(ic, q)) continue;
                T* dst = out.coef_plane(in, ic, q);
                for (std::size_t p = 0; p < nb; ++p) dst[p] = T(0);
            }
    return out;
}

/// A named collection of masks, as written by the prune/train commands.
/// Each layer may carry an input-side mask, an output-side mask, or both.
struct MaskSet {
    std::vector<PruneMask> masks;

    const PruneMask* find(const std::string& layer, MaskSide side) const;
    std::string to_json() const;
    static MaskSet from_json(const std::string& text);
    void save(const std::string& path) const;
    static MaskSet load(const std::string& path);
};

}  // namespace freqprune
