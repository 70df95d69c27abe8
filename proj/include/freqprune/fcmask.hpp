#pragma once

#include <vector>

#include "freqprune/errors.hpp"
#include "freqprune/masks.hpp"

namespace freqprune {

// The learnable per-channel pruning level. A single scalar fc in [0, 1]
// expands to one soft mask value per zigzag coefficient through a clamped
// ramp: coefficient n starts to fade once fc drops below (n+1)/num_coefs,
// so the retained set is always a frequency prefix. fc = 1 keeps every
// coefficient at weight 1, fc = 0 silences the channel.

template <typename T = double>
std::vector<T> coefmask(T fc, int num_coefs) {
    if (fc < T(0) || fc > T(1)) throw validation_error("fc mask value outside [0, 1]");
    if (num_coefs < 1) throw validation_error("num_coefs must be >= 1");
    std::vector<T> out(static_cast<std::size_t>(num_coefs));
    for (int n = 0; n < num_coefs; ++n) {
        T v = (fc - static_cast<T>(n) / num_coefs) * num_coefs;
        if (v < T(0)) v = T(0);
        if (v > T(1)) v = T(1);
        out[n] = v;
    }
    return out;
}

/// d(coefmask_n)/d(fc): num_coefs on the open ramp, 0 where saturated.
/// The kink points use subgradient 0.
template <typename T = double>
std::vector<T> coefmask_grad(T fc, int num_coefs) {
    if (fc < T(0) || fc > T(1)) throw validation_error("fc mask value outside [0, 1]");
    std::vector<T> out(static_cast<std::size_t>(num_coefs), T(0));
    for (int n = 0; n < num_coefs; ++n) {
        const T v = (fc - static_cast<T>(n) / num_coefs) * num_coefs;
        if (v > T(0) && v < T(1)) out[n] = static_cast<T>(num_coefs);
    }
    return out;
}

/// lambda * sum over layers of mean_c |fc_c|. Values live in [0, 1], so the
/// per-channel gradient is lambda / c_layer.
template <typename T = double>
T fcmask_regularizer(const std::vector<std::vector<T>>& layer_fc, T lambda) {
    if (lambda < T(0)) throw validation_error("lambda must be >= 0");
    T total = T(0);
    for (const auto& fc : layer_fc) {
        if (fc.empty()) continue;
        T s = T(0);
        for (T v : fc) s += v < T(0) ? -v : v;
        total += s / static_cast<T>(fc.size());
    }
    return lambda * total;
}

/// Hard conversion after training: coefficient n survives iff its soft mask
/// value rounds to 1 (>= 0.5). The ramp is nonincreasing in n, so the result
/// is a valid zigzag prefix; the closed form is
/// m_c = min(num_coefs, max(0, floor(fc * num_coefs + 0.5))).
template <typename T = double>
PruneMask round_and_fix(const std::vector<T>& fc, int num_coefs, int k) {
    if (num_coefs != k * k)
        throw validation_error("round_and_fix: num_coefs must equal k^2");
    std::vector<int> band(fc.size());
    for (std::size_t c = 0; c < fc.size(); ++c) {
        const auto masks = coefmask(fc[c], num_coefs);
        int m = 0;
        while (m < num_coefs && masks[m] >= T(0.5)) ++m;
        band[c] = m;
    }
    PruneMask out = PruneMask::band_mask(std::move(band), k);
    out.applies_to = MaskSide::Output;
    return out;
}

}  // namespace freqprune
