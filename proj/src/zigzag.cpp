#include "freqprune/dct.hpp"

#include <algorithm>

namespace freqprune {

ZigzagOrder::ZigzagOrder(int k_) : k(k_) {
    if (k < 1) throw validation_error("zigzag order requires k >= 1");
    perm.reserve(static_cast<std::size_t>(k) * k);
    // Walk anti-diagonals u + v = s. Odd diagonals run top-right to
    // bottom-left (row increasing), even ones the other way, which yields
    // the JPEG traversal (0,0), (0,1), (1,0), (2,0), ...
    for (int s = 0; s <= 2 * (k - 1); ++s) {
        const int lo = std::max(0, s - (k - 1));
        const int hi = std::min(s, k - 1);
        if (s % 2 == 1) {
            for (int u = lo; u <= hi; ++u) perm.emplace_back(u, s - u);
        } else {
            for (int u = hi; u >= lo; --u) perm.emplace_back(u, s - u);
        }
    }
    inverse_.assign(static_cast<std::size_t>(k) * k, -1);
    for (int q = 0; q < k * k; ++q)
        inverse_[static_cast<std::size_t>(perm[q].first) * k + perm[q].second] = q;
}

}  // namespace freqprune
