#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "freqprune/dct.hpp"
#include "freqprune/fbt1.hpp"

// Frequency tensors serialize through the FBT1 container with the
// coefficient axis folded into channels, dims (n, c*k^2, h/k, w/k), plus a
// ".json" sidecar recording the macroblock size and the zigzag convention.

namespace freqprune {

inline constexpr int kZigzagVersion = 1;

template <typename T>
void save_freq_tensor(const std::string& path, const FreqTensor<T>& f) {
    Tensor<T> flat(f.n, f.c * f.ncoef(), f.bh, f.bw);
    flat.data = f.data;
    fbt1::write(path, flat);
    nlohmann::json j;
    j["k"] = f.k;
    j["channels"] = f.c;
    j["zigzag_version"] = kZigzagVersion;
    std::ofstream os(path + ".json");
    if (!os) throw io_error("cannot write sidecar: " + path + ".json");
    os << j.dump(2) << "\n";
}

template <typename T>
FreqTensor<T> load_freq_tensor(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw io_error("missing sidecar: " + path + ".json");
    std::stringstream ss;
    ss << is.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw io_error("malformed sidecar " + path + ".json: " + e.what());
    }
    const int k = j.at("k").get<int>();
    const int c = j.at("channels").get<int>();
    if (j.at("zigzag_version").get<int>() != kZigzagVersion)
        throw io_error("unsupported zigzag convention in " + path + ".json");
    Tensor<T> flat = fbt1::read<T>(path);
    if (flat.c != c * k * k)
        throw io_error("sidecar/tensor shape mismatch for " + path);
    FreqTensor<T> f(flat.n, c, k, flat.h, flat.w);
    f.data = std::move(flat.data);
    return f;
}

}  // namespace freqprune
