#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "freqprune/errors.hpp"
#include "freqprune/masks.hpp"

namespace freqprune {

enum class LayerType {
    Conv2d,
    Pointwise,       // spatial 1x1, never wrapped
    FreqPointwise,   // 1x1 wrapped in forward/inverse transforms
    Dense,
    ReLU,
    ReLU6,
    BatchNorm,
    GlobalAvgPool,
};

const char* to_string(LayerType t);

/// One entry of an architecture description. Geometry fields (in_*, out_*)
/// are filled in by ArchConfig::propagate from the input dims.
struct ArchLayer {
    std::string name;
    LayerType type = LayerType::ReLU;
    int out_c = 0;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    int groups = 1;
    int k = 0;          // macroblock size for FreqPointwise
    bool branch = false;  // side computation (e.g. a projection shortcut):
                          // costed, but does not advance the running shape

    // derived
    int in_c = 0, in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;

    bool counts_macs() const {
        return type == LayerType::Conv2d || type == LayerType::Pointwise ||
               type == LayerType::FreqPointwise || type == LayerType::Dense;
    }
    bool is_depthwise() const {
        return type == LayerType::Conv2d && groups == in_c && groups == out_c && groups > 1;
    }
};

struct ArchConfig {
    std::string name;
    int in_c = 0, in_h = 0, in_w = 0;
    int classes = 0;
    std::vector<ArchLayer> layers;

    /// Walks the layer list, filling derived geometry and validating shape
    /// arithmetic (group divisibility, macroblock divisibility, dims >= 1).
    void propagate();

    std::string to_json() const;
    static ArchConfig from_json(const std::string& text);
    static ArchConfig load(const std::string& path);
    void save(const std::string& path) const;
};

/// MAC cost of one layer, split into the convolution itself and the two
/// transform overheads (zero unless wrapped).
struct LayerMacs {
    std::uint64_t baseline = 0;  // unwrapped, unpruned conv cost
    std::uint64_t main = 0;      // conv cost after pruning
    std::uint64_t dct = 0;
    std::uint64_t idct = 0;

    std::uint64_t with_overhead() const { return main + dct + idct; }
};

/// Exact overhead-to-baseline ratio of a wrapped layer as a rational number:
/// ((c_in + c_out) * k^2) / (c_in * c_out).
struct OverheadRatio {
    std::uint64_t num = 0, den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};
OverheadRatio overhead_ratio(int c_in, int c_out, int k);

/// Cost of `layer`, optionally under an input-side and/or output-side mask.
/// Coefficients nobody consumes are not produced: an input entry is charged
/// only if some output channel retains its coefficient, and an output entry
/// only if some input channel still carries it.
LayerMacs layer_macs(const ArchLayer& layer, const PruneMask* input_mask = nullptr,
                     const PruneMask* output_mask = nullptr);

struct LayerReport {
    std::string name;
    LayerType type;
    bool wrapped = false;
    LayerMacs macs;
};

struct NetworkReport {
    std::vector<LayerReport> rows;
    std::uint64_t baseline_total = 0;        // no transforms, no pruning
    std::uint64_t pruned_conv_total = 0;
    std::uint64_t dct_total = 0;
    std::uint64_t idct_total = 0;
    std::uint64_t depthwise_total = 0;       // slice of baseline_total
    std::uint64_t pointwise_total = 0;       // slice of baseline_total (1x1 convs)

    std::uint64_t with_overhead_total() const {
        return pruned_conv_total + dct_total + idct_total;
    }
    double reduction() const {
        const std::uint64_t d = with_overhead_total();
        return d == 0 ? std::numeric_limits<double>::infinity()
                      : static_cast<double>(baseline_total) / static_cast<double>(d);
    }

    std::string table() const;
    std::string csv() const;
};

NetworkReport network_macs(const ArchConfig& arch, const MaskSet* masks = nullptr);

}  // namespace freqprune
