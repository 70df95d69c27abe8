#include "freqprune/costmodel.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "freqprune/bandexec.hpp"
#include "json.hpp"

namespace freqprune {

using nlohmann::json;

const char* to_string(LayerType t) {
    switch (t) {
        case LayerType::Conv2d: return "conv2d";
        case LayerType::Pointwise: return "pointwise";
        case LayerType::FreqPointwise: return "freq_pointwise";
        case LayerType::Dense: return "dense";
        case LayerType::ReLU: return "relu";
        case LayerType::ReLU6: return "relu6";
        case LayerType::BatchNorm: return "batchnorm";
        case LayerType::GlobalAvgPool: return "global_avg_pool";
    }
    return "?";
}

namespace {

LayerType layer_type_from_string(const std::string& s) {
    if (s == "conv2d") return LayerType::Conv2d;
    if (s == "pointwise") return LayerType::Pointwise;
    if (s == "freq_pointwise") return LayerType::FreqPointwise;
    if (s == "dense") return LayerType::Dense;
    if (s == "relu") return LayerType::ReLU;
    if (s == "relu6") return LayerType::ReLU6;
    if (s == "batchnorm") return LayerType::BatchNorm;
    if (s == "global_avg_pool") return LayerType::GlobalAvgPool;
    throw validation_error("unknown layer type: " + s);
}

}  // namespace

void ArchConfig::propagate() {
    if (in_c < 1 || in_h < 1 || in_w < 1)
        throw validation_error("arch '" + name + "': input dims must be >= 1");
    int c = in_c, h = in_h, w = in_w;
    int auto_id = 0;
    for (auto& l : layers) {
        if (l.name.empty()) l.name = "layer" + std::to_string(auto_id);
        ++auto_id;
        l.in_c = c;
        l.in_h = h;
        l.in_w = w;
        if (l.branch) {
            // consumes the current shape, merges back later via an add;
            // only its own cost matters here
            if (l.type != LayerType::Conv2d && l.type != LayerType::Pointwise)
                throw validation_error(l.name + ": only conv layers may be branches");
            l.out_h = (h + 2 * l.pad - l.kernel) / l.stride + 1;
            l.out_w = (w + 2 * l.pad - l.kernel) / l.stride + 1;
            continue;
        }
        switch (l.type) {
            case LayerType::Conv2d: {
                if (l.out_c < 1) throw validation_error(l.name + ": conv2d needs out >= 1");
                if (l.kernel < 1 || l.stride < 1 || l.pad < 0 || l.groups < 1)
                    throw validation_error(l.name + ": bad conv2d geometry");
                if (c % l.groups != 0 || l.out_c % l.groups != 0)
                    throw validation_error(l.name + ": groups must divide in and out channels");
                l.out_h = (h + 2 * l.pad - l.kernel) / l.stride + 1;
                l.out_w = (w + 2 * l.pad - l.kernel) / l.stride + 1;
                if (l.out_h < 1 || l.out_w < 1)
                    throw validation_error(l.name + ": output collapses to zero size");
                c = l.out_c;
                h = l.out_h;
                w = l.out_w;
                break;
            }
            case LayerType::Pointwise:
            case LayerType::FreqPointwise: {
                if (l.out_c < 1) throw validation_error(l.name + ": pointwise needs out >= 1");
                l.kernel = 1;
                l.stride = 1;
                l.groups = 1;
                l.out_h = h;
                l.out_w = w;
                if (l.type == LayerType::FreqPointwise) {
                    if (l.k < 1)
                        throw validation_error(l.name + ": freq_pointwise needs macroblock k");
                    MacroblockSpec(l.k).check_divides(h, w);
                }
                c = l.out_c;
                break;
            }
            case LayerType::Dense: {
                if (l.out_c < 1) throw validation_error(l.name + ": dense needs out >= 1");
                l.out_h = 1;
                l.out_w = 1;
                c = l.out_c;
                h = 1;
                w = 1;
                break;
            }
            case LayerType::GlobalAvgPool: {
                l.out_c = c;
                l.out_h = 1;
                l.out_w = 1;
                h = 1;
                w = 1;
                break;
            }
            case LayerType::ReLU:
            case LayerType::ReLU6:
            case LayerType::BatchNorm: {
                l.out_c = c;
                l.out_h = h;
                l.out_w = w;
                break;
            }
        }
    }
}

std::string ArchConfig::to_json() const {
    json j;
    j["name"] = name;
    j["input"] = {{"c", in_c}, {"h", in_h}, {"w", in_w}};
    j["classes"] = classes;
    j["layers"] = json::array();
    for (const auto& l : layers) {
        json lj;
        lj["type"] = to_string(l.type);
        if (!l.name.empty()) lj["name"] = l.name;
        if (l.branch) lj["branch"] = true;
        switch (l.type) {
            case LayerType::Conv2d:
                lj["out"] = l.out_c;
                lj["kernel"] = l.kernel;
                lj["stride"] = l.stride;
                lj["pad"] = l.pad;
                if (l.groups != 1) lj["groups"] = l.groups;
                break;
            case LayerType::Pointwise:
                lj["out"] = l.out_c;
                break;
            case LayerType::FreqPointwise:
                lj["out"] = l.out_c;
                lj["k"] = l.k;
                break;
            case LayerType::Dense:
                lj["out"] = l.out_c;
                break;
            default: break;
        }
        j["layers"].push_back(std::move(lj));
    }
    return j.dump(2);
}

ArchConfig ArchConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw validation_error(std::string("malformed arch config: ") + e.what());
    }
    ArchConfig a;
    a.name = j.value("name", "unnamed");
    a.in_c = j.at("input").at("c").get<int>();
    a.in_h = j.at("input").at("h").get<int>();
    a.in_w = j.at("input").at("w").get<int>();
    a.classes = j.value("classes", 0);
    for (const auto& lj : j.at("layers")) {
        ArchLayer l;
        l.type = layer_type_from_string(lj.at("type").get<std::string>());
        l.name = lj.value("name", "");
        l.out_c = lj.value("out", 0);
        l.kernel = lj.value("kernel", 1);
        l.stride = lj.value("stride", 1);
        l.pad = lj.value("pad", 0);
        l.groups = lj.value("groups", 1);
        l.k = lj.value("k", 0);
        l.branch = lj.value("branch", false);
        a.layers.push_back(std::move(l));
    }
    a.propagate();
    return a;
}

ArchConfig ArchConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open arch config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

void ArchConfig::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open for write: " + path);
    os << to_json() << "\n";
}

OverheadRatio overhead_ratio(int c_in, int c_out, int k) {
    OverheadRatio r;
    r.num = static_cast<std::uint64_t>(c_in + c_out) * k * k;
    r.den = static_cast<std::uint64_t>(c_in) * c_out;
    return r;
}

namespace {

// Pruned accounting over arbitrary (channel x coefficient) masks. An input
// entry is produced only if some output channel consumes its coefficient;
// an output entry is reconstructed only if some input channel feeds it.
LayerMacs masked_freq_pointwise_macs(const ArchLayer& l, const PruneMask* im,
                                     const PruneMask* om) {
    const int kk = l.k * l.k;
    const std::uint64_t blocks =
        static_cast<std::uint64_t>(l.in_h / l.k) * static_cast<std::uint64_t>(l.in_w / l.k);
    LayerMacs m;
    m.baseline = static_cast<std::uint64_t>(l.in_c) * l.in_h * l.in_w * l.out_c;

    if (im) im->check_compatible(l.in_c, l.k);
    if (om) om->check_compatible(l.out_c, l.k);

    const bool band_pair = (!im || im->strategy == MaskStrategy::Band) &&
                           (!om || om->strategy == MaskStrategy::Band);
    std::vector<int> a_in(kk, 0), a_out(kk, 0);
    if (band_pair) {
        // Shared code path with execution so the pruned term matches
        // banded_macs() exactly.
        BandPlan plan = plan_bands(im, om, l.k, l.in_c, l.out_c, l.in_h, l.in_w, 1);
        m.main = banded_macs(plan);
        a_in = plan.a_in;
        a_out = plan.a_out;
    } else {
        for (int q = 0; q < kk; ++q) {
            for (int c = 0; c < l.in_c; ++c) a_in[q] += (!im || im->retains(c, q)) ? 1 : 0;
            for (int c = 0; c < l.out_c; ++c) a_out[q] += (!om || om->retains(c, q)) ? 1 : 0;
        }
        for (int q = 0; q < kk; ++q)
            m.main += static_cast<std::uint64_t>(a_in[q]) * a_out[q] * blocks;
    }

    for (int c = 0; c < l.in_c; ++c)
        for (int q = 0; q < kk; ++q)
            if ((!im || im->retains(c, q)) && a_out[q] > 0) m.dct += blocks * kk;
    for (int c = 0; c < l.out_c; ++c)
        for (int q = 0; q < kk; ++q)
            if ((!om || om->retains(c, q)) && a_in[q] > 0) m.idct += blocks * kk;
    return m;
}

}  // namespace

LayerMacs layer_macs(const ArchLayer& layer, const PruneMask* input_mask,
                     const PruneMask* output_mask) {
    LayerMacs m;
    switch (layer.type) {
        case LayerType::Conv2d: {
            m.baseline = static_cast<std::uint64_t>(layer.in_c) * layer.out_c * layer.out_h *
                         layer.out_w * layer.kernel * layer.kernel / layer.groups;
            m.main = m.baseline;
            return m;
        }
        case LayerType::Pointwise: {
            m.baseline = static_cast<std::uint64_t>(layer.in_c) * layer.out_c * layer.out_h *
                         layer.out_w;
            m.main = m.baseline;
            return m;
        }
        case LayerType::Dense: {
            m.baseline = static_cast<std::uint64_t>(layer.in_c) * layer.in_h * layer.in_w *
                         layer.out_c;
            m.main = m.baseline;
            return m;
        }
        case LayerType::FreqPointwise:
            return masked_freq_pointwise_macs(layer, input_mask, output_mask);
        default: return m;  // activations, BN, pooling: not counted
    }
}

NetworkReport network_macs(const ArchConfig& arch, const MaskSet* masks) {
    NetworkReport rep;
    for (const auto& l : arch.layers) {
        if (!l.counts_macs()) continue;
        const PruneMask* im = nullptr;
        const PruneMask* om = nullptr;
        if (masks && l.type == LayerType::FreqPointwise) {
            im = masks->find(l.name, MaskSide::Input);
            om = masks->find(l.name, MaskSide::Output);
        }
        LayerReport row;
        row.name = l.name;
        row.type = l.type;
        row.wrapped = l.type == LayerType::FreqPointwise;
        row.macs = layer_macs(l, im, om);
        // totals follow the convolutional-layer counting convention;
        // dense heads are reported per-row but not totalled
        if (l.type != LayerType::Dense) {
            rep.baseline_total += row.macs.baseline;
            rep.pruned_conv_total += row.macs.main;
            rep.dct_total += row.macs.dct;
            rep.idct_total += row.macs.idct;
            if (l.is_depthwise()) rep.depthwise_total += row.macs.baseline;
            if (l.type == LayerType::FreqPointwise || l.type == LayerType::Pointwise ||
                (l.type == LayerType::Conv2d && l.kernel == 1 && l.groups == 1))
                rep.pointwise_total += row.macs.baseline;
        }
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

namespace {

std::string ratio_str(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", static_cast<double>(num) / static_cast<double>(den));
    return buf;
}

}  // namespace

std::string NetworkReport::table() const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s %-14s %14s %14s %12s %12s %10s %10s\n", "layer", "type",
                  "baseline", "pruned_1x1", "dct", "idct", "ratio_1x1", "overall");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%-24s %-14s %14" PRIu64 " %14" PRIu64 " %12" PRIu64 " %12" PRIu64
                      " %10s %10s\n",
                      r.name.c_str(), to_string(r.type), r.macs.baseline, r.macs.main, r.macs.dct,
                      r.macs.idct, ratio_str(r.macs.baseline, r.macs.main).c_str(),
                      ratio_str(r.macs.baseline, r.macs.with_overhead()).c_str());
        os << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "%-24s %-14s %14" PRIu64 " %14" PRIu64 " %12" PRIu64 " %12" PRIu64
                  " %10s %10s\n",
                  "TOTAL", "", baseline_total, pruned_conv_total, dct_total, idct_total,
                  ratio_str(baseline_total, pruned_conv_total).c_str(),
                  ratio_str(baseline_total, with_overhead_total()).c_str());
    os << buf;
    return os.str();
}

std::string NetworkReport::csv() const {
    std::ostringstream os;
    os << "layer,baseline_macs,pruned_1x1_macs,dct_macs,idct_macs,ratio_1x1,ratio_overall\n";
    for (const auto& r : rows) {
        os << r.name << ',' << r.macs.baseline << ',' << r.macs.main << ',' << r.macs.dct << ','
           << r.macs.idct << ',' << ratio_str(r.macs.baseline, r.macs.main) << ','
           << ratio_str(r.macs.baseline, r.macs.with_overhead()) << "\n";
    }
    os << "TOTAL," << baseline_total << ',' << pruned_conv_total << ',' << dct_total << ','
       << idct_total << ',' << ratio_str(baseline_total, pruned_conv_total) << ','
       << ratio_str(baseline_total, with_overhead_total()) << "\n";
    return os.str();
}

}  // namespace freqprune
