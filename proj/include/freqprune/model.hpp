#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "freqprune/costmodel.hpp"
#include "freqprune/fbt1.hpp"
#include "freqprune/layers.hpp"

namespace freqprune {

/// A sequential network built from an ArchConfig. The config is kept around
/// for MAC projections and checkpointing.
template <typename T>
class Model {
  public:
    ArchConfig arch;
    std::vector<std::unique_ptr<Layer<T>>> layers;

    static Model build(const ArchConfig& cfg, std::uint64_t seed) {
        Model m;
        m.arch = cfg;
        std::mt19937_64 rng(seed);
        for (const auto& l : cfg.layers) {
            if (l.branch)
                throw validation_error(l.name + ": branch layers are cost-model only");
            switch (l.type) {
                case LayerType::Conv2d: {
                    auto layer = std::make_unique<Conv2dLayer<T>>(l.name, l.in_c, l.out_c,
                                                                  l.kernel, l.stride, l.pad,
                                                                  l.groups);
                    init_normal(layer->weight(), rng,
                                std::sqrt(2.0 / ((l.in_c / l.groups) * l.kernel * l.kernel)));
                    m.layers.push_back(std::move(layer));
                    break;
                }
                case LayerType::Pointwise: {
                    auto layer =
                        std::make_unique<PointwiseSpatialLayer<T>>(l.name, l.in_c, l.out_c);
                    init_normal(layer->weights().weights, rng, std::sqrt(2.0 / l.in_c));
                    m.layers.push_back(std::move(layer));
                    break;
                }
                case LayerType::FreqPointwise: {
                    auto layer =
                        std::make_unique<FreqPointwiseLayer<T>>(l.name, l.in_c, l.out_c, l.k);
                    init_normal(layer->weights().weights, rng, std::sqrt(2.0 / l.in_c));
                    m.layers.push_back(std::move(layer));
                    break;
                }
                case LayerType::Dense: {
                    const int feat = l.in_c * l.in_h * l.in_w;
                    auto layer = std::make_unique<DenseLayer<T>>(l.name, feat, l.out_c);
                    init_normal(layer->weight(), rng, std::sqrt(1.0 / feat));
                    m.layers.push_back(std::move(layer));
                    break;
                }
                case LayerType::ReLU:
                    m.layers.push_back(std::make_unique<ReluLayer<T>>(l.name, T(0)));
                    break;
                case LayerType::ReLU6:
                    m.layers.push_back(std::make_unique<ReluLayer<T>>(l.name, T(6)));
                    break;
                case LayerType::BatchNorm:
                    m.layers.push_back(std::make_unique<BatchNormLayer<T>>(l.name, l.in_c));
                    break;
                case LayerType::GlobalAvgPool:
                    m.layers.push_back(std::make_unique<GlobalAvgPoolLayer<T>>(l.name));
                    break;
            }
        }
        return m;
    }

    /// Re-draws conv/dense weights (not masks, not BN) for the
    /// train-from-scratch refinement variant.
    void reinit_weights(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = arch.layers[i];
            if (auto* c = dynamic_cast<Conv2dLayer<T>*>(layers[i].get())) {
                init_normal(c->weight(), rng,
                            std::sqrt(2.0 / ((l.in_c / l.groups) * l.kernel * l.kernel)));
                std::fill(c->bias().begin(), c->bias().end(), T(0));
            } else if (auto* p = dynamic_cast<PointwiseSpatialLayer<T>*>(layers[i].get())) {
                init_normal(p->weights().weights, rng, std::sqrt(2.0 / l.in_c));
                std::fill(p->weights().bias->begin(), p->weights().bias->end(), T(0));
            } else if (auto* f = dynamic_cast<FreqPointwiseLayer<T>*>(layers[i].get())) {
                init_normal(f->weights().weights, rng, std::sqrt(2.0 / l.in_c));
                std::fill(f->bias().begin(), f->bias().end(), T(0));
            } else if (auto* d = dynamic_cast<DenseLayer<T>*>(layers[i].get())) {
                init_normal(d->weight(), rng, std::sqrt(1.0 / (l.in_c * l.in_h * l.in_w)));
                std::fill(d->bias().begin(), d->bias().end(), T(0));
            }
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        Tensor<T> cur = x;
        for (auto& l : layers) cur = l->forward(cur, training);
        return cur;
    }

    Tensor<T> backward(const Tensor<T>& dlogits) {
        Tensor<T> cur = dlogits;
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) cur = (*it)->backward(cur);
        return cur;
    }

    std::vector<ParamView<T>> params() {
        std::vector<ParamView<T>> out;
        for (auto& l : layers) l->collect_params(out);
        return out;
    }

    void zero_grad() {
        for (auto& l : layers) l->zero_grad();
    }

    std::vector<FreqPointwiseLayer<T>*> freq_layers() {
        std::vector<FreqPointwiseLayer<T>*> out;
        for (auto& l : layers)
            if (auto* f = dynamic_cast<FreqPointwiseLayer<T>*>(l.get())) out.push_back(f);
        return out;
    }

    std::vector<BatchNormLayer<T>*> bn_layers() {
        std::vector<BatchNormLayer<T>*> out;
        for (auto& l : layers)
            if (auto* b = dynamic_cast<BatchNormLayer<T>*>(l.get())) out.push_back(b);
        return out;
    }

    void set_bn_frozen(bool frozen) {
        for (auto* b : bn_layers()) b->frozen = frozen;
    }

    /// Snapshot of round_and_fix over every wrapped layer's current fc.
    MaskSet band_mask_snapshot() {
        MaskSet ms;
        for (auto* f : freq_layers()) {
            const int kk = f->macroblock() * f->macroblock();
            PruneMask m = round_and_fix(f->fc_values(), kk, f->macroblock());
            m.layer = f->name();
            ms.masks.push_back(std::move(m));
        }
        return ms;
    }

    /// Applies round_and_fix in place: every wrapped layer switches to its
    /// rounded hard band.
    MaskSet fix_bands() {
        MaskSet ms = band_mask_snapshot();
        auto fl = freq_layers();
        for (std::size_t i = 0; i < fl.size(); ++i) fl[i]->set_fixed_band(ms.masks[i].band);
        return ms;
    }

    // ---- checkpointing: JSON manifest + FBT1 parameter blobs ----

    void save(const std::string& dir);
    static Model load(const std::string& dir);

  private:
    static void init_normal(std::vector<T>& v, std::mt19937_64& rng, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& x : v) x = static_cast<T>(dist(rng));
    }
};

namespace detail {

template <typename T>
void write_blob(const std::string& dir, const std::string& fname, const std::vector<T>& v) {
    Tensor<T> t(static_cast<int>(v.size()), 1, 1, 1);
    t.data = v;
    fbt1::write((std::filesystem::path(dir) / fname).string(), t);
}

template <typename T>
std::vector<T> read_blob(const std::string& dir, const std::string& fname, std::size_t expect) {
    auto t = fbt1::read<T>((std::filesystem::path(dir) / fname).string());
    if (t.data.size() != expect)
        throw io_error("checkpoint blob " + fname + " has wrong length");
    return t.data;
}

}  // namespace detail

template <typename T>
void Model<T>::save(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["version"] = 1;
    j["dtype"] = std::is_same_v<T, float> ? "f32" : "f64";
    j["arch"] = nlohmann::json::parse(arch.to_json());
    j["layers"] = nlohmann::json::array();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        nlohmann::json lj;
        lj["index"] = i;
        lj["name"] = layers[i]->name();
        lj["kind"] = layers[i]->kind();
        const std::string stem = "layer" + std::to_string(i);
        if (auto* c = dynamic_cast<Conv2dLayer<T>*>(layers[i].get())) {
            detail::write_blob(dir, stem + ".weight.fbt", c->weight());
            detail::write_blob(dir, stem + ".bias.fbt", c->bias());
        } else if (auto* p = dynamic_cast<PointwiseSpatialLayer<T>*>(layers[i].get())) {
            detail::write_blob(dir, stem + ".weight.fbt", p->weights().weights);
            detail::write_blob(dir, stem + ".bias.fbt", *p->weights().bias);
        } else if (auto* f = dynamic_cast<FreqPointwiseLayer<T>*>(layers[i].get())) {
            detail::write_blob(dir, stem + ".weight.fbt", f->weights().weights);
            detail::write_blob(dir, stem + ".bias.fbt", f->bias());
            lj["fc"] = f->fc_values();
            lj["num_coefs"] = f->macroblock() * f->macroblock();
            lj["mode"] =
                f->mode() == FreqPointwiseLayer<T>::MaskMode::Soft ? "soft" : "fixed-band";
            lj["fixed_band"] = f->fixed_band();
        } else if (auto* b = dynamic_cast<BatchNormLayer<T>*>(layers[i].get())) {
            detail::write_blob(dir, stem + ".gamma.fbt", b->gamma());
            detail::write_blob(dir, stem + ".beta.fbt", b->beta());
            detail::write_blob(dir, stem + ".running_mean.fbt", b->running_mean());
            detail::write_blob(dir, stem + ".running_var.fbt", b->running_var());
        } else if (auto* d = dynamic_cast<DenseLayer<T>*>(layers[i].get())) {
            detail::write_blob(dir, stem + ".weight.fbt", d->weight());
            detail::write_blob(dir, stem + ".bias.fbt", d->bias());
        }
        j["layers"].push_back(std::move(lj));
    }
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw io_error("cannot write checkpoint manifest under " + dir);
    os << j.dump(2) << "\n";
}

template <typename T>
Model<T> Model<T>::load(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw io_error("cannot open checkpoint manifest under " + dir);
    std::stringstream ss;
    ss << is.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw io_error("malformed checkpoint manifest: " + std::string(e.what()));
    }
    const std::string want = std::is_same_v<T, float> ? "f32" : "f64";
    if (j.at("dtype").get<std::string>() != want)
        throw io_error("checkpoint dtype is " + j.at("dtype").get<std::string>() +
                       ", expected " + want);
    ArchConfig cfg = ArchConfig::from_json(j.at("arch").dump());
    Model m = Model::build(cfg, /*seed=*/0);
    for (const auto& lj : j.at("layers")) {
        const std::size_t i = lj.at("index").get<std::size_t>();
        if (i >= m.layers.size()) throw io_error("checkpoint layer index out of range");
        const std::string stem = "layer" + std::to_string(i);
        if (auto* c = dynamic_cast<Conv2dLayer<T>*>(m.layers[i].get())) {
            c->weight() = detail::read_blob<T>(dir, stem + ".weight.fbt", c->weight().size());
            c->bias() = detail::read_blob<T>(dir, stem + ".bias.fbt", c->bias().size());
        } else if (auto* p = dynamic_cast<PointwiseSpatialLayer<T>*>(m.layers[i].get())) {
            p->weights().weights =
                detail::read_blob<T>(dir, stem + ".weight.fbt", p->weights().weights.size());
            *p->weights().bias =
                detail::read_blob<T>(dir, stem + ".bias.fbt", p->weights().bias->size());
        } else if (auto* f = dynamic_cast<FreqPointwiseLayer<T>*>(m.layers[i].get())) {
            f->weights().weights =
                detail::read_blob<T>(dir, stem + ".weight.fbt", f->weights().weights.size());
            f->bias() = detail::read_blob<T>(dir, stem + ".bias.fbt", f->bias().size());
            f->fc_values() = lj.at("fc").get<std::vector<T>>();
            if (lj.value("mode", "soft") == "fixed-band")
                f->set_fixed_band(lj.at("fixed_band").get<std::vector<int>>());
        } else if (auto* b = dynamic_cast<BatchNormLayer<T>*>(m.layers[i].get())) {
            b->gamma() = detail::read_blob<T>(dir, stem + ".gamma.fbt", b->gamma().size());
            b->beta() = detail::read_blob<T>(dir, stem + ".beta.fbt", b->beta().size());
            b->running_mean() =
                detail::read_blob<T>(dir, stem + ".running_mean.fbt", b->running_mean().size());
            b->running_var() =
                detail::read_blob<T>(dir, stem + ".running_var.fbt", b->running_var().size());
        } else if (auto* d = dynamic_cast<DenseLayer<T>*>(m.layers[i].get())) {
            d->weight() = detail::read_blob<T>(dir, stem + ".weight.fbt", d->weight().size());
            d->bias() = detail::read_blob<T>(dir, stem + ".bias.fbt", d->bias().size());
        }
    }
    return m;
}

}  // namespace freqprune
