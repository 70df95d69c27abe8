#pragma once

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "freqprune/dataset.hpp"
#include "freqprune/model.hpp"

namespace freqprune {

enum class Schedule { Baseline, FreezeLearnRefine, Alternate };

inline Schedule schedule_from_string(const std::string& s) {
    if (s == "baseline") return Schedule::Baseline;
    if (s == "freeze-refine" || s == "freeze-learn-refine") return Schedule::FreezeLearnRefine;
    if (s == "alternate") return Schedule::Alternate;
    throw validation_error("unknown schedule: " + s);
}

inline const char* to_string(Schedule s) {
    switch (s) {
        case Schedule::Baseline: return "baseline";
        case Schedule::FreezeLearnRefine: return "freeze-refine";
        case Schedule::Alternate: return "alternate";
    }
    return "?";
}

struct TrainConfig {
    Schedule schedule = Schedule::Baseline;
    double lambda = 0.0;
    double lr_weights = 0.05;   // plain SGD defaults, sized for the toy nets
    double lr_fcmask = 0.01;
    double momentum = 0.9;
    int epochs = 10;            // baseline schedule length
    int epochs_pretrain = 4;    // weight warmup before any mask learning
    int epochs_mask = 4;        // fc updates (phase A / alternating half)
    int epochs_refine = 4;      // weight updates under the fixed bands
    int batch_size = 32;
    std::uint64_t seed = 1;
    bool reinit_refine = false;  // re-draw weights before refinement

    static TrainConfig load(const std::string& path);
    std::string to_json() const;
};

struct TrainLogRow {
    int epoch = 0;
    std::string phase;
    double loss = 0, ce = 0, reg = 0;
    double top1 = 0;
    std::vector<double> mean_fc;  // one per wrapped layer
    double mac_reduction = 1.0;   // whole-network, transforms included
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::vector<std::string> freq_layer_names;
    MaskSet final_masks;

    std::string csv() const {
        std::string out = "epoch,phase,loss,ce_loss,reg_loss,top1";
        for (const auto& n : freq_layer_names) out += ",mean_fcmask_" + n;
        out += ",projected_mac_reduction\n";
        char buf[64];
        for (const auto& r : log) {
            out += std::to_string(r.epoch) + "," + r.phase;
            for (double v : {r.loss, r.ce, r.reg, r.top1}) {
                std::snprintf(buf, sizeof(buf), ",%.17g", v);
                out += buf;
            }
            for (double v : r.mean_fc) {
                std::snprintf(buf, sizeof(buf), ",%.17g", v);
                out += buf;
            }
            std::snprintf(buf, sizeof(buf), ",%.17g", r.mac_reduction);
            out += buf;
            out += "\n";
        }
        return out;
    }
};

/// Plain SGD with momentum; one learning rate for model weights, a second
/// one for the mask parameters. fc values are projected back to [0, 1]
/// after each step.
template <typename T>
class Sgd {
  public:
    Sgd(double lr_weights, double lr_fcmask, double momentum)
        : lr_w_(lr_weights), lr_fc_(lr_fcmask), mom_(momentum) {}

    /// Drops accumulated momentum; called at schedule phase boundaries so
    /// stale velocity from an earlier phase never kicks a resumed group.
    void reset_state() { velocity_.clear(); }

    void step(std::vector<ParamView<T>>& params, bool update_weights, bool update_fcmask) {
        if (velocity_.empty()) {
            for (auto& p : params) velocity_.emplace_back(p.value->size(), T(0));
        }
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = params[pi];
            if (p.frozen) continue;
            const bool is_fc = p.kind == ParamKind::FcMask;
            if (is_fc && !update_fcmask) continue;
            if (!is_fc && !update_weights) continue;
            const T lr = static_cast<T>(is_fc ? lr_fc_ : lr_w_);
            auto& vel = velocity_[pi];
            for (std::size_t i = 0; i < p.value->size(); ++i) {
                vel[i] = static_cast<T>(mom_) * vel[i] - lr * (*p.grad)[i];
                (*p.value)[i] += vel[i];
                if (is_fc) {
                    if ((*p.value)[i] < T(0)) (*p.value)[i] = T(0);
                    if ((*p.value)[i] > T(1)) (*p.value)[i] = T(1);
                }
            }
        }
    }

  private:
    double lr_w_, lr_fc_, mom_;
    std::vector<std::vector<T>> velocity_;
};

namespace detail {

template <typename T>
Tensor<T> batch_slice(const Tensor<T>& all, const std::vector<int>& order, int start, int count) {
    Tensor<T> out(count, all.c, all.h, all.w);
    const std::size_t stride = static_cast<std::size_t>(all.c) * all.h * all.w;
    for (int i = 0; i < count; ++i) {
        const int src = order[start + i];
        std::copy_n(all.data.begin() + src * stride, stride, out.data.begin() + i * stride);
    }
    return out;
}

}  // namespace detail

template <typename T>
double evaluate(Model<T>& model, const Dataset<T>& ds, int batch_size = 64) {
    int correct = 0;
    std::vector<int> order(ds.size());
    for (int i = 0; i < ds.size(); ++i) order[i] = i;
    for (int start = 0; start < ds.size(); start += batch_size) {
        const int count = std::min(batch_size, ds.size() - start);
        auto batch = detail::batch_slice(ds.images, order, start, count);
        auto logits = model.forward(batch, /*training=*/false);
        for (int i = 0; i < count; ++i) {
            int best = 0;
            for (int c = 1; c < logits.c; ++c)
                if (logits.at(i, c, 0, 0) > logits.at(i, best, 0, 0)) best = c;
            if (best == ds.labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / ds.size();
}

/// Mean |DCT coefficient| per (channel, coefficient) at every wrapped
/// layer's input. layer_filter empty = all wrapped layers.
template <typename T>
ProfileSet profile_activations(Model<T>& model, const Dataset<T>& ds,
                               const std::vector<std::string>& layer_filter = {},
                               int batch_size = 64) {
    if (ds.size() == 0) throw validation_error("profiling needs a nonempty dataset");
    auto freq = model.freq_layers();
    ProfileSet ps;
    std::vector<LayerProfile*> sinks;
    for (auto* f : freq) {
        const bool wanted =
            layer_filter.empty() ||
            std::find(layer_filter.begin(), layer_filter.end(), f->name()) != layer_filter.end();
        if (!wanted) continue;
        int h = 0, w = 0;
        for (const auto& al : model.arch.layers)
            if (al.name == f->name()) {
                h = al.in_h;
                w = al.in_w;
            }
        ps.layers.emplace_back(f->name(), f->c_in(), f->macroblock(), h, w, f->c_out());
    }
    std::size_t si = 0;
    for (auto* f : freq) {
        const bool wanted =
            layer_filter.empty() ||
            std::find(layer_filter.begin(), layer_filter.end(), f->name()) != layer_filter.end();
        if (wanted) f->set_profile_sink(&ps.layers[si++]);
    }
    std::vector<int> order(ds.size());
    for (int i = 0; i < ds.size(); ++i) order[i] = i;
    for (int start = 0; start < ds.size(); start += batch_size) {
        const int count = std::min(batch_size, ds.size() - start);
        auto batch = detail::batch_slice(ds.images, order, start, count);
        model.forward(batch, /*training=*/false);
    }
    for (auto* f : freq) f->set_profile_sink(nullptr);
    return ps;
}

namespace detail {

template <typename T>
struct EpochStats {
    double loss = 0, ce = 0, reg = 0;
    int batches = 0;
};

// One pass over the training set. update_weights / update_fcmask gate what
// the optimizer touches; the loss always carries the regularizer term.
template <typename T>
EpochStats<T> run_epoch(Model<T>& model, const Dataset<T>& ds, Sgd<T>& opt, double lambda,
                        int batch_size, std::mt19937_64& shuffle_rng, bool update_weights,
                        bool update_fcmask) {
    std::vector<int> order(ds.size());
    for (int i = 0; i < ds.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    auto params = model.params();
    auto freq = model.freq_layers();
    EpochStats<T> stats;
    for (int start = 0; start < ds.size(); start += batch_size) {
        const int count = std::min(batch_size, ds.size() - start);
        auto batch = batch_slice(ds.images, order, start, count);
        std::vector<int> labels(count);
        for (int i = 0; i < count; ++i) labels[i] = ds.labels[order[start + i]];

        model.zero_grad();
        auto logits = model.forward(batch, /*training=*/true);
        Tensor<T> dlogits;
        const double ce = softmax_cross_entropy(logits, labels, &dlogits);
        model.backward(dlogits);

        // regularizer: loss term and its gradient on every fc vector
        double reg = 0;
        for (auto* f : freq) {
            const auto& fc = f->fc_values();
            double s = 0;
            for (T v : fc) s += std::abs(static_cast<double>(v));
            reg += s / fc.size();
        }
        reg *= lambda;
        if (lambda > 0) {
            for (auto& p : params)
                if (p.kind == ParamKind::FcMask)
                    for (auto& g : *p.grad) g += static_cast<T>(lambda / p.grad->size());
        }

        // params hold stable pointers; refresh frozen flags each step
        params = model.params();
        opt.step(params, update_weights, update_fcmask);

        stats.ce += ce;
        stats.reg += reg;
        stats.loss += ce + reg;
        stats.batches += 1;
    }
    return stats;
}

template <typename T>
void append_row(TrainResult& result, Model<T>& model, const EpochStats<T>& stats, int epoch,
                const char* phase, const Dataset<T>* eval_ds, int batch_size) {
    TrainLogRow row;
    row.epoch = epoch;
    row.phase = phase;
    row.loss = stats.loss / std::max(1, stats.batches);
    row.ce = stats.ce / std::max(1, stats.batches);
    row.reg = stats.reg / std::max(1, stats.batches);
    if (eval_ds) row.top1 = evaluate(model, *eval_ds, batch_size);
    for (auto* f : model.freq_layers()) {
        double s = 0;
        for (T v : f->fc_values()) s += static_cast<double>(v);
        row.mean_fc.push_back(s / f->fc_values().size());
    }
    MaskSet snapshot = model.band_mask_snapshot();
    row.mac_reduction = network_macs(model.arch, &snapshot).reduction();
    result.log.push_back(std::move(row));
}

}  // namespace detail

/// Runs one of the three schedules:
///   baseline          - weight updates only, masks pinned at full retention
///   freeze-refine     - pretrain weights; learn fc with weights frozen;
///                       round-and-fix; refine weights under the hard bands
///   alternate         - pretrain; alternate fc-epochs and weight-epochs;
///                       round-and-fix; refine
/// BatchNorm runs frozen through every mask-learning phase and trains again
/// during refinement.
template <typename T>
TrainResult train(Model<T>& model, const Dataset<T>& train_ds,
                  const std::type_identity_t<Dataset<T>>* eval_ds, const TrainConfig& cfg) {
    if (cfg.batch_size < 1) throw validation_error("batch_size must be >= 1");
    TrainResult result;
    for (auto* f : model.freq_layers()) result.freq_layer_names.push_back(f->name());

    Sgd<T> opt(cfg.lr_weights, cfg.lr_fcmask, cfg.momentum);
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5f4dcc3b5aa765d6ULL);
    int epoch = 0;

    auto run = [&](int epochs, const char* phase, bool upd_w, bool upd_fc) {
        for (int e = 0; e < epochs; ++e) {
            auto stats = detail::run_epoch(model, train_ds, opt, cfg.lambda, cfg.batch_size,
                                           shuffle_rng, upd_w, upd_fc);
            detail::append_row(result, model, stats, epoch++, phase, eval_ds, cfg.batch_size);
        }
    };

    switch (cfg.schedule) {
        case Schedule::Baseline: {
            model.set_bn_frozen(false);
            run(cfg.epochs, "baseline", true, false);
            result.final_masks = model.fix_bands();  // fc stayed at 1: full bands
            break;
        }
        case Schedule::FreezeLearnRefine: {
            model.set_bn_frozen(false);
            run(cfg.epochs_pretrain, "pretrain", true, false);
            opt.reset_state();
            model.set_bn_frozen(true);
            run(cfg.epochs_mask, "mask", false, true);
            result.final_masks = model.fix_bands();
            if (cfg.reinit_refine) model.reinit_weights(cfg.seed ^ 0xa5a5a5a5ULL);
            opt.reset_state();
            model.set_bn_frozen(false);
            run(cfg.epochs_refine, "refine", true, false);
            break;
        }
        case Schedule::Alternate: {
            model.set_bn_frozen(false);
            run(cfg.epochs_pretrain, "pretrain", true, false);
            opt.reset_state();
            for (int pair = 0; pair < cfg.epochs_mask; ++pair) {
                model.set_bn_frozen(true);   // mask epochs: stats pinned
                run(1, "mask", false, true);
                model.set_bn_frozen(false);  // weight epochs refine, BN included
                run(1, "weights", true, false);
            }
            result.final_masks = model.fix_bands();
            opt.reset_state();
            model.set_bn_frozen(false);
            run(cfg.epochs_refine, "refine", true, false);
            break;
        }
    }
    return result;
}

}  // namespace freqprune
