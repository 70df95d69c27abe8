#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "freqprune/dct.hpp"
#include "freqprune/errors.hpp"
#include "freqprune/fcmask.hpp"
#include "freqprune/masks.hpp"
#include "freqprune/pointwise.hpp"
#include "freqprune/tensor.hpp"

namespace freqprune {

enum class ParamKind { Weight, Bias, BnGamma, BnBeta, FcMask };

template <typename T>
struct ParamView {
    std::string name;
    ParamKind kind;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
    bool frozen = false;
};

/// Base of the fixed layer vocabulary. Layers cache what their backward
/// pass needs during forward; a trainer instance owns the model, so the
/// cache is single-writer by construction.
template <typename T>
class Layer {
  public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    virtual Tensor<T> forward(const Tensor<T>& x, bool training) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect_params(std::vector<ParamView<T>>& out) { (void)out; }
    virtual void zero_grad() {}
    virtual const char* kind() const = 0;

    const std::string& name() const { return name_; }

  protected:
    std::string name_;
};

// ---------------------------------------------------------------------------

template <typename T>
class Conv2dLayer final : public Layer<T> {
  public:
    Conv2dLayer(std::string name, int c_in, int c_out, int kernel, int stride, int pad,
                int groups)
        : Layer<T>(std::move(name)), c_in_(c_in), c_out_(c_out), kernel_(kernel),
          stride_(stride), pad_(pad), groups_(groups) {
        if (c_in % groups || c_out % groups)
            throw validation_error(this->name_ + ": groups must divide channels");
        weight_.assign(static_cast<std::size_t>(c_out) * (c_in / groups) * kernel * kernel, T(0));
        bias_.assign(c_out, T(0));
        wgrad_.assign(weight_.size(), T(0));
        bgrad_.assign(bias_.size(), T(0));
    }

    const char* kind() const override { return "conv2d"; }

    std::vector<T>& weight() { return weight_; }
    std::vector<T>& bias() { return bias_; }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        if (x.c != c_in_) throw validation_error(this->name_ + ": channel mismatch");
        x_ = x;
        const int ho = (x.h + 2 * pad_ - kernel_) / stride_ + 1;
        const int wo = (x.w + 2 * pad_ - kernel_) / stride_ + 1;
        if (ho < 1 || wo < 1) throw validation_error(this->name_ + ": output collapses");
        Tensor<T> y(x.n, c_out_, ho, wo);
        const int cpg_in = c_in_ / groups_, cpg_out = c_out_ / groups_;
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < x.n; ++n) {
            for (int co = 0; co < c_out_; ++co) {
                const int g = co / cpg_out;
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        T acc = bias_[co];
                        for (int ci = 0; ci < cpg_in; ++ci)
                            for (int u = 0; u < kernel_; ++u) {
                                const int iy = oy * stride_ + u - pad_;
                                if (iy < 0 || iy >= x.h) continue;
                                for (int v = 0; v < kernel_; ++v) {
                                    const int ix = ox * stride_ + v - pad_;
                                    if (ix < 0 || ix >= x.w) continue;
                                    acc += wat(co, ci, u, v) * x.at(n, g * cpg_in + ci, iy, ix);
                                }
                            }
                        y.at(n, co, oy, ox) = acc;
                    }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const Tensor<T>& x = x_;
        const int ho = dy.h, wo = dy.w;
        const int cpg_in = c_in_ / groups_, cpg_out = c_out_ / groups_;

#pragma omp parallel for schedule(static)
        for (int co = 0; co < c_out_; ++co) {
            const int g = co / cpg_out;
            T bacc = T(0);
            for (int n = 0; n < x.n; ++n)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) bacc += dy.at(n, co, oy, ox);
            bgrad_[co] += bacc;
            for (int ci = 0; ci < cpg_in; ++ci)
                for (int u = 0; u < kernel_; ++u)
                    for (int v = 0; v < kernel_; ++v) {
                        T acc = T(0);
                        for (int n = 0; n < x.n; ++n)
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride_ + u - pad_;
                                if (iy < 0 || iy >= x.h) continue;
                                for (int ox = 0; ox < wo; ++ox) {
                                    const int ix = ox * stride_ + v - pad_;
                                    if (ix < 0 || ix >= x.w) continue;
                                    acc += dy.at(n, co, oy, ox) * x.at(n, g * cpg_in + ci, iy, ix);
                                }
                            }
                        wgrad(co, ci, u, v) += acc;
                    }
        }

        Tensor<T> dx(x.n, c_in_, x.h, x.w);
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < x.n; ++n) {
            for (int ci = 0; ci < c_in_; ++ci) {
                const int g = ci / cpg_in;
                for (int co = g * cpg_out; co < (g + 1) * cpg_out; ++co)
                    for (int u = 0; u < kernel_; ++u)
                        for (int v = 0; v < kernel_; ++v) {
                            const T wv = wat(co, ci - g * cpg_in, u, v);
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride_ + u - pad_;
                                if (iy < 0 || iy >= x.h) continue;
                                for (int ox = 0; ox < wo; ++ox) {
                                    const int ix = ox * stride_ + v - pad_;
                                    if (ix < 0 || ix >= x.w) continue;
                                    dx.at(n, ci, iy, ix) += wv * dy.at(n, co, oy, ox);
                                }
                            }
                        }
            }
        }
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) override {
        out.push_back({this->name_ + ".weight", ParamKind::Weight, &weight_, &wgrad_, false});
        out.push_back({this->name_ + ".bias", ParamKind::Bias, &bias_, &bgrad_, false});
    }

    void zero_grad() override {
        std::fill(wgrad_.begin(), wgrad_.end(), T(0));
        std::fill(bgrad_.begin(), bgrad_.end(), T(0));
    }

  private:
    T& wgrad(int co, int ci, int u, int v) {
        return wgrad_[((static_cast<std::size_t>(co) * (c_in_ / groups_) + ci) * kernel_ + u) *
                          kernel_ +
                      v];
    }
    T wat(int co, int ci, int u, int v) const {
        return weight_[((static_cast<std::size_t>(co) * (c_in_ / groups_) + ci) * kernel_ + u) *
                           kernel_ +
                       v];
    }

    int c_in_, c_out_, kernel_, stride_, pad_, groups_;
    std::vector<T> weight_, bias_, wgrad_, bgrad_;
    Tensor<T> x_;
};

// ---------------------------------------------------------------------------

template <typename T>
class PointwiseSpatialLayer final : public Layer<T> {
  public:
    PointwiseSpatialLayer(std::string name, int c_in, int c_out)
        : Layer<T>(std::move(name)), pw_(c_in, c_out) {
        pw_.bias.emplace(c_out, T(0));
        wgrad_.assign(pw_.weights.size(), T(0));
        bgrad_.assign(c_out, T(0));
    }

    const char* kind() const override { return "pointwise"; }
    PointwiseWeights<T>& weights() { return pw_; }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        return conv1x1_spatial(x, pw_);
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const std::size_t hw = static_cast<std::size_t>(x_.h) * x_.w;
#pragma omp parallel for schedule(static)
        for (int co = 0; co < pw_.c_out; ++co) {
            T bacc = T(0);
            for (int n = 0; n < x_.n; ++n) {
                const T* dyp = dy.plane(n, co);
                for (std::size_t p = 0; p < hw; ++p) bacc += dyp[p];
            }
            bgrad_[co] += bacc;
            for (int ci = 0; ci < pw_.c_in; ++ci) {
                T acc = T(0);
                for (int n = 0; n < x_.n; ++n) {
                    const T* dyp = dy.plane(n, co);
                    const T* xp = x_.plane(n, ci);
                    for (std::size_t p = 0; p < hw; ++p) acc += dyp[p] * xp[p];
                }
                wgrad_[static_cast<std::size_t>(co) * pw_.c_in + ci] += acc;
            }
        }
        Tensor<T> dx(x_.n, pw_.c_in, x_.h, x_.w);
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < x_.n; ++n)
            for (int ci = 0; ci < pw_.c_in; ++ci) {
                T* dst = dx.plane(n, ci);
                for (int co = 0; co < pw_.c_out; ++co) {
                    const T wv = pw_.wat(co, ci);
                    const T* dyp = dy.plane(n, co);
                    for (std::size_t p = 0; p < hw; ++p) dst[p] += wv * dyp[p];
                }
            }
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) override {
        out.push_back({this->name_ + ".weight", ParamKind::Weight, &pw_.weights, &wgrad_, false});
        out.push_back({this->name_ + ".bias", ParamKind::Bias, &*pw_.bias, &bgrad_, false});
    }

    void zero_grad() override {
        std::fill(wgrad_.begin(), wgrad_.end(), T(0));
        std::fill(bgrad_.begin(), bgrad_.end(), T(0));
    }

  private:
    PointwiseWeights<T> pw_;
    std::vector<T> wgrad_, bgrad_;
    Tensor<T> x_;
};

// ---------------------------------------------------------------------------

/// The frequency-wrapped pointwise layer. Forward: transform, channel mix,
/// per-coefficient soft masks from the learned per-output-channel level,
/// bias on DC, inverse transform. In fixed-band mode the soft masks are
/// replaced by a hard zigzag prefix per channel.
template <typename T>
class FreqPointwiseLayer final : public Layer<T> {
  public:
    enum class MaskMode { Soft, FixedBand };

    FreqPointwiseLayer(std::string name, int c_in, int c_out, int k)
        : Layer<T>(std::move(name)), k_(k), pw_(c_in, c_out) {
        wgrad_.assign(pw_.weights.size(), T(0));
        bias_.assign(c_out, T(0));
        bgrad_.assign(c_out, T(0));
        fc_.assign(c_out, T(1));  // start from "keep everything"
        fcgrad_.assign(c_out, T(0));
        fixed_band_.assign(c_out, k * k);
    }

    const char* kind() const override { return "freq_pointwise"; }

    int macroblock() const { return k_; }
    int c_in() const { return pw_.c_in; }
    int c_out() const { return pw_.c_out; }
    PointwiseWeights<T>& weights() { return pw_; }
    std::vector<T>& bias() { return bias_; }
    std::vector<T>& fc_values() { return fc_; }
    const std::vector<int>& fixed_band() const { return fixed_band_; }
    MaskMode mode() const { return mode_; }

    void set_soft() { mode_ = MaskMode::Soft; }
    void set_fixed_band(std::vector<int> band) {
        if (static_cast<int>(band.size()) != pw_.c_out)
            throw validation_error(this->name_ + ": band size != c_out");
        fixed_band_ = std::move(band);
        mode_ = MaskMode::FixedBand;
    }
    void set_input_mask(const PruneMask* mask) {
        input_mask_ = mask ? std::optional<PruneMask>(*mask) : std::nullopt;
    }
    void set_profile_sink(LayerProfile* sink) { profile_sink_ = sink; }

    /// Geometry of the last forward, for profile/report plumbing.
    int last_h = 0, last_w = 0;

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        if (x.c != pw_.c_in) throw validation_error(this->name_ + ": channel mismatch");
        MacroblockSpec spec(k_);
        spec.check_divides(x.h, x.w);
        last_h = x.h;
        last_w = x.w;
        f_ = dct_forward(x, spec);
        if (profile_sink_) profile_sink_->accumulate(f_);
        if (input_mask_) f_ = apply_mask(f_, *input_mask_);
        g_ = mix_channels(f_);
        Tensor<T> y = finish(g_);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        MacroblockSpec spec(k_);
        FreqTensor<T> dg = dct_forward(dy, spec);  // adjoint of the inverse transform
        const std::size_t nb = dg.blocks();
        const int kk = k_ * k_;

        // bias sits on DC scaled by k
        for (int co = 0; co < pw_.c_out; ++co) {
            T acc = T(0);
            for (int n = 0; n < dg.n; ++n) {
                const T* p = dg.coef_plane(n, co, 0);
                for (std::size_t i = 0; i < nb; ++i) acc += p[i];
            }
            bgrad_[co] += acc * static_cast<T>(k_);
        }

        // peel the mask off: dmasked -> dconv, plus the fc path in soft mode
        FreqTensor<T> dconv(dg.n, pw_.c_out, k_, dg.bh, dg.bw);
#pragma omp parallel for schedule(static)
        for (int co = 0; co < pw_.c_out; ++co) {
            if (mode_ == MaskMode::Soft) {
                const auto cm = coefmask(fc_[co], kk);
                const auto cmg = coefmask_grad(fc_[co], kk);
                T fc_acc = T(0);
                for (int n = 0; n < dg.n; ++n)
                    for (int q = 0; q < kk; ++q) {
                        const T* dgp = dg.coef_plane(n, co, q);
                        const T* gp = g_.coef_plane(n, co, q);
                        T* dcp = dconv.coef_plane(n, co, q);
                        if (cmg[q] != T(0)) {
                            T dot = T(0);
                            for (std::size_t i = 0; i < nb; ++i) dot += dgp[i] * gp[i];
                            fc_acc += dot * cmg[q];
                        }
                        if (cm[q] != T(0))
                            for (std::size_t i = 0; i < nb; ++i) dcp[i] = dgp[i] * cm[q];
                    }
                fcgrad_[co] += fc_acc;
            } else {
                for (int n = 0; n < dg.n; ++n)
                    for (int q = 0; q < fixed_band_[co]; ++q) {
                        const T* dgp = dg.coef_plane(n, co, q);
                        T* dcp = dconv.coef_plane(n, co, q);
                        for (std::size_t i = 0; i < nb; ++i) dcp[i] = dgp[i];
                    }
            }
        }

        // weight gradient and input gradient of the channel mix
#pragma omp parallel for schedule(static)
        for (int co = 0; co < pw_.c_out; ++co)
            for (int ci = 0; ci < pw_.c_in; ++ci) {
                T acc = T(0);
                for (int n = 0; n < dg.n; ++n)
                    for (int q = 0; q < kk; ++q) {
                        const T* dcp = dconv.coef_plane(n, co, q);
                        const T* fp = f_.coef_plane(n, ci, q);
                        for (std::size_t i = 0; i < nb; ++i) acc += dcp[i] * fp[i];
                    }
                wgrad_[static_cast<std::size_t>(co) * pw_.c_in + ci] += acc;
            }

        FreqTensor<T> df(dg.n, pw_.c_in, k_, dg.bh, dg.bw);
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < dg.n; ++n)
            for (int ci = 0; ci < pw_.c_in; ++ci)
                for (int q = 0; q < kk; ++q) {
                    T* dst = df.coef_plane(n, ci, q);
                    for (int co = 0; co < pw_.c_out; ++co) {
                        const T wv = pw_.wat(co, ci);
                        const T* src = dconv.coef_plane(n, co, q);
                        for (std::size_t i = 0; i < nb; ++i) dst[i] += wv * src[i];
                    }
                }
        if (input_mask_) df = apply_mask(df, *input_mask_);
        return dct_inverse(df);  // adjoint of the forward transform
    }

    void collect_params(std::vector<ParamView<T>>& out) override {
        out.push_back({this->name_ + ".weight", ParamKind::Weight, &pw_.weights, &wgrad_, false});
        out.push_back({this->name_ + ".bias", ParamKind::Bias, &bias_, &bgrad_, false});
        out.push_back({this->name_ + ".fcmask", ParamKind::FcMask, &fc_, &fcgrad_, false});
    }

    void zero_grad() override {
        std::fill(wgrad_.begin(), wgrad_.end(), T(0));
        std::fill(bgrad_.begin(), bgrad_.end(), T(0));
        std::fill(fcgrad_.begin(), fcgrad_.end(), T(0));
    }

  private:
    FreqTensor<T> mix_channels(const FreqTensor<T>& f) {
        FreqTensor<T> g(f.n, pw_.c_out, k_, f.bh, f.bw);
        const std::size_t nb = f.blocks();
        const int kk = k_ * k_;
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < f.n; ++n)
            for (int co = 0; co < pw_.c_out; ++co)
                for (int q = 0; q < kk; ++q) {
                    T* dst = g.coef_plane(n, co, q);
                    for (int ci = 0; ci < pw_.c_in; ++ci) {
                        const T wv = pw_.wat(co, ci);
                        const T* src = f.coef_plane(n, ci, q);
                        for (std::size_t i = 0; i < nb; ++i) dst[i] += wv * src[i];
                    }
                }
        return g;
    }

    Tensor<T> finish(const FreqTensor<T>& g) {
        FreqTensor<T> masked(g.n, pw_.c_out, k_, g.bh, g.bw);
        const std::size_t nb = g.blocks();
        const int kk = k_ * k_;
        std::vector<int> cover(pw_.c_out, kk);
#pragma omp parallel for schedule(static)
        for (int co = 0; co < pw_.c_out; ++co) {
            if (mode_ == MaskMode::Soft) {
                const auto cm = coefmask(fc_[co], kk);
                for (int n = 0; n < g.n; ++n)
                    for (int q = 0; q < kk; ++q) {
                        if (cm[q] == T(0)) continue;
                        const T* src = g.coef_plane(n, co, q);
                        T* dst = masked.coef_plane(n, co, q);
                        for (std::size_t i = 0; i < nb; ++i) dst[i] = src[i] * cm[q];
                    }
            } else {
                for (int n = 0; n < g.n; ++n)
                    for (int q = 0; q < fixed_band_[co]; ++q) {
                        const T* src = g.coef_plane(n, co, q);
                        T* dst = masked.coef_plane(n, co, q);
                        for (std::size_t i = 0; i < nb; ++i) dst[i] = src[i];
                    }
            }
            const T add = bias_[co] * static_cast<T>(k_);
            for (int n = 0; n < g.n; ++n) {
                T* dc = masked.coef_plane(n, co, 0);
                for (std::size_t i = 0; i < nb; ++i) dc[i] += add;
            }
        }
        return dct_inverse(masked, &cover);
    }

    int k_;
    MaskMode mode_ = MaskMode::Soft;
    PointwiseWeights<T> pw_;
    std::vector<T> wgrad_, bias_, bgrad_, fc_, fcgrad_;
    std::vector<int> fixed_band_;
    std::optional<PruneMask> input_mask_;
    LayerProfile* profile_sink_ = nullptr;
    FreqTensor<T> f_, g_;
};

// ---------------------------------------------------------------------------

template <typename T>
class ReluLayer final : public Layer<T> {
  public:
    ReluLayer(std::string name, T cap) : Layer<T>(std::move(name)), cap_(cap) {}

    const char* kind() const override { return cap_ > T(0) ? "relu6" : "relu"; }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        Tensor<T> y = x;
        for (auto& v : y.data) {
            if (v < T(0)) v = T(0);
            if (cap_ > T(0) && v > cap_) v = cap_;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.data.size(); ++i) {
            const T v = x_.data[i];
            if (v <= T(0) || (cap_ > T(0) && v >= cap_)) dx.data[i] = T(0);
        }
        return dx;
    }

  private:
    T cap_;  // 0 = unbounded, 6 = relu6
    Tensor<T> x_;
};

// ---------------------------------------------------------------------------

template <typename T>
class BatchNormLayer final : public Layer<T> {
  public:
    BatchNormLayer(std::string name, int c)
        : Layer<T>(std::move(name)), c_(c) {
        gamma_.assign(c, T(1));
        beta_.assign(c, T(0));
        ggrad_.assign(c, T(0));
        bgrad_.assign(c, T(0));
        run_mean_.assign(c, T(0));
        run_var_.assign(c, T(1));
    }

    const char* kind() const override { return "batchnorm"; }

    bool frozen = false;

    std::vector<T>& gamma() { return gamma_; }
    std::vector<T>& beta() { return beta_; }
    std::vector<T>& running_mean() { return run_mean_; }
    std::vector<T>& running_var() { return run_var_; }

    Tensor<T> forward(const Tensor<T>& x, bool training) override {
        if (x.c != c_) throw validation_error(this->name_ + ": channel mismatch");
        x_ = x;
        batch_mode_ = training && !frozen;
        Tensor<T> y(x.n, x.c, x.h, x.w);
        const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
        const T m = static_cast<T>(x.n * hw);
        mean_.assign(c_, T(0));
        var_.assign(c_, T(0));
#pragma omp parallel for schedule(static)
        for (int c = 0; c < c_; ++c) {
            T mu, v;
            if (batch_mode_) {
                T s = T(0);
                for (int n = 0; n < x.n; ++n) {
                    const T* p = x.plane(n, c);
                    for (std::size_t i = 0; i < hw; ++i) s += p[i];
                }
                mu = s / m;
                T s2 = T(0);
                for (int n = 0; n < x.n; ++n) {
                    const T* p = x.plane(n, c);
                    for (std::size_t i = 0; i < hw; ++i) s2 += (p[i] - mu) * (p[i] - mu);
                }
                v = s2 / m;
                mean_[c] = mu;
                var_[c] = v;
            } else {
                mu = run_mean_[c];
                v = run_var_[c];
            }
            const T scale = gamma_[c] / std::sqrt(v + eps_);
            for (int n = 0; n < x.n; ++n) {
                const T* p = x.plane(n, c);
                T* q = y.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) q[i] = scale * (p[i] - mu) + beta_[c];
            }
        }
        if (batch_mode_) {
            for (int c = 0; c < c_; ++c) {
                run_mean_[c] = (T(1) - momentum_) * run_mean_[c] + momentum_ * mean_[c];
                run_var_[c] = (T(1) - momentum_) * run_var_[c] + momentum_ * var_[c];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const Tensor<T>& x = x_;
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
        const T m = static_cast<T>(x.n * hw);
#pragma omp parallel for schedule(static)
        for (int c = 0; c < c_; ++c) {
            const T mu = batch_mode_ ? mean_[c] : run_mean_[c];
            const T v = batch_mode_ ? var_[c] : run_var_[c];
            const T inv_std = T(1) / std::sqrt(v + eps_);
            T dbeta = T(0), dgamma = T(0);
            for (int n = 0; n < x.n; ++n) {
                const T* dyp = dy.plane(n, c);
                const T* xp = x.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) {
                    dbeta += dyp[i];
                    dgamma += dyp[i] * (xp[i] - mu) * inv_std;
                }
            }
            if (!frozen) {
                ggrad_[c] += dgamma;
                bgrad_[c] += dbeta;
            }
            const T scale = gamma_[c] * inv_std;
            if (batch_mode_) {
                // full batch-statistics backward
                for (int n = 0; n < x.n; ++n) {
                    const T* dyp = dy.plane(n, c);
                    const T* xp = x.plane(n, c);
                    T* dxp = dx.plane(n, c);
                    for (std::size_t i = 0; i < hw; ++i) {
                        const T xhat = (xp[i] - mu) * inv_std;
                        dxp[i] = scale * (dyp[i] - dbeta / m - xhat * dgamma / m);
                    }
                }
            } else {
                for (int n = 0; n < x.n; ++n) {
                    const T* dyp = dy.plane(n, c);
                    T* dxp = dx.plane(n, c);
                    for (std::size_t i = 0; i < hw; ++i) dxp[i] = scale * dyp[i];
                }
            }
        }
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) override {
        out.push_back({this->name_ + ".gamma", ParamKind::BnGamma, &gamma_, &ggrad_, frozen});
        out.push_back({this->name_ + ".beta", ParamKind::BnBeta, &beta_, &bgrad_, frozen});
    }

    void zero_grad() override {
        std::fill(ggrad_.begin(), ggrad_.end(), T(0));
        std::fill(bgrad_.begin(), bgrad_.end(), T(0));
    }

  private:
    int c_;
    T eps_ = static_cast<T>(1e-5);
    T momentum_ = static_cast<T>(0.1);
    std::vector<T> gamma_, beta_, ggrad_, bgrad_, run_mean_, run_var_, mean_, var_;
    Tensor<T> x_;
    bool batch_mode_ = false;
};

// ---------------------------------------------------------------------------

template <typename T>
class GlobalAvgPoolLayer final : public Layer<T> {
  public:
    explicit GlobalAvgPoolLayer(std::string name) : Layer<T>(std::move(name)) {}
    const char* kind() const override { return "global_avg_pool"; }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        h_ = x.h;
        w_ = x.w;
        Tensor<T> y(x.n, x.c, 1, 1);
        const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
        for (int n = 0; n < x.n; ++n)
            for (int c = 0; c < x.c; ++c) {
                T s = T(0);
                const T* p = x.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) s += p[i];
                y.at(n, c, 0, 0) = s / static_cast<T>(hw);
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.n, dy.c, h_, w_);
        const std::size_t hw = static_cast<std::size_t>(h_) * w_;
        for (int n = 0; n < dy.n; ++n)
            for (int c = 0; c < dy.c; ++c) {
                const T g = dy.at(n, c, 0, 0) / static_cast<T>(hw);
                T* p = dx.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) p[i] = g;
            }
        return dx;
    }

  private:
    int h_ = 1, w_ = 1;
};

// ---------------------------------------------------------------------------

template <typename T>
class DenseLayer final : public Layer<T> {
  public:
    DenseLayer(std::string name, int in_features, int out_features)
        : Layer<T>(std::move(name)), in_(in_features), out_(out_features) {
        weight_.assign(static_cast<std::size_t>(out_) * in_, T(0));
        bias_.assign(out_, T(0));
        wgrad_.assign(weight_.size(), T(0));
        bgrad_.assign(out_, T(0));
    }

    const char* kind() const override { return "dense"; }
    std::vector<T>& weight() { return weight_; }
    std::vector<T>& bias() { return bias_; }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        const int feat = x.c * x.h * x.w;
        if (feat != in_) throw validation_error(this->name_ + ": feature count mismatch");
        x_ = x;
        Tensor<T> y(x.n, out_, 1, 1);
        for (int n = 0; n < x.n; ++n) {
            const T* xp = x.data.data() + static_cast<std::size_t>(n) * in_;
            for (int o = 0; o < out_; ++o) {
                T acc = bias_[o];
                const T* wrow = weight_.data() + static_cast<std::size_t>(o) * in_;
                for (int i = 0; i < in_; ++i) acc += wrow[i] * xp[i];
                y.at(n, o, 0, 0) = acc;
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(x_.n, x_.c, x_.h, x_.w);
        for (int o = 0; o < out_; ++o) {
            T bacc = T(0);
            for (int n = 0; n < x_.n; ++n) bacc += dy.at(n, o, 0, 0);
            bgrad_[o] += bacc;
            T* wgrow = wgrad_.data() + static_cast<std::size_t>(o) * in_;
            for (int n = 0; n < x_.n; ++n) {
                const T g = dy.at(n, o, 0, 0);
                const T* xp = x_.data.data() + static_cast<std::size_t>(n) * in_;
                for (int i = 0; i < in_; ++i) wgrow[i] += g * xp[i];
            }
        }
        for (int n = 0; n < x_.n; ++n) {
            T* dxp = dx.data.data() + static_cast<std::size_t>(n) * in_;
            for (int o = 0; o < out_; ++o) {
                const T g = dy.at(n, o, 0, 0);
                const T* wrow = weight_.data() + static_cast<std::size_t>(o) * in_;
                for (int i = 0; i < in_; ++i) dxp[i] += g * wrow[i];
            }
        }
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) override {
        out.push_back({this->name_ + ".weight", ParamKind::Weight, &weight_, &wgrad_, false});
        out.push_back({this->name_ + ".bias", ParamKind::Bias, &bias_, &bgrad_, false});
    }

    void zero_grad() override {
        std::fill(wgrad_.begin(), wgrad_.end(), T(0));
        std::fill(bgrad_.begin(), bgrad_.end(), T(0));
    }

  private:
    int in_, out_;
    std::vector<T> weight_, bias_, wgrad_, bgrad_;
    Tensor<T> x_;
};

/// Numerically stable softmax + mean cross entropy over the batch.
/// Returns the loss; dlogits gets (softmax - onehot) / n.
template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                        Tensor<T>* dlogits) {
    const int n = logits.n, classes = logits.c;
    if (static_cast<int>(labels.size()) != n)
        throw validation_error("cross entropy: labels size != batch");
    if (logits.h != 1 || logits.w != 1)
        throw validation_error("cross entropy expects (n, classes, 1, 1) logits");
    if (dlogits) *dlogits = Tensor<T>(n, classes, 1, 1);
    T loss = T(0);
    for (int i = 0; i < n; ++i) {
        const T* row = logits.data.data() + static_cast<std::size_t>(i) * classes;
        T mx = row[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        T denom = T(0);
        for (int c = 0; c < classes; ++c) denom += std::exp(row[c] - mx);
        const int y = labels[i];
        if (y < 0 || y >= classes) throw validation_error("label out of range");
        loss += -(row[y] - mx - std::log(denom));
        if (dlogits)
            for (int c = 0; c < classes; ++c) {
                const T p = std::exp(row[c] - mx) / denom;
                dlogits->at(i, c, 0, 0) = (p - (c == y ? T(1) : T(0))) / static_cast<T>(n);
            }
    }
    return loss / static_cast<T>(n);
}

}  // namespace freqprune
