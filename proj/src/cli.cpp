#include "freqprune/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "freqprune/bandexec.hpp"
#include "freqprune/costmodel.hpp"
#include "freqprune/dataset.hpp"
#include "freqprune/reference.hpp"
#include "freqprune/trainer.hpp"
#include "freqprune/version.hpp"

namespace freqprune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Verification failures exit with code 3.
struct verify_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    std::uint64_t seed) {
    json j;
    j["command"] = command;
    j["inputs"] = json::object();
    for (const auto& [k, v] : inputs) j["inputs"][k] = v;
    j["seed"] = seed;
    j["output_dir"] = out_dir;
    j["tool_version"] = kVersion;
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timestamp"] = buf;
    std::ofstream os(fs::path(out_dir) / "manifest.json");
    if (!os) throw io_error("cannot write manifest under " + out_dir);
    os << j.dump(2) << "\n";
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw io_error("cannot create output directory " + out + ": " + ec.message());
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write: " + path);
    os << text;
}

DatasetSpec dataset_spec_from_path(const std::string& path, const std::string& split) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        return DatasetSpec::load(path);
    DatasetSpec spec;
    spec.type = "cifar10";
    spec.dir = path;
    spec.split = split;
    return spec;
}

std::string checkpoint_dtype(const std::string& ckpt_dir) {
    const auto manifest = fs::path(ckpt_dir) / "manifest.json";
    json j;
    try {
        j = json::parse(slurp(manifest.string()));
    } catch (const json::exception& e) {
        throw io_error("malformed checkpoint manifest: " + std::string(e.what()));
    }
    return j.at("dtype").get<std::string>();
}

// ---------------------------------------------------------------------------
// verify

struct SuiteResult {
    std::string name;
    bool pass = true;
    std::string detail;
};

template <typename T>
double commutation_max_err(std::uint64_t seed, int cases) {
    std::mt19937_64 rng(seed);
    const int ks[] = {1, 2, 3, 4, 7};
    std::uniform_int_distribution<int> cdist(1, 16), bdist(1, 4);
    std::uniform_real_distribution<double> vdist(-1.0, 1.0);
    double worst = 0;
    for (int t = 0; t < cases; ++t) {
        const int k = ks[t % 5];
        const int c_in = cdist(rng), c_out = cdist(rng);
        int bh = bdist(rng), bw = bdist(rng);
        while (bh * k > 28) --bh;
        while (bw * k > 28) --bw;
        Tensor<T> x(1, c_in, std::max(1, bh) * k, std::max(1, bw) * k);
        for (auto& v : x.data) v = static_cast<T>(vdist(rng));
        PointwiseWeights<T> layer(c_in, c_out);
        for (auto& v : layer.weights) v = static_cast<T>(vdist(rng));
        layer.bias.emplace(c_out);
        for (auto& v : *layer.bias) v = static_cast<T>(vdist(rng));
        auto spatial = conv1x1_spatial(x, layer);
        auto wrapped = freq_wrapped(x, layer, MacroblockSpec(k));
        for (std::size_t i = 0; i < spatial.data.size(); ++i)
            worst = std::max(worst,
                             std::abs(double(spatial.data[i]) - double(wrapped.data[i])));
    }
    return worst;
}

template <typename T>
std::vector<SuiteResult> run_verify_suites(std::uint64_t seed, bool perturb_dct) {
    std::vector<SuiteResult> suites;
    const bool f32 = std::is_same_v<T, float>;
    char buf[160];

    {
        SuiteResult s{"zigzag-order", true, ""};
        try {
            ZigzagOrder z2(2);
            s.pass &= z2.perm == std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
            ZigzagOrder z3(3);
            s.pass &= z3.perm[3] == std::pair<int, int>{2, 0};
            for (int k = 1; k <= 8; ++k) {
                ZigzagOrder z(k);
                std::vector<int> seen(k * k, 0);
                for (auto [u, v] : z.perm) seen[u * k + v]++;
                for (int c : seen) s.pass &= c == 1;
                s.pass &= z.perm.front() == std::pair<int, int>{0, 0};
                s.pass &= z.perm.back() == std::pair<int, int>{k - 1, k - 1};
            }
        } catch (const std::exception& e) {
            s.pass = false;
            s.detail = e.what();
        }
        suites.push_back(s);
    }
    {
        SuiteResult s{"dct-orthonormality", true, ""};
        double worst = 0;
        for (int k = 1; k <= 8; ++k) {
            DctBasis<double> basis(k);
            if (perturb_dct) basis.b[0] += 1e-6;  // negative-control hook
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    double acc = 0;
                    for (int x = 0; x < k; ++x) acc += basis.b[i * k + x] * basis.b[j * k + x];
                    worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
                }
        }
        s.pass = worst < 1e-12;
        std::snprintf(buf, sizeof(buf), "max |B*B^T - I| = %.3g", worst);
        s.detail = buf;
        suites.push_back(s);
    }
    {
        SuiteResult s{"dct-roundtrip", true, ""};
        std::mt19937_64 rng(seed ^ 1);
        std::uniform_real_distribution<double> vdist(-1, 1);
        double worst = 0;
        for (int k : {1, 2, 3, 4, 7, 8}) {
            Tensor<T> x(2, 3, 2 * k, 2 * k);
            for (auto& v : x.data) v = static_cast<T>(vdist(rng));
            auto back = dct_inverse(dct_forward(x, MacroblockSpec(k)));
            for (std::size_t i = 0; i < x.data.size(); ++i)
                worst = std::max(worst, std::abs(double(x.data[i]) - double(back.data[i])));
        }
        s.pass = worst < (f32 ? 1e-5 : 1e-12);
        std::snprintf(buf, sizeof(buf), "max roundtrip err = %.3g", worst);
        s.detail = buf;
        suites.push_back(s);
    }
    {
        SuiteResult s{"commutation", true, ""};
        const double worst = commutation_max_err<T>(seed ^ 2, 60);
        s.pass = worst < (f32 ? 1e-4 : 1e-10);
        std::snprintf(buf, sizeof(buf), "max |wrapped - spatial| = %.3g over 60 cases", worst);
        s.detail = buf;
        suites.push_back(s);
    }
    {
        SuiteResult s{"fcmask-mapping", true, ""};
        try {
            for (double v : coefmask(0.0, 9)) s.pass &= v == 0.0;
            for (double v : coefmask(1.0, 9)) s.pass &= v == 1.0;
            auto m = coefmask(0.9, 4);
            s.pass &= m[0] == 1.0 && m[1] == 1.0 && m[2] == 1.0 && std::abs(m[3] - 0.6) < 1e-12;
            for (int i = 0; i <= 10000; ++i) {
                auto cm = coefmask(i / 10000.0, 9);
                int frac = 0;
                for (int n = 0; n < 9; ++n) {
                    if (cm[n] > 0 && cm[n] < 1) ++frac;
                    if (n > 0) s.pass &= cm[n] <= cm[n - 1];
                }
                s.pass &= frac <= 1;
            }
        } catch (const std::exception& e) {
            s.pass = false;
            s.detail = e.what();
        }
        suites.push_back(s);
    }
    {
        SuiteResult s{"gradients", true, ""};
        // f64 regardless of the requested dtype: the analytic/numeric
        // comparison needs the headroom
        auto arch = ArchConfig::from_json(R"({
          "name": "v", "input": {"c": 2, "h": 6, "w": 6}, "classes": 3,
          "layers": [
            {"name": "fp", "type": "freq_pointwise", "out": 4, "k": 3},
            {"type": "batchnorm"},
            {"type": "relu6"},
            {"name": "dw", "type": "conv2d", "out": 4, "kernel": 3, "stride": 1, "pad": 1, "groups": 4},
            {"type": "global_avg_pool"},
            {"name": "d", "type": "dense", "out": 3}
          ]
        })");
        auto model = Model<double>::build(arch, seed ^ 3);
        model.freq_layers()[0]->fc_values() = {0.93, 0.58, 0.31, 0.12};
        std::mt19937_64 rng(seed ^ 4);
        std::uniform_real_distribution<double> vdist(-1, 1);
        Tensor<double> x(2, 2, 6, 6);
        for (auto& v : x.data) v = vdist(rng);
        std::vector<int> labels{0, 1};
        const double lambda = 0.05;

        model.zero_grad();
        auto logits = model.forward(x, true);
        Tensor<double> dlogits;
        softmax_cross_entropy(logits, labels, &dlogits);
        model.backward(dlogits);
        auto params = model.params();
        for (auto& p : params)
            if (p.kind == ParamKind::FcMask)
                for (auto& g : *p.grad) g += lambda / p.grad->size();

        auto loss_at = [&]() {
            auto lg = model.forward(x, true);
            double l = softmax_cross_entropy<double>(lg, labels, nullptr);
            double reg = 0;
            for (auto* fl : model.freq_layers()) {
                double acc = 0;
                for (double v : fl->fc_values()) acc += std::abs(v);
                reg += acc / fl->fc_values().size();
            }
            return l + lambda * reg;
        };
        const double h = 1e-5;
        double worst = 0;
        for (auto& p : params) {
            if (p.frozen) continue;
            for (std::size_t i = 0; i < p.value->size(); ++i) {
                const double keep = (*p.value)[i];
                (*p.value)[i] = keep + h;
                const double up = loss_at();
                (*p.value)[i] = keep - h;
                const double dn = loss_at();
                (*p.value)[i] = keep;
                const double fd = (up - dn) / (2 * h);
                const double an = (*p.grad)[i];
                worst = std::max(worst,
                                 std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}));
            }
        }
        s.pass = worst < 1e-4;
        std::snprintf(buf, sizeof(buf), "max relative gradient error = %.3g", worst);
        s.detail = buf;
        suites.push_back(s);
    }
    {
        SuiteResult s{"band-exec-equivalence", true, ""};
        std::mt19937_64 rng(seed ^ 5);
        std::uniform_real_distribution<double> vdist(-1, 1);
        std::uniform_int_distribution<int> band9(0, 9);
        double worst = 0;
        for (int t = 0; t < 40; ++t) {
            const int c_in = 8, c_out = 6, k = 3;
            std::vector<int> bin(c_in), bout(c_out);
            for (auto& v : bin) v = band9(rng);
            for (auto& v : bout) v = band9(rng);
            auto in_mask = PruneMask::band_mask(bin, k);
            auto out_mask = PruneMask::band_mask(bout, k);
            Tensor<T> x(1, c_in, 6, 6);
            for (auto& v : x.data) v = static_cast<T>(vdist(rng));
            PointwiseWeights<T> layer(c_in, c_out);
            for (auto& v : layer.weights) v = static_cast<T>(vdist(rng));
            auto f = apply_mask(dct_forward(x, MacroblockSpec(k)), in_mask);
            auto plan = plan_bands(&in_mask, &out_mask, k, c_in, c_out, 6, 6, 1);
            auto banded = execute_banded(f, layer, plan);
            auto reference = apply_mask(conv1x1_freq(f, layer), out_mask);
            for (std::size_t i = 0; i < banded.data.size(); ++i)
                worst = std::max(worst,
                                 std::abs(double(banded.data[i]) - double(reference.data[i])));
            ArchLayer al;
            al.type = LayerType::FreqPointwise;
            al.in_c = c_in;
            al.out_c = c_out;
            al.in_h = al.in_w = 6;
            al.k = k;
            in_mask.applies_to = MaskSide::Input;
            out_mask.applies_to = MaskSide::Output;
            auto lm = layer_macs(al, &in_mask, &out_mask);
            s.pass &= lm.main == banded_macs(plan);
        }
        s.pass &= worst < (f32 ? 1e-4 : 1e-10);
        std::snprintf(buf, sizeof(buf), "max |banded - masked reference| = %.3g", worst);
        s.detail = buf;
        suites.push_back(s);
    }
    {
        SuiteResult s{"mask-construction", true, ""};
        std::mt19937_64 rng(seed ^ 6);
        std::uniform_real_distribution<double> idist(0, 1);
        std::vector<double> imp(6 * 9);
        for (auto& v : imp) v = idist(rng);
        for (auto strat : {MaskStrategy::Channel, MaskStrategy::Coefficient,
                           MaskStrategy::ChannelCoefficient, MaskStrategy::Band}) {
            auto prev = make_mask(imp, 6, 3, strat, 0.0);
            for (int i = 1; i <= 5; ++i) {
                auto cur = make_mask(imp, 6, 3, strat, i / 5.0);
                for (int c = 0; c < 6; ++c)
                    for (int q = 0; q < 9; ++q)
                        if (cur.retains(c, q)) s.pass &= prev.retains(c, q);
                prev = cur;
            }
        }
        auto cc = make_mask(imp, 6, 3, MaskStrategy::ChannelCoefficient, 0.4);
        auto band = band_from_chan_coef(cc);
        for (int c = 0; c < 6; ++c)
            for (int q = 0; q < 9; ++q)
                if (band.retains(c, q)) s.pass &= cc.retains(c, q);
        s.pass &= contiguity_fraction(band) == 1.0;
        suites.push_back(s);
    }
    return suites;
}

int cmd_verify(const std::string& dtype, std::uint64_t seed, bool perturb_dct) {
    const auto suites = dtype == "f32" ? run_verify_suites<float>(seed, perturb_dct)
                                       : run_verify_suites<double>(seed, perturb_dct);
    bool all = true;
    std::printf("%-24s %-6s %s\n", "suite", "result", "detail");
    for (const auto& s : suites) {
        std::printf("%-24s %-6s %s\n", s.name.c_str(), s.pass ? "PASS" : "FAIL",
                    s.detail.c_str());
        all &= s.pass;
    }
    if (!all) throw verify_failure("verification suites failed");
    return 0;
}

// ---------------------------------------------------------------------------
// profile / prune

template <typename T>
int cmd_profile_t(const std::string& ckpt, const std::string& dataset_path,
                  const std::string& split, const std::string& out,
                  const std::vector<std::string>& layer_filter, std::uint64_t seed) {
    auto model = Model<T>::load(ckpt);
    auto ds = load_dataset<T>(dataset_spec_from_path(dataset_path, split));
    auto ps = profile_activations(model, ds, layer_filter);
    ensure_out_dir(out);
    spit((fs::path(out) / "profile.json").string(), ps.to_json() + "\n");
    write_manifest(out, "profile", {{"checkpoint", ckpt}, {"dataset", dataset_path}}, seed);
    std::printf("profiled %zu layers over %d samples -> %s/profile.json\n", ps.layers.size(),
                ds.size(), out.c_str());
    return 0;
}

int cmd_profile(const std::string& ckpt, const std::string& dataset_path,
                const std::string& split, const std::string& out,
                const std::vector<std::string>& layer_filter, std::uint64_t seed) {
    return checkpoint_dtype(ckpt) == "f32"
               ? cmd_profile_t<float>(ckpt, dataset_path, split, out, layer_filter, seed)
               : cmd_profile_t<double>(ckpt, dataset_path, split, out, layer_filter, seed);
}

int cmd_prune(const std::string& profile_path, const std::string& strategy, double level,
              const std::string& out, std::uint64_t seed) {
    auto ps = ProfileSet::from_json(slurp(profile_path));
    const MaskStrategy strat = mask_strategy_from_string(strategy);
    MaskSet ms;
    std::uint64_t base_total = 0, pruned_total = 0;
    for (const auto& lp : ps.layers) {
        auto mask = make_mask(lp.mean_abs(), lp.c, lp.k, strat, level);
        mask.layer = lp.layer;
        mask.applies_to = MaskSide::Input;  // profiles describe layer inputs

        ArchLayer al;
        al.type = LayerType::FreqPointwise;
        al.name = lp.layer;
        al.in_c = lp.c;
        al.out_c = lp.c_out;
        al.in_h = lp.h;
        al.in_w = lp.w;
        al.out_h = lp.h;
        al.out_w = lp.w;
        al.k = lp.k;
        const auto unmasked = layer_macs(al);
        const auto masked = layer_macs(al, &mask, nullptr);
        base_total += unmasked.baseline;
        pruned_total += masked.with_overhead();
        std::printf("%-24s retained %5.1f%%  macs %llu -> %llu\n", lp.layer.c_str(),
                    100.0 * mask.retained_count() / (double(lp.c) * lp.k * lp.k),
                    static_cast<unsigned long long>(unmasked.baseline),
                    static_cast<unsigned long long>(masked.with_overhead()));
        ms.masks.push_back(std::move(mask));
    }
    ensure_out_dir(out);
    ms.save((fs::path(out) / "masks.json").string());
    write_manifest(out, "prune",
                   {{"profile", profile_path}, {"strategy", strategy},
                    {"level", std::to_string(level)}},
                   seed);
    std::printf("projected wrapped-layer MAC reduction: %.3fx\n",
                pruned_total ? double(base_total) / double(pruned_total) : 0.0);
    return 0;
}

// ---------------------------------------------------------------------------
// train / eval

template <typename T>
int cmd_train_t(const std::string& arch_path, const std::string& dataset_path,
                const std::string& eval_path, const std::string& split, TrainConfig cfg,
                const std::string& out) {
    auto arch = ArchConfig::load(arch_path);
    auto model = Model<T>::build(arch, cfg.seed);
    auto train_ds = load_dataset<T>(dataset_spec_from_path(dataset_path, split));
    Dataset<T> eval_ds;
    const Dataset<T>* eval_ptr = nullptr;
    if (!eval_path.empty()) {
        eval_ds = load_dataset<T>(dataset_spec_from_path(eval_path, "test"));
        eval_ptr = &eval_ds;
    }
    auto result = train(model, train_ds, eval_ptr, cfg);

    ensure_out_dir(out);
    model.save((fs::path(out) / "checkpoint").string());
    spit((fs::path(out) / "log.csv").string(), result.csv());
    for (auto& m : result.final_masks.masks) m.applies_to = MaskSide::Output;
    result.final_masks.save((fs::path(out) / "final_masks.json").string());
    spit((fs::path(out) / "train_config.json").string(), cfg.to_json() + "\n");
    write_manifest(out, "train",
                   {{"arch", arch_path}, {"dataset", dataset_path}, {"eval", eval_path}},
                   cfg.seed);

    const auto& last = result.log.back();
    std::printf("finished %s: loss %.4f, top1 %.4f, projected MAC reduction %.3fx\n",
                to_string(cfg.schedule), last.loss, last.top1, last.mac_reduction);
    return 0;
}

template <typename T>
int cmd_eval_t(const std::string& ckpt, const std::string& dataset_path,
               const std::string& split, const std::string& mask_mode,
               const std::string& mask_path, const std::string& out, std::uint64_t seed) {
    auto model = Model<T>::load(ckpt);
    auto ds = load_dataset<T>(dataset_spec_from_path(dataset_path, split));

    if (!mask_path.empty()) {
        auto ms = MaskSet::load(mask_path);
        for (auto* f : model.freq_layers()) {
            if (const auto* im = ms.find(f->name(), MaskSide::Input)) f->set_input_mask(im);
            if (const auto* om = ms.find(f->name(), MaskSide::Output)) {
                if (om->strategy != MaskStrategy::Band)
                    throw validation_error("output-side masks must be band masks (layer " +
                                           f->name() + ")");
                f->set_fixed_band(om->band);
            }
        }
    }
    if (mask_mode == "soft") {
        for (auto* f : model.freq_layers()) f->set_soft();
    } else if (mask_mode == "fixed-band") {
        for (auto* f : model.freq_layers())
            if (f->mode() == FreqPointwiseLayer<T>::MaskMode::Soft)
                f->set_fixed_band(
                    round_and_fix(f->fc_values(), f->macroblock() * f->macroblock(),
                                  f->macroblock())
                        .band);
    } else {
        throw validation_error("mask mode must be 'soft' or 'fixed-band'");
    }

    const double acc = evaluate(model, ds);
    std::printf("top1 %.4f over %d samples (%s masks)\n", acc, ds.size(), mask_mode.c_str());
    if (!out.empty()) {
        ensure_out_dir(out);
        json j;
        j["top1"] = acc;
        j["samples"] = ds.size();
        j["mask_mode"] = mask_mode;
        spit((fs::path(out) / "eval.json").string(), j.dump(2) + "\n");
        write_manifest(out, "eval",
                       {{"checkpoint", ckpt}, {"dataset", dataset_path}, {"masks", mask_path}},
                       seed);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// cost / sweep

int cmd_cost(const std::string& arch_path, const std::string& mask_path, const std::string& out,
             bool dump_plans, std::uint64_t seed) {
    auto arch = ArchConfig::load(arch_path);
    MaskSet ms;
    const MaskSet* msp = nullptr;
    if (!mask_path.empty()) {
        ms = MaskSet::load(mask_path);
        msp = &ms;
    }
    auto rep = network_macs(arch, msp);
    if (dump_plans) {
        if (out.empty()) throw validation_error("--dump-plans needs --out");
        ensure_out_dir(out);
        for (const auto& l : arch.layers) {
            if (l.type != LayerType::FreqPointwise) continue;
            const PruneMask* im = msp ? msp->find(l.name, MaskSide::Input) : nullptr;
            const PruneMask* om = msp ? msp->find(l.name, MaskSide::Output) : nullptr;
            if ((im && im->strategy != MaskStrategy::Band) ||
                (om && om->strategy != MaskStrategy::Band))
                continue;  // plans exist for band masks only
            auto plan = plan_bands(im, om, l.k, l.in_c, l.out_c, l.in_h, l.in_w, 1);
            spit((fs::path(out) / (l.name + ".plan.json")).string(), plan.to_json() + "\n");
        }
    }
    std::printf("%s", rep.table().c_str());
    std::printf("\nconv totals: baseline %llu, with transforms+masks %llu (%.3fx)\n",
                static_cast<unsigned long long>(rep.baseline_total),
                static_cast<unsigned long long>(rep.with_overhead_total()), rep.reduction());
    if (rep.depthwise_total > 0)
        std::printf("pointwise %llu vs depthwise %llu MACs (%.1fx)\n",
                    static_cast<unsigned long long>(rep.pointwise_total),
                    static_cast<unsigned long long>(rep.depthwise_total),
                    double(rep.pointwise_total) / double(rep.depthwise_total));
    if (!out.empty()) {
        ensure_out_dir(out);
        spit((fs::path(out) / "cost.csv").string(), rep.csv());
        write_manifest(out, "cost", {{"arch", arch_path}, {"masks", mask_path}}, seed);
    }
    return 0;
}

template <typename T>
double sweep_accuracy(const std::string& ckpt, Dataset<T>& ds, const MaskSet& ms) {
    auto model = Model<T>::load(ckpt);
    for (auto* f : model.freq_layers()) {
        if (const auto* im = ms.find(f->name(), MaskSide::Input)) f->set_input_mask(im);
        if (const auto* om = ms.find(f->name(), MaskSide::Output))
            f->set_fixed_band(om->band);
    }
    return evaluate(model, ds);
}

int cmd_sweep(const std::string& arch_path, const std::string& profile_path,
              const std::string& ckpt, const std::string& dataset_path,
              const std::string& strategy, const std::vector<double>& levels,
              const std::string& out, std::uint64_t seed) {
    if (levels.empty()) throw validation_error("sweep needs at least one pruning level");
    auto arch = ArchConfig::load(arch_path);
    const MaskStrategy strat = mask_strategy_from_string(strategy);

    // Importance source: measured activation profile, or the learned soft
    // masks of a checkpoint (per output channel) when no profile is given.
    ProfileSet ps;
    bool from_profile = !profile_path.empty();
    if (from_profile) {
        ps = ProfileSet::from_json(slurp(profile_path));
    } else if (!ckpt.empty()) {
        const bool f32 = checkpoint_dtype(ckpt) == "f32";
        json manifest = json::parse(slurp((fs::path(ckpt) / "manifest.json").string()));
        for (const auto& lj : manifest.at("layers")) {
            if (!lj.contains("fc")) continue;
            const auto fc = lj.at("fc").get<std::vector<double>>();
            const int nc = lj.at("num_coefs").get<int>();
            const int k = static_cast<int>(std::lround(std::sqrt(double(nc))));
            LayerProfile lp(lj.at("name").get<std::string>(), static_cast<int>(fc.size()), k, 0,
                            0, static_cast<int>(fc.size()));
            for (std::size_t c = 0; c < fc.size(); ++c) {
                const auto cm = coefmask(fc[c], nc);
                for (int q = 0; q < nc; ++q) lp.sum_abs[c * nc + q] = cm[q];
            }
            lp.position_count = 1;
            lp.sample_count = 1;
            ps.layers.push_back(std::move(lp));
        }
        (void)f32;
    } else {
        throw validation_error("sweep needs --profile or --ckpt as the importance source");
    }

    std::string csv = "level,mac_reduction,accuracy\n";
    Dataset<double> eval64;
    Dataset<float> eval32;
    const bool want_acc = !ckpt.empty() && !dataset_path.empty();
    bool ckpt_f32 = false;
    if (want_acc) {
        ckpt_f32 = checkpoint_dtype(ckpt) == "f32";
        if (ckpt_f32)
            eval32 = load_dataset<float>(dataset_spec_from_path(dataset_path, "test"));
        else
            eval64 = load_dataset<double>(dataset_spec_from_path(dataset_path, "test"));
    }

    for (double level : levels) {
        MaskSet ms;
        for (const auto& lp : ps.layers) {
            auto mask = make_mask(lp.mean_abs(), lp.c, lp.k, strat, level);
            mask.layer = lp.layer;
            mask.applies_to = from_profile ? MaskSide::Input : MaskSide::Output;
            if (!from_profile && mask.strategy != MaskStrategy::Band) {
                // learned importances are per output channel; execution needs
                // band form on the output side
                mask = band_from_chan_coef(
                    PruneMask::chan_coef_mask(mask.as_matrix(), lp.c, lp.k));
                mask.layer = lp.layer;
                mask.applies_to = MaskSide::Output;
            }
            ms.masks.push_back(std::move(mask));
        }
        auto rep = network_macs(arch, &ms);
        char row[96];
        if (want_acc) {
            const double acc = ckpt_f32 ? sweep_accuracy<float>(ckpt, eval32, ms)
                                        : sweep_accuracy<double>(ckpt, eval64, ms);
            std::snprintf(row, sizeof(row), "%.4f,%.6f,%.6f\n", level, rep.reduction(), acc);
        } else {
            std::snprintf(row, sizeof(row), "%.4f,%.6f,\n", level, rep.reduction());
        }
        csv += row;
        std::printf("%s", row);
    }
    if (!out.empty()) {
        ensure_out_dir(out);
        spit((fs::path(out) / "sweep.csv").string(), csv);
        write_manifest(out, "sweep",
                       {{"arch", arch_path}, {"profile", profile_path}, {"ckpt", ckpt}},
                       seed);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchTimes {
    double spatial_ms = 0, freq_ms = 0;
    double measured_speedup = 0, predicted_speedup = 0;
};

template <typename T>
BenchTimes run_bench(int c_in, int c_out, int h, int w, int k, double level, int reps,
                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> vdist(-1, 1);
    Tensor<T> x(1, c_in, h, w);
    for (auto& v : x.data) v = static_cast<T>(vdist(rng));
    PointwiseWeights<T> layer(c_in, c_out);
    for (auto& v : layer.weights) v = static_cast<T>(vdist(rng));

    const int kk = k * k;
    const int m = std::max(0, std::min(kk, static_cast<int>(std::floor((1.0 - level) * kk + 1e-9))));
    auto in_mask = PruneMask::band_mask(std::vector<int>(c_in, m), k);
    auto out_mask = PruneMask::band_mask(std::vector<int>(c_out, m), k);
    auto plan = plan_bands(&in_mask, &out_mask, k, c_in, c_out, h, w, 1);
    const std::vector<int> in_band(c_in, m);
    const std::vector<int> out_band(c_out, std::max(m, 0));

    using clock = std::chrono::steady_clock;
    auto median_ms = [&](auto&& fn) {
        fn();
        fn();  // warm-up, excluded
        std::vector<double> times;
        times.reserve(reps);
        for (int r = 0; r < reps; ++r) {
            const auto t0 = clock::now();
            fn();
            const auto t1 = clock::now();
            times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };

    volatile T sink = T(0);
    BenchTimes bt;
    bt.spatial_ms = median_ms([&] {
        auto y = conv1x1_spatial(x, layer);
        sink = y.data[0];
    });
    bt.freq_ms = median_ms([&] {
        auto f = dct_truncated(x, MacroblockSpec(k), in_band);
        auto g = execute_banded(f, layer, plan);
        auto y = dct_inverse(g, &out_band);
        sink = y.data[0];
    });
    (void)sink;
    bt.measured_speedup = bt.freq_ms > 0 ? bt.spatial_ms / bt.freq_ms : 0;

    const std::uint64_t base = pointwise_mac_count(c_in, h, w, c_out);
    const std::uint64_t freq_macs = banded_macs(plan) +
                                    transform_mac_count(c_in, h, w, k, &in_band) +
                                    transform_mac_count(c_out, h, w, k, &out_band);
    bt.predicted_speedup = freq_macs > 0 ? double(base) / double(freq_macs) : 0;
    return bt;
}

int cmd_bench(int c_in, int c_out, int h, int w, int k, double level, int reps, int threads,
              const std::string& dtype, std::uint64_t seed) {
    if (level < 0 || level > 1) throw validation_error("pruning level must be in [0, 1]");
    omp_set_num_threads(threads);  // single-threaded by default
    const BenchTimes bt = dtype == "f32"
                              ? run_bench<float>(c_in, c_out, h, w, k, level, reps, seed)
                              : run_bench<double>(c_in, c_out, h, w, k, level, reps, seed);
    std::printf("spatial pointwise: %9.3f ms (median of %d)\n", bt.spatial_ms, reps);
    std::printf("frequency path:    %9.3f ms (truncate -> banded GEMMs -> inverse)\n",
                bt.freq_ms);
    std::printf("measured speedup:  %9.3fx\n", bt.measured_speedup);
    std::printf("MAC-predicted:     %9.3fx\n", bt.predicted_speedup);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"pointwise convolutions in a macroblocked DCT domain, with learned "
                 "per-channel frequency-band pruning"};
    app.require_subcommand(1);

    std::string dtype = "f64", out, arch_path, dataset_path, eval_path, ckpt, profile_path,
                mask_path, strategy = "band", split = "train", mask_mode = "soft",
                train_config_path, schedule;
    std::uint64_t seed = 1;
    double level = 0.5, lambda = -1;
    int threads = 0, reps = 20;
    int bc_in = 512, bc_out = 512, bh = 28, bw = 28, bk = 3;
    bool perturb_dct = false, dump_plans = false;
    std::vector<double> levels;
    std::vector<std::string> layer_filter;

    app.add_option("--threads", threads, "worker threads (0 = library default)");

    auto* verify = app.add_subcommand("verify", "run the numerical property suites");
    verify->add_option("--dtype", dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    verify->add_option("--seed", seed, "randomized-case seed");
    verify->add_flag("--perturb-dct", perturb_dct, "negative control: corrupt the basis")
        ->group("");  // test hook, hidden from help

    auto* profile = app.add_subcommand("profile", "mean |coefficient| per wrapped layer input");
    profile->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    profile->add_option("--dataset", dataset_path, "dataset config (.json) or CIFAR-10 dir")
        ->required();
    profile->add_option("--split", split, "cifar10 split when --dataset is a directory");
    profile->add_option("--layers", layer_filter, "restrict to these layer names");
    profile->add_option("--out", out, "output directory")->required();
    profile->add_option("--seed", seed, "recorded in the manifest");

    auto* prune = app.add_subcommand("prune", "build masks from a profile at a pruning level");
    prune->add_option("--profile", profile_path, "profile.json from the profile command")
        ->required();
    prune->add_option("--strategy", strategy, "channel | coef | chan-coef | band")
        ->check(CLI::IsMember({"channel", "coef", "chan-coef", "band"}));
    prune->add_option("--level", level, "pruning fraction in [0, 1]")->required();
    prune->add_option("--out", out, "output directory")->required();
    prune->add_option("--seed", seed, "recorded in the manifest");

    auto* train_cmd = app.add_subcommand("train", "train a model from an arch config");
    train_cmd->add_option("--arch", arch_path, "architecture config")->required();
    train_cmd->add_option("--dataset", dataset_path, "training dataset")->required();
    train_cmd->add_option("--eval-dataset", eval_path, "held-out dataset for the log");
    train_cmd->add_option("--train-config", train_config_path, "training config json");
    train_cmd->add_option("--schedule", schedule,
                          "baseline | freeze-refine | alternate (overrides config)");
    train_cmd->add_option("--lambda", lambda, "mask regularizer weight (overrides config)");
    train_cmd->add_option("--seed", seed, "overrides config seed");
    train_cmd->add_option("--dtype", dtype, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    train_cmd->add_option("--out", out, "output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "top-1 accuracy of a checkpoint");
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("--dataset", dataset_path, "dataset config or CIFAR-10 dir")
        ->required();
    eval_cmd->add_option("--split", split, "cifar10 split when --dataset is a directory");
    eval_cmd->add_option("--mask-mode", mask_mode, "soft | fixed-band");
    eval_cmd->add_option("--mask", mask_path, "mask file to apply");
    eval_cmd->add_option("--out", out, "optional output directory");
    eval_cmd->add_option("--seed", seed, "recorded in the manifest");

    auto* cost = app.add_subcommand("cost", "per-layer MAC report for an arch config");
    cost->add_option("--arch", arch_path, "architecture config")->required();
    cost->add_option("--mask", mask_path, "mask file");
    cost->add_option("--out", out, "optional output directory");
    cost->add_flag("--dump-plans", dump_plans, "write per-layer band-plan json to --out");
    cost->add_option("--seed", seed, "recorded in the manifest");

    auto* sweep = app.add_subcommand("sweep", "MAC reduction (and accuracy) across levels");
    sweep->add_option("--arch", arch_path, "architecture config")->required();
    sweep->add_option("--profile", profile_path, "profile.json importance source");
    sweep->add_option("--ckpt", ckpt, "checkpoint (importance source and/or accuracy)");
    sweep->add_option("--dataset", dataset_path, "dataset for the accuracy column");
    sweep->add_option("--strategy", strategy, "channel | coef | chan-coef | band")
        ->check(CLI::IsMember({"channel", "coef", "chan-coef", "band"}));
    sweep->add_option("--levels", levels, "pruning levels")->required();
    sweep->add_option("--out", out, "output directory");
    sweep->add_option("--seed", seed, "recorded in the manifest");

    auto* bench = app.add_subcommand("bench", "wall-clock: spatial vs banded frequency path");
    bench->add_option("--cin", bc_in, "input channels");
    bench->add_option("--cout", bc_out, "output channels");
    bench->add_option("--height", bh, "input height");
    bench->add_option("--width", bw, "input width");
    bench->add_option("--k", bk, "macroblock size");
    bench->add_option("--level", level, "uniform band pruning fraction");
    bench->add_option("--reps", reps, "timed repetitions (median reported)");
    bench->add_option("--dtype", dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    bench->add_option("--seed", seed, "data seed");

    std::vector<std::string> raw = args;
    try {
        std::vector<const char*> argv;
        argv.push_back("freqprune");
        for (const auto& a : raw) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (threads > 0) omp_set_num_threads(threads);
        if (verify->parsed()) return cmd_verify(dtype, seed, perturb_dct);
        if (profile->parsed())
            return cmd_profile(ckpt, dataset_path, split, out, layer_filter, seed);
        if (prune->parsed()) return cmd_prune(profile_path, strategy, level, out, seed);
        if (train_cmd->parsed()) {
            TrainConfig cfg = train_config_path.empty() ? TrainConfig{}
                                                        : TrainConfig::load(train_config_path);
            if (!schedule.empty()) cfg.schedule = schedule_from_string(schedule);
            if (lambda >= 0) cfg.lambda = lambda;
            if (seed != 1 || train_config_path.empty()) cfg.seed = seed;
            return dtype == "f32" ? cmd_train_t<float>(arch_path, dataset_path, eval_path,
                                                       split, cfg, out)
                                  : cmd_train_t<double>(arch_path, dataset_path, eval_path,
                                                        split, cfg, out);
        }
        if (eval_cmd->parsed())
            return checkpoint_dtype(ckpt) == "f32"
                       ? cmd_eval_t<float>(ckpt, dataset_path, split, mask_mode, mask_path, out,
                                           seed)
                       : cmd_eval_t<double>(ckpt, dataset_path, split, mask_mode, mask_path,
                                            out, seed);
        if (cost->parsed()) return cmd_cost(arch_path, mask_path, out, dump_plans, seed);
        if (sweep->parsed())
            return cmd_sweep(arch_path, profile_path, ckpt, dataset_path, strategy, levels, out,
                             seed);
        if (bench->parsed()) {
            const int bench_threads = threads > 0 ? threads : 1;
            return cmd_bench(bc_in, bc_out, bh, bw, bk, level, reps, bench_threads, dtype, seed);
        }
    } catch (const validation_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const io_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 2;
    } catch (const verify_failure& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    }
    return 1;
}

}  // namespace freqprune::cli
