#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "freqprune/trainer.hpp"
#include "test_util.hpp"

using namespace freqprune;

namespace {

ArchConfig arch_from(const std::string& text) { return ArchConfig::from_json(text); }

// Central finite differences on every unfrozen parameter against the
// analytic gradients from one forward/backward pass.
double gradcheck(Model<double>& model, const Tensor<double>& x, const std::vector<int>& labels,
                 double lambda = 0.0, double h = 1e-5) {
    model.zero_grad();
    auto logits = model.forward(x, /*training=*/true);
    Tensor<double> dlogits;
    softmax_cross_entropy(logits, labels, &dlogits);
    model.backward(dlogits);
    auto params = model.params();
    if (lambda > 0)
        for (auto& p : params)
            if (p.kind == ParamKind::FcMask)
                for (auto& g : *p.grad) g += lambda / p.grad->size();

    auto loss_at = [&]() {
        auto lg = model.forward(x, /*training=*/true);
        double l = softmax_cross_entropy<double>(lg, labels, nullptr);
        if (lambda > 0) {
            double reg = 0;
            for (auto* f : model.freq_layers()) {
                double s = 0;
                for (double v : f->fc_values()) s += std::abs(v);
                reg += s / f->fc_values().size();
            }
            l += lambda * reg;
        }
        return l;
    };

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
            const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

Tensor<double> random_input(int n, int c, int h, int w, std::uint64_t seed) {
    testutil::Rng rng(seed);
    return testutil::random_tensor<double>(n, c, h, w, rng);
}

std::vector<int> cycle_labels(int n, int classes) {
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i % classes;
    return labels;
}

}  // namespace

TEST_CASE("dense-only model with identity weights returns the flattened input") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 1, "h": 2, "w": 2}, "classes": 4,
      "layers": [{"name": "d", "type": "dense", "out": 4}]
    })");
    auto model = Model<double>::build(arch, 1);
    auto* dense = dynamic_cast<DenseLayer<double>*>(model.layers[0].get());
    REQUIRE(dense);
    std::fill(dense->weight().begin(), dense->weight().end(), 0.0);
    for (int i = 0; i < 4; ++i) dense->weight()[i * 4 + i] = 1.0;
    auto x = random_input(3, 1, 2, 2, 2);
    auto y = model.forward(x, false);
    for (int n = 0; n < 3; ++n)
        for (int i = 0; i < 4; ++i) CHECK(y.at(n, i, 0, 0) == x.data[n * 4 + i]);
}

TEST_CASE("relu zeroes negative inputs; relu6 caps at six") {
    ReluLayer<double> relu("r", 0), relu6("r6", 6);
    Tensor<double> x(1, 1, 1, 4);
    x.data = {-2.0, 0.5, 5.0, 9.0};
    auto y = relu.forward(x, true);
    CHECK(y.data == std::vector<double>{0.0, 0.5, 5.0, 9.0});
    auto y6 = relu6.forward(x, true);
    CHECK(y6.data == std::vector<double>{0.0, 0.5, 5.0, 6.0});
}

TEST_CASE("freq pointwise with fc = 1 matches the plain spatial pointwise") {
    const int c_in = 3, c_out = 4, k = 3;
    FreqPointwiseLayer<double> freq("f", c_in, c_out, k);
    PointwiseSpatialLayer<double> plain("p", c_in, c_out);
    testutil::Rng rng(5);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (std::size_t i = 0; i < freq.weights().weights.size(); ++i) {
        const double v = dist(rng);
        freq.weights().weights[i] = v;
        plain.weights().weights[i] = v;
    }
    for (int i = 0; i < c_out; ++i) {
        const double b = dist(rng);
        freq.bias()[i] = b;
        (*plain.weights().bias)[i] = b;
    }
    auto x = random_input(2, c_in, 6, 6, 7);
    auto yf = freq.forward(x, false);
    auto yp = plain.forward(x, false);
    CHECK(testutil::max_abs_diff(yf, yp) < 1e-10);
}

TEST_CASE("gradient check: conv2d (stride, padding, groups) + relu + dense") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 4, "h": 6, "w": 6}, "classes": 3,
      "layers": [
        {"name": "c1", "type": "conv2d", "out": 4, "kernel": 3, "stride": 2, "pad": 1, "groups": 2},
        {"type": "relu"},
        {"name": "d", "type": "dense", "out": 3}
      ]
    })");
    auto model = Model<double>::build(arch, 3);
    auto x = random_input(2, 4, 6, 6, 4);
    CHECK(gradcheck(model, x, cycle_labels(2, 3)) < 1e-4);
}

TEST_CASE("gradient check: depthwise conv") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 3, "h": 4, "w": 4}, "classes": 2,
      "layers": [
        {"name": "dw", "type": "conv2d", "out": 3, "kernel": 3, "stride": 1, "pad": 1, "groups": 3},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 5);
    auto x = random_input(2, 3, 4, 4, 6);
    CHECK(gradcheck(model, x, cycle_labels(2, 2)) < 1e-4);
}

TEST_CASE("gradient check: pointwise + global average pool") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 3, "h": 4, "w": 4}, "classes": 3,
      "layers": [
        {"name": "pw", "type": "pointwise", "out": 5},
        {"type": "relu6"},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 3}
      ]
    })");
    auto model = Model<double>::build(arch, 7);
    auto x = random_input(3, 3, 4, 4, 8);
    CHECK(gradcheck(model, x, cycle_labels(3, 3)) < 1e-4);
}

TEST_CASE("gradient check: batchnorm in batch mode") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 3, "w": 3}, "classes": 2,
      "layers": [
        {"name": "pw", "type": "pointwise", "out": 4},
        {"type": "batchnorm"},
        {"type": "relu"},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 9);
    // move gamma/beta off their init so the check exercises them
    for (auto* bn : model.bn_layers()) {
        bn->gamma() = {1.2, 0.8, 1.1, 0.9};
        bn->beta() = {0.1, -0.2, 0.05, 0.3};
    }
    auto x = random_input(4, 2, 3, 3, 10);
    CHECK(gradcheck(model, x, cycle_labels(4, 2)) < 1e-4);
}

TEST_CASE("frozen batchnorm keeps zero parameter gradients") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 2, "w": 2}, "classes": 2,
      "layers": [
        {"type": "batchnorm"},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 11);
    model.set_bn_frozen(true);
    auto x = random_input(3, 2, 2, 2, 12);
    model.zero_grad();
    auto logits = model.forward(x, true);
    Tensor<double> dlogits;
    softmax_cross_entropy(logits, cycle_labels(3, 2), &dlogits);
    model.backward(dlogits);
    for (auto& p : model.params())
        if (p.kind == ParamKind::BnGamma || p.kind == ParamKind::BnBeta) {
            CHECK(p.frozen);
            for (double g : *p.grad) CHECK(g == 0.0);
        }
    // unfrozen grads also pass the finite-difference check
    model.set_bn_frozen(false);
    CHECK(gradcheck(model, x, cycle_labels(3, 2)) < 1e-4);
}

TEST_CASE("gradient check: freq pointwise, soft masks on the ramp, with regularizer") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 6, "w": 6}, "classes": 3,
      "layers": [
        {"name": "fp", "type": "freq_pointwise", "out": 4, "k": 3},
        {"type": "relu"},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 3}
      ]
    })");
    auto model = Model<double>::build(arch, 13);
    // park every fc on a ramp, away from the kinks
    auto fl = model.freq_layers();
    REQUIRE(fl.size() == 1);
    fl[0]->fc_values() = {0.93, 0.61, 0.38, 0.17};
    auto x = random_input(2, 2, 6, 6, 14);
    CHECK(gradcheck(model, x, cycle_labels(2, 3), /*lambda=*/0.05) < 1e-4);
}

TEST_CASE("gradient check: two stacked freq pointwise layers, k = 2") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 4, "w": 4}, "classes": 2,
      "layers": [
        {"name": "fp1", "type": "freq_pointwise", "out": 3, "k": 2},
        {"type": "relu6"},
        {"name": "fp2", "type": "freq_pointwise", "out": 3, "k": 2},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 15);
    auto fl = model.freq_layers();
    fl[0]->fc_values() = {0.9, 0.55, 0.3};
    fl[1]->fc_values() = {0.7, 0.45, 0.85};
    auto x = random_input(2, 2, 4, 4, 16);
    CHECK(gradcheck(model, x, cycle_labels(2, 2), 0.02) < 1e-4);
}

TEST_CASE("regularizer-only path: zero task gradient leaves exactly lambda/c") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 4, "w": 4}, "classes": 2,
      "layers": [
        {"name": "fp", "type": "freq_pointwise", "out": 4, "k": 2},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 17);
    model.zero_grad();
    // zero upstream: skip backward entirely, apply only the regularizer
    const double lambda = 0.4;
    auto params = model.params();
    for (auto& p : params)
        if (p.kind == ParamKind::FcMask)
            for (auto& g : *p.grad) g += lambda / p.grad->size();
    for (auto& p : params)
        if (p.kind == ParamKind::FcMask)
            for (double g : *p.grad) CHECK(g == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("soft mode at exact 0/1 masks agrees with the rounded fixed band") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 3, "h": 6, "w": 6}, "classes": 3,
      "layers": [
        {"name": "fp", "type": "freq_pointwise", "out": 4, "k": 3},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 3}
      ]
    })");
    auto model = Model<double>::build(arch, 19);
    auto fl = model.freq_layers();
    // fc values whose soft masks are exactly 0/1 (multiples of 1/9)
    fl[0]->fc_values() = {1.0, 6.0 / 9.0, 3.0 / 9.0, 0.0};
    auto x = random_input(2, 3, 6, 6, 20);
    auto soft = model.forward(x, false);
    auto masks = model.fix_bands();
    CHECK(masks.masks[0].band == std::vector<int>{9, 6, 3, 0});
    auto hard = model.forward(x, false);
    CHECK(testutil::max_abs_diff(soft, hard) < 1e-12);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    namespace fs = std::filesystem;
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 6, "w": 6}, "classes": 2,
      "layers": [
        {"name": "c", "type": "conv2d", "out": 4, "kernel": 3, "stride": 1, "pad": 1},
        {"type": "batchnorm"},
        {"type": "relu6"},
        {"name": "fp", "type": "freq_pointwise", "out": 4, "k": 3},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 21);
    model.freq_layers()[0]->fc_values() = {0.7, 0.2, 0.95, 0.4};
    auto x = random_input(2, 2, 6, 6, 22);
    auto before = model.forward(x, false);

    const auto dir = fs::temp_directory_path() / "fp_ckpt_test";
    fs::remove_all(dir);
    model.save(dir.string());
    auto loaded = Model<double>::load(dir.string());
    auto after = loaded.forward(x, false);
    for (std::size_t i = 0; i < before.data.size(); ++i)
        CHECK(after.data[i] == before.data[i]);
    CHECK_THROWS_AS(Model<float>::load(dir.string()), io_error);
    fs::remove_all(dir);
}

TEST_CASE("training is deterministic and the freeze contract holds") {
    DatasetSpec spec;
    spec.type = "synthetic";
    spec.classes = 3;
    spec.count = 48;
    spec.channels = 2;
    spec.height = 6;
    spec.width = 6;
    spec.seed = 33;
    auto ds = make_synthetic<double>(spec);

    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 6, "w": 6}, "classes": 3,
      "layers": [
        {"name": "fp", "type": "freq_pointwise", "out": 6, "k": 3},
        {"type": "batchnorm"},
        {"type": "relu6"},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 3}
      ]
    })");

    TrainConfig cfg;
    cfg.schedule = Schedule::FreezeLearnRefine;
    cfg.lambda = 0.05;
    cfg.epochs_pretrain = 2;
    cfg.epochs_mask = 2;
    cfg.epochs_refine = 2;
    cfg.batch_size = 16;
    cfg.seed = 99;

    auto m1 = Model<double>::build(arch, cfg.seed);
    auto m2 = Model<double>::build(arch, cfg.seed);

    // freeze contract: snapshot weights going into the mask phase
    TrainConfig pre = cfg;
    pre.epochs_mask = 0;
    pre.epochs_refine = 0;
    auto r_pre = train(m1, ds, nullptr, pre);
    auto* fp = m1.freq_layers()[0];
    const auto weights_before = fp->weights().weights;
    const auto bn_mean_before = m1.bn_layers()[0]->running_mean();
    TrainConfig mask_only = cfg;
    mask_only.epochs_pretrain = 0;
    mask_only.epochs_refine = 0;
    auto r_mask = train(m1, ds, nullptr, mask_only);
    CHECK(fp->weights().weights == weights_before);           // weights untouched
    CHECK(m1.bn_layers()[0]->running_mean() == bn_mean_before);  // frozen BN stats

    // fc must not have stayed put under lambda pressure
    double mean_fc = 0;
    for (double v : fp->fc_values()) mean_fc += v;
    mean_fc /= fp->fc_values().size();
    CHECK(mean_fc < 1.0);

    // determinism: identical seeds give identical logs
    auto m3 = Model<double>::build(arch, cfg.seed);
    auto r1 = train(m2, ds, &ds, cfg);
    auto r2 = train(m3, ds, &ds, cfg);
    CHECK(r1.csv() == r2.csv());
    CHECK(r1.csv().find("pretrain") != std::string::npos);
    CHECK(r1.csv().find("projected_mac_reduction") != std::string::npos);
}

TEST_CASE("lambda = 0 keeps masks saturated at full retention through phase A") {
    DatasetSpec spec;
    spec.type = "synthetic";
    spec.classes = 2;
    spec.count = 32;
    spec.channels = 2;
    spec.height = 4;
    spec.width = 4;
    spec.seed = 44;
    auto ds = make_synthetic<double>(spec);
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 4, "w": 4}, "classes": 2,
      "layers": [
        {"name": "fp", "type": "freq_pointwise", "out": 4, "k": 2},
        {"type": "relu6"},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 3);
    TrainConfig cfg;
    cfg.schedule = Schedule::FreezeLearnRefine;
    cfg.lambda = 0.0;
    cfg.epochs_pretrain = 1;
    cfg.epochs_mask = 3;
    cfg.epochs_refine = 0;
    cfg.batch_size = 8;
    cfg.seed = 5;
    auto r = train(model, ds, nullptr, cfg);
    // saturated ramps pass no gradient and there is no pruning pressure
    for (double v : model.freq_layers()[0]->fc_values()) CHECK(v == 1.0);
    for (int m : r.final_masks.masks[0].band) CHECK(m == 4);
}

TEST_CASE("random-weight model scores near chance on balanced data") {
    DatasetSpec spec;
    spec.type = "synthetic";
    spec.classes = 4;
    spec.count = 400;
    spec.channels = 2;
    spec.height = 6;
    spec.width = 6;
    spec.seed = 7;
    auto ds = make_synthetic<double>(spec);
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 6, "w": 6}, "classes": 4,
      "layers": [
        {"name": "fp", "type": "freq_pointwise", "out": 4, "k": 3},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 4}
      ]
    })");
    auto model = Model<double>::build(arch, 123);
    const double acc = evaluate(model, ds);
    CHECK(acc > 0.05);
    CHECK(acc < 0.6);  // untrained: nowhere near separating four classes
}

TEST_CASE("profiling at a wrapped layer's input") {
    auto arch = arch_from(R"({
      "name": "t", "input": {"c": 2, "h": 4, "w": 4}, "classes": 2,
      "layers": [
        {"name": "fp", "type": "freq_pointwise", "out": 3, "k": 2},
        {"type": "global_avg_pool"},
        {"name": "d", "type": "dense", "out": 2}
      ]
    })");
    auto model = Model<double>::build(arch, 1);

    Dataset<double> ds;
    ds.classes = 2;
    ds.labels = {0, 1};
    ds.images = Tensor<double>(2, 2, 4, 4);
    for (auto& v : ds.images.data) v = 0.5;  // constant input

    auto ps = profile_activations(model, ds);
    REQUIRE(ps.layers.size() == 1);
    CHECK(ps.layers[0].layer == "fp");
    CHECK(ps.layers[0].c == 2);
    CHECK(ps.layers[0].h == 4);
    CHECK(ps.layers[0].sample_count == 2);
    auto mean = ps.layers[0].mean_abs();
    for (int c = 0; c < 2; ++c) {
        CHECK(mean[c * 4] == doctest::Approx(1.0).epsilon(1e-12));  // DC = 0.5 * k
        for (int q = 1; q < 4; ++q) CHECK(mean[c * 4 + q] < 1e-12);
    }
    // the sink is detached afterwards
    model.forward(ds.images, false);
    CHECK(ps.layers[0].sample_count == 2);

    Dataset<double> empty;
    CHECK_THROWS_AS(profile_activations(model, empty), validation_error);
}
