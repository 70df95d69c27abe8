#include "freqprune/bandexec.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"

namespace freqprune {

namespace {

std::vector<BandTraceEntry>* g_trace = nullptr;

std::vector<int> band_of(const PruneMask* m, int c, int k) {
    if (!m) return std::vector<int>(static_cast<std::size_t>(c), k * k);
    if (m->strategy != MaskStrategy::Band)
        throw validation_error("plan_bands requires Band masks");
    m->check_compatible(c, k);
    return m->band;
}

}  // namespace

void set_band_trace(std::vector<BandTraceEntry>* sink) { g_trace = sink; }
std::vector<BandTraceEntry>* band_trace() { return g_trace; }

BandPlan plan_bands(const PruneMask* input_mask, const PruneMask* output_mask, int k, int c_in,
                    int c_out, int h, int w, int batch) {
    if (input_mask && output_mask && input_mask->k != output_mask->k)
        throw validation_error("plan_bands: mask k mismatch (" + std::to_string(input_mask->k) +
                               " vs " + std::to_string(output_mask->k) + ")");
    MacroblockSpec spec(k);
    spec.check_divides(h, w);

    BandPlan plan;
    plan.k = k;
    plan.c_in = c_in;
    plan.c_out = c_out;
    plan.h = h;
    plan.w = w;
    plan.batch = batch;
    plan.p = static_cast<std::int64_t>(h / k) * (w / k);

    const std::vector<int> in_band = band_of(input_mask, c_in, k);
    const std::vector<int> out_band = band_of(output_mask, c_out, k);

    auto sorted_perm = [](const std::vector<int>& band) {
        std::vector<int> perm(band.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::stable_sort(perm.begin(), perm.end(),
                         [&](int a, int b) { return band[a] > band[b]; });
        return perm;
    };
    plan.in_perm = sorted_perm(in_band);
    plan.out_perm = sorted_perm(out_band);

    const int kk = k * k;
    plan.a_in.assign(kk, 0);
    plan.a_out.assign(kk, 0);
    for (int q = 0; q < kk; ++q) {
        for (int c = 0; c < c_in; ++c) plan.a_in[q] += in_band[c] > q ? 1 : 0;
        for (int c = 0; c < c_out; ++c) plan.a_out[q] += out_band[c] > q ? 1 : 0;
    }
    return plan;
}

std::string BandPlan::to_json() const {
    nlohmann::json j;
    j["k"] = k;
    j["c_in"] = c_in;
    j["c_out"] = c_out;
    j["h"] = h;
    j["w"] = w;
    j["batch"] = batch;
    j["input_permutation"] = in_perm;
    j["output_permutation"] = out_perm;
    j["a_in"] = a_in;
    j["a_out"] = a_out;
    j["macs"] = macs();
    return j.dump(2);
}

}  // namespace freqprune
