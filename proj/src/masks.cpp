#include "freqprune/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace freqprune {

using nlohmann::json;

const char* to_string(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::Channel: return "channel";
        case MaskStrategy::Coefficient: return "coef";
        case MaskStrategy::ChannelCoefficient: return "chan-coef";
        case MaskStrategy::Band: return "band";
    }
    return "?";
}

MaskStrategy mask_strategy_from_string(const std::string& s) {
    if (s == "channel") return MaskStrategy::Channel;
    if (s == "coef" || s == "coefficient") return MaskStrategy::Coefficient;
    if (s == "chan-coef" || s == "channel-coefficient") return MaskStrategy::ChannelCoefficient;
    if (s == "band") return MaskStrategy::Band;
    throw validation_error("unknown mask strategy: " + s);
}

PruneMask PruneMask::full(int c, int k, MaskStrategy s) {
    PruneMask m;
    m.strategy = s;
    m.channels = c;
    m.k = k;
    const std::size_t kk = static_cast<std::size_t>(k) * k;
    switch (s) {
        case MaskStrategy::Channel: m.kept_channels.assign(c, 1); break;
        case MaskStrategy::Coefficient: m.kept_coefs.assign(kk, 1); break;
        case MaskStrategy::ChannelCoefficient: m.matrix.assign(c * kk, 1); break;
        case MaskStrategy::Band: m.band.assign(c, static_cast<int>(kk)); break;
    }
    return m;
}

PruneMask PruneMask::empty(int c, int k, MaskStrategy s) {
    PruneMask m = full(c, k, s);
    std::fill(m.kept_channels.begin(), m.kept_channels.end(), std::uint8_t(0));
    std::fill(m.kept_coefs.begin(), m.kept_coefs.end(), std::uint8_t(0));
    std::fill(m.matrix.begin(), m.matrix.end(), std::uint8_t(0));
    std::fill(m.band.begin(), m.band.end(), 0);
    return m;
}

PruneMask PruneMask::band_mask(std::vector<int> mc, int k) {
    PruneMask m;
    m.strategy = MaskStrategy::Band;
    m.channels = static_cast<int>(mc.size());
    m.k = k;
    for (int v : mc)
        if (v < 0 || v > k * k)
            throw validation_error("band prefix length out of range [0, " +
                                   std::to_string(k * k) + "]: " + std::to_string(v));
    m.band = std::move(mc);
    return m;
}

PruneMask PruneMask::chan_coef_mask(std::vector<std::uint8_t> matrix, int c, int k) {
    if (matrix.size() != static_cast<std::size_t>(c) * k * k)
        throw validation_error("chan-coef matrix size does not match c * k^2");
    PruneMask m;
    m.strategy = MaskStrategy::ChannelCoefficient;
    m.channels = c;
    m.k = k;
    m.matrix = std::move(matrix);
    return m;
}

std::vector<std::uint8_t> PruneMask::as_matrix() const {
    const int kk = k * k;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(channels) * kk, 0);
    for (int c = 0; c < channels; ++c)
        for (int q = 0; q < kk; ++q)
            out[static_cast<std::size_t>(c) * kk + q] = retains(c, q) ? 1 : 0;
    return out;
}

std::uint64_t PruneMask::retained_count() const {
    const int kk = k * k;
    std::uint64_t total = 0;
    for (int c = 0; c < channels; ++c)
        for (int q = 0; q < kk; ++q) total += retains(c, q) ? 1 : 0;
    return total;
}

namespace {

// floor(rho * n) with a small guard against binary representation error
// (e.g. 0.3 * 10 evaluating to 2.999...96).
std::size_t drop_count(double rho, std::size_t n) {
    if (rho < 0.0 || rho > 1.0)
        throw validation_error("pruning fraction must be in [0, 1], got " + std::to_string(rho));
    return static_cast<std::size_t>(std::floor(rho * static_cast<double>(n) + 1e-9));
}

// Indices ordered ascending by (value, index): the fixed tie-break.
std::vector<std::size_t> importance_order(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return order;
}

}  // namespace

PruneMask make_mask(const std::vector<double>& importance, int c, int k, MaskStrategy strategy,
                    double rho) {
    const std::size_t kk = static_cast<std::size_t>(k) * k;
    if (importance.size() != static_cast<std::size_t>(c) * kk)
        throw validation_error("importance matrix size does not match c * k^2");

    switch (strategy) {
        case MaskStrategy::Channel: {
            std::vector<double> row_sum(c, 0.0);
            for (int ic = 0; ic < c; ++ic)
                for (std::size_t q = 0; q < kk; ++q) row_sum[ic] += importance[ic * kk + q];
            const auto order = importance_order(row_sum);
            PruneMask m = PruneMask::full(c, k, MaskStrategy::Channel);
            const std::size_t drop = drop_count(rho, static_cast<std::size_t>(c));
            for (std::size_t i = 0; i < drop; ++i) m.kept_channels[order[i]] = 0;
            // Pack kept channels first so downstream execution is dense.
            m.channel_perm.clear();
            for (int ic = 0; ic < c; ++ic)
                if (m.kept_channels[ic]) m.channel_perm.push_back(ic);
            for (int ic = 0; ic < c; ++ic)
                if (!m.kept_channels[ic]) m.channel_perm.push_back(ic);
            return m;
        }
        case MaskStrategy::Coefficient: {
            std::vector<double> col_sum(kk, 0.0);
            for (int ic = 0; ic < c; ++ic)
                for (std::size_t q = 0; q < kk; ++q) col_sum[q] += importance[ic * kk + q];
            const auto order = importance_order(col_sum);
            PruneMask m = PruneMask::full(c, k, MaskStrategy::Coefficient);
            const std::size_t drop = drop_count(rho, kk);
            for (std::size_t i = 0; i < drop; ++i) m.kept_coefs[order[i]] = 0;
            return m;
        }
        case MaskStrategy::ChannelCoefficient: {
            const auto order = importance_order(importance);
            PruneMask m = PruneMask::full(c, k, MaskStrategy::ChannelCoefficient);
            const std::size_t drop = drop_count(rho, importance.size());
            for (std::size_t i = 0; i < drop; ++i) m.matrix[order[i]] = 0;
            return m;
        }
        case MaskStrategy::Band: {
            // Largest zigzag prefix contained in the chan-coef mask at the
            // same threshold; never retains an entry that mask dropped.
            PruneMask cc = make_mask(importance, c, k, MaskStrategy::ChannelCoefficient, rho);
            PruneMask m = band_from_chan_coef(cc);
            std::vector<int> chans(c);
            std::iota(chans.begin(), chans.end(), 0);
            std::stable_sort(chans.begin(), chans.end(),
                             [&](int a, int b) { return m.band[a] > m.band[b]; });
            m.channel_perm = std::move(chans);
            return m;
        }
    }
    throw validation_error("unreachable mask strategy");
}

PruneMask band_from_chan_coef(const PruneMask& m) {
    const int kk = m.k * m.k;
    std::vector<int> band(m.channels, 0);
    for (int c = 0; c < m.channels; ++c) {
        int len = 0;
        while (len < kk && m.retains(c, len)) ++len;
        band[c] = len;
    }
    PruneMask out = PruneMask::band_mask(std::move(band), m.k);
    out.layer = m.layer;
    out.applies_to = m.applies_to;
    return out;
}

double contiguity_fraction(const PruneMask& m) {
    const int kk = m.k * m.k;
    int contiguous = 0;
    for (int c = 0; c < m.channels; ++c) {
        int len = 0;
        while (len < kk && m.retains(c, len)) ++len;
        bool tail_clear = true;
        for (int q = len; q < kk && tail_clear; ++q) tail_clear = !m.retains(c, q);
        contiguous += tail_clear ? 1 : 0;
    }
    return m.channels == 0 ? 1.0 : static_cast<double>(contiguous) / m.channels;
}

// ---- serialization ----

namespace {

json mask_to_json_obj(const PruneMask& m) {
    json j;
    j["layer"] = m.layer;
    j["strategy"] = to_string(m.strategy);
    j["k"] = m.k;
    j["c"] = m.channels;
    j["applies_to"] = m.applies_to == MaskSide::Input ? "input" : "output";
    json payload;
    switch (m.strategy) {
        case MaskStrategy::Channel: payload["kept_channels"] = m.kept_channels; break;
        case MaskStrategy::Coefficient: payload["kept_coefs"] = m.kept_coefs; break;
        case MaskStrategy::ChannelCoefficient: {
            const int kk = m.k * m.k;
            json rows = json::array();
            for (int c = 0; c < m.channels; ++c) {
                json row = json::array();
                for (int q = 0; q < kk; ++q)
                    row.push_back(int(m.matrix[static_cast<std::size_t>(c) * kk + q]));
                rows.push_back(std::move(row));
            }
            payload["matrix"] = std::move(rows);
            break;
        }
        case MaskStrategy::Band: payload["band"] = m.band; break;
    }
    j["payload"] = std::move(payload);
    j["channel_permutation"] = m.channel_perm;
    return j;
}

PruneMask mask_from_json_obj(const json& j) {
    PruneMask m;
    m.layer = j.value("layer", "");
    m.strategy = mask_strategy_from_string(j.at("strategy").get<std::string>());
    m.k = j.at("k").get<int>();
    m.channels = j.at("c").get<int>();
    m.applies_to = j.value("applies_to", "input") == "output" ? MaskSide::Output : MaskSide::Input;
    const json& payload = j.at("payload");
    const std::size_t kk = static_cast<std::size_t>(m.k) * m.k;
    switch (m.strategy) {
        case MaskStrategy::Channel:
            m.kept_channels = payload.at("kept_channels").get<std::vector<std::uint8_t>>();
            if (m.kept_channels.size() != static_cast<std::size_t>(m.channels))
                throw validation_error("mask payload size mismatch (kept_channels)");
            break;
        case MaskStrategy::Coefficient:
            m.kept_coefs = payload.at("kept_coefs").get<std::vector<std::uint8_t>>();
            if (m.kept_coefs.size() != kk)
                throw validation_error("mask payload size mismatch (kept_coefs)");
            break;
        case MaskStrategy::ChannelCoefficient: {
            const json& rows = payload.at("matrix");
            if (rows.size() != static_cast<std::size_t>(m.channels))
                throw validation_error("mask payload size mismatch (matrix rows)");
            m.matrix.reserve(m.channels * kk);
            for (const auto& row : rows) {
                if (row.size() != kk)
                    throw validation_error("mask payload size mismatch (matrix cols)");
                for (const auto& v : row)
                    m.matrix.push_back(v.get<int>() ? 1 : 0);
            }
            break;
        }
        case MaskStrategy::Band:
            m.band = payload.at("band").get<std::vector<int>>();
            if (m.band.size() != static_cast<std::size_t>(m.channels))
                throw validation_error("mask payload size mismatch (band)");
            break;
    }
    if (j.contains("channel_permutation"))
        m.channel_perm = j.at("channel_permutation").get<std::vector<int>>();
    return m;
}

}  // namespace

std::string PruneMask::to_json() const { return mask_to_json_obj(*this).dump(2); }

PruneMask PruneMask::from_json(const std::string& text) {
    return mask_from_json_obj(json::parse(text));
}

void LayerProfile::merge(const LayerProfile& other) {
    if (other.c != c || other.k != k)
        throw validation_error("profile merge: shape mismatch for layer " + layer);
    for (std::size_t i = 0; i < sum_abs.size(); ++i) sum_abs[i] += other.sum_abs[i];
    sample_count += other.sample_count;
    position_count += other.position_count;
}

std::vector<double> LayerProfile::mean_abs() const {
    std::vector<double> out(sum_abs.size(), 0.0);
    if (position_count == 0) return out;
    for (std::size_t i = 0; i < sum_abs.size(); ++i)
        out[i] = sum_abs[i] / static_cast<double>(position_count);
    return out;
}

LayerProfile* ProfileSet::find(const std::string& layer) {
    for (auto& lp : layers)
        if (lp.layer == layer) return &lp;
    return nullptr;
}

std::string ProfileSet::to_json() const {
    json j;
    j["layers"] = json::array();
    for (const auto& lp : layers) {
        json l;
        l["layer"] = lp.layer;
        l["c"] = lp.c;
        l["k"] = lp.k;
        l["h"] = lp.h;
        l["w"] = lp.w;
        l["c_out"] = lp.c_out;
        l["sample_count"] = lp.sample_count;
        l["position_count"] = lp.position_count;
        const auto mean = lp.mean_abs();
        const int kk = lp.k * lp.k;
        json rows = json::array();
        for (int c = 0; c < lp.c; ++c) {
            json row = json::array();
            for (int q = 0; q < kk; ++q) row.push_back(mean[static_cast<std::size_t>(c) * kk + q]);
            rows.push_back(std::move(row));
        }
        l["mean_abs"] = std::move(rows);
        j["layers"].push_back(std::move(l));
    }
    return j.dump(2);
}

ProfileSet ProfileSet::from_json(const std::string& text) {
    const json j = json::parse(text);
    ProfileSet ps;
    for (const auto& l : j.at("layers")) {
        LayerProfile lp(l.at("layer").get<std::string>(), l.at("c").get<int>(),
                        l.at("k").get<int>(), l.value("h", 0), l.value("w", 0),
                        l.value("c_out", 0));
        lp.sample_count = l.at("sample_count").get<std::int64_t>();
        lp.position_count = l.at("position_count").get<std::int64_t>();
        const json& rows = l.at("mean_abs");
        const int kk = lp.k * lp.k;
        if (rows.size() != static_cast<std::size_t>(lp.c))
            throw validation_error("profile matrix rows != c");
        for (int c = 0; c < lp.c; ++c) {
            if (rows[c].size() != static_cast<std::size_t>(kk))
                throw validation_error("profile matrix cols != k^2");
            for (int q = 0; q < kk; ++q)
                lp.sum_abs[static_cast<std::size_t>(c) * kk + q] =
                    rows[c][q].get<double>() * static_cast<double>(lp.position_count);
        }
        ps.layers.push_back(std::move(lp));
    }
    return ps;
}

const PruneMask* MaskSet::find(const std::string& layer, MaskSide side) const {
    for (const auto& m : masks)
        if (m.layer == layer && m.applies_to == side) return &m;
    return nullptr;
}

std::string MaskSet::to_json() const {
    json j;
    j["masks"] = json::array();
    for (const auto& m : masks) j["masks"].push_back(mask_to_json_obj(m));
    return j.dump(2);
}

MaskSet MaskSet::from_json(const std::string& text) {
    const json j = json::parse(text);
    MaskSet ms;
    for (const auto& mj : j.at("masks")) ms.masks.push_back(mask_from_json_obj(mj));
    return ms;
}

void MaskSet::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open for write: " + path);
    os << to_json() << "\n";
}

MaskSet MaskSet::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return from_json(ss.str());
    } catch (const json::exception& e) {
        throw io_error("malformed mask file " + path + ": " + e.what());
    }
}

}  // namespace freqprune
