#include "freqprune/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace freqprune {

using nlohmann::json;

DatasetSpec DatasetSpec::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open dataset config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw validation_error(std::string("malformed dataset config: ") + e.what());
    }
    DatasetSpec spec;
    spec.type = j.at("type").get<std::string>();
    spec.dir = j.value("dir", "");
    spec.split = j.value("split", "train");
    if (j.contains("mean")) spec.mean = j.at("mean").get<std::vector<double>>();
    if (j.contains("std")) spec.stddev = j.at("std").get<std::vector<double>>();
    spec.limit = j.value("limit", 0);
    spec.classes = j.value("classes", 3);
    spec.count = j.value("count", 256);
    spec.channels = j.value("channels", 3);
    spec.height = j.value("height", 24);
    spec.width = j.value("width", 24);
    spec.seed = j.value("seed", std::uint64_t(1));
    spec.class_seed = j.value("class_seed", std::uint64_t(99));
    spec.noise = j.value("noise", 0.05);
    return spec;
}

namespace detail {

std::vector<std::string> cifar10_split_files(const std::string& dir, const std::string& split) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        // A single .bin file is accepted directly.
        if (fs::is_regular_file(dir)) return {dir};
        throw io_error("dataset path not found: " + dir);
    }
    std::vector<std::string> files;
    if (split == "train") {
        for (int i = 1; i <= 5; ++i) {
            const fs::path p = fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin");
            if (fs::exists(p)) files.push_back(p.string());
        }
    } else if (split == "test") {
        const fs::path p = fs::path(dir) / "test_batch.bin";
        if (fs::exists(p)) files.push_back(p.string());
    } else {
        throw validation_error("cifar10 split must be 'train' or 'test', got " + split);
    }
    if (files.empty())
        throw io_error("no CIFAR-10 batch files for split '" + split + "' under " + dir);
    return files;
}

RawCifar read_cifar10_files(const std::vector<std::string>& paths, int limit) {
    constexpr std::size_t kRecord = 1 + 3072;
    RawCifar raw;
    for (const auto& path : paths) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw io_error("cannot open: " + path);
        std::vector<char> rec(kRecord);
        while (is.read(rec.data(), static_cast<std::streamsize>(kRecord))) {
            const int label = static_cast<std::uint8_t>(rec[0]);
            if (label > 9) throw io_error("bad CIFAR-10 label byte in " + path);
            raw.labels.push_back(label);
            raw.pixels.insert(raw.pixels.end(),
                              reinterpret_cast<std::uint8_t*>(rec.data()) + 1,
                              reinterpret_cast<std::uint8_t*>(rec.data()) + kRecord);
            if (limit > 0 && static_cast<int>(raw.labels.size()) >= limit) return raw;
        }
        if (is.gcount() != 0)
            throw io_error("trailing partial record (" + std::to_string(is.gcount()) +
                           " bytes) in " + path);
    }
    return raw;
}

// splitmix64; good enough for data generation and fully reproducible.
std::uint32_t next_u32(std::uint64_t* state) {
    std::uint64_t z = (*state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::uint32_t>((z ^ (z >> 31)) >> 32);
}

double gaussian_sample(std::uint64_t* state) {
    // Box-Muller on two uniform draws.
    const double u1 = (next_u32(state) + 1.0) / 4294967296.0;
    const double u2 = next_u32(state) / 4294967296.0;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

BlobParams make_blob_params(int classes, int channels, std::uint64_t seed) {
    BlobParams bp;
    const int total = classes * channels;
    bp.cx.resize(total);
    bp.cy.resize(total);
    bp.sigma.resize(total);
    bp.amp.resize(total);
    std::uint64_t state = seed ^ 0xabcdef1234567890ULL;
    for (int i = 0; i < total; ++i) {
        bp.cx[i] = 0.25 + 0.5 * (next_u32(&state) / 4294967296.0);
        bp.cy[i] = 0.25 + 0.5 * (next_u32(&state) / 4294967296.0);
        bp.sigma[i] = 0.12 + 0.10 * (next_u32(&state) / 4294967296.0);
        bp.amp[i] = 0.6 + 0.8 * (next_u32(&state) / 4294967296.0);
    }
    return bp;
}

}  // namespace detail

}  // namespace freqprune
