#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "freqprune/errors.hpp"
#include "freqprune/tensor.hpp"

namespace freqprune {

template <typename T>
struct Dataset {
    Tensor<T> images;          // (n, c, h, w)
    std::vector<int> labels;   // size n
    int classes = 0;

    int size() const { return images.n; }
};

/// How to build a dataset. Parsed from a JSON file:
///   {"type": "cifar10", "dir": "...", "split": "train"|"test",
///    "mean": [r,g,b], "std": [r,g,b], "limit": 0}
///   {"type": "synthetic", "classes": 3, "count": 256, "channels": 3,
///    "height": 24, "width": 24, "seed": 7, "noise": 0.05}
struct DatasetSpec {
    std::string type;  // "cifar10" | "synthetic"
    // cifar10
    std::string dir;
    std::string split = "train";
    std::vector<double> mean, stddev;
    int limit = 0;  // 0 = all
    // synthetic
    int classes = 3;
    int count = 256;
    int channels = 3;
    int height = 24;
    int width = 24;
    std::uint64_t seed = 1;        // sample draw + noise
    std::uint64_t class_seed = 99;  // class templates; share across splits
    double noise = 0.05;

    static DatasetSpec load(const std::string& path);
};

namespace detail {
// Raw CIFAR-10 record stream: 1 label byte + 3072 pixel bytes, planar
// R/G/B, row-major 32x32.
struct RawCifar {
    std::vector<std::uint8_t> pixels;  // n * 3072
    std::vector<int> labels;
};
RawCifar read_cifar10_files(const std::vector<std::string>& paths, int limit);
std::vector<std::string> cifar10_split_files(const std::string& dir, const std::string& split);
}  // namespace detail

template <typename T>
Dataset<T> load_cifar10(const std::string& dir, const std::string& split,
                        const std::vector<double>& mean, const std::vector<double>& stddev,
                        int limit = 0) {
    const auto raw = detail::read_cifar10_files(detail::cifar10_split_files(dir, split), limit);
    const int n = static_cast<int>(raw.labels.size());
    if (n == 0) throw io_error("no CIFAR-10 records found under " + dir);
    Dataset<T> ds;
    ds.classes = 10;
    ds.labels = raw.labels;
    ds.images = Tensor<T>(n, 3, 32, 32);
    const bool norm = !mean.empty();
    if (norm && (mean.size() != 3 || stddev.size() != 3))
        throw validation_error("cifar10 normalization needs 3 mean and 3 std values");
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c)
            for (int p = 0; p < 1024; ++p) {
                double v = raw.pixels[static_cast<std::size_t>(i) * 3072 + c * 1024 + p] / 255.0;
                if (norm) v = (v - mean[c]) / stddev[c];
                ds.images.data[(static_cast<std::size_t>(i) * 3 + c) * 1024 + p] =
                    static_cast<T>(v);
            }
    return ds;
}

namespace detail {
// Class templates for the synthetic set: per (class, channel) a smooth bump
// with fixed center/width/amplitude drawn once from the seed.
struct BlobParams {
    std::vector<double> cx, cy, sigma, amp;  // classes * channels each
};
BlobParams make_blob_params(int classes, int channels, std::uint64_t seed);
double gaussian_sample(std::uint64_t* state);
std::uint32_t next_u32(std::uint64_t* state);
}  // namespace detail

/// Seeded smooth-blob classification set: each class is a distinct set of
/// per-channel Gaussian bumps plus pixel noise. Content is dominated by low
/// spatial frequencies, so frequency pruning has real room to work.
template <typename T>
Dataset<T> make_synthetic(const DatasetSpec& spec) {
    if (spec.classes < 2) throw validation_error("synthetic dataset needs >= 2 classes");
    if (spec.count < 1) throw validation_error("synthetic dataset needs count >= 1");
    Dataset<T> ds;
    ds.classes = spec.classes;
    ds.images = Tensor<T>(spec.count, spec.channels, spec.height, spec.width);
    ds.labels.resize(spec.count);
    const auto blobs = detail::make_blob_params(spec.classes, spec.channels, spec.class_seed);
    std::uint64_t state = spec.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;
    for (int i = 0; i < spec.count; ++i) {
        const int label = static_cast<int>(detail::next_u32(&state) % spec.classes);
        ds.labels[i] = label;
        for (int c = 0; c < spec.channels; ++c) {
            const std::size_t bi = static_cast<std::size_t>(label) * spec.channels + c;
            const double cx = blobs.cx[bi] * spec.width;
            const double cy = blobs.cy[bi] * spec.height;
            const double s2 = 2.0 * blobs.sigma[bi] * blobs.sigma[bi] * spec.width * spec.height;
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                    const double v = blobs.amp[bi] * std::exp(-d2 / s2) +
                                     spec.noise * detail::gaussian_sample(&state);
                    ds.images.at(i, c, y, x) = static_cast<T>(v);
                }
        }
    }
    return ds;
}

template <typename T>
Dataset<T> load_dataset(const DatasetSpec& spec) {
    if (spec.type == "synthetic") return make_synthetic<T>(spec);
    if (spec.type == "cifar10")
        return load_cifar10<T>(spec.dir, spec.split, spec.mean, spec.stddev, spec.limit);
    throw validation_error("unknown dataset type: " + spec.type);
}

}  // namespace freqprune
