#include "anytime/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace anytime {

std::string_view to_string(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::Blobs: return "blobs";
        case SyntheticKind::Spirals: return "spirals";
        case SyntheticKind::Concentric: return "concentric";
    }
    return "unknown";
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "blobs") return SyntheticKind::Blobs;
    if (s == "spirals") return SyntheticKind::Spirals;
    if (s == "concentric") return SyntheticKind::Concentric;
    throw std::invalid_argument("unknown synthetic dataset '" + std::string(name) + "'");
}

void validate(const SyntheticSpec& spec) {
    if (spec.n < 10) throw std::invalid_argument("synthetic datasets need n >= 10");
    if (spec.classes < 2) throw std::invalid_argument("synthetic datasets need at least 2 classes");
    if (spec.n < spec.classes) throw std::invalid_argument("synthetic datasets need n >= classes");
    if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw std::invalid_argument("noise must be finite and >= 0");
    if (!(spec.turns > 0.0) || !std::isfinite(spec.turns)) throw std::invalid_argument("turns must be finite and > 0");
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr double pi = std::numbers::pi;
    const std::size_t k = spec.classes;

    Dataset d{Matrix(spec.n, 2), std::vector<int>(spec.n), k};
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t label = i % k;
        const double phase = 2.0 * pi * static_cast<double>(label) / static_cast<double>(k);
        double x = 0.0, y = 0.0;
        switch (spec.kind) {
            case SyntheticKind::Blobs: {
                const double r = std::sqrt(unit(rng));
                const double a = 2.0 * pi * unit(rng);
                x = 2.0 * std::cos(phase) + r * std::cos(a);
                y = 2.0 * std::sin(phase) + r * std::sin(a);
                break;
            }
            case SyntheticKind::Concentric: {
                const double a = 2.0 * pi * unit(rng);
                const double r = 1.0 + static_cast<double>(label);
                x = r * std::cos(a);
                y = r * std::sin(a);
                break;
            }
            case SyntheticKind::Spirals: {
                const double t = unit(rng);
                const double a = 2.0 * pi * spec.turns * t + phase;
                const double r = 0.2 + 2.8 * t;
                x = r * std::cos(a);
                y = r * std::sin(a);
                break;
            }
        }
        d.inputs(i, 0) = x + spec.noise * gauss(rng);
        d.inputs(i, 1) = y + spec.noise * gauss(rng);
        d.labels[i] = static_cast<int>(label);
    }
    return d;
}

namespace {

std::uint32_t read_be32(std::istream& is, const std::filesystem::path& path, const char* field) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4))
        throw std::runtime_error("IDX file '" + path.string() + "' truncated while reading " + field);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::vector<unsigned char> read_payload(std::istream& is, std::size_t bytes, const std::filesystem::path& path) {
    std::vector<unsigned char> buf(bytes);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes)))
        throw std::runtime_error("IDX file '" + path.string() + "' truncated: expected " + std::to_string(bytes) +
                                 " payload bytes, got " + std::to_string(is.gcount()));
    return buf;
}

std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open IDX file '" + path.string() + "'");
    return is;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    constexpr std::uint32_t kImageMagic = 0x00000803;
    constexpr std::uint32_t kLabelMagic = 0x00000801;

    auto img = open_binary(images_path);
    const auto img_magic = read_be32(img, images_path, "magic");
    if (img_magic != kImageMagic)
        throw std::runtime_error("IDX image file '" + images_path.string() + "' has bad magic " +
                                 std::to_string(img_magic) + " (expected 2051)");
    const std::size_t count = read_be32(img, images_path, "image count");
    const std::size_t rows = read_be32(img, images_path, "row count");
    const std::size_t cols = read_be32(img, images_path, "column count");

    auto lbl = open_binary(labels_path);
    const auto lbl_magic = read_be32(lbl, labels_path, "magic");
    if (lbl_magic != kLabelMagic)
        throw std::runtime_error("IDX label file '" + labels_path.string() + "' has bad magic " +
                                 std::to_string(lbl_magic) + " (expected 2049)");
    const std::size_t label_count = read_be32(lbl, labels_path, "label count");
    if (label_count != count)
        throw std::runtime_error("IDX count mismatch: " + std::to_string(count) + " images vs " +
                                 std::to_string(label_count) + " labels");

    const std::size_t dim = rows * cols;
    const auto pixels = read_payload(img, count * dim, images_path);
    const auto labels = read_payload(lbl, count, labels_path);

    Dataset d{Matrix(count, dim), std::vector<int>(count), 0};
    for (std::size_t i = 0; i < count * dim; ++i) d.inputs.values()[i] = pixels[i] / 255.0;
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        d.labels[i] = labels[i];
        max_label = std::max(max_label, d.labels[i]);
    }
    d.classes = count == 0 ? 0 : static_cast<std::size_t>(max_label) + 1;
    return d;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows) {
    Batch b{Matrix(rows.size(), data.dim()), std::vector<int>(rows.size()), Matrix(rows.size(), data.classes)};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = data.inputs.row(rows[i]);
        std::copy(src.begin(), src.end(), b.inputs.row(i).begin());
        b.labels[i] = data.labels[rows[i]];
        const auto label = static_cast<std::size_t>(b.labels[i]);
        if (label < data.classes) b.targets(i, label) = 1.0;
    }
    return b;
}

Batch full_batch(const Dataset& data) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return make_batch(data, all);
}

}  // namespace anytime
