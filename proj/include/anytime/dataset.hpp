#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "anytime/matrix.hpp"
#include "anytime/network.hpp"

namespace anytime {

/// Labeled classification data, one sample per row.
struct Dataset {
    Matrix inputs;
    std::vector<int> labels;
    std::size_t classes = 0;

    std::size_t size() const noexcept { return inputs.rows(); }
    std::size_t dim() const noexcept { return inputs.cols(); }
};

enum class SyntheticKind { Blobs, Spirals, Concentric };

std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view name);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::Spirals;
    std::size_t n = 2000;
    std::size_t classes = 3;
    double noise = 0.1;
    double turns = 2.0;  // spirals only
    std::uint64_t seed = 1;
};

void validate(const SyntheticSpec& spec);

/// K-class 2-D data of graded difficulty, Gaussian noise added to every point.
/// BLOBS: unit discs centred on a circle of radius 2. CONCENTRIC: rings of
/// radius 1..K. SPIRALS: K interleaved arms r = 0.2 + 2.8t winding `turns`
/// times. Labels cycle through the classes so they stay balanced.
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Gathers the given rows into a batch; targets are one-hot labels.
Batch make_batch(const Dataset& data, std::span<const std::size_t> rows);

/// The whole dataset as a single batch.
Batch full_batch(const Dataset& data);

}  // namespace anytime
