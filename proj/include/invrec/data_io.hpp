#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "invrec/dataset.hpp"

namespace invrec {

/// Big-endian IDX pair: images magic 0x00000803, labels magic 0x00000801.
/// Pixels are scaled by 1/255; labels are kept as class ids.
LabeledDataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);
LabeledDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// CIFAR-10 binary v1: 3073-byte records (label, 1024 R, 1024 G, 1024 B),
/// converted to grayscale (0.299 R + 0.587 G + 0.114 B) / 255 on a 32x32 grid.
LabeledDataset parse_cifar10_bin(std::span<const std::uint8_t> bytes);
LabeledDataset load_cifar10_bin(const std::filesystem::path& path);

enum class LabelScheme { Parity, AnimalVehicle };

LabelScheme parse_label_scheme(std::string_view s);
std::string_view to_string(LabelScheme s);

/// parity: even digit -> +1, odd -> -1.
/// animal_vehicle: bird, cat, deer, dog, frog, horse -> +1; airplane,
/// automobile, ship, truck -> -1.
LabeledDataset binarize_labels(const LabeledDataset& data, LabelScheme scheme);

/// Seeded blob (+1) and stripe (-1) images in [0, 1]. Class +1 has mean
/// intensity in [0.24, 0.34], class -1 in [0.08, 0.16], so the classes are
/// separable by total intensity (a permutation-invariant feature). Draws fixed
/// by any non-identity D4 element (or flip_h on non-square grids) are resampled.
LabeledDataset synth_dataset(std::uint64_t seed, std::size_t n, Grid grid);

/// k x k block averaging for an integer ratio k = H / target.H = W / target.W.
LabeledDataset downscale(const LabeledDataset& data, Grid target);
ImageTensor downscale(const ImageTensor& x, Grid target);

/// Seeded class-balanced subset of a +1/-1 dataset: ceil(n/2) positives and
/// floor(n/2) negatives in shuffled order. Throws if a class runs short.
LabeledDataset select_subset(const LabeledDataset& data, std::size_t n, std::uint64_t seed);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace invrec
