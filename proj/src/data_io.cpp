#include "invrec/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "invrec/group.hpp"

namespace invrec {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", v);
    return buf;
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

LabeledDataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
    if (images.size() < 16) throw FormatError("IDX images: truncated header");
    if (labels.size() < 8) throw FormatError("IDX labels: truncated header");
    const auto img_magic = read_be32(images, 0);
    if (img_magic != 0x00000803) throw FormatError("IDX images: bad magic " + hex32(img_magic));
    const auto lbl_magic = read_be32(labels, 0);
    if (lbl_magic != 0x00000801) throw FormatError("IDX labels: bad magic " + hex32(lbl_magic));
    const std::size_t count = read_be32(images, 4);
    const int rows = static_cast<int>(read_be32(images, 8));
    const int cols = static_cast<int>(read_be32(images, 12));
    const std::size_t lcount = read_be32(labels, 4);
    if (count != lcount)
        throw FormatError("IDX: image count " + std::to_string(count) + " != label count " + std::to_string(lcount));
    if (rows <= 0 || cols <= 0) throw FormatError("IDX images: empty image dimensions");
    const std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (images.size() < 16 + count * px) throw FormatError("IDX images: truncated pixel data");
    if (labels.size() < 8 + count) throw FormatError("IDX labels: truncated label data");

    LabeledDataset ds;
    ds.grid = {rows, cols};
    ds.samples.reserve(count);
    ds.labels.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> v(px);
        for (std::size_t i = 0; i < px; ++i) v[i] = images[16 + k * px + i] / 255.0;
        ds.samples.emplace_back(ds.grid, std::move(v));
        ds.labels.push_back(labels[8 + k]);
    }
    return ds;
}

LabeledDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    auto img = read_file(images_path);
    auto lbl = read_file(labels_path);
    return parse_mnist_idx(img, lbl);
}

LabeledDataset parse_cifar10_bin(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t record = 3073, plane = 1024;
    if (bytes.size() % record != 0)
        throw FormatError("CIFAR-10: file size " + std::to_string(bytes.size()) + " is not a multiple of 3073");
    LabeledDataset ds;
    ds.grid = {32, 32};
    const std::size_t count = bytes.size() / record;
    for (std::size_t k = 0; k < count; ++k) {
        const auto* rec = bytes.data() + k * record;
        if (rec[0] > 9) throw FormatError("CIFAR-10: label byte " + std::to_string(rec[0]) + " out of range");
        std::vector<double> v(plane);
        for (std::size_t i = 0; i < plane; ++i)
            v[i] = (0.299 * rec[1 + i] + 0.587 * rec[1 + plane + i] + 0.114 * rec[1 + 2 * plane + i]) / 255.0;
        ds.samples.emplace_back(ds.grid, std::move(v));
        ds.labels.push_back(rec[0]);
    }
    return ds;
}

LabeledDataset load_cifar10_bin(const std::filesystem::path& path) { return parse_cifar10_bin(read_file(path)); }

LabelScheme parse_label_scheme(std::string_view s) {
    if (s == "parity") return LabelScheme::Parity;
    if (s == "animal_vehicle") return LabelScheme::AnimalVehicle;
    throw std::invalid_argument("unknown label scheme '" + std::string(s) + "'");
}

std::string_view to_string(LabelScheme s) { return s == LabelScheme::Parity ? "parity" : "animal_vehicle"; }

LabeledDataset binarize_labels(const LabeledDataset& data, LabelScheme scheme) {
    LabeledDataset out = data;
    for (int& y : out.labels) {
        if (y < 0 || y > 9) throw std::invalid_argument("binarize_labels: class id out of range");
        if (scheme == LabelScheme::Parity) {
            y = y % 2 == 0 ? 1 : -1;
        } else {
            // 0 airplane, 1 automobile, 8 ship, 9 truck are vehicles
            y = (y >= 2 && y <= 7) ? 1 : -1;
        }
    }
    return out;
}

namespace {

ImageTensor draw_blobs(std::mt19937_64& rng, Grid grid) {
    ImageTensor x(grid);
    std::uniform_real_distribution<double> ry(0.0, grid.height - 1.0), rx(0.0, grid.width - 1.0), rs(0.8, 2.0),
        ra(0.6, 1.0);
    for (int b = 0; b < 3; ++b) {
        const double cy = ry(rng), cx = rx(rng), s = rs(rng), a = ra(rng);
        for (int r = 0; r < grid.height; ++r)
            for (int c = 0; c < grid.width; ++c)
                x.at(r, c) += a * std::exp(-((r - cy) * (r - cy) + (c - cx) * (c - cx)) / (2 * s * s));
    }
    return x;
}

ImageTensor draw_stripe(std::mt19937_64& rng, Grid grid) {
    ImageTensor x(grid);
    std::uniform_real_distribution<double> ry(0.0, grid.height - 1.0), rx(0.0, grid.width - 1.0),
        ang(0.0, 3.14159265358979), len(0.3, 0.8);
    const double cy = ry(rng), cx = rx(rng), th = ang(rng);
    const double half = len(rng) * std::max(grid.height, grid.width) / 2.0;
    const double dy = std::sin(th), dx = std::cos(th);
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c) {
            const double py = r - cy, px = c - cx;
            const double along = std::clamp(py * dy + px * dx, -half, half);
            const double ey = py - along * dy, ex = px - along * dx;
            x.at(r, c) = std::exp(-(ey * ey + ex * ex) / (2 * 0.8 * 0.8));
        }
    return x;
}

bool has_nontrivial_stabilizer(const ImageTensor& x) {
    const Grid g = x.grid();
    const GroupSpec full = g.square() ? GroupSpec::make(GroupName::Dihedral4, g) : GroupSpec::make(GroupName::FlipH, g);
    return stabilizer_indices(x, full, 0.0).size() > 1;
}

}  // namespace

LabeledDataset synth_dataset(std::uint64_t seed, std::size_t n, Grid grid) {
    if (grid.height < 2 || grid.width < 2) throw DimensionError("synth_dataset: grid too small");
    LabeledDataset ds;
    ds.grid = grid;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
        const int y = k % 2 == 0 ? 1 : -1;
        std::uniform_real_distribution<double> target(y > 0 ? 0.24 : 0.08, y > 0 ? 0.34 : 0.16);
        for (;;) {
            ImageTensor x = y > 0 ? draw_blobs(rng, grid) : draw_stripe(rng, grid);
            const double mean = std::accumulate(x.values().begin(), x.values().end(), 0.0) / x.size();
            if (!(mean > 0)) continue;
            const double scale = target(rng) / mean;
            bool ok = true;
            for (double& v : x.values()) {
                v *= scale;
                if (v > 1.0) ok = false;
            }
            if (!ok || has_nontrivial_stabilizer(x)) continue;
            ds.samples.push_back(std::move(x));
            ds.labels.push_back(y);
            break;
        }
    }
    return ds;
}

ImageTensor downscale(const ImageTensor& x, Grid target) {
    const Grid g = x.grid();
    if (target.height <= 0 || target.width <= 0 || g.height % target.height != 0 || g.width % target.width != 0 ||
        g.height / target.height != g.width / target.width)
        throw DimensionError("downscale: " + std::to_string(g.height) + "x" + std::to_string(g.width) + " -> " +
                             std::to_string(target.height) + "x" + std::to_string(target.width) +
                             " is not an integer ratio");
    const int k = g.height / target.height;
    ImageTensor out(target);
    std::vector<double> block(static_cast<std::size_t>(k) * k);
    for (int r = 0; r < target.height; ++r)
        for (int c = 0; c < target.width; ++c) {
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) block[u * k + v] = x.at(r * k + u, c * k + v);
            out.at(r, c) = canonical_sum(block) / static_cast<double>(k * k);
        }
    return out;
}

LabeledDataset downscale(const LabeledDataset& data, Grid target) {
    LabeledDataset out;
    out.grid = target;
    out.labels = data.labels;
    out.samples.reserve(data.size());
    for (const auto& s : data.samples) out.samples.push_back(downscale(s, target));
    return out;
}

LabeledDataset select_subset(const LabeledDataset& data, std::size_t n, std::uint64_t seed) {
    data.validate_binary();
    if (n == 0) throw std::invalid_argument("select_subset: n must be >= 1");
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t want_pos = (n + 1) / 2, want_neg = n / 2;
    std::size_t pos = 0, neg = 0;
    LabeledDataset out;
    out.grid = data.grid;
    for (auto i : idx) {
        const bool positive = data.labels[i] > 0;
        if (positive ? pos >= want_pos : neg >= want_neg) continue;
        (positive ? pos : neg)++;
        out.samples.push_back(data.samples[i]);
        out.labels.push_back(data.labels[i]);
        if (out.size() == n) break;
    }
    if (out.size() != n) throw std::invalid_argument("select_subset: not enough samples per class");
    return out;
}

}  // namespace invrec
