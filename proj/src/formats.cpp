#include "invrec/formats.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "invrec/data_io.hpp"

namespace invrec {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> b, const char* what) : b_(b), what_(what) {}
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated file");
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t{b_[pos_ + k]} << (8 * k);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= std::uint64_t{b_[pos_ + k]} << (8 * k);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    void expect_end() const {
        if (pos_ != b_.size()) throw FormatError(std::string(what_) + ": trailing bytes");
    }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
    const char* what_;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamVector& params, std::string_view group_name) {
    ByteWriter w;
    w.bytes("GIRN");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.arch().d));
    w.u32(static_cast<std::uint32_t>(params.arch().h1));
    w.u32(static_cast<std::uint32_t>(params.arch().h2));
    w.u32(static_cast<std::uint32_t>(group_name.size()));
    w.bytes(group_name);
    for (double v : params.theta()) w.f64(v);
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "checkpoint");
    if (r.bytes(4) != "GIRN") throw FormatError("checkpoint: bad magic");
    const auto version = r.u32();
    if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    Arch arch;
    arch.d = static_cast<int>(r.u32());
    arch.h1 = static_cast<int>(r.u32());
    arch.h2 = static_cast<int>(r.u32());
    if (arch.d <= 0 || arch.h1 <= 0 || arch.h2 <= 0) throw FormatError("checkpoint: invalid architecture");
    const auto len = r.u32();
    if (len > 64) throw FormatError("checkpoint: group name too long");
    Checkpoint ck;
    ck.group_name = r.bytes(len);
    r.need(arch.param_count() * 8);
    std::vector<double> theta(arch.param_count());
    for (auto& v : theta) v = r.f64();
    r.expect_end();
    ck.params = ParamVector(arch, std::move(theta));
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const InvariantModel& model) {
    write_file(path, encode_checkpoint(model.params(), to_string(model.group().name())));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

std::vector<std::uint8_t> encode_reconstruction(const std::vector<ImageTensor>& candidates,
                                                std::span<const double> lambdas) {
    if (candidates.empty()) throw std::invalid_argument("reconstruction file: no candidates");
    if (lambdas.size() != candidates.size()) throw DimensionError("reconstruction file: one lambda per candidate");
    const Grid grid = candidates[0].grid();
    ByteWriter w;
    w.bytes("GREC");
    w.u32(static_cast<std::uint32_t>(candidates.size()));
    w.u32(static_cast<std::uint32_t>(grid.size()));
    w.u32(static_cast<std::uint32_t>(grid.height));
    w.u32(static_cast<std::uint32_t>(grid.width));
    for (const auto& c : candidates) {
        if (c.grid() != grid) throw DimensionError("reconstruction file: candidates differ in grid");
        for (double v : c.values()) w.f64(v);
    }
    for (double l : lambdas) w.f64(l);
    return w.take();
}

ReconstructionFile decode_reconstruction(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "reconstruction");
    if (r.bytes(4) != "GREC") throw FormatError("reconstruction: bad magic");
    const std::size_t m = r.u32(), d = r.u32();
    ReconstructionFile f;
    f.grid.height = static_cast<int>(r.u32());
    f.grid.width = static_cast<int>(r.u32());
    if (f.grid.height <= 0 || f.grid.width <= 0 || f.grid.size() != d)
        throw FormatError("reconstruction: grid does not match d");
    r.need(m * (d + 1) * 8);
    f.candidates.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = r.f64();
        f.candidates.emplace_back(f.grid, std::move(v));
    }
    f.lambdas.resize(m);
    for (auto& l : f.lambdas) l = r.f64();
    r.expect_end();
    return f;
}

void save_reconstruction(const std::filesystem::path& path, const std::vector<ImageTensor>& candidates,
                         std::span<const double> lambdas) {
    write_file(path, encode_reconstruction(candidates, lambdas));
}

ReconstructionFile load_reconstruction(const std::filesystem::path& path) {
    return decode_reconstruction(read_file(path));
}

std::uint8_t to_byte(double v) {
    if (!(v > 0.0)) return 0;  // also maps NaN to 0
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

std::vector<std::uint8_t> encode_pgm(const ImageTensor& img) {
    const std::string header =
        "P5\n" + std::to_string(img.grid().width) + " " + std::to_string(img.grid().height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.size());
    for (double v : img.values()) out.push_back(to_byte(v));
    return out;
}

void write_pgm(const std::filesystem::path& path, const ImageTensor& img) { write_file(path, encode_pgm(img)); }

ImageTensor tile_images(const std::vector<ImageTensor>& images, int columns, double gutter) {
    if (images.empty() || columns < 1) throw std::invalid_argument("tile_images: need images and columns >= 1");
    const Grid g = images[0].grid();
    const int cols = std::min<int>(columns, static_cast<int>(images.size()));
    const int rows = static_cast<int>((images.size() + cols - 1) / cols);
    Grid sheet{rows * (g.height + 1) + 1, cols * (g.width + 1) + 1};
    ImageTensor out(sheet, std::vector<double>(sheet.size(), gutter));
    for (std::size_t k = 0; k < images.size(); ++k) {
        if (images[k].grid() != g) throw DimensionError("tile_images: images differ in grid");
        const int r0 = static_cast<int>(k / cols) * (g.height + 1) + 1;
        const int c0 = static_cast<int>(k % cols) * (g.width + 1) + 1;
        for (int r = 0; r < g.height; ++r)
            for (int c = 0; c < g.width; ++c) out.at(r0 + r, c0 + c) = images[k].at(r, c);
    }
    return out;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
}

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace invrec
