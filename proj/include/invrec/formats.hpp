#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "invrec/invariant_model.hpp"

namespace invrec {

// ---------------------------------------------------------------------------
// Checkpoint (.girn), little-endian:
//   "GIRN" | u32 version (=1) | u32 d | u32 h1 | u32 h2
//   | u32 name_len | name bytes (group name) | f64 theta[p] (ParamVector order)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string group_name;
    ParamVector params;
};

std::vector<std::uint8_t> encode_checkpoint(const ParamVector& params, std::string_view group_name);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const InvariantModel& model);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reconstruction (.grec), little-endian:
//   "GREC" | u32 m | u32 d | u32 height | u32 width
//   | f64 candidates[m * d] (candidate-major) | f64 lambdas[m]
// ---------------------------------------------------------------------------

struct ReconstructionFile {
    Grid grid;
    std::vector<ImageTensor> candidates;
    std::vector<double> lambdas;
};

std::vector<std::uint8_t> encode_reconstruction(const std::vector<ImageTensor>& candidates,
                                                std::span<const double> lambdas);
ReconstructionFile decode_reconstruction(std::span<const std::uint8_t> bytes);
void save_reconstruction(const std::filesystem::path& path, const std::vector<ImageTensor>& candidates,
                         std::span<const double> lambdas);
ReconstructionFile load_reconstruction(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// PGM P5, maxval 255; byte = floor(clamp(v, 0, 1) * 255 + 0.5).
// ---------------------------------------------------------------------------

std::uint8_t to_byte(double v);
std::vector<std::uint8_t> encode_pgm(const ImageTensor& img);
void write_pgm(const std::filesystem::path& path, const ImageTensor& img);

/// Tiles images left-to-right, top-to-bottom into `columns` columns with a
/// one-pixel gutter of value `gutter`. Empty tiles are left at the gutter value.
ImageTensor tile_images(const std::vector<ImageTensor>& images, int columns, double gutter = 0.5);

// ---------------------------------------------------------------------------
// CSV: header row, comma separator, fields quoted only when they contain a
// comma, quote or newline (quotes doubled).
// ---------------------------------------------------------------------------

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

std::string csv_escape(const std::string& field);
/// Shortest round-trippable decimal form.
std::string fmt_double(double v);

}  // namespace invrec
