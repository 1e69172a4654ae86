#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "invrec/data_io.hpp"
#include "invrec/dip.hpp"
#include "invrec/evaluation.hpp"
#include "invrec/group.hpp"
#include "invrec/reconstruction.hpp"
#include "invrec/trainer.hpp"

namespace invrec {

inline constexpr int kConfigVersion = 1;

/// Invalid or unreadable experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Method { AM, KKT, KktSameGd, KktDip };

Method parse_method(std::string_view s);
std::string_view to_string(Method m);

enum class DatasetKind { MnistIdx, Cifar10Bin, Synthetic };

DatasetKind parse_dataset_kind(std::string_view s);
std::string_view to_string(DatasetKind k);

struct DatasetConfig {
    DatasetKind kind = DatasetKind::Synthetic;
    std::filesystem::path images;   ///< mnist_idx
    std::filesystem::path labels;   ///< mnist_idx
    std::filesystem::path path;     ///< cifar10_bin
    LabelScheme label_scheme = LabelScheme::Parity;
    std::size_t n = 20;
    std::uint64_t seed = 0;         ///< subset selection / synthesis
    Grid grid{0, 0};                ///< downscale target (synthetic: image grid); 0 keeps native
};

/// Optional per-method overrides of the shared reconstruction settings.
struct GdOverrides {
    std::optional<long> steps;
    std::optional<double> lr;
    std::optional<double> lr_lambda;
    std::optional<Projection> projection;
    std::optional<double> radius;
    std::optional<double> lambda_init_max;
};

struct SweepAxes {
    std::vector<std::string> groups;
    std::vector<std::size_t> ns;
    std::vector<Method> methods;
};

struct ExperimentConfig {
    int version = kConfigVersion;
    DatasetConfig dataset;
    std::string group = "flip_h";
    int h1 = 64;
    int h2 = 64;
    TrainConfig train;
    Method method = Method::KKT;
    GdConfig reconstruct;                    ///< objective is set by the method
    bool projection_set = false;             ///< false: am -> box01, kkt* -> none
    std::vector<std::pair<Method, GdOverrides>> overrides;
    SameGdConfig same_gd;                    ///< T follows the resolved step count
    DipConfig dip;
    EvalOptions evaluate;
    std::size_t m = 0;                       ///< 0 selects 4 n
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output_dir = "runs/default";
    SweepAxes sweep;

    std::size_t candidates() const { return m == 0 ? 4 * dataset.n : m; }
    /// Reconstruction settings after method defaults and overrides.
    GdConfig gd_for(Method method) const;
    SameGdConfig same_gd_for(Method method) const;
};

/// Parses and validates a config document; unknown keys are rejected.
/// Relative dataset paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config (every default spelled out) as pretty JSON.
std::string dump_config(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

}  // namespace invrec
