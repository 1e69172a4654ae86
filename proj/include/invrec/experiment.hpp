#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "invrec/config.hpp"
#include "invrec/dataset.hpp"
#include "invrec/evaluation.hpp"
#include "invrec/invariant_model.hpp"
#include "invrec/trainer.hpp"

namespace invrec {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2, kExitVerify = 3 };

/// Loads, binarizes, downscales and subsets the configured dataset to n
/// samples with +1/-1 labels.
LabeledDataset load_dataset(const DatasetConfig& config, std::size_t n);

struct TrainedModel {
    InvariantModel model;
    TrainResult result;
    KktFit kkt;
};

/// Random init from config.train.seed, then full-batch GD.
TrainedModel train_model(const ExperimentConfig& config, const GroupSpec& group, const LabeledDataset& data);

/// Candidates and lambdas from the selected method, deterministic per seed.
ReconstructionState run_method(const InvariantModel& model, const ExperimentConfig& config, Method method,
                               std::uint64_t seed);

struct RunSummary {
    Method method = Method::KKT;
    std::string group;
    std::size_t n = 0;
    std::size_t m = 0;
    std::uint64_t seed = 0;
    double mean_dssim = 0.0;
    double symmetry_score = 0.0;
    double data_symmetry_score = 0.0;  ///< of the normalized training samples
};

/// Options common to every subcommand (command-line overrides).
struct RunOptions {
    std::optional<std::uint64_t> seed;            ///< overrides train.seed and seeds
    std::optional<std::filesystem::path> out;     ///< overrides output_dir
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> recon;
    int jobs = 1;
    bool quiet = false;
};

/// config with command-line overrides applied.
ExperimentConfig apply_options(ExperimentConfig config, const RunOptions& options);

/// Each command writes config.resolved.json into the output directory and
/// returns an ExitCode. Errors are reported on `err`.
int cmd_train(const ExperimentConfig& config, const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_reconstruct(const ExperimentConfig& config, const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_evaluate(const ExperimentConfig& config, const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_verify(std::uint64_t seed, int seeds, std::ostream& out, bool quiet);
int cmd_sweep(const ExperimentConfig& config, const RunOptions& options, std::ostream& out, std::ostream& err);

/// Evaluates one reconstruction and writes matches.csv, summary.csv,
/// histogram.csv and sheets/*.pgm into dir.
RunSummary write_evaluation(const std::filesystem::path& dir, const std::vector<ImageTensor>& candidates,
                            const LabeledDataset& data, const GroupSpec& group, const ExperimentConfig& config,
                            Method method, std::uint64_t seed);

inline constexpr const char* kSummaryHeader = "method,group,n,m,seed,mean_dssim,symmetry_score";
inline constexpr const char* kSweepHeader =
    "method,group,n,m,seeds,mean_dssim_mean,mean_dssim_std,symmetry_score_mean,symmetry_score_std,status";

}  // namespace invrec
