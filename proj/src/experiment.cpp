#include "invrec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "invrec/data_io.hpp"
#include "invrec/dip.hpp"
#include "invrec/formats.hpp"
#include "invrec/verify.hpp"

namespace invrec {

namespace fs = std::filesystem;

LabeledDataset load_dataset(const DatasetConfig& c, std::size_t n) {
    if (c.kind == DatasetKind::Synthetic) return synth_dataset(c.seed, n, c.grid);
    LabeledDataset raw = c.kind == DatasetKind::MnistIdx ? load_mnist_idx(c.images, c.labels)
                                                         : load_cifar10_bin(c.path);
    LabeledDataset bin = binarize_labels(raw, c.label_scheme);
    if (c.grid.height > 0 && c.grid.width > 0 && !(c.grid == bin.grid)) bin = downscale(bin, c.grid);
    return select_subset(bin, n, c.seed);
}

TrainedModel train_model(const ExperimentConfig& config, const GroupSpec& group, const LabeledDataset& data) {
    const Arch arch{static_cast<int>(data.grid.size()), config.h1, config.h2};
    ParamVector init = ParamVector::random_init(arch, config.train.seed);
    for (double& v : init.theta()) v *= config.train.init_scale;
    InvariantModel model(std::move(init), group);
    TrainResult result = train(model, data, config.train);
    KktFit kkt = kkt_residual(model, data);
    return {std::move(model), std::move(result), std::move(kkt)};
}

ReconstructionState run_method(const InvariantModel& model, const ExperimentConfig& config, Method method,
                               std::uint64_t seed) {
    const GdConfig gd = config.gd_for(method);
    const std::size_t m = config.candidates();
    switch (method) {
        case Method::AM:
        case Method::KKT: return reconstruct_gd(model, gd, m, seed);
        case Method::KktSameGd: return reconstruct_same_gd(model, gd, config.same_gd_for(method), m, seed);
        case Method::KktDip: return reconstruct_dip(model, config.dip, gd, m, seed).state;
    }
    throw std::logic_error("run_method: bad method");
}

ExperimentConfig apply_options(ExperimentConfig config, const RunOptions& options) {
    if (options.seed) {
        config.train.seed = *options.seed;
        config.seeds = {*options.seed};
    }
    if (options.out) config.output_dir = *options.out;
    return config;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_resolved(const ExperimentConfig& config) {
    write_text(config.output_dir / "config.resolved.json", dump_config(config));
}

int columns_for(std::size_t count) {
    return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))));
}

std::vector<ImageTensor> normalized(const std::vector<ImageTensor>& images) {
    std::vector<ImageTensor> out;
    out.reserve(images.size());
    for (const auto& x : images) out.push_back(normalize(x, Normalization::MinMax));
    return out;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads.
template <class F>
void run_parallel(std::size_t count, int jobs, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

RunSummary write_evaluation(const fs::path& dir, const std::vector<ImageTensor>& candidates,
                            const LabeledDataset& data, const GroupSpec& group, const ExperimentConfig& config,
                            Method method, std::uint64_t seed) {
    const EvalReport report = evaluate(candidates, data, group, config.evaluate);
    RunSummary s{method, std::string(to_string(group.name())), data.size(), candidates.size(), seed,
                 report.mean_dssim, report.symmetry_score, symmetry_score(report.reference.samples, group)};

    std::ostringstream matches;
    CsvWriter mcsv(matches);
    mcsv.row({"candidate_id", "nn_index", "best_g", "dssim", "l2"});
    for (std::size_t c = 0; c < report.match.matches.size(); ++c) {
        const Match& mt = report.match.matches[c];
        mcsv.row({std::to_string(c), std::to_string(mt.nn_index), group[mt.best_g].label, fmt_double(mt.dssim),
                  fmt_double(mt.l2)});
    }
    write_text(dir / "matches.csv", matches.str());

    std::ostringstream summary;
    CsvWriter scsv(summary);
    summary << kSummaryHeader << '\n';
    scsv.row({std::string(to_string(method)), s.group, std::to_string(s.n), std::to_string(s.m),
              std::to_string(seed), fmt_double(s.mean_dssim), fmt_double(s.symmetry_score)});
    write_text(dir / "summary.csv", summary.str());

    std::ostringstream hist;
    CsvWriter hcsv(hist);
    hcsv.row({"bin_weights", "count"});
    for (const auto& [weights, count] : report.histogram) {
        std::string w;
        for (std::size_t k = 0; k < weights.size(); ++k) w += (k ? " " : "") + std::to_string(weights[k]);
        hcsv.row({w, std::to_string(count)});
    }
    write_text(dir / "histogram.csv", hist.str());

    // candidate next to its best-aligned training sample
    std::vector<ImageTensor> pairs;
    for (std::size_t c = 0; c < report.evaluated.size(); ++c) {
        const Match& mt = report.match.matches[c];
        pairs.push_back(report.evaluated[c]);
        pairs.push_back(apply(group[mt.best_g], report.reference.samples[mt.nn_index]));
    }
    const int cols = columns_for(report.evaluated.size());
    write_pgm(dir / "sheets" / "candidates.pgm", tile_images(report.evaluated, cols));
    write_pgm(dir / "sheets" / "matches.pgm", tile_images(pairs, 2 * cols));
    write_pgm(dir / "sheets" / "training.pgm", tile_images(report.reference.samples, columns_for(data.size())));
    return s;
}

int cmd_train(const ExperimentConfig& base, const RunOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig config = apply_options(base, options);
        write_resolved(config);
        const LabeledDataset data = load_dataset(config.dataset, config.dataset.n);
        const GroupSpec group = GroupSpec::make(config.group, data.grid);
        const auto t0 = std::chrono::steady_clock::now();
        TrainedModel tm = train_model(config, group, data);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        save_checkpoint(config.output_dir / "checkpoint.girn", tm.model);
        std::ostringstream hist;
        CsvWriter csv(hist);
        csv.row({"epoch", "loss", "accuracy", "min_margin"});
        for (const auto& r : tm.result.history)
            csv.row({std::to_string(r.epoch), fmt_double(r.loss), fmt_double(r.accuracy), fmt_double(r.min_margin)});
        write_text(config.output_dir / "history.csv", hist.str());

        if (!options.quiet)
            out << "trained " << config.group << " n=" << data.size() << " d=" << data.grid.size() << " in "
                << tm.result.epochs_run << " epochs (" << secs << " s)\n";
        out << "loss=" << tm.result.final.loss << " accuracy=" << tm.result.final.accuracy
            << " min_margin=" << tm.result.final.min_margin << " kkt_residual=" << tm.kkt.residual << '\n';
        return kExitOk;
    });
}

int cmd_reconstruct(const ExperimentConfig& base, const RunOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig config = apply_options(base, options);
        write_resolved(config);
        const fs::path ckpt_path = options.checkpoint.value_or(config.output_dir / "checkpoint.girn");
        Checkpoint ckpt = load_checkpoint(ckpt_path);
        if (ckpt.group_name != config.group)
            throw ConfigError("checkpoint group '" + ckpt.group_name + "' does not match config group '" +
                              config.group + "'");
        const LabeledDataset data = load_dataset(config.dataset, config.dataset.n);
        if (static_cast<std::size_t>(ckpt.params.arch().d) != data.grid.size())
            throw ConfigError("checkpoint input size " + std::to_string(ckpt.params.arch().d) +
                              " does not match dataset grid");
        const InvariantModel model(std::move(ckpt.params), GroupSpec::make(config.group, data.grid));
        const std::uint64_t seed = config.seeds.front();
        const ReconstructionState st = run_method(model, config, config.method, seed);

        const fs::path recon_path = options.recon.value_or(config.output_dir / "recon.grec");
        save_reconstruction(recon_path, st.candidates, st.lambdas);
        write_pgm(config.output_dir / "sheets" / "reconstruction.pgm",
                  tile_images(normalized(st.candidates), columns_for(st.size())));
        const double loss = objective_value(config.gd_for(config.method).objective, model, st.candidates, st.lambdas,
                                            st.labels);
        if (!options.quiet)
            out << to_string(config.method) << " seed=" << seed << " m=" << st.size() << " steps=" << st.step
                << '\n';
        out << "objective=" << loss << " -> " << recon_path.string() << '\n';
        return kExitOk;
    });
}

int cmd_evaluate(const ExperimentConfig& base, const RunOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig config = apply_options(base, options);
        write_resolved(config);
        const ReconstructionFile rf = load_reconstruction(options.recon.value_or(config.output_dir / "recon.grec"));
        const LabeledDataset data = load_dataset(config.dataset, config.dataset.n);
        if (!(rf.grid == data.grid))
            throw DimensionError("reconstruction grid " + std::to_string(rf.grid.height) + "x" +
                                 std::to_string(rf.grid.width) + " does not match dataset grid " +
                                 std::to_string(data.grid.height) + "x" + std::to_string(data.grid.width));
        const GroupSpec group = GroupSpec::make(config.group, data.grid);
        const RunSummary s =
            write_evaluation(config.output_dir, rf.candidates, data, group, config, config.method, config.seeds.front());
        out << "mean_dssim=" << s.mean_dssim << " symmetry_score=" << s.symmetry_score << " (training data "
            << s.data_symmetry_score << ")\n";
        return kExitOk;
    });
}

int cmd_verify(std::uint64_t seed, int seeds, std::ostream& out, bool quiet) {
    bool ok = true;
    std::size_t checks = 0, failed = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < seeds; ++k) {
        VerifyConfig vc;
        vc.seed = seed + static_cast<std::uint64_t>(k);
        const VerifyReport report = run_verification(vc);
        checks += report.checks.size();
        for (const auto& c : report.checks) failed += c.passed ? 0 : 1;
        ok = ok && report.all_passed();
        if (!quiet || !report.all_passed()) {
            out << "seed " << vc.seed << ":\n";
            report.print(out);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << (ok ? "verification passed: " : "verification FAILED: ") << checks - failed << "/" << checks
        << " checks over " << seeds << " seed(s) in " << secs << " s\n";
    return ok ? kExitOk : kExitVerify;
}

int cmd_sweep(const ExperimentConfig& base, const RunOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig config = apply_options(base, options);
        write_resolved(config);
        const std::vector<std::string> groups =
            config.sweep.groups.empty() ? std::vector<std::string>{config.group} : config.sweep.groups;
        const std::vector<std::size_t> ns =
            config.sweep.ns.empty() ? std::vector<std::size_t>{config.dataset.n} : config.sweep.ns;
        const std::vector<Method> methods =
            config.sweep.methods.empty() ? std::vector<Method>{config.method} : config.sweep.methods;

        struct Model {
            std::string group;
            std::size_t n;
            std::optional<LabeledDataset> data;
            std::optional<InvariantModel> model;
            std::string error;
        };
        std::vector<Model> models;
        for (const auto& g : groups)
            for (auto n : ns) models.push_back({g, n, {}, {}, {}});

        std::mutex log_mu;
        auto log = [&](const std::string& line) {
            if (options.quiet) return;
            std::lock_guard lock(log_mu);
            out << line << std::flush;
        };

        run_parallel(models.size(), options.jobs, [&](std::size_t i) {
            Model& md = models[i];
            try {
                ExperimentConfig cell = config;
                cell.group = md.group;
                cell.dataset.n = md.n;
                LabeledDataset data = load_dataset(cell.dataset, md.n);
                const GroupSpec group = GroupSpec::make(md.group, data.grid);
                TrainedModel tm = train_model(cell, group, data);
                save_checkpoint(config.output_dir / "models" / (md.group + "_n" + std::to_string(md.n)) /
                                    "checkpoint.girn",
                                tm.model);
                std::ostringstream msg;
                msg << "trained " << md.group << " n=" << md.n << " accuracy=" << tm.result.final.accuracy
                    << " kkt_residual=" << tm.kkt.residual << '\n';
                log(msg.str());
                md.data = std::move(data);
                md.model = std::move(tm.model);
            } catch (const std::exception& e) {
                md.error = std::string("training failed: ") + e.what();
            }
        });

        struct Cell {
            std::size_t model;
            Method method;
            std::vector<double> dssim, symmetry;
            std::string status = "ok";
        };
        std::vector<Cell> cells;
        for (std::size_t i = 0; i < models.size(); ++i)
            for (Method m : methods) cells.push_back({i, m, {}, {}, "ok"});

        run_parallel(cells.size(), options.jobs, [&](std::size_t i) {
            Cell& cell = cells[i];
            const Model& md = models[cell.model];
            if (!md.model) {
                cell.status = md.error;
                return;
            }
            try {
                ExperimentConfig cc = config;
                cc.group = md.group;
                cc.dataset.n = md.n;
                const fs::path dir = config.output_dir / "cells" /
                                     (std::string(to_string(cell.method)) + "_" + md.group + "_n" + std::to_string(md.n));
                for (std::uint64_t seed : config.seeds) {
                    const ReconstructionState st = run_method(*md.model, cc, cell.method, seed);
                    const fs::path sd = dir / ("seed" + std::to_string(seed));
                    save_reconstruction(sd / "recon.grec", st.candidates, st.lambdas);
                    const RunSummary s =
                        write_evaluation(sd, st.candidates, *md.data, md.model->group(), cc, cell.method, seed);
                    cell.dssim.push_back(s.mean_dssim);
                    cell.symmetry.push_back(s.symmetry_score);
                }
                std::ostringstream msg;
                msg << to_string(cell.method) << " " << md.group << " n=" << md.n
                    << " mean_dssim=" << mean_of(cell.dssim) << '\n';
                log(msg.str());
            } catch (const std::exception& e) {
                cell.status = std::string("failed: ") + e.what();
            }
        });

        std::ostringstream csv_text;
        CsvWriter csv(csv_text);
        csv_text << kSweepHeader << '\n';
        for (const Cell& cell : cells) {
            const Model& md = models[cell.model];
            ExperimentConfig cc = config;
            cc.dataset.n = md.n;
            std::string seeds;
            for (std::size_t k = 0; k < config.seeds.size(); ++k)
                seeds += (k ? " " : "") + std::to_string(config.seeds[k]);
            const bool ok = cell.status == "ok" && !cell.dssim.empty();
            csv.row({std::string(to_string(cell.method)), md.group, std::to_string(md.n),
                     std::to_string(cc.candidates()), seeds, ok ? fmt_double(mean_of(cell.dssim)) : "",
                     ok ? fmt_double(sample_std(cell.dssim)) : "", ok ? fmt_double(mean_of(cell.symmetry)) : "",
                     ok ? fmt_double(sample_std(cell.symmetry)) : "", cell.status});
        }
        write_text(config.output_dir / "summary.csv", csv_text.str());
        out << csv_text.str();
        return kExitOk;
    });
}

}  // namespace invrec
