#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "helpers.hpp"
#include "invrec/data_io.hpp"
#include "invrec/experiment.hpp"
#include "invrec/formats.hpp"
#include "invrec/verify.hpp"

using namespace invrec;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "invrec_test_experiment" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    const auto b = read_file(p);
    return std::string(b.begin(), b.end());
}

ExperimentConfig tiny(const fs::path& out, const std::string& extra = "") {
    auto c = parse_config(R"({"version": 1, "dataset": {"kind": "synthetic", "grid": 8, "n": 4, "seed": 2},
        "arch": {"h1": 12, "h2": 8}, "train": {"learning_rate": 0.2, "epochs": 300, "log_every": 100},
        "reconstruct": {"steps": 20, "lr": 0.01}, "m": 6)" + extra + "}");
    c.output_dir = out;
    return c;
}

struct Streams {
    std::ostringstream out, err;
};

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("train writes checkpoint, history and resolved config") {
    const auto dir = fresh_dir("train");
    auto c = tiny(dir, R"(, "group": "trivial")");
    Streams s;
    REQUIRE(cmd_train(c, {}, s.out, s.err) == kExitOk);
    CHECK(s.out.str().find("kkt_residual=") != std::string::npos);
    CHECK(parse_config(slurp(dir / "config.resolved.json")).h1 == 12);
    const auto history = slurp(dir / "history.csv");
    CHECK(history.rfind("epoch,loss,accuracy,min_margin\n0,", 0) == 0);

    const auto data = load_dataset(c.dataset, c.dataset.n);
    const auto tm = train_model(c, GroupSpec::make("trivial", data.grid), data);
    const auto ck = load_checkpoint(dir / "checkpoint.girn");
    CHECK(ck.group_name == "trivial");
    CHECK(ck.params == tm.model.params());

    const auto dir2 = fresh_dir("train_seed");
    RunOptions other;
    other.seed = 7;
    other.out = dir2;
    REQUIRE(cmd_train(c, other, s.out, s.err) == kExitOk);
    CHECK_FALSE(load_checkpoint(dir2 / "checkpoint.girn").params == ck.params);
}

TEST_CASE("reconstruct: zero-step AM dump is the initialization; reruns are byte-identical") {
    const auto dir = fresh_dir("recon");
    auto c = tiny(dir, R"(, "method": "am", "reconstruct": {"steps": 0}, "seeds": [5])");
    Streams s;
    REQUIRE(cmd_train(c, {}, s.out, s.err) == kExitOk);
    REQUIRE(cmd_reconstruct(c, {}, s.out, s.err) == kExitOk);
    const auto f = load_reconstruction(dir / "recon.grec");
    const auto init = init_state(Grid{8, 8}, 6, c.reconstruct.lambda_init_max, 5);
    CHECK(f.candidates == init.candidates);
    CHECK(f.lambdas == init.lambdas);
    CHECK(fs::exists(dir / "sheets" / "reconstruction.pgm"));

    for (const char* method : {"kkt", "kkt_same_gd", "kkt_dip"}) {
        auto k = tiny(dir, std::string(R"(, "method": ")") + method + R"(", "dip": {"latent_channels": 2, "channels": 3, "stages": 2})");
        RunOptions a, b;
        a.recon = dir / "a.grec";
        b.recon = dir / "b.grec";
        REQUIRE(cmd_reconstruct(k, a, s.out, s.err) == kExitOk);
        REQUIRE(cmd_reconstruct(k, b, s.out, s.err) == kExitOk);
        CHECK(read_file(dir / "a.grec") == read_file(dir / "b.grec"));
    }
}

TEST_CASE("reconstruct rejects a checkpoint trained for another group") {
    const auto dir = fresh_dir("mismatch");
    Streams s;
    REQUIRE(cmd_train(tiny(dir, R"(, "group": "klein4")"), {}, s.out, s.err) == kExitOk);
    CHECK(cmd_reconstruct(tiny(dir, R"(, "group": "d4")"), {}, s.out, s.err) == kExitUsage);
    CHECK(s.err.str().find("does not match") != std::string::npos);
    RunOptions missing;
    missing.checkpoint = dir / "nope.girn";
    CHECK(cmd_reconstruct(tiny(dir), missing, s.out, s.err) == kExitRuntime);
}

TEST_CASE("KKT reconstruction from near the training set of a stationary model converges") {
    std::mt19937_64 rng(3);
    const auto group = GroupSpec::make("flip_h", Grid{6, 6});
    const auto xs = invrec::test::disjoint_invariant_samples(rng, group, 3);
    const std::vector<int> ys{1, -1, 1};
    const std::vector<double> lam{0.5, 1.0, 0.8};
    const auto model = make_stationary_model(xs, ys, lam, group, 4, 4);
    ReconstructionState st;
    st.candidates = xs;
    st.lambdas = {0.45, 1.1, 0.8};
    st.labels = ys;
    std::normal_distribution<double> nd(0.0, 1e-3);
    for (auto& x : st.candidates)
        for (double& v : x.values())
            if (v != 0.0) v += nd(rng);  // stay on the same activation pattern
    GdConfig cfg;
    cfg.steps = 20000;
    cfg.lr = 1e-3;
    cfg.lr_lambda = 1e-2;
    const double before = kkt_loss(model, st.candidates, st.lambdas, st.labels);
    st = reconstruct_gd_from(model, st, cfg);
    const double after = kkt_loss(model, st.candidates, st.lambdas, st.labels);
    MESSAGE("kkt loss " << before << " -> " << after);
    CHECK(after < 1e-6);
}

TEST_CASE("evaluate: exact candidates score zero; summary matches a hand-assembled run") {
    const auto dir = fresh_dir("eval");
    auto c = tiny(dir, R"(, "dataset": {"kind": "synthetic", "grid": 8, "n": 2, "seed": 4}, "m": 2)");
    const auto data = load_dataset(c.dataset, 2);
    save_reconstruction(dir / "recon.grec", data.samples, std::vector<double>{0.0, 0.0});
    Streams s;
    REQUIRE(cmd_evaluate(c, {}, s.out, s.err) == kExitOk);
    CHECK(slurp(dir / "summary.csv") == std::string(kSummaryHeader) + "\nkkt,flip_h,2,2,0,0," +
                                            fmt_double(evaluate(data.samples, data, GroupSpec::make("flip_h", Grid{8, 8})).symmetry_score) +
                                            "\n");

    // two arbitrary candidates, evaluated by hand with the library
    std::mt19937_64 rng(5);
    const std::vector<ImageTensor> cand{invrec::test::random_image(rng, Grid{8, 8}),
                                        invrec::test::random_image(rng, Grid{8, 8})};
    save_reconstruction(dir / "recon.grec", cand, std::vector<double>{0.1, 0.2});
    REQUIRE(cmd_evaluate(c, {}, s.out, s.err) == kExitOk);
    const auto G = GroupSpec::make("flip_h", Grid{8, 8});
    const auto rep = evaluate(cand, data, G);
    CHECK(slurp(dir / "summary.csv") == std::string(kSummaryHeader) + "\nkkt,flip_h,2,2,0," +
                                            fmt_double(rep.mean_dssim) + "," + fmt_double(rep.symmetry_score) +
                                            "\n");
    std::string matches = "candidate_id,nn_index,best_g,dssim,l2\n";
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& mt = rep.match.matches[i];
        matches += std::to_string(i) + "," + std::to_string(mt.nn_index) + "," + G[mt.best_g].label + "," +
                   fmt_double(mt.dssim) + "," + fmt_double(mt.l2) + "\n";
    }
    CHECK(slurp(dir / "matches.csv") == matches);
    const auto hist = slurp(dir / "histogram.csv");
    CHECK(hist.rfind("bin_weights,count\n", 0) == 0);
    std::size_t total = 0;
    for (const auto& [k, v] : rep.histogram) total += v;
    CHECK(total == 2);
    for (const char* sheet : {"candidates.pgm", "matches.pgm", "training.pgm"})
        CHECK(fs::exists(dir / "sheets" / sheet));

    auto wrong = c;
    wrong.dataset.grid = Grid{4, 4};
    CHECK(cmd_evaluate(wrong, {}, s.out, s.err) == kExitRuntime);
}

TEST_CASE("verify: one seed passes") {
    std::ostringstream out;
    CHECK(cmd_verify(0, 1, out, true) == kExitOk);
    CHECK(out.str().find("verification passed") != std::string::npos);
}

TEST_CASE("sweep: rows match single runs; failures are recorded and the sweep continues") {
    const auto dir = fresh_dir("sweep");
    auto c = tiny(dir, R"(, "sweep": {"group": ["trivial", "flip_h"], "method": ["kkt"]}, "seeds": [0, 1])");
    Streams s;
    RunOptions jobs;
    jobs.jobs = 2;
    REQUIRE(cmd_sweep(c, jobs, s.out, s.err) == kExitOk);
    const auto csv = slurp(dir / "summary.csv");
    CHECK(csv.rfind(std::string(kSweepHeader) + "\n", 0) == 0);

    for (const char* g : {"trivial", "flip_h"}) {
        std::vector<double> d;
        for (std::uint64_t seed : {0, 1}) {
            const auto single = fresh_dir(std::string("single_") + g + std::to_string(seed));
            auto one = tiny(single, std::string(R"(, "group": ")") + g + R"(", "seeds": [)" + std::to_string(seed) + "]");
            REQUIRE(cmd_train(one, {}, s.out, s.err) == kExitOk);
            REQUIRE(cmd_reconstruct(one, {}, s.out, s.err) == kExitOk);
            REQUIRE(cmd_evaluate(one, {}, s.out, s.err) == kExitOk);
            CHECK(read_file(single / "recon.grec") ==
                  read_file(dir / "cells" / (std::string("kkt_") + g + "_n4") / ("seed" + std::to_string(seed)) /
                            "recon.grec"));
            const auto row = slurp(single / "summary.csv");
            const auto line = row.substr(row.find('\n') + 1);
            const auto fields_end = line.rfind(',');
            const auto mid = line.rfind(',', fields_end - 1);
            d.push_back(std::stod(line.substr(mid + 1, fields_end - mid - 1)));
        }
        const std::string prefix = std::string("kkt,") + g + ",4,6,0 1," + fmt_double((d[0] + d[1]) / 2.0) + ",";
        CHECK(csv.find(prefix) != std::string::npos);
    }

    // klein4 cannot act on a 4x6 grid: that row fails, the other still runs
    const auto bad_dir = fresh_dir("sweep_bad");
    auto bad = parse_config(R"({"version": 1, "dataset": {"kind": "synthetic", "grid": [4, 6], "n": 4},
        "arch": {"h1": 6, "h2": 4}, "train": {"epochs": 20}, "reconstruct": {"steps": 5}, "m": 4,
        "sweep": {"group": ["flip_h", "klein4"]}})");
    bad.output_dir = bad_dir;
    REQUIRE(cmd_sweep(bad, {}, s.out, s.err) == kExitOk);
    const auto bad_csv = slurp(bad_dir / "summary.csv");
    CHECK(bad_csv.find("kkt,flip_h,4,4,0,") != std::string::npos);
    CHECK(bad_csv.find(",ok\n") != std::string::npos);
    CHECK(bad_csv.find("kkt,klein4,4,4,0,,,,,training failed") != std::string::npos);
}

TEST_CASE("1x1 sweep equals the single-run summary") {
    const auto dir = fresh_dir("sweep1");
    auto c = tiny(dir, R"(, "method": "am")");
    Streams s;
    REQUIRE(cmd_sweep(c, {}, s.out, s.err) == kExitOk);
    const auto cell = slurp(dir / "cells" / "am_flip_h_n4" / "seed0" / "summary.csv");
    const auto row = cell.substr(cell.find('\n') + 1);  // am,flip_h,4,6,0,dssim,sym
    const auto sweep = slurp(dir / "summary.csv");
    const auto srow = sweep.substr(sweep.find('\n') + 1);  // am,flip_h,4,6,0,dssim,0,sym,0,ok
    auto field = [](const std::string& r, int k) {
        std::size_t a = 0;
        for (int i = 0; i < k; ++i) a = r.find(',', a) + 1;
        return r.substr(a, r.find_first_of(",\n", a) - a);
    };
    CHECK(field(srow, 5) == field(row, 5));
    CHECK(field(srow, 6) == "0");
    CHECK(field(srow, 7) == field(row, 6));
    CHECK(field(srow, 9) == "ok");
}

}  // TEST_SUITE
