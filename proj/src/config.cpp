#include "invrec/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace invrec {

using nlohmann::json;

Method parse_method(std::string_view s) {
    if (s == "am") return Method::AM;
    if (s == "kkt") return Method::KKT;
    if (s == "kkt_same_gd") return Method::KktSameGd;
    if (s == "kkt_dip") return Method::KktDip;
    throw ConfigError("unknown method '" + std::string(s) + "' (am, kkt, kkt_same_gd, kkt_dip)");
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::AM: return "am";
        case Method::KKT: return "kkt";
        case Method::KktSameGd: return "kkt_same_gd";
        case Method::KktDip: return "kkt_dip";
    }
    return "?";
}

DatasetKind parse_dataset_kind(std::string_view s) {
    if (s == "mnist_idx") return DatasetKind::MnistIdx;
    if (s == "cifar10_bin") return DatasetKind::Cifar10Bin;
    if (s == "synthetic") return DatasetKind::Synthetic;
    throw ConfigError("unknown dataset kind '" + std::string(s) + "' (mnist_idx, cifar10_bin, synthetic)");
}

std::string_view to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::MnistIdx: return "mnist_idx";
        case DatasetKind::Cifar10Bin: return "cifar10_bin";
        case DatasetKind::Synthetic: return "synthetic";
    }
    return "?";
}

GdConfig ExperimentConfig::gd_for(Method which) const {
    GdConfig gd = reconstruct;
    gd.objective = which == Method::AM ? Objective::AM : Objective::KKT;
    if (!projection_set) gd.projection = which == Method::AM ? Projection::Box01 : Projection::None;
    for (const auto& [m, o] : overrides) {
        if (m != which) continue;
        if (o.steps) gd.steps = *o.steps;
        if (o.lr) gd.lr = *o.lr;
        if (o.lr_lambda) gd.lr_lambda = *o.lr_lambda;
        if (o.projection) gd.projection = *o.projection;
        if (o.radius) gd.radius = *o.radius;
        if (o.lambda_init_max) gd.lambda_init_max = *o.lambda_init_max;
    }
    return gd;
}

SameGdConfig ExperimentConfig::same_gd_for(Method which) const {
    SameGdConfig s = same_gd;
    s.T = gd_for(which).steps;
    return s;
}

namespace {

// Rejects keys outside `allowed` so typos fail loudly.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

Schedule read_schedule(const json& v, const std::string& where) {
    if (v.is_number()) return Schedule::constant(v.get<double>());
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw ConfigError(where + ": expected a number or [start, end]");
}

Grid read_grid(const json& v, const std::string& where) {
    if (v.is_number_integer()) return {v.get<int>(), v.get<int>()};
    if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer())
        return {v[0].get<int>(), v[1].get<int>()};
    throw ConfigError(where + ": expected an integer or [height, width]");
}

template <class F>
auto wrap(F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

void read_gd(const json& j, const std::string& where, GdOverrides& o) {
    check_keys(j, where, {"steps", "lr", "lr_lambda", "projection", "radius", "lambda_init_max"});
    auto opt = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        using V = typename std::remove_reference_t<decltype(field)>::value_type;
        V v{};
        read(j, key, v, where);
        field = v;
    };
    opt("steps", o.steps);
    opt("lr", o.lr);
    opt("lr_lambda", o.lr_lambda);
    opt("radius", o.radius);
    opt("lambda_init_max", o.lambda_init_max);
    if (j.contains("projection")) {
        std::string p;
        read(j, "projection", p, where);
        o.projection = wrap([&] { return parse_projection(p); });
    }
}

json schedule_json(const Schedule& s) { return json::array({s.start, s.end}); }

json gd_json(const GdOverrides& o) {
    json j = json::object();
    if (o.steps) j["steps"] = *o.steps;
    if (o.lr) j["lr"] = *o.lr;
    if (o.lr_lambda) j["lr_lambda"] = *o.lr_lambda;
    if (o.projection) j["projection"] = std::string(to_string(*o.projection));
    if (o.radius) j["radius"] = *o.radius;
    if (o.lambda_init_max) j["lambda_init_max"] = *o.lambda_init_max;
    return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root, "config", {"version", "dataset", "group", "arch", "train", "method", "reconstruct",
                                "method_overrides", "same_gd", "dip", "evaluate", "m", "seeds", "output_dir",
                                "sweep"});
    ExperimentConfig c;
    if (!root.contains("version")) throw ConfigError("config: missing 'version'");
    read(root, "version", c.version, "config");
    if (c.version != kConfigVersion)
        throw ConfigError("config: unsupported version " + std::to_string(c.version));

    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };

    if (!root.contains("dataset")) throw ConfigError("config: missing 'dataset'");
    {
        const json& d = root["dataset"];
        check_keys(d, "dataset", {"kind", "images", "labels", "path", "label_scheme", "n", "seed", "grid"});
        std::string kind = "synthetic", scheme = "parity", images, labels, path;
        read(d, "kind", kind, "dataset");
        c.dataset.kind = parse_dataset_kind(kind);
        read(d, "label_scheme", scheme, "dataset");
        c.dataset.label_scheme = wrap([&] { return parse_label_scheme(scheme); });
        read(d, "images", images, "dataset");
        read(d, "labels", labels, "dataset");
        read(d, "path", path, "dataset");
        if (!images.empty()) c.dataset.images = resolve(images);
        if (!labels.empty()) c.dataset.labels = resolve(labels);
        if (!path.empty()) c.dataset.path = resolve(path);
        read(d, "n", c.dataset.n, "dataset");
        read(d, "seed", c.dataset.seed, "dataset");
        if (d.contains("grid")) c.dataset.grid = read_grid(d["grid"], "dataset.grid");
    }
    read(root, "group", c.group, "config");
    if (root.contains("arch")) {
        const json& a = root["arch"];
        check_keys(a, "arch", {"h1", "h2"});
        read(a, "h1", c.h1, "arch");
        read(a, "h2", c.h2, "arch");
    }
    if (root.contains("train")) {
        const json& t = root["train"];
        check_keys(t, "train", {"learning_rate", "epochs", "target_loss", "seed", "log_every", "init_scale"});
        read(t, "learning_rate", c.train.learning_rate, "train");
        read(t, "epochs", c.train.epochs, "train");
        read(t, "target_loss", c.train.target_loss, "train");
        read(t, "seed", c.train.seed, "train");
        read(t, "log_every", c.train.log_every, "train");
        read(t, "init_scale", c.train.init_scale, "train");
    }
    if (root.contains("method")) {
        std::string m;
        read(root, "method", m, "config");
        c.method = parse_method(m);
    }
    if (root.contains("reconstruct")) {
        GdOverrides o;
        read_gd(root["reconstruct"], "reconstruct", o);
        if (o.steps) c.reconstruct.steps = *o.steps;
        if (o.lr) c.reconstruct.lr = *o.lr;
        if (o.lr_lambda) c.reconstruct.lr_lambda = *o.lr_lambda;
        if (o.radius) c.reconstruct.radius = *o.radius;
        if (o.lambda_init_max) c.reconstruct.lambda_init_max = *o.lambda_init_max;
        if (o.projection) {
            c.reconstruct.projection = *o.projection;
            c.projection_set = true;
        }
    }
    if (root.contains("method_overrides")) {
        const json& mo = root["method_overrides"];
        if (!mo.is_object()) throw ConfigError("method_overrides: expected an object");
        for (const auto& [k, v] : mo.items()) {
            GdOverrides o;
            read_gd(v, "method_overrides." + k, o);
            c.overrides.emplace_back(parse_method(k), o);
        }
    }
    if (root.contains("same_gd")) {
        const json& s = root["same_gd"];
        check_keys(s, "same_gd", {"eta", "alpha", "beta", "T_save", "T_update", "prev_update"});
        if (s.contains("eta")) c.same_gd.eta = read_schedule(s["eta"], "same_gd.eta");
        if (s.contains("alpha")) c.same_gd.alpha = read_schedule(s["alpha"], "same_gd.alpha");
        if (s.contains("beta")) c.same_gd.beta = read_schedule(s["beta"], "same_gd.beta");
        read(s, "T_save", c.same_gd.T_save, "same_gd");
        read(s, "T_update", c.same_gd.T_update, "same_gd");
        std::string pu = std::string(to_string(c.same_gd.prev_update));
        read(s, "prev_update", pu, "same_gd");
        c.same_gd.prev_update = wrap([&] { return parse_prev_update(pu); });
    }
    if (root.contains("dip")) {
        const json& d = root["dip"];
        check_keys(d, "dip", {"latent_channels", "channels", "stages"});
        read(d, "latent_channels", c.dip.latent_channels, "dip");
        read(d, "channels", c.dip.channels, "dip");
        read(d, "stages", c.dip.stages, "dip");
    }
    if (root.contains("evaluate")) {
        const json& e = root["evaluate"];
        check_keys(e, "evaluate", {"normalization", "orbitope_resolution"});
        std::string norm = std::string(to_string(c.evaluate.normalization));
        read(e, "normalization", norm, "evaluate");
        c.evaluate.normalization = wrap([&] { return parse_normalization(norm); });
        read(e, "orbitope_resolution", c.evaluate.orbitope_resolution, "evaluate");
    }
    read(root, "m", c.m, "config");
    read(root, "seeds", c.seeds, "config");
    std::string out = c.output_dir.string();
    read(root, "output_dir", out, "config");
    c.output_dir = out;
    if (root.contains("sweep")) {
        const json& s = root["sweep"];
        check_keys(s, "sweep", {"group", "n", "method"});
        read(s, "group", c.sweep.groups, "sweep");
        read(s, "n", c.sweep.ns, "sweep");
        std::vector<std::string> methods;
        read(s, "method", methods, "sweep");
        for (const auto& m : methods) c.sweep.methods.push_back(parse_method(m));
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void validate(const ExperimentConfig& c) {
    wrap([&] {
        parse_group_name(c.group);
        for (const auto& g : c.sweep.groups) parse_group_name(g);
        if (c.dataset.n < 1) throw ConfigError("dataset.n must be >= 1");
        for (auto n : c.sweep.ns)
            if (n < 1) throw ConfigError("sweep.n entries must be >= 1");
        if (c.dataset.kind == DatasetKind::MnistIdx && (c.dataset.images.empty() || c.dataset.labels.empty()))
            throw ConfigError("dataset: mnist_idx needs 'images' and 'labels'");
        if (c.dataset.kind == DatasetKind::Cifar10Bin && c.dataset.path.empty())
            throw ConfigError("dataset: cifar10_bin needs 'path'");
        if (c.dataset.kind == DatasetKind::Synthetic && (c.dataset.grid.height < 1 || c.dataset.grid.width < 1))
            throw ConfigError("dataset: synthetic needs a positive 'grid'");
        if (c.dataset.grid.height < 0 || c.dataset.grid.width < 0) throw ConfigError("dataset.grid must be >= 0");
        if (c.h1 < 1 || c.h2 < 1) throw ConfigError("arch: h1 and h2 must be >= 1");
        if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
        c.train.validate();
        c.same_gd.validate();
        c.dip.validate();
        for (Method m : {Method::AM, Method::KKT, Method::KktSameGd, Method::KktDip}) c.gd_for(m).validate();
        return 0;
    });
}

std::string dump_config(const ExperimentConfig& c) {
    json j;
    j["version"] = c.version;
    json d;
    d["kind"] = std::string(to_string(c.dataset.kind));
    if (!c.dataset.images.empty()) d["images"] = c.dataset.images.string();
    if (!c.dataset.labels.empty()) d["labels"] = c.dataset.labels.string();
    if (!c.dataset.path.empty()) d["path"] = c.dataset.path.string();
    d["label_scheme"] = std::string(to_string(c.dataset.label_scheme));
    d["n"] = c.dataset.n;
    d["seed"] = c.dataset.seed;
    d["grid"] = json::array({c.dataset.grid.height, c.dataset.grid.width});
    j["dataset"] = d;
    j["group"] = c.group;
    j["arch"] = {{"h1", c.h1}, {"h2", c.h2}};
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"epochs", c.train.epochs},
                  {"target_loss", c.train.target_loss},
                  {"seed", c.train.seed},
                  {"log_every", c.train.log_every},
                  {"init_scale", c.train.init_scale}};
    j["method"] = std::string(to_string(c.method));
    json r = {{"steps", c.reconstruct.steps},
              {"lr", c.reconstruct.lr},
              {"lr_lambda", c.reconstruct.lr_lambda},
              {"radius", c.reconstruct.radius},
              {"lambda_init_max", c.reconstruct.lambda_init_max}};
    if (c.projection_set) r["projection"] = std::string(to_string(c.reconstruct.projection));
    j["reconstruct"] = r;
    json mo = json::object();
    for (const auto& [m, o] : c.overrides) mo[std::string(to_string(m))] = gd_json(o);
    j["method_overrides"] = mo;
    j["same_gd"] = {{"eta", schedule_json(c.same_gd.eta)},
                    {"alpha", schedule_json(c.same_gd.alpha)},
                    {"beta", schedule_json(c.same_gd.beta)},
                    {"T_save", c.same_gd.T_save},
                    {"T_update", c.same_gd.T_update},
                    {"prev_update", std::string(to_string(c.same_gd.prev_update))}};
    j["dip"] = {{"latent_channels", c.dip.latent_channels}, {"channels", c.dip.channels}, {"stages", c.dip.stages}};
    j["evaluate"] = {{"normalization", std::string(to_string(c.evaluate.normalization))},
                     {"orbitope_resolution", c.evaluate.orbitope_resolution}};
    j["m"] = c.candidates();
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir.string();
    if (!c.sweep.groups.empty() || !c.sweep.ns.empty() || !c.sweep.methods.empty()) {
        std::vector<std::string> methods;
        for (Method m : c.sweep.methods) methods.emplace_back(to_string(m));
        j["sweep"] = {{"group", c.sweep.groups}, {"n", c.sweep.ns}, {"method", methods}};
    }
    return j.dump(2) + "\n";
}

}  // namespace invrec
