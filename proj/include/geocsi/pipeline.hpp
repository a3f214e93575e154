#pragma once

// Stage orchestration over an artifact directory.
//
//   preprocess  scene.txt locations.csv preprocess.json
//   trace       paths.csv trace_summary.json
//   cluster     validity.csv memberships.csv clusters.json
//   zones       zones.json zone_map.csv cluster_params.csv regions.json
//   train       split.json classifier.json regressors.json one_step.json training.json
//   predict     predicted_paths.csv
//   evaluate    surrogate_metrics.json sumrate.csv evaluation.json
//   plotdata    plots/{validity,zones,sumrate,clusters}.csv
//
// manifest.json records, per stage, the hash of the configuration it ran
// with (including its upstream hashes), its seed and a content hash of each
// artifact. A stage whose hash is unchanged is skipped.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geocsi/cluster.hpp"
#include "geocsi/config.hpp"
#include "geocsi/error.hpp"
#include "geocsi/path_io.hpp"
#include "geocsi/precode.hpp"
#include "geocsi/raytrace.hpp"
#include "geocsi/rng.hpp"
#include "geocsi/scene.hpp"
#include "geocsi/surrogate/ffnn.hpp"
#include "geocsi/surrogate/two_step.hpp"
#include "geocsi/zones.hpp"

namespace geocsi {

namespace fs = std::filesystem;

enum class Stage { Preprocess, Trace, Cluster, Zones, Train, Predict, Evaluate, PlotData };

inline constexpr std::array<Stage, 8> kAllStages = {Stage::Preprocess, Stage::Trace,   Stage::Cluster,
                                                    Stage::Zones,      Stage::Train,   Stage::Predict,
                                                    Stage::Evaluate,   Stage::PlotData};

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Preprocess: return "preprocess";
        case Stage::Trace: return "trace";
        case Stage::Cluster: return "cluster";
        case Stage::Zones: return "zones";
        case Stage::Train: return "train";
        case Stage::Predict: return "predict";
        case Stage::Evaluate: return "evaluate";
        case Stage::PlotData: return "plotdata";
    }
    return "";
}

inline Stage parse_stage(const std::string& name) {
    for (Stage s : kAllStages)
        if (name == stage_name(s)) return s;
    throw std::invalid_argument("unknown stage '" + name + "'");
}

inline std::vector<Stage> stage_dependencies(Stage s) {
    switch (s) {
        case Stage::Preprocess: return {};
        case Stage::Trace: return {Stage::Preprocess};
        case Stage::Cluster: return {Stage::Trace};
        case Stage::Zones: return {Stage::Cluster};
        case Stage::Train: return {Stage::Trace};
        case Stage::Predict: return {Stage::Train};
        case Stage::Evaluate: return {Stage::Zones, Stage::Predict};
        case Stage::PlotData: return {Stage::Zones, Stage::Evaluate};
    }
    return {};
}

/// Artifacts a stage reads, each with the stage that writes it.
inline std::vector<std::pair<std::string, Stage>> stage_inputs(Stage s) {
    switch (s) {
        case Stage::Preprocess: return {};
        case Stage::Trace: return {{"scene.txt", Stage::Preprocess}, {"locations.csv", Stage::Preprocess}};
        case Stage::Cluster: return {{"paths.csv", Stage::Trace}};
        case Stage::Zones:
            return {{"locations.csv", Stage::Preprocess}, {"paths.csv", Stage::Trace},
                    {"memberships.csv", Stage::Cluster}};
        case Stage::Train:
            return {{"scene.txt", Stage::Preprocess}, {"locations.csv", Stage::Preprocess}, {"paths.csv", Stage::Trace}};
        case Stage::Predict:
            return {{"scene.txt", Stage::Preprocess}, {"locations.csv", Stage::Preprocess},
                    {"split.json", Stage::Train},    {"classifier.json", Stage::Train},
                    {"regressors.json", Stage::Train}};
        case Stage::Evaluate:
            return {{"scene.txt", Stage::Preprocess},       {"locations.csv", Stage::Preprocess},
                    {"paths.csv", Stage::Trace},            {"split.json", Stage::Train},
                    {"regressors.json", Stage::Train},      {"predicted_paths.csv", Stage::Predict},
                    {"zones.json", Stage::Zones}};
        case Stage::PlotData:
            return {{"validity.csv", Stage::Cluster},
                    {"memberships.csv", Stage::Cluster},
                    {"zones.json", Stage::Zones},
                    {"sumrate.csv", Stage::Evaluate}};
    }
    return {};
}

/// Config key prefixes that affect each stage.
inline std::vector<std::string> stage_keys(Stage s) {
    switch (s) {
        case Stage::Preprocess: return {"scene", "origin", "quantize", "resolution", "grid_spacing"};
        case Stage::Trace: return {"radio"};
        case Stage::Cluster: return {"fcm", "cluster"};
        case Stage::Zones: return {"zones"};
        case Stage::Train: return {"split", "classifier", "ensemble", "one_step"};
        case Stage::Predict: return {};
        case Stage::Evaluate: return {"array", "hybrid", "sweep"};
        case Stage::PlotData: return {};
    }
    return {};
}

struct RunConfig {
    KeyValueConfig raw;
    fs::path scene_path;
    Point3 origin;
    bool quantize = true;
    std::optional<double> resolution;  // unset: the scene's own resolution
    double grid_spacing = 0.5;
    RadioConfig radio;
    FcmConfig fcm;
    int c_max = 10;
    bool prune = true;
    double prune_ratio = 0.95;
    double membership_threshold = 0.6;
    double split_ratio = 0.7;
    ClassifierSpec classifier;
    EnsembleSpec ensemble;
    bool one_step = true;
    OneStepSpec one_step_spec;
    ArraySpec array;
    HybridConfig hybrid;
    std::vector<int> hybrid_zones;  // empty: the largest non-block zones
    SweepConfig sweep;
    std::uint64_t seed = 1;

    /// `seed` and `origin` overrides are written back into `raw` so hashes see them.
    static RunConfig from(KeyValueConfig raw, std::optional<std::uint64_t> seed_override = {},
                          std::optional<std::string> origin_override = {}) {
        if (seed_override) raw.set("seed", std::to_string(*seed_override));
        if (origin_override) raw.set("origin", *origin_override);
        RunConfig c;
        c.seed = raw.get_seed("seed", 1);
        c.scene_path = raw.get_path("scene");
        c.origin = parse_point(raw.get_string("origin", "0,0,0"));
        c.quantize = raw.get_bool("quantize", true);
        if (raw.has("resolution")) c.resolution = raw.get_double("resolution", 0.0);
        c.grid_spacing = raw.get_double("grid_spacing", 0.5);

        c.radio.frequency_hz = raw.get_double("radio.frequency_hz", c.radio.frequency_hz);
        c.radio.path_loss_exponent = raw.get_double("radio.path_loss_exponent", c.radio.path_loss_exponent);
        c.radio.absorption_per_m = raw.get_double("radio.absorption_per_m", c.radio.absorption_per_m);
        c.radio.tx_power_dbm = raw.get_double("radio.tx_power_dbm", c.radio.tx_power_dbm);
        c.radio.tx_gain_dbi = raw.get_double("radio.tx_gain_dbi", c.radio.tx_gain_dbi);
        c.radio.rx_gain_dbi = raw.get_double("radio.rx_gain_dbi", c.radio.rx_gain_dbi);
        c.radio.existence_margin_db = raw.get_double("radio.existence_margin_db", c.radio.existence_margin_db);
        c.radio.validate();

        c.fcm.fuzzifier = raw.get_double("fcm.fuzzifier", c.fcm.fuzzifier);
        c.fcm.epsilon = raw.get_double("fcm.epsilon", c.fcm.epsilon);
        c.fcm.max_iterations = static_cast<int>(raw.get_int("fcm.max_iterations", c.fcm.max_iterations));
        c.fcm.seed = derive_seed(c.seed, "fcm");
        c.c_max = static_cast<int>(raw.get_int("cluster.c_max", c.c_max));

        c.prune = raw.get_bool("zones.prune", c.prune);
        c.prune_ratio = raw.get_double("zones.prune_ratio", c.prune_ratio);
        c.membership_threshold = raw.get_double("zones.membership_threshold", c.membership_threshold);

        c.split_ratio = raw.get_double("split.ratio_train", c.split_ratio);

        auto& k = c.classifier;
        k.conv_layers = static_cast<int>(raw.get_int("classifier.conv_layers", k.conv_layers));
        k.filters = static_cast<int>(raw.get_int("classifier.filters", k.filters));
        k.dropout = raw.get_double("classifier.dropout", k.dropout);
        k.gamma = raw.get_double("classifier.gamma", k.gamma);
        k.alpha1 = raw.get_double("classifier.alpha1", k.alpha1);
        k.learning_rate = raw.get_double("classifier.learning_rate", k.learning_rate);
        k.batch_size = static_cast<int>(raw.get_int("classifier.batch_size", k.batch_size));
        k.epochs = static_cast<int>(raw.get_int("classifier.epochs", k.epochs));
        const std::string loss = raw.get_string("classifier.loss", "true-class");
        if (loss != "true-class" && loss != "as-written")
            throw ParseError("config: classifier.loss must be true-class or as-written");
        k.loss = loss == "true-class" ? FocalMode::TrueClass : FocalMode::AsWritten;
        k.seed = derive_seed(c.seed, "classifier");
        k.validate();

        auto& e = c.ensemble;
        e.n_trees = static_cast<int>(raw.get_int("ensemble.n_trees", e.n_trees));
        e.min_leaf_size = static_cast<int>(raw.get_int("ensemble.min_leaf_size", e.min_leaf_size));
        e.predictors_to_sample = static_cast<int>(raw.get_int("ensemble.predictors_to_sample", e.predictors_to_sample));
        e.bootstrap_size = static_cast<int>(raw.get_int("ensemble.bootstrap_size", e.bootstrap_size));
        e.cv_folds = static_cast<int>(raw.get_int("ensemble.cv_folds", e.cv_folds));
        e.seed = derive_seed(c.seed, "ensemble");
        e.validate();

        c.one_step = raw.get_bool("one_step.enabled", c.one_step);
        auto& o = c.one_step_spec;
        o.hidden = raw.get_ints("one_step.hidden", o.hidden);
        o.max_epochs = static_cast<int>(raw.get_int("one_step.max_epochs", o.max_epochs));
        o.lm_max_samples = static_cast<std::size_t>(raw.get_int("one_step.lm_max_samples", static_cast<long long>(o.lm_max_samples)));
        o.first_order_epochs = static_cast<int>(raw.get_int("one_step.first_order_epochs", o.first_order_epochs));
        o.mu_initial = raw.get_double("one_step.mu_initial", o.mu_initial);
        o.seed = derive_seed(c.seed, "one-step");

        c.array.rows = static_cast<int>(raw.get_int("array.rows", c.array.rows));
        c.array.cols = static_cast<int>(raw.get_int("array.cols", c.array.cols));
        c.array.element_spacing = raw.get_double("array.spacing", c.array.element_spacing);
        c.array.validate();
        c.hybrid.chains_per_group = raw.get_ints("hybrid.chains_per_group", {11, 11});
        c.hybrid.users_per_group = raw.get_ints("hybrid.users_per_group", {2, 2});
        c.hybrid_zones = raw.get_ints("hybrid.zones", {});
        c.sweep.total_power_dbm = raw.get_doubles("sweep.total_power_dbm", {0, 10, 20, 30, 40});
        c.sweep.realizations = static_cast<int>(raw.get_int("sweep.realizations", 2000));
        c.sweep.noise_dbm = raw.get_double("sweep.noise_dbm", c.sweep.noise_dbm);
        c.sweep.large_scale_gain_db = raw.get_double("sweep.large_scale_gain_db", c.sweep.large_scale_gain_db);
        c.sweep.paths_per_cluster = static_cast<int>(raw.get_int("sweep.paths_per_cluster", c.sweep.paths_per_cluster));
        c.sweep.seed = derive_seed(c.seed, "monte-carlo");
        c.raw = std::move(raw);
        return c;
    }
};

inline std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
}

struct StageRecord {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> artifacts;  // file, content hash
    std::vector<std::pair<std::string, std::string>> inputs;     // consumed upstream files, content hash
};

struct Manifest {
    std::uint64_t root_seed = 0;
    std::map<std::string, StageRecord> stages;

    static Manifest load(const fs::path& dir) {
        Manifest m;
        const fs::path p = dir / "manifest.json";
        if (!fs::exists(p)) return m;
        const auto j = nlohmann::json::parse(read_file(p));
        m.root_seed = j.at("root_seed");
        for (const auto& [name, s] : j.at("stages").items()) {
            StageRecord r;
            r.config_hash = s.at("config_hash");
            r.seed = s.at("seed");
            for (const auto& a : s.at("artifacts")) r.artifacts.emplace_back(a.at("file"), a.at("fnv1a64"));
            for (const auto& a : s.value("inputs", nlohmann::json::array())) r.inputs.emplace_back(a.at("file"), a.at("fnv1a64"));
            m.stages[name] = r;
        }
        return m;
    }

    void save(const fs::path& dir) const {
        nlohmann::ordered_json j;
        j["root_seed"] = root_seed;
        j["stages"] = nlohmann::ordered_json::object();
        for (Stage s : kAllStages) {
            const auto it = stages.find(stage_name(s));
            if (it == stages.end()) continue;
            nlohmann::ordered_json r;
            r["config_hash"] = it->second.config_hash;
            r["seed"] = it->second.seed;
            r["artifacts"] = nlohmann::ordered_json::array();
            for (const auto& [file, hash] : it->second.artifacts) r["artifacts"].push_back({{"file", file}, {"fnv1a64", hash}});
            r["inputs"] = nlohmann::ordered_json::array();
            for (const auto& [file, hash] : it->second.inputs) r["inputs"].push_back({{"file", file}, {"fnv1a64", hash}});
            j["stages"][stage_name(s)] = r;
        }
        write_file(dir / "manifest.json", j.dump(2) + "\n");
    }
};

class Pipeline {
public:
    Pipeline(RunConfig cfg, fs::path out_dir, std::ostream& log)
        : cfg_(std::move(cfg)), dir_(std::move(out_dir)), log_(log) {}

    const RunConfig& config() const { return cfg_; }
    const fs::path& out_dir() const { return dir_; }

    /// Hash of the configuration a stage depends on, upstream included.
    std::string stage_hash(Stage s) const {
        std::string text = std::string(stage_name(s)) + "\nseed=" + std::to_string(cfg_.seed) + "\n" +
                           cfg_.raw.canonical(stage_keys(s));
        if (s == Stage::Preprocess) text += "scene-content=" + hex64(fnv1a64(read_file(cfg_.scene_path))) + "\n";
        for (Stage d : stage_dependencies(s)) text += std::string("upstream ") + stage_name(d) + "=" + stage_hash(d) + "\n";
        return hex64(fnv1a64(text));
    }

    std::uint64_t stage_seed(Stage s) const { return derive_seed(cfg_.seed, stage_name(s)); }

    /// Runs one stage; returns false when it was already up to date.
    bool run(Stage s, bool force = false) {
        Manifest manifest = Manifest::load(dir_);
        for (const auto& [file, producer] : stage_inputs(s))
            if (!fs::exists(dir_ / file))
                throw DependencyError(std::string("stage '") + stage_name(s) + "' needs missing artifact '" + file +
                                      "' (produced by stage '" + stage_name(producer) + "')");
        for (Stage d : stage_dependencies(s)) {
            const auto it = manifest.stages.find(stage_name(d));
            if (it == manifest.stages.end()) {
                if (force) continue;
                throw DependencyError(std::string("stage '") + stage_name(s) + "' needs stage '" + stage_name(d) +
                                      "', which is not recorded in the manifest");
            }
            if (!force && it->second.config_hash != stage_hash(d))
                throw DependencyError(std::string("artifacts of stage '") + stage_name(d) +
                                      "' were produced with a different configuration; re-run it or pass --force");
        }
        const std::string hash = stage_hash(s);
        if (!force && up_to_date(manifest, s, hash)) {
            log_ << stage_name(s) << ": up to date\n";
            return false;
        }
        log_ << stage_name(s) << ": running\n";
        StageRecord rec;
        for (const auto& [file, producer] : stage_inputs(s)) rec.inputs.emplace_back(file, file_hash(file));
        std::vector<std::string> artifacts = execute(s);
        rec.config_hash = hash;
        rec.seed = stage_seed(s);
        for (const auto& a : artifacts) rec.artifacts.emplace_back(a, file_hash(a));
        manifest.root_seed = cfg_.seed;
        manifest.stages[stage_name(s)] = rec;
        manifest.save(dir_);
        return true;
    }

    void run_all(const std::vector<Stage>& stages, bool force = false) {
        for (Stage s : kAllStages)
            if (std::find(stages.begin(), stages.end(), s) != stages.end()) run(s, force);
    }

private:
    bool up_to_date(const Manifest& m, Stage s, const std::string& hash) const {
        const auto it = m.stages.find(stage_name(s));
        if (it == m.stages.end() || it->second.config_hash != hash) return false;
        // Inputs catch a forced run on stale upstream data that was later refreshed.
        for (const auto* files : {&it->second.artifacts, &it->second.inputs})
            for (const auto& [file, h] : *files)
                if (!fs::exists(dir_ / file) || file_hash(file) != h) return false;
        return true;
    }

    std::string file_hash(const std::string& file) const { return hex64(fnv1a64(read_file(dir_ / file))); }

    std::vector<std::string> execute(Stage s) {
        switch (s) {
            case Stage::Preprocess: return preprocess();
            case Stage::Trace: return trace();
            case Stage::Cluster: return cluster();
            case Stage::Zones: return zones();
            case Stage::Train: return train();
            case Stage::Predict: return predict();
            case Stage::Evaluate: return evaluate();
            case Stage::PlotData: return plotdata();
        }
        return {};
    }

    void put(const std::string& name, const std::string& content) const { write_file(dir_ / name, content); }
    std::string get(const std::string& name) const { return read_file(dir_ / name); }

    Scene scene() const {
        std::istringstream in(get("scene.txt"));
        return parse_scene(in);
    }
    std::vector<Point3> locations() const {
        std::istringstream in(get("locations.csv"));
        return read_locations(in);
    }
    std::vector<PathRecord> paths() const {
        std::istringstream in(get("paths.csv"));
        return read_path_db(in);
    }

    std::vector<std::string> preprocess() {
        const Scene raw = load_scene(cfg_.scene_path.string(), cfg_.origin);
        QuantizedScene q{raw, 0, 0, 0};
        if (cfg_.quantize) q = quantize_merge_report(raw, cfg_.resolution.value_or(raw.resolution));
        validate_scene(q.scene);
        const auto locs = feasible_locations(q.scene, cfg_.grid_spacing);
        std::ostringstream scene_out, loc_out;
        write_scene(scene_out, q.scene);
        write_locations(loc_out, locs);
        put("scene.txt", scene_out.str());
        put("locations.csv", loc_out.str());
        nlohmann::ordered_json j;
        j["planes_in"] = raw.planes.size();
        j["planes_out"] = q.scene.planes.size();
        j["dropped_degenerate"] = q.dropped_degenerate;
        j["merged"] = q.merged;
        j["split_nonplanar"] = q.split_nonplanar;
        j["feasible_locations"] = locs.size();
        put("preprocess.json", j.dump(2) + "\n");
        log_ << "  " << q.scene.planes.size() << " planes, " << locs.size() << " feasible locations\n";
        return {"scene.txt", "locations.csv", "preprocess.json"};
    }

    std::vector<std::string> trace() {
        const TraceResult r = trace_scene(scene(), locations(), cfg_.radio);
        std::ostringstream out;
        write_path_db(out, r.paths);
        put("paths.csv", out.str());
        put("trace_summary.json", summary_json(r.summary).dump(2) + "\n");
        log_ << "  " << r.summary.existent << " existent of " << r.summary.total_paths << " paths\n";
        return {"paths.csv", "trace_summary.json"};
    }

    struct Clustered {
        std::vector<std::size_t> rows;  // rows of paths.csv
        std::vector<PathRecord> paths;
        MembershipMatrix u;
        std::vector<int> assignment;
    };

    std::vector<std::string> cluster() {
        const auto all = paths();
        std::vector<std::size_t> rows;
        std::vector<PathRecord> existent;
        for (std::size_t i = 0; i < all.size(); ++i)
            if (all[i].existent) {
                rows.push_back(i);
                existent.push_back(all[i]);
            }
        if (existent.size() < 2) throw Error("cluster: fewer than two existent paths");
        const int c_max = std::min<int>(cfg_.c_max, static_cast<int>(existent.size()));
        const ClusterSelection sel = select_cluster_count(existent, c_max, cfg_.fcm);

        std::ostringstream validity;
        validity << "c,pc,pe,sc,s,xb\n";
        for (const auto& r : sel.report)
            validity << r.c << ',' << format_number(r.pc) << ',' << format_number(r.pe) << ',' << format_number(r.sc)
                     << ',' << format_number(r.s) << ',' << format_number(r.xb) << "\n";
        put("validity.csv", validity.str());

        const auto& fit = sel.best_fit;
        const auto assignment = hard_assign(fit.membership);
        std::ostringstream mem;
        mem << "path_row,cluster";
        for (int j = 0; j < sel.best_c; ++j) mem << ",u_" << j;
        mem << "\n";
        for (std::size_t l = 0; l < existent.size(); ++l) {
            mem << rows[l] << ',' << assignment[l];
            for (int j = 0; j < sel.best_c; ++j) mem << ',' << format_number(fit.membership(static_cast<std::size_t>(j), l));
            mem << "\n";
        }
        put("memberships.csv", mem.str());

        nlohmann::ordered_json j;
        j["best_c"] = sel.best_c;
        j["iterations"] = fit.iterations;
        j["converged"] = fit.converged;
        j["objective_history"] = fit.objective_history;
        j["scores"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < sel.report.size(); ++i)
            j["scores"].push_back({{"c", sel.report[i].c},
                                   {"degenerate", sel.report[i].degenerate},
                                   {"score", std::isnan(sel.scores[i]) ? nlohmann::ordered_json() : nlohmann::ordered_json(sel.scores[i])}});
        j["centroids"] = nlohmann::ordered_json::array();
        for (const auto& v : fit.centroids) j["centroids"].push_back(v);
        put("clusters.json", j.dump(2) + "\n");
        log_ << "  best cluster count " << sel.best_c << "\n";
        return {"validity.csv", "memberships.csv", "clusters.json"};
    }

    Clustered clustered() const {
        const auto all = paths();
        Clustered c;
        std::istringstream in(get("memberships.csv"));
        std::string line;
        std::getline(in, line);
        const auto header = split_csv_line(line);
        if (header.size() < 4 || header[0] != "path_row" || header[1] != "cluster")
            throw ParseError("memberships.csv: bad header", 1);
        const std::size_t k = header.size() - 2;
        std::vector<std::vector<double>> cols;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = split_csv_line(line);
            if (f.size() != header.size()) throw ParseError("memberships.csv: malformed row");
            const std::size_t row = std::stoul(f[0]);
            c.rows.push_back(row);
            c.paths.push_back(all.at(row));
            c.assignment.push_back(std::stoi(f[1]));
            std::vector<double> col;
            for (std::size_t j = 0; j < k; ++j) col.push_back(parse_number(f[j + 2]));
            cols.push_back(std::move(col));
        }
        c.u = MembershipMatrix(k, cols.size());
        for (std::size_t l = 0; l < cols.size(); ++l)
            for (std::size_t j = 0; j < k; ++j) c.u(j, l) = cols[l][j];
        return c;
    }

    std::vector<std::string> zones() {
        const auto locs = locations();
        const Clustered c = clustered();
        const int k = static_cast<int>(c.u.clusters());
        const auto members = cluster_members(c.assignment, k);
        std::vector<std::optional<ClusterParams>> params;
        std::ostringstream csv;
        csv << "cluster,paths,kept";
        for (const char* name : {"mean_aaod", "mean_eaod", "mean_aaoa", "mean_eaoa", "mean_delay", "mean_power",
                                 "spread_aaod", "spread_eaod", "spread_aaoa", "spread_eaoa", "spread_delay",
                                 "spread_power"})
            csv << ',' << name;
        csv << "\n";
        for (int j = 0; j < k; ++j) {
            const auto& m = members[static_cast<std::size_t>(j)];
            if (m.empty()) {
                params.emplace_back();
                continue;
            }
            std::vector<PathRecord> sub;
            for (std::size_t l : m) sub.push_back(c.paths[l]);
            ClusterParams p = cluster_params(sub);
            std::size_t kept = sub.size();
            if (cfg_.prune && sub.size() >= 2) {
                const PruneResult pr = prune_cluster(sub, p, cfg_.prune_ratio);
                p = pr.params;
                kept = pr.kept.size();
            }
            params.emplace_back(p);
            csv << j << ',' << sub.size() << ',' << kept;
            for (double v : p.values()) csv << ',' << format_number(v);
            csv << "\n";
        }
        put("cluster_params.csv", csv.str());

        const ZoneMap map = form_zones(locs.size(), c.assignment, c.paths, params);
        put("zones.json", zones_json(map).dump(2) + "\n");
        std::ostringstream zone_csv;
        write_zone_csv(zone_csv, locs, map);
        put("zone_map.csv", zone_csv.str());

        const auto regions = cluster_regions(c.assignment, c.u, c.paths, cfg_.membership_threshold);
        nlohmann::ordered_json rj = nlohmann::ordered_json::array();
        for (const auto& r : regions)
            rj.push_back({{"cluster_id", r.cluster_id},
                          {"deterministic_locations", r.deterministic_locations},
                          {"fuzzy_locations", r.fuzzy_locations}});
        put("regions.json", rj.dump(2) + "\n");
        log_ << "  " << map.zones.size() - 1 << " zones plus the block zone (" << map.zones[0].locations.size()
             << " blocked locations)\n";
        return {"cluster_params.csv", "zones.json", "zone_map.csv", "regions.json"};
    }

    std::vector<LabeledPath> dataset() const {
        const auto locs = locations();
        const auto all = paths();
        return build_dataset(scene(), locs, all);
    }

    LocationSplit split() const {
        const auto j = nlohmann::json::parse(get("split.json"));
        return {j.at("train").get<std::vector<int>>(), j.at("test").get<std::vector<int>>()};
    }

    std::vector<std::string> train() {
        const auto data = dataset();
        const auto locs = locations();
        const LocationSplit sp = split_dataset(locs.size(), cfg_.split_ratio, derive_seed(cfg_.seed, "split"));
        nlohmann::ordered_json sj;
        sj["ratio_train"] = cfg_.split_ratio;
        sj["train"] = sp.train;
        sj["test"] = sp.test;
        put("split.json", sj.dump(2) + "\n");

        const auto train_rows = select_locations(data, sp.train);
        const Classifier cls = Classifier::train(train_rows, cfg_.classifier);
        put("classifier.json", cls.to_json().dump(1) + "\n");
        const RegressorSet reg = train_regressors(train_rows, cfg_.ensemble);
        put("regressors.json", reg.to_json().dump() + "\n");
        std::vector<std::string> out = {"split.json", "classifier.json", "regressors.json"};

        nlohmann::ordered_json meta;
        meta["train_paths"] = train_rows.size();
        meta["train_existent_paths"] = existent_only(train_rows).size();
        meta["classifier_final_loss"] = cls.loss_history().empty() ? 0.0 : cls.loss_history().back();
        meta["regressor_cv_rmse"] = reg.to_json()["cv_rmse"];
        if (cfg_.one_step) {
            const OneStepModel one = OneStepModel::train(train_rows, cfg_.one_step_spec);
            put("one_step.json", one.to_json().dump(1) + "\n");
            out.push_back("one_step.json");
            meta["one_step_trainer"] = one.trainer();
            meta["one_step_epochs"] = one.epochs_run();
            meta["one_step_final_mse"] = one.final_mse();
        }
        put("training.json", meta.dump(2) + "\n");
        out.push_back("training.json");
        return out;
    }

    std::vector<std::string> predict() {
        const Scene sc = scene();
        const auto locs = locations();
        const LocationSplit sp = split();
        const Classifier cls = Classifier::from_json(nlohmann::json::parse(get("classifier.json")));
        const RegressorSet reg = RegressorSet::from_json(nlohmann::json::parse(get("regressors.json")));
        std::vector<LabeledPath> slots;
        for (int k : sp.test) {
            const auto s = candidate_slots(sc, locs.at(static_cast<std::size_t>(k)), k);
            slots.insert(slots.end(), s.begin(), s.end());
        }
        const auto predicted = predict_paths(cls, reg, slots);
        std::ostringstream out;
        write_path_db(out, predicted);
        put("predicted_paths.csv", out.str());
        return {"predicted_paths.csv"};
    }

    std::vector<std::string> evaluate() {
        const auto data = dataset();
        const LocationSplit sp = split();
        const auto train_rows = select_locations(data, sp.train);
        const auto test_rows = select_locations(data, sp.test);
        std::istringstream pin(get("predicted_paths.csv"));
        const auto predicted = read_path_db(pin);
        if (predicted.size() != test_rows.size()) throw Error("evaluate: predicted paths do not match the test split");

        std::vector<int> truth, guess;
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
            truth.push_back(test_rows[i].label);
            guess.push_back(predicted[i].existent ? 1 : 0);
        }
        const RegressorSet reg = RegressorSet::from_json(nlohmann::json::parse(get("regressors.json")));
        SurrogateEvaluation ev = evaluate_regressors(reg, train_rows, test_rows);
        ev.classification = classification_metrics(guess, truth);
        nlohmann::ordered_json metrics;
        metrics["two_step"] = evaluation_json(ev);
        if (fs::exists(dir_ / "one_step.json")) {
            const OneStepModel one = OneStepModel::from_json(nlohmann::json::parse(get("one_step.json")));
            std::array<double, kTargetCount> sq{};
            std::size_t n = 0;
            for (const auto& s : test_rows) {
                if (s.label != 1) continue;
                const TargetVector p = one.predict(s.features);
                for (std::size_t k = 0; k < kTargetCount; ++k) sq[k] += (p[k] - s.targets[k]) * (p[k] - s.targets[k]);
                ++n;
            }
            nlohmann::ordered_json oj;
            oj["trainer"] = one.trainer();
            for (std::size_t k = 0; k < kTargetCount; ++k)
                oj["rmse"][kTargetNames[k]] = std::sqrt(sq[k] / static_cast<double>(std::max<std::size_t>(n, 1)));
            metrics["one_step"] = oj;
        }
        put("surrogate_metrics.json", metrics.dump(2) + "\n");

        const ZoneMap map = zones_from_json(nlohmann::json::parse(get("zones.json")), locations().size());
        std::vector<int> zone_ids = cfg_.hybrid_zones;
        const std::size_t groups = cfg_.hybrid.chains_per_group.size();
        if (zone_ids.empty()) {
            std::vector<const UTZone*> order;
            for (const auto& z : map.zones)
                if (!z.is_block()) order.push_back(&z);
            std::stable_sort(order.begin(), order.end(), [](const UTZone* a, const UTZone* b) {
                return a->locations.size() > b->locations.size();
            });
            for (std::size_t g = 0; g < std::min(groups, order.size()); ++g) zone_ids.push_back(order[g]->zone_id);
        }
        if (zone_ids.size() != groups)
            throw Error("evaluate: " + std::to_string(groups) + " groups configured but only " +
                        std::to_string(zone_ids.size()) + " zones available");
        std::vector<std::vector<ClusterSource>> sources;
        for (int id : zone_ids) {
            const auto it = std::find_if(map.zones.begin(), map.zones.end(), [&](const UTZone& z) { return z.zone_id == id; });
            if (it == map.zones.end() || it->is_block()) throw Error("evaluate: zone " + std::to_string(id) + " is not usable");
            sources.push_back(sources_from_group(it->group_csi, cfg_.sweep.paths_per_cluster));
        }
        const auto rates = simulate_sum_rate(sources, cfg_.hybrid, cfg_.array, cfg_.sweep);
        std::ostringstream csv;
        write_sumrate_csv(csv, rates, cfg_.hybrid.users());
        put("sumrate.csv", csv.str());

        nlohmann::ordered_json e;
        e["antennas"] = cfg_.array.size();
        e["rf_chains"] = cfg_.hybrid.rf_chains();
        e["csi_overhead_reduction_percent"] = csi_overhead_reduction(cfg_.array.size(), cfg_.hybrid.rf_chains());
        e["zones_used"] = zone_ids;
        e["sum_rate"] = nlohmann::ordered_json::array();
        for (const auto& r : rates) {
            const double a = compensated_mean(r.abhp), f = compensated_mean(r.fdp);
            e["sum_rate"].push_back({{"total_power_dbm", r.total_power_dbm},
                                     {"abhp", a},
                                     {"fdp", f},
                                     {"ratio", f > 0.0 ? a / f : 0.0}});
        }
        put("evaluation.json", e.dump(2) + "\n");
        return {"surrogate_metrics.json", "sumrate.csv", "evaluation.json"};
    }

public:
    /// Writes one plot table; kinds are validity, zones, sumrate and clusters.
    void emit_plot_data(const std::string& kind, std::ostream& out) const {
        if (kind == "validity") {
            out << get("validity.csv");
        } else if (kind == "zones") {
            out << get("zone_map.csv");
        } else if (kind == "sumrate") {
            out << get("sumrate.csv");
        } else if (kind == "clusters") {
            const Clustered c = clustered();
            out << "aaod,eaod,aaoa,eaoa,delay_s,rss_dbm,cluster\n";
            for (std::size_t l = 0; l < c.paths.size(); ++l) {
                const auto& p = c.paths[l];
                out << format_number(p.aaod) << ',' << format_number(p.eaod) << ',' << format_number(p.aaoa) << ','
                    << format_number(p.eaoa) << ',' << format_number(p.delay_s) << ',' << format_number(p.rss_dbm)
                    << ',' << c.assignment[l] << "\n";
            }
        } else {
            throw std::invalid_argument("unknown plot kind '" + kind + "' (expected validity, zones, sumrate or clusters)");
        }
    }

private:
    std::vector<std::string> plotdata() {
        std::vector<std::string> out;
        for (const char* kind : {"validity", "zones", "sumrate", "clusters"}) {
            std::ostringstream s;
            emit_plot_data(kind, s);
            const std::string name = std::string("plots/") + kind + ".csv";
            put(name, s.str());
            out.push_back(name);
        }
        return out;
    }

    RunConfig cfg_;
    fs::path dir_;
    std::ostream& log_;
};

}  // namespace geocsi
