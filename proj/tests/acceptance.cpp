// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "geocsi/cluster.hpp"
#include "geocsi/pipeline.hpp"
#include "geocsi/precode.hpp"
#include "geocsi/raytrace.hpp"
#include "geocsi/scene.hpp"
#include "geocsi/surrogate/cnn.hpp"
#include "geocsi/surrogate/dataset.hpp"
#include "geocsi/surrogate/metrics.hpp"
#include "geocsi/surrogate/two_step.hpp"
#include "geocsi/zones.hpp"
#include "support.hpp"

using namespace geocsi;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Collects failed checks and a few reported numbers for the summary line.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        failed_ += !ok;
    }
    void note(const std::string& text) { notes_.push_back(text); }
    bool passed() const { return failed_ == 0; }

    std::string detail() const {
        std::ostringstream s;
        for (std::size_t i = 0; i < notes_.size(); ++i) s << (i ? "; " : "") << notes_[i];
        if (failed_) {
            s << (notes_.empty() ? "" : "; ") << failed_ << " failed check(s):";
            for (const auto& f : failures_) s << " [" << f << "]";
        }
        return s.str();
    }

private:
    long failed_ = 0;
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("geocsi_acceptance_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

RunConfig bundled_config() {
    return RunConfig::from(KeyValueConfig::load(fs::path(GEOCSI_DATA_DIR) / "synthetic_room.cfg"));
}

// 1. LoS and reflection existence against the sampling oracle, image-method angles.
void geometry_oracle(Check& c) {
    const std::vector<std::pair<std::string, Scene>> scenes = {
        {"empty box", support::empty_box()}, {"one-wall room", support::one_wall_room()},
        {"closed room", support::closed_room()}};
    RadioConfig radio;
    radio.absorption_per_m = 0.0;
    std::mt19937_64 rng(2024);
    long disagreements = 0, reflections = 0;
    double worst_angle = 0.0;
    for (const auto& [name, base] : scenes) {
        c.expect(base.planes.size() >= 6 && base.planes.size() <= 20, name + " plane count");
        for (int i = 0; i < 10000; ++i) {
            Scene s = base;
            s.bs_position = support::random_free_point(s, rng);
            const Point3 ut = support::random_free_point(s, rng);
            const bool los = trace_los(s, ut, radio).existent;
            if (los == support::oracle_blocked(s, s.bs_position, ut, -1, 100)) {
                ++disagreements;
                c.expect(false, name + " LoS pair " + std::to_string(i));
            }
            for (std::size_t k = 0; k < s.planes.size(); ++k) {
                ReflectionGeometry g;
                const auto r = trace_reflection(s, ut, k, radio, 0, &g);
                if (r.existent != support::oracle_reflection_exists(s, k, ut, 100)) {
                    ++disagreements;
                    c.expect(false, name + " reflection pair " + std::to_string(i) + " plane " + std::to_string(k));
                }
                if (!r.existent) continue;
                ++reflections;
                const support::V n = support::plane_normal(s.planes[k]);
                const double in = support::angle_to_normal(support::v_of(g.reflection_point - s.bs_position), n);
                const double out = support::angle_to_normal(support::v_of(ut - g.reflection_point), n);
                worst_angle = std::max(worst_angle, std::abs(in - out));
            }
        }
    }
    c.expect(worst_angle <= 1e-9, "incidence = reflection within 1e-9 rad");
    c.note("3 scenes x 10000 pairs, " + std::to_string(disagreements) + " disagreements, " +
           std::to_string(reflections) + " reflections, max angle error " + fmt(worst_angle, 3) + " rad");
}

// 2. Loss formulas.
void loss_formulas(Check& c) {
    RadioConfig r;
    r.frequency_hz = 28e9;
    r.path_loss_exponent = 2.0;
    r.absorption_per_m = 0.0;
    const double fspl = path_loss_fspl(1.0, r);
    c.expect(std::abs(fspl - 61.39) <= 0.01, "FSPL(28 GHz, 1 m) = 61.39 +- 0.01, got " + fmt(fspl, 8));
    const double lr = reflection_loss({0.5, 1.0});
    c.expect(std::abs(lr - 6.0206) <= 1e-3, "reflection_loss(0.5, 1) = 6.0206, got " + fmt(lr, 8));
    bool exact = true;
    for (double d : {0.3, 1.0, 4.7, 25.0, 180.0})
        for (double eta : {1.8, 2.0, 2.1, 3.0}) {
            r.path_loss_exponent = eta;
            const double lambda = kSpeedOfLight / r.frequency_hz;
            const double without = -10.0 * std::log10(lambda * lambda / (16.0 * kPi * kPi * std::pow(d, eta)));
            exact = exact && path_loss_fspl(d, r) == without;
        }
    c.expect(exact, "k(f) = 0 reproduces the no-absorption value exactly");
    c.note("FSPL " + fmt(fspl, 6) + " dB, reflection loss " + fmt(lr, 6) + " dB");
}

// 3. FCM invariants on 200 seeded runs.
void fcm_invariants(Check& c) {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> az(-kPi, kPi), el(-1.2, 1.2), delay(5e-9, 8e-8), rss(-110.0, -50.0);
    std::uniform_int_distribution<int> nr(10, 2000), shift(-2, 2);
    double worst_sum = 0.0, worst_rise = 0.0, worst_shift = 0.0;
    for (int run = 0; run < 200; ++run) {
        const int n = run < 20 ? 10 + run : nr(rng);
        const int k = 2 + run % 19;
        std::vector<PathRecord> paths;
        for (int l = 0; l < n; ++l)
            paths.push_back(support::make_path({az(rng), el(rng), az(rng), el(rng), delay(rng)}, rss(rng), l));
        const WeightedPaths d = weighted_paths(paths);
        FcmConfig cfg;
        cfg.clusters = std::min(k, n);
        cfg.seed = derive_seed(303, "run", static_cast<std::uint64_t>(run));
        const FcmResult fit = fcm_fit(d, cfg);

        for (std::size_t l = 0; l < d.size(); ++l) {
            double s = 0.0;
            for (std::size_t j = 0; j < fit.membership.clusters(); ++j) s += fit.membership(j, l);
            worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        }
        const auto& h = fit.objective_history;
        for (std::size_t t = 1; t < h.size(); ++t)
            worst_rise = std::max(worst_rise, (h[t] - h[t - 1]) / std::max(1.0, h[t - 1]));

        WeightedPaths shifted = d;
        for (auto& x : shifted.x)
            for (int i = 0; i < 4; ++i) x[static_cast<std::size_t>(i)] += 2.0 * kPi * shift(rng);
        const double j0 = fcm_objective(d.x, d.weight, fit.membership, fit.centroids, cfg.fuzzifier);
        const double j1 = fcm_objective(shifted.x, shifted.weight, fit.membership, fit.centroids, cfg.fuzzifier);
        worst_shift = std::max(worst_shift, std::abs(j1 - j0) / std::max(1.0, j0));
        // The same seeded start on shifted data reproduces the first objective.
        FcmConfig one = cfg;
        one.max_iterations = 1;
        const double f0 = fcm_fit(d, one).objective_history.front();
        const double f1 = fcm_fit(shifted, one).objective_history.front();
        worst_shift = std::max(worst_shift, std::abs(f1 - f0) / std::max(1.0, f0));
    }
    c.expect(worst_sum <= 1e-9, "membership columns sum to 1");
    c.expect(worst_rise <= 1e-9, "objective history non-increasing");
    c.expect(worst_shift <= 1e-9, "2 pi shift leaves J unchanged");

    const std::vector<PathVector> x{{0.0, 0.1, 0.2, 0.0, 1e-8}};
    const std::vector<PathVector> v{{0.3, 0.1, 0.2, 0.0, 1e-8}, {-0.3, 0.1, 0.2, 0.0, 1e-8}};
    const auto u = memberships(x, v, 2.0);
    c.expect(u(0, 0) == 0.5 && u(1, 0) == 0.5, "equidistant path membership is exactly 0.5");
    c.note("200 runs; max |colsum-1| " + fmt(worst_sum, 3) + ", max rise " + fmt(worst_rise, 3) +
           ", max 2pi-shift change " + fmt(worst_shift, 3));
}

// 4. Validity indices.
void validity(Check& c) {
    const std::vector<PathVector> x{{0, 0, 0, 0, 0}, {0.1, 0, 0, 0, 0}, {2, 0, 0, 0, 0}, {2.1, 0, 0, 0, 0}};
    const std::vector<PathVector> v{{0.05, 0, 0, 0, 0}, {2.05, 0, 0, 0, 0}};
    MembershipMatrix crisp(2, 4);
    crisp(0, 0) = crisp(0, 1) = crisp(1, 2) = crisp(1, 3) = 1.0;
    const auto r = validity_indices(x, crisp, v, 2.0);
    c.expect(r.pc == 1.0 && r.pe == 0.0, "crisp partition gives PC = 1, PE = 0 exactly");

    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> a(-kPi, kPi), e(-1.2, 1.2), d(5e-9, 8e-8), unit(0.05, 1.0);
    auto random_vector = [&] { return PathVector{a(rng), e(rng), a(rng), e(rng), d(rng)}; };
    double worst_uniform = 0.0;
    for (std::size_t k = 2; k <= 8; ++k) {
        std::vector<PathVector> xs, vs;
        for (int l = 0; l < 15; ++l) xs.push_back(random_vector());
        for (std::size_t j = 0; j < k; ++j) vs.push_back(random_vector());
        MembershipMatrix u(k, xs.size());
        for (std::size_t l = 0; l < xs.size(); ++l)
            for (std::size_t j = 0; j < k; ++j) u(j, l) = 1.0 / static_cast<double>(k);
        worst_uniform = std::max(worst_uniform, std::abs(validity_indices(xs, u, vs, 2.0).pc - 1.0 / k));
    }
    c.expect(worst_uniform <= 1e-12, "uniform partition gives PC = 1/c");

    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const double m = trial % 2 ? 2.0 : 1.7;
        std::vector<PathVector> xs, vs;
        for (int l = 0; l < 6; ++l) xs.push_back(random_vector());
        for (int j = 0; j < 2; ++j) vs.push_back(random_vector());
        std::vector<std::vector<double>> uu(2, std::vector<double>(6));
        MembershipMatrix u(2, 6);
        for (std::size_t l = 0; l < 6; ++l) {
            const double p0 = unit(rng), p1 = unit(rng);
            double p = p0 / (p0 + p1);
            if (l == 0) p = std::max(p, 0.8);
            if (l == 1) p = std::min(p, 0.2);
            uu[0][l] = u(0, l) = p;
            uu[1][l] = u(1, l) = 1.0 - p;
        }
        const auto got = validity_indices(xs, u, vs, m);
        const auto want = support::oracle_validity(xs, uu, vs, m);
        for (auto [g, w] : {std::pair{got.pc, want.pc}, {got.pe, want.pe}, {got.sc, want.sc}, {got.s, want.s},
                            {got.xb, want.xb}})
            worst = std::max(worst, std::abs(g - w) / std::max(1.0, std::abs(w)));
    }
    c.expect(worst <= 1e-9, "five indices match the direct-formula oracle");
    c.note("max uniform PC error " + fmt(worst_uniform, 3) + ", max 6-path deviation " + fmt(worst, 3));
}

// 5. Pruning contract.
void pruning(Check& c) {
    const auto p = support::nine_plus_outlier();
    const auto bench = cluster_params(p);
    const auto r = prune_cluster(p, bench);
    c.expect(r.kept.size() == 9, "nine paths kept");
    c.expect(std::find(r.kept_indices.begin(), r.kept_indices.end(), 9u) == r.kept_indices.end(), "outlier removed");
    const auto got = r.params.values(), ref = bench.values();
    double min_ratio = 1e300;
    for (std::size_t i = 0; i < ClusterParams::kCount; ++i) {
        if (ref[i] == 0.0) continue;
        min_ratio = std::min(min_ratio, std::abs(got[i]) / std::abs(ref[i]));
    }
    c.expect(min_ratio > 0.95, "all parameters above 95% of the benchmark");

    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> ang(-kPi, kPi), rss(-100.0, -40.0), dl(5e-9, 5e-8);
    std::uniform_int_distribution<int> size(2, 40);
    std::size_t smallest = 1000;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<PathRecord> cl;
        const int n = size(rng);
        const double centre = ang(rng);
        for (int l = 0; l < n; ++l)
            cl.push_back(support::make_path({centre + 0.3 * std::sin(ang(rng)), 0.4 * std::sin(ang(rng)),
                                             ang(rng), 0.4 * std::sin(ang(rng)), dl(rng)},
                                            trial % 3 ? rss(rng) : -60.0, l));
        const auto pr = prune_cluster(cl, cluster_params(cl));
        smallest = std::min(smallest, pr.kept.size());
    }
    c.expect(smallest >= 2, "pruning keeps at least two paths");
    c.note("kept " + std::to_string(r.kept.size()) + " of 10, min parameter ratio " + fmt(min_ratio, 5) +
           ", smallest kept over 500 random clusters " + std::to_string(smallest));
}

// 6. Zone partition on traced scenes.
void zone_partition(Check& c) {
    std::vector<std::pair<std::string, Scene>> scenes = {
        {"empty box", support::empty_box()}, {"one-wall room", support::one_wall_room()},
        {"closed room", support::closed_room()}};
    const Scene room = load_scene((fs::path(GEOCSI_DATA_DIR) / "synthetic_room.scene").string());
    scenes.emplace_back("bundled room", quantize_merge(room, room.resolution));
    std::ostringstream summary;
    for (const auto& [name, scene] : scenes) {
        const auto traced = trace_scene(scene, feasible_locations(scene, 0.5), RadioConfig{});
        const std::size_t K = traced.locations.size();
        std::vector<PathRecord> existent;
        for (const auto& p : traced.paths)
            if (p.existent) existent.push_back(p);
        FcmConfig cfg;
        cfg.seed = 606;
        cfg.max_iterations = 300;
        const auto sel = select_cluster_count(existent, std::min<int>(6, static_cast<int>(existent.size())), cfg);
        const auto assign = hard_assign(sel.best_fit.membership);
        const auto members = cluster_members(assign, sel.best_c);
        std::vector<std::optional<ClusterParams>> params;
        for (const auto& m : members) {
            if (m.empty()) {
                params.emplace_back();
                continue;
            }
            std::vector<PathRecord> sub;
            for (std::size_t l : m) sub.push_back(existent[l]);
            params.emplace_back(sub.size() >= 2 ? prune_cluster(sub, cluster_params(sub)).params : cluster_params(sub));
        }
        const ZoneMap map = form_zones(K, assign, existent, params);

        std::vector<std::set<int>> sets(K);
        for (std::size_t l = 0; l < existent.size(); ++l)
            sets[static_cast<std::size_t>(existent[l].ut_index)].insert(assign[l]);
        std::vector<int> seen(K, 0);
        for (const auto& z : map.zones)
            for (int k : z.locations) {
                ++seen[static_cast<std::size_t>(k)];
                const auto& s = sets[static_cast<std::size_t>(k)];
                c.expect(std::vector<int>(s.begin(), s.end()) == z.cluster_group, name + ": zone group mismatch");
                c.expect(map.zone_of[static_cast<std::size_t>(k)] == z.zone_id, name + ": zone_of mismatch");
                c.expect(z.is_block() == s.empty(), name + ": block zone membership");
            }
        c.expect(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }),
                 name + ": every location in exactly one zone");
        for (std::size_t a = 0; a < K; ++a)
            for (std::size_t b = a + 1; b < K; ++b)
                c.expect((sets[a] == sets[b]) == (map.zone_of[a] == map.zone_of[b]),
                         name + ": identical cluster sets share a zone");
        summary << (summary.tellp() > 0 ? ", " : "") << name << " " << K << " locations/" << map.zones.size() - 1
                << " zones";
    }
    c.note(summary.str());
}

// 7. Surrogate correctness.
void surrogate(Check& c) {
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<LabeledPath> batch;
    for (int i = 0; i < 10; ++i) {
        LabeledPath s;
        s.features[0] = 0.3, s.features[1] = 2.5, s.features[2] = 2.7;
        for (std::size_t k = 3; k < kFeatureCount; ++k) s.features[k] = u(rng);
        s.label = s.features[3] > 2.5 ? 1 : 0;
        if (s.label) s.targets = {0.1, 0.2, 0.3, 0.4, -60, 1e-8};
        s.ut_index = i;
        batch.push_back(s);
    }
    double worst_grad = 0.0;
    for (int layers : {2, 5})
        for (FocalMode mode : {FocalMode::TrueClass, FocalMode::AsWritten}) {
            ClassifierSpec spec;
            spec.conv_layers = layers;
            spec.filters = 4;
            spec.loss = mode;
            spec.seed = 5;
            Classifier cls(spec);
            worst_grad = std::max(worst_grad, cls.gradient_check(batch));
        }
    c.expect(worst_grad <= 1e-4, "gradient check within 1e-4");

    double worst_focal = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double p = (i - 0.5) / 100.0;
        const double ce_true1 = -std::log(p), ce_true0 = -std::log(1.0 - p);
        worst_focal = std::max(worst_focal, std::abs(focal_loss(1.0 - p, p, 0.0, 0.5) - 0.5 * (ce_true1 + ce_true0)));
        worst_focal = std::max(worst_focal, std::abs(focal_loss_true_class(1.0 - p, p, 1, 0.0, 0.5) - 0.5 * ce_true1));
        worst_focal = std::max(worst_focal, std::abs(focal_loss_true_class(1.0 - p, p, 0, 0.0, 0.5) - 0.5 * ce_true0));
    }
    c.expect(worst_focal <= 1e-10, "gamma = 0, alpha = 0.5 focal loss is half the cross-entropy");

    const auto m = metrics_from_counts(40, 20, 30, 10);
    c.expect(m.kappa && *m.kappa == 0.4, "kappa(TP 40, FN 10, FP 20, TN 30) = 0.4 exactly");

    const Scene scene = support::one_wall_room();
    const auto traced = trace_scene(scene, feasible_locations(scene, 0.5), RadioConfig{});
    c.expect(traced.paths.size() <= 5000, "synthetic scene has at most 5000 paths");
    const auto data = build_dataset(scene, traced.locations, traced.paths);
    const auto sp = split_dataset(traced.locations.size(), 0.7, 11);
    const auto train = select_locations(data, sp.train);
    const auto test = select_locations(data, sp.test);
    ClassifierSpec cs;
    cs.conv_layers = 2;
    cs.filters = 16;
    cs.epochs = 25;
    cs.learning_rate = 1e-3;
    cs.batch_size = 64;
    cs.seed = 5;
    EnsembleSpec es;
    es.n_trees = 20;
    es.seed = 2;
    const auto t0 = std::chrono::steady_clock::now();
    const TwoStepModel model = train_two_step(train, cs, es);
    const auto ev = evaluate_two_step(model, train, test);
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    const double kappa = ev.classification.kappa.value_or(-1.0);
    const double ratio = ev.rmse[0] / ev.baseline_rmse[0];
    c.expect(kappa >= 0.8, "held-out kappa >= 0.8");
    c.expect(ratio < 0.5, "AAoD RMSE below half the mean-predictor baseline");
    c.expect(minutes < 10.0, "surrogate trained within 10 min");
    c.note("grad err " + fmt(worst_grad, 3) + ", focal err " + fmt(worst_focal, 3) + ", " +
           std::to_string(traced.paths.size()) + " paths, kappa " + fmt(kappa) + ", AAoD RMSE " + fmt(ev.rmse[0]) +
           " vs baseline " + fmt(ev.baseline_rmse[0]) + " (ratio " + fmt(ratio, 3) + ")");
}

// 8. Precoding.
void precoding(Check& c) {
    const double overhead = csi_overhead_reduction(256, 22);
    c.expect(overhead == 91.40625 && std::abs(overhead - 91.4) < 0.05, "CSI overhead reduction 91.40625%");

    // Zone CSI from the traced bundled room.
    const fs::path dir = scratch_dir("precode");
    const RunConfig cfg = bundled_config();
    std::ostringstream log;
    Pipeline p(cfg, dir, log);
    for (Stage s : {Stage::Preprocess, Stage::Trace, Stage::Cluster, Stage::Zones}) p.run(s);
    std::istringstream locations(read_file(dir / "locations.csv"));
    const ZoneMap map =
        zones_from_json(nlohmann::json::parse(read_file(dir / "zones.json")), read_locations(locations).size());
    fs::remove_all(dir);
    std::vector<const UTZone*> order;
    for (const auto& z : map.zones)
        if (!z.is_block()) order.push_back(&z);
    std::stable_sort(order.begin(), order.end(),
                     [](const UTZone* a, const UTZone* b) { return a->locations.size() > b->locations.size(); });
    c.expect(order.size() >= 2, "at least two zones");
    if (order.size() < 2) return;
    const std::vector<std::vector<ClusterSource>> groups = {sources_from_group(order[0]->group_csi, 5),
                                                            sources_from_group(order[1]->group_csi, 5)};
    const ArraySpec array{8, 8, 0.5};
    const HybridConfig hybrid{{4, 4}, {2, 2}};

    const Eigen::MatrixXcd f = rf_beamformer(groups, hybrid, array);
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(array.size(), array.size());
    const double pt = dbm_to_mw(40.0);
    double worst_power = 0.0;
    for (int r = 0; r < 100; ++r) {
        Rng rng(derive_seed(808, "power", static_cast<std::uint64_t>(r)));
        Eigen::MatrixXcd h(4, array.size());
        for (int k = 0; k < 4; ++k)
            h.row(k) = 1e-4 * synthesize_channel(groups[static_cast<std::size_t>(k / 2)], array, rng).transpose();
        const Eigen::MatrixXcd b_hp = bb_precoder(h * f, f, pt);
        const Eigen::MatrixXcd b_fd = bb_precoder(h, eye, pt);
        worst_power = std::max(worst_power, std::abs((f * b_hp).squaredNorm() - pt) / pt);
        worst_power = std::max(worst_power, std::abs(b_fd.squaredNorm() - pt) / pt);
    }
    c.expect(worst_power <= 1e-6, "power constraint met");

    std::mt19937_64 rng(809);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto random_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXcd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = {n01(rng), n01(rng)};
        return m;
    };
    double worst_sinr = 0.0;
    for (int k = 1; k <= 4; ++k)
        for (int nrf = k; nrf <= 4; ++nrf)
            for (int m = nrf; m <= 4; ++m) {
                const auto h = random_matrix(k, m), fm = random_matrix(m, nrf), b = random_matrix(nrf, k);
                const auto got = sinr(h, fm, b, 0.3);
                for (int user = 0; user < k; ++user) {
                    auto gain = [&](int i) {
                        cdouble s = 0.0;
                        for (int a = 0; a < m; ++a)
                            for (int r = 0; r < nrf; ++r) s += h(user, a) * fm(a, r) * b(r, i);
                        return std::norm(s);
                    };
                    double interference = 0.0;
                    for (int i = 0; i < k; ++i)
                        if (i != user) interference += gain(i);
                    const double want = gain(user) / (interference + 0.3);
                    worst_sinr = std::max(worst_sinr, std::abs(got[static_cast<std::size_t>(user)] - want) /
                                                          std::max(1.0, want));
                }
            }
    c.expect(worst_sinr <= 1e-10, "SINR matches the scalar expansion");

    SweepConfig sweep = cfg.sweep;
    sweep.total_power_dbm = {40.0};
    sweep.realizations = 500;
    const auto rates = simulate_sum_rate(groups, hybrid, array, sweep);
    long violations = 0;
    for (std::size_t r = 0; r < rates[0].abhp.size(); ++r) violations += rates[0].abhp[r] > rates[0].fdp[r] + 1e-9;
    const double ratio = compensated_mean(rates[0].abhp) / compensated_mean(rates[0].fdp);
    c.expect(violations == 0, "AB-HP <= FDP on every realization");
    c.expect(ratio >= 0.85, "mean AB-HP/FDP >= 0.85 at 40 dBm");
    c.note("M 64, N_RF 8, K_a 4, 500 realizations; AB-HP/FDP " + fmt(ratio) + ", " + std::to_string(violations) +
           " violations, power err " + fmt(worst_power, 3) + ", SINR err " + fmt(worst_sinr, 3));
}

// 9. Determinism of the full pipeline.
void determinism(Check& c) {
    std::map<std::string, std::string> runs[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path dir = scratch_dir("determinism" + std::to_string(i));
        std::ostringstream log;
        Pipeline p(bundled_config(), dir, log);
        p.run_all({kAllStages.begin(), kAllStages.end()});
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file()) runs[i][fs::relative(e.path(), dir).string()] = read_file(e.path());
        fs::remove_all(dir);
    }
    c.expect(runs[0].size() == runs[1].size() && !runs[0].empty(), "same artifact set");
    long differing = 0;
    for (const auto& [name, content] : runs[0]) {
        const auto it = runs[1].find(name);
        const bool same = it != runs[1].end() && it->second == content;
        differing += !same;
        c.expect(same, name + " identical");
    }
    c.note(std::to_string(runs[0].size()) + " artifacts compared, " + std::to_string(differing) + " differ");
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime limit
    std::function<void(Check&)> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "geometry oracle equivalence", 60, geometry_oracle},
        {2, "loss formulas", 0, loss_formulas},
        {3, "FCM invariants", 120, fcm_invariants},
        {4, "validity indices", 0, validity},
        {5, "pruning contract", 0, pruning},
        {6, "zone partition", 0, zone_partition},
        {7, "surrogate correctness", 0, surrogate},
        {8, "precoding", 300, precoding},
        {9, "determinism", 0, determinism},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (cr.limit_s > 0) check.expect(secs < cr.limit_s, "runtime under " + fmt(cr.limit_s, 4) + " s");
        failed += !check.passed();
        std::printf("criterion %d (%s): %s  %s  [%.1f s]\n", cr.id, cr.name, check.passed() ? "PASS" : "FAIL",
                    check.detail().c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
