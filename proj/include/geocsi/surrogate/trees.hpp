#pragma once

// Bagged CART regression ensembles, one per path parameter.
//
// Splits minimize the summed squared error of the two children over a random
// subset of the twelve non-BS features. Training rows are put in a canonical
// order first, so a model depends on the set of rows and the seed, not on the
// order the rows arrive in.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "geocsi/rng.hpp"
#include "geocsi/surrogate/dataset.hpp"
#include "geocsi/surrogate/metrics.hpp"

namespace geocsi {

inline constexpr std::size_t kFirstTreeFeature = 3;  // BS coordinates are never split on
inline constexpr std::size_t kTreeFeatureCount = kFeatureCount - kFirstTreeFeature;

struct EnsembleSpec {
    int n_trees = 30;
    int min_leaf_size = 1;
    int predictors_to_sample = 12;
    int bootstrap_size = 0;  // 0: as many draws as training rows
    int cv_folds = 5;        // 0 disables cross-validation
    std::uint64_t seed = 0;

    void validate() const {
        if (n_trees < 1) throw std::invalid_argument("EnsembleSpec: n_trees must be positive");
        if (min_leaf_size < 1) throw std::invalid_argument("EnsembleSpec: min_leaf_size must be positive");
        if (predictors_to_sample < 1 || predictors_to_sample > static_cast<int>(kTreeFeatureCount))
            throw std::invalid_argument("EnsembleSpec: predictors_to_sample must be in [1,12]");
        if (bootstrap_size < 0) throw std::invalid_argument("EnsembleSpec: bootstrap_size must be >= 0");
        if (cv_folds == 1 || cv_folds < 0) throw std::invalid_argument("EnsembleSpec: cv_folds must be 0 or >= 2");
    }
};

class RegressionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        double value = 0.0;
    };

    /// Grows a tree on rows[idx] (indices may repeat).
    static RegressionTree fit(std::span<const FeatureVector> x, std::span<const double> y,
                              std::vector<std::size_t> idx, const EnsembleSpec& spec, Rng& rng) {
        RegressionTree t;
        t.grow(x, y, idx, 0, idx.size(), spec, rng);
        return t;
    }

    double predict(const FeatureVector& f) const {
        int n = 0;
        while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
            const Node& node = nodes_[static_cast<std::size_t>(n)];
            n = f[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
        }
        return nodes_[static_cast<std::size_t>(n)].value;
    }

    const std::vector<Node>& nodes() const { return nodes_; }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& n : nodes_) j.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        return j;
    }

    static RegressionTree from_json(const nlohmann::json& j) {
        RegressionTree t;
        for (const auto& n : j) t.nodes_.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<double>()});
        return t;
    }

private:
    int grow(std::span<const FeatureVector> x, std::span<const double> y, std::vector<std::size_t>& idx,
             std::size_t begin, std::size_t end, const EnsembleSpec& spec, Rng& rng) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        const std::size_t n = end - begin;
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) sum += y[idx[i]];
        nodes_.back().value = sum / static_cast<double>(n);
        const std::size_t min_leaf = static_cast<std::size_t>(spec.min_leaf_size);
        if (n < 2 * min_leaf) return id;

        std::array<std::size_t, kTreeFeatureCount> features;
        std::iota(features.begin(), features.end(), kFirstTreeFeature);
        std::shuffle(features.begin(), features.end(), rng);

        double total_sq = 0.0;
        for (std::size_t i = begin; i < end; ++i) total_sq += y[idx[i]] * y[idx[i]];
        const double parent_sse = total_sq - sum * sum / static_cast<double>(n);
        if (!(parent_sse > 1e-12 * total_sq)) return id;  // relative: targets may be nanoseconds

        double best_sse = parent_sse;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> order(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                       idx.begin() + static_cast<std::ptrdiff_t>(end));
        for (int k = 0; k < spec.predictors_to_sample; ++k) {
            const std::size_t f = features[static_cast<std::size_t>(k)];
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (x[a][f] != x[b][f]) return x[a][f] < x[b][f];
                return a < b;
            });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double v = y[order[i]];
                left_sum += v;
                left_sq += v * v;
                const std::size_t nl = i + 1, nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double xl = x[order[i]][f], xr = x[order[i + 1]][f];
                if (!(xl < xr)) continue;
                const double right_sum = sum - left_sum, right_sq = total_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                                   (right_sq - right_sum * right_sum / static_cast<double>(nr));
                if (sse < best_sse - 1e-12 * parent_sse) {
                    best_sse = sse;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (xl + xr);
                }
            }
        }
        if (best_feature < 0) return id;

        const auto mid = std::stable_partition(
            idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::size_t r) { return x[r][static_cast<std::size_t>(best_feature)] <= best_threshold; });
        const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
        const int left = grow(x, y, idx, begin, split, spec, rng);
        const int right = grow(x, y, idx, split, end, spec, rng);
        Node& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left;
        node.right = right;
        return id;
    }

    std::vector<Node> nodes_;
};

class TreeEnsemble {
public:
    static TreeEnsemble fit(std::span<const FeatureVector> x, std::span<const double> y, const EnsembleSpec& spec,
                            std::uint64_t seed) {
        spec.validate();
        if (x.empty() || x.size() != y.size()) throw std::invalid_argument("TreeEnsemble: bad training data");
        TreeEnsemble e;
        Rng rng(seed);
        const std::size_t draws = spec.bootstrap_size > 0 ? static_cast<std::size_t>(spec.bootstrap_size) : x.size();
        std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
        for (int t = 0; t < spec.n_trees; ++t) {
            std::vector<std::size_t> idx(draws);
            for (auto& i : idx) i = pick(rng);
            e.trees_.push_back(RegressionTree::fit(x, y, std::move(idx), spec, rng));
        }
        return e;
    }

    double predict(const FeatureVector& f) const {
        double s = 0.0;
        for (const auto& t : trees_) s += t.predict(f);
        return s / static_cast<double>(trees_.size());
    }

    const std::vector<RegressionTree>& trees() const { return trees_; }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& t : trees_) j.push_back(t.to_json());
        return j;
    }

    static TreeEnsemble from_json(const nlohmann::json& j) {
        TreeEnsemble e;
        for (const auto& t : j) e.trees_.push_back(RegressionTree::from_json(t));
        return e;
    }

private:
    std::vector<RegressionTree> trees_;
};

/// Six ensembles: aaod, eaod, aaoa, eaoa, rss, delay.
struct RegressorSet {
    EnsembleSpec spec;
    std::array<TreeEnsemble, kTargetCount> ensembles;
    std::array<double, kTargetCount> cv_rmse{};  // NaN when cross-validation is disabled

    TargetVector predict(const FeatureVector& f) const {
        TargetVector out{};
        for (std::size_t k = 0; k < kTargetCount; ++k) out[k] = ensembles[k].predict(f);
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["type"] = "tree-ensembles";
        j["spec"] = {{"n_trees", spec.n_trees},
                     {"min_leaf_size", spec.min_leaf_size},
                     {"predictors_to_sample", spec.predictors_to_sample},
                     {"bootstrap_size", spec.bootstrap_size},
                     {"cv_folds", spec.cv_folds},
                     {"seed", spec.seed}};
        j["cv_rmse"] = nlohmann::json::object();
        for (std::size_t k = 0; k < kTargetCount; ++k)
            j["cv_rmse"][kTargetNames[k]] = std::isnan(cv_rmse[k]) ? nlohmann::json() : nlohmann::json(cv_rmse[k]);
        j["ensembles"] = nlohmann::json::array();
        for (const auto& e : ensembles) j["ensembles"].push_back(e.to_json());
        return j;
    }

    static RegressorSet from_json(const nlohmann::json& j) {
        if (j.at("type") != "tree-ensembles") throw std::invalid_argument("not a tree-ensemble model");
        RegressorSet r;
        const auto& s = j.at("spec");
        r.spec.n_trees = s.at("n_trees");
        r.spec.min_leaf_size = s.at("min_leaf_size");
        r.spec.predictors_to_sample = s.at("predictors_to_sample");
        r.spec.bootstrap_size = s.at("bootstrap_size");
        r.spec.cv_folds = s.at("cv_folds");
        r.spec.seed = s.at("seed");
        for (std::size_t k = 0; k < kTargetCount; ++k) {
            const auto& v = j.at("cv_rmse").at(kTargetNames[k]);
            r.cv_rmse[k] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
            r.ensembles[k] = TreeEnsemble::from_json(j.at("ensembles").at(k));
        }
        return r;
    }
};

namespace detail {

inline bool canonical_less(const LabeledPath& a, const LabeledPath& b) {
    if (a.features != b.features) return a.features < b.features;
    return a.targets < b.targets;
}

inline RegressorSet fit_regressors(const std::vector<LabeledPath>& rows, const EnsembleSpec& spec) {
    RegressorSet r;
    r.spec = spec;
    std::vector<FeatureVector> x;
    for (const auto& s : rows) x.push_back(s.features);
    for (std::size_t k = 0; k < kTargetCount; ++k) {
        std::vector<double> y;
        for (const auto& s : rows) y.push_back(s.targets[k]);
        r.ensembles[k] = TreeEnsemble::fit(x, y, spec, derive_seed(spec.seed, kTargetNames[k]));
    }
    r.cv_rmse.fill(std::numeric_limits<double>::quiet_NaN());
    return r;
}

}  // namespace detail

/// Trains the six ensembles on existent paths and reports k-fold RMSE per target.
inline RegressorSet train_regressors(std::span<const LabeledPath> train, const EnsembleSpec& spec) {
    spec.validate();
    std::vector<LabeledPath> rows;
    for (const auto& s : train)
        if (s.label == 1) rows.push_back(s);
    const std::size_t need = std::max<std::size_t>(1, static_cast<std::size_t>(spec.cv_folds));
    if (rows.size() < need) throw std::invalid_argument("train_regressors: too few existent samples");
    std::sort(rows.begin(), rows.end(), detail::canonical_less);

    RegressorSet model = detail::fit_regressors(rows, spec);
    if (spec.cv_folds >= 2) {
        const std::size_t folds = static_cast<std::size_t>(spec.cv_folds);
        std::vector<std::size_t> perm(rows.size());
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(spec.seed, "cv-folds"));
        std::shuffle(perm.begin(), perm.end(), rng);
        std::array<double, kTargetCount> sq{};
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<LabeledPath> fit_rows, held;
            for (std::size_t i = 0; i < perm.size(); ++i) (i % folds == f ? held : fit_rows).push_back(rows[perm[i]]);
            std::sort(fit_rows.begin(), fit_rows.end(), detail::canonical_less);
            EnsembleSpec fold_spec = spec;
            fold_spec.seed = derive_seed(spec.seed, "cv", f);
            const RegressorSet fold = detail::fit_regressors(fit_rows, fold_spec);
            for (const auto& s : held) {
                const TargetVector p = fold.predict(s.features);
                for (std::size_t k = 0; k < kTargetCount; ++k) sq[k] += (p[k] - s.targets[k]) * (p[k] - s.targets[k]);
            }
        }
        for (std::size_t k = 0; k < kTargetCount; ++k) model.cv_rmse[k] = std::sqrt(sq[k] / static_cast<double>(rows.size()));
    }
    return model;
}

}  // namespace geocsi
