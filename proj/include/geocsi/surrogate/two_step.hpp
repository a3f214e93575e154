#pragma once

// Two-step surrogate: the classifier decides whether a path slot exists and the
// regression ensembles fill in its parameters.

#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "geocsi/surrogate/cnn.hpp"
#include "geocsi/surrogate/dataset.hpp"
#include "geocsi/surrogate/ffnn.hpp"
#include "geocsi/surrogate/metrics.hpp"
#include "geocsi/surrogate/trees.hpp"

namespace geocsi {

struct TwoStepModel {
    Classifier classifier;
    RegressorSet regressors;
};

inline TwoStepModel train_two_step(std::span<const LabeledPath> train, const ClassifierSpec& cls,
                                   const EnsembleSpec& ens) {
    return {Classifier::train(train, cls), train_regressors(train, ens)};
}

/// Assembles a record from a class decision and regressed parameters.
inline PathRecord assemble_record(const LabeledPath& slot, int label, const TargetVector& t) {
    if (label == 0)
        return PathRecord::non_existent(slot.ut_index, slot.kind, slot.plane_id, PathStatus::Occluded);
    PathRecord r;
    r.ut_index = slot.ut_index;
    r.kind = slot.kind;
    r.plane_id = slot.plane_id;
    r.aaod = t[0];
    r.eaod = t[1];
    r.aaoa = t[2];
    r.eaoa = t[3];
    r.rss_dbm = t[4];
    r.delay_s = t[5];
    r.existent = true;
    r.status = PathStatus::Existent;
    return r;
}

/// Slots carry the features plus the provenance copied into each record.
inline std::vector<PathRecord> predict_paths(const Classifier& classifier, const RegressorSet& regressors,
                                             std::span<const LabeledPath> slots) {
    std::vector<FeatureVector> features;
    features.reserve(slots.size());
    for (const auto& s : slots) features.push_back(s.features);
    const std::vector<int> labels = classifier.predict(features);
    std::vector<PathRecord> out;
    out.reserve(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i)
        out.push_back(assemble_record(slots[i], labels[i], labels[i] ? regressors.predict(slots[i].features)
                                                                     : TargetVector{}));
    return out;
}

inline std::vector<PathRecord> predict_paths(const TwoStepModel& model, std::span<const LabeledPath> slots) {
    return predict_paths(model.classifier, model.regressors, slots);
}

struct SurrogateEvaluation {
    ClassificationMetrics classification;
    // over truly existent held-out paths, regressors applied to every one
    std::array<double, kTargetCount> rmse{};
    std::array<double, kTargetCount> baseline_rmse{};  // predicting the training mean
    std::size_t existent_count = 0;
};

/// Regression part only; `classification` is left empty.
inline SurrogateEvaluation evaluate_regressors(const RegressorSet& regressors, std::span<const LabeledPath> train,
                                               std::span<const LabeledPath> test) {
    SurrogateEvaluation ev;
    std::array<double, kTargetCount> mean{};
    std::size_t n_train = 0;
    for (const auto& s : train) {
        if (s.label != 1) continue;
        for (std::size_t k = 0; k < kTargetCount; ++k) mean[k] += s.targets[k];
        ++n_train;
    }
    for (auto& m : mean) m /= static_cast<double>(std::max<std::size_t>(n_train, 1));

    std::array<double, kTargetCount> sq{}, base{};
    for (const auto& s : test) {
        if (s.label != 1) continue;
        const TargetVector p = regressors.predict(s.features);
        for (std::size_t k = 0; k < kTargetCount; ++k) {
            sq[k] += (p[k] - s.targets[k]) * (p[k] - s.targets[k]);
            base[k] += (mean[k] - s.targets[k]) * (mean[k] - s.targets[k]);
        }
        ++ev.existent_count;
    }
    const double n = static_cast<double>(std::max<std::size_t>(ev.existent_count, 1));
    for (std::size_t k = 0; k < kTargetCount; ++k) {
        ev.rmse[k] = std::sqrt(sq[k] / n);
        ev.baseline_rmse[k] = std::sqrt(base[k] / n);
    }
    return ev;
}

inline SurrogateEvaluation evaluate_two_step(const TwoStepModel& model, std::span<const LabeledPath> train,
                                             std::span<const LabeledPath> test) {
    SurrogateEvaluation ev = evaluate_regressors(model.regressors, train, test);
    std::vector<FeatureVector> features;
    std::vector<int> truth;
    for (const auto& s : test) {
        features.push_back(s.features);
        truth.push_back(s.label);
    }
    ev.classification = classification_metrics(model.classifier.predict(features), truth);
    return ev;
}

inline nlohmann::ordered_json evaluation_json(const SurrogateEvaluation& ev) {
    nlohmann::ordered_json j = metrics_json(ev.classification);
    j["existent_test_paths"] = ev.existent_count;
    for (std::size_t k = 0; k < kTargetCount; ++k) {
        j["rmse"][kTargetNames[k]] = ev.rmse[k];
        j["baseline_rmse"][kTargetNames[k]] = ev.baseline_rmse[k];
    }
    return j;
}

}  // namespace geocsi
