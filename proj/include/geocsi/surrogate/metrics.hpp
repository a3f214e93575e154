#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include <json.hpp>

namespace geocsi {

inline constexpr double kProbabilityFloor = 1e-12;

/// -sum_v (1 - p_v)^gamma alpha_v ln p_v over both classes, alpha_0 = 1 - alpha_1.
inline double focal_loss(double p0, double p1, double gamma, double alpha1) {
    const double p[2] = {std::max(p0, kProbabilityFloor), std::max(p1, kProbabilityFloor)};
    const double alpha[2] = {1.0 - alpha1, alpha1};
    double loss = 0.0;
    for (int v = 0; v < 2; ++v) loss -= std::pow(1.0 - p[v], gamma) * alpha[v] * std::log(p[v]);
    return loss;
}

/// Single-term form on the probability of the true class.
inline double focal_loss_true_class(double p0, double p1, int label, double gamma, double alpha1) {
    const double p = std::max(label == 1 ? p1 : p0, kProbabilityFloor);
    const double alpha = label == 1 ? alpha1 : 1.0 - alpha1;
    return -std::pow(1.0 - p, gamma) * alpha * std::log(p);
}

struct ClassificationMetrics {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    // nullopt where a denominator is zero
    std::optional<double> precision, recall, f_score, kappa;

    long total() const { return tp + fp + tn + fn; }
};

inline ClassificationMetrics metrics_from_counts(long tp, long fp, long tn, long fn) {
    ClassificationMetrics m{tp, fp, tn, fn, {}, {}, {}, {}};
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
        m.f_score = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    // (p0 - pe) / (1 - pe) scaled by n^2: integer-valued terms, one rounding.
    const double n = static_cast<double>(m.total());
    const double chance = static_cast<double>(tn + fn) * static_cast<double>(tn + fp) +
                          static_cast<double>(fp + tp) * static_cast<double>(tp + fn);
    if (n > 0.0 && chance < n * n) m.kappa = (n * static_cast<double>(tp + tn) - chance) / (n * n - chance);
    return m;
}

inline ClassificationMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("classification_metrics: length mismatch");
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] == 1, t = truth[i] == 1;
        if (p && t) ++tp;
        else if (p) ++fp;
        else if (t) ++fn;
        else ++tn;
    }
    return metrics_from_counts(tp, fp, tn, fn);
}

inline double rmse(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
    if (truth.empty()) throw std::invalid_argument("rmse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
    return std::sqrt(s / static_cast<double>(truth.size()));
}

inline nlohmann::ordered_json metrics_json(const ClassificationMetrics& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    nlohmann::ordered_json j;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["tn"] = m.tn;
    j["fn"] = m.fn;
    j["precision"] = opt(m.precision);
    j["recall"] = opt(m.recall);
    j["f_score"] = opt(m.f_score);
    j["kappa"] = opt(m.kappa);
    return j;
}

}  // namespace geocsi
