#pragma once

// One-step baseline: a tanh feed-forward network mapping the 15 features to
// all six path parameters at once (zeros for non-existent paths), trained by
// Levenberg-Marquardt. Above `lm_max_samples` rows it falls back to Adam and
// records that in the model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "geocsi/rng.hpp"
#include "geocsi/surrogate/dataset.hpp"

namespace geocsi {

struct OneStepSpec {
    std::vector<int> hidden = {25, 15};
    int max_epochs = 200;
    double mu_initial = 1e-3;
    double mu_decrease = 0.1;
    double mu_increase = 10.0;
    double mu_max = 1e10;
    double min_gradient = 1e-9;
    std::size_t lm_max_samples = 1500;
    int first_order_epochs = 300;
    int first_order_batch = 64;
    double first_order_learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

/// Training targets with the non-existent encoding mapped to zeros.
inline TargetVector one_step_targets(const LabeledPath& s) {
    if (s.label == 0) return TargetVector{};
    return s.targets;
}

class OneStepModel {
public:
    OneStepModel() = default;

    static OneStepModel train(std::span<const LabeledPath> data, const OneStepSpec& spec) {
        if (data.empty()) throw std::invalid_argument("train_one_step: empty training set");
        for (int h : spec.hidden)
            if (h < 1) throw std::invalid_argument("train_one_step: hidden layer sizes must be positive");
        OneStepModel m;
        m.spec_ = spec;
        m.layout();
        std::vector<FeatureVector> xs;
        std::vector<TargetVector> ys;
        for (const auto& s : data) {
            xs.push_back(s.features);
            ys.push_back(one_step_targets(s));
        }
        m.in_ = Standardizer::fit(xs, kFeatureCount);
        m.out_ = Standardizer::fit(ys, kTargetCount);
        const std::size_t n = data.size();
        m.x_ = Eigen::MatrixXd(kFeatureCount, n);
        m.y_ = Eigen::MatrixXd(kTargetCount, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < kFeatureCount; ++k) m.x_(k, i) = m.in_.forward(k, xs[i][k]);
            for (std::size_t k = 0; k < kTargetCount; ++k) m.y_(k, i) = m.out_.forward(k, ys[i][k]);
        }
        m.initialize();
        if (n <= spec.lm_max_samples) {
            m.trainer_ = "levenberg-marquardt";
            m.train_lm();
        } else {
            m.trainer_ = "adam";
            m.train_adam();
        }
        m.x_.resize(0, 0);
        m.y_.resize(0, 0);
        return m;
    }

    TargetVector predict(const FeatureVector& f) const {
        Eigen::VectorXd a(kFeatureCount);
        for (std::size_t k = 0; k < kFeatureCount; ++k) a(k) = in_.forward(k, f[k]);
        const Eigen::VectorXd out = forward(a, nullptr);
        TargetVector t{};
        for (std::size_t k = 0; k < kTargetCount; ++k) t[k] = out_.inverse(k, out(k));
        return t;
    }

    const std::string& trainer() const { return trainer_; }
    int epochs_run() const { return epochs_run_; }
    double final_mse() const { return final_mse_; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["type"] = "one-step-ffnn";
        j["hidden"] = spec_.hidden;
        j["seed"] = spec_.seed;
        j["trainer"] = trainer_;
        j["epochs_run"] = epochs_run_;
        j["final_mse"] = final_mse_;
        j["input_mean"] = in_.mean;
        j["input_scale"] = in_.scale;
        j["output_mean"] = out_.mean;
        j["output_scale"] = out_.scale;
        j["theta"] = theta_;
        return j;
    }

    static OneStepModel from_json(const nlohmann::json& j) {
        if (j.at("type") != "one-step-ffnn") throw std::invalid_argument("not a one-step model");
        OneStepModel m;
        m.spec_.hidden = j.at("hidden").get<std::vector<int>>();
        m.spec_.seed = j.at("seed");
        m.trainer_ = j.at("trainer");
        m.epochs_run_ = j.at("epochs_run");
        m.final_mse_ = j.at("final_mse");
        m.in_.mean = j.at("input_mean").get<std::vector<double>>();
        m.in_.scale = j.at("input_scale").get<std::vector<double>>();
        m.out_.mean = j.at("output_mean").get<std::vector<double>>();
        m.out_.scale = j.at("output_scale").get<std::vector<double>>();
        m.layout();
        auto theta = j.at("theta").get<std::vector<double>>();
        if (theta.size() != m.theta_.size()) throw std::invalid_argument("one-step model: parameter count mismatch");
        m.theta_ = std::move(theta);
        return m;
    }

private:
    struct LayerOffsets {
        std::size_t w, b;
        int in, out;
    };

    void layout() {
        layers_.clear();
        std::vector<int> sizes{static_cast<int>(kFeatureCount)};
        sizes.insert(sizes.end(), spec_.hidden.begin(), spec_.hidden.end());
        sizes.push_back(static_cast<int>(kTargetCount));
        std::size_t o = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            LayerOffsets L{o, 0, sizes[l], sizes[l + 1]};
            o += static_cast<std::size_t>(L.in * L.out);
            L.b = o;
            o += static_cast<std::size_t>(L.out);
            layers_.push_back(L);
        }
        theta_.assign(o, 0.0);
    }

    void initialize() {
        Rng rng(derive_seed(spec_.seed, "ffnn-init"));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (const auto& L : layers_) {
            const double limit = std::sqrt(6.0 / (L.in + L.out));
            for (std::size_t p = L.w; p < L.b; ++p) theta_[p] = limit * u(rng);
        }
    }

    Eigen::Map<const Eigen::MatrixXd> weights(const std::vector<double>& t, const LayerOffsets& L) const {
        return {t.data() + L.w, L.out, L.in};
    }
    Eigen::Map<const Eigen::VectorXd> bias(const std::vector<double>& t, const LayerOffsets& L) const {
        return {t.data() + L.b, L.out};
    }

    /// Activations of every layer (input first) when `acts` is given.
    Eigen::VectorXd forward(const Eigen::VectorXd& a0, std::vector<Eigen::VectorXd>* acts,
                            const std::vector<double>* theta = nullptr) const {
        const std::vector<double>& t = theta ? *theta : theta_;
        Eigen::VectorXd a = a0;
        if (acts) acts->assign(1, a);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Eigen::VectorXd z = weights(t, layers_[l]) * a + bias(t, layers_[l]);
            a = l + 1 < layers_.size() ? Eigen::VectorXd(z.array().tanh()) : z;
            if (acts) acts->push_back(a);
        }
        return a;
    }

    double sse(const std::vector<double>& t) const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < x_.cols(); ++i)
            s += (forward(x_.col(i), nullptr, &t) - y_.col(i)).squaredNorm();
        return s;
    }

    /// Jacobian rows of the six outputs of one sample w.r.t. all parameters.
    void sample_jacobian(const std::vector<Eigen::VectorXd>& acts, Eigen::Ref<Eigen::MatrixXd> jac) const {
        const std::size_t depth = layers_.size();
        // delta(k, :) = d out_k / d z_l for the current layer l
        Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(kTargetCount, kTargetCount);
        for (std::size_t l = depth; l-- > 0;) {
            const LayerOffsets& L = layers_[l];
            const Eigen::VectorXd& input = acts[l];
            for (int c = 0; c < L.in; ++c)
                jac.middleCols(static_cast<Eigen::Index>(L.w) + static_cast<Eigen::Index>(c) * L.out, L.out) =
                    delta * input(c);
            jac.middleCols(static_cast<Eigen::Index>(L.b), L.out) = delta;
            if (l == 0) break;
            const Eigen::VectorXd deriv = (1.0 - acts[l].array().square()).matrix();
            delta = (delta * weights(theta_, L)) * deriv.asDiagonal();
        }
    }

    void train_lm() {
        const Eigen::Index p = static_cast<Eigen::Index>(theta_.size());
        const Eigen::Index n = x_.cols();
        const Eigen::Index k = static_cast<Eigen::Index>(kTargetCount);
        double mu = spec_.mu_initial;
        double current = sse(theta_);
        constexpr Eigen::Index chunk = 64;
        for (int epoch = 0; epoch < spec_.max_epochs; ++epoch) {
            Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(p, p);
            Eigen::VectorXd jte = Eigen::VectorXd::Zero(p);
            std::vector<Eigen::VectorXd> acts;
            for (Eigen::Index start = 0; start < n; start += chunk) {
                const Eigen::Index rows = std::min(chunk, n - start);
                Eigen::MatrixXd jac(rows * k, p);
                Eigen::VectorXd err(rows * k);
                for (Eigen::Index i = 0; i < rows; ++i) {
                    const Eigen::VectorXd out = forward(x_.col(start + i), &acts);
                    sample_jacobian(acts, jac.middleRows(i * k, k));
                    err.segment(i * k, k) = out - y_.col(start + i);
                }
                jtj.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
                jte.noalias() += jac.transpose() * err;
            }
            jtj.triangularView<Eigen::StrictlyUpper>() = jtj.transpose();
            epochs_run_ = epoch + 1;
            if (jte.norm() < spec_.min_gradient || current < 1e-20) break;
            bool improved = false;
            while (mu <= spec_.mu_max) {
                Eigen::MatrixXd a = jtj;
                a.diagonal().array() += mu;
                const Eigen::VectorXd step = a.ldlt().solve(-jte);
                std::vector<double> trial = theta_;
                for (Eigen::Index i = 0; i < p; ++i) trial[static_cast<std::size_t>(i)] += step(i);
                const double value = sse(trial);
                if (value < current) {
                    theta_ = std::move(trial);
                    current = value;
                    mu = std::max(mu * spec_.mu_decrease, 1e-20);
                    improved = true;
                    break;
                }
                mu *= spec_.mu_increase;
            }
            if (!improved) break;
        }
        final_mse_ = current / static_cast<double>(n * k);
    }

    void train_adam() {
        const std::size_t p = theta_.size();
        const Eigen::Index n = x_.cols();
        std::vector<double> m1(p, 0.0), m2(p, 0.0), grad(p);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(spec_.seed, "ffnn-shuffle"));
        constexpr double b1 = 0.9, b2 = 0.999;
        long step = 0;
        std::vector<Eigen::VectorXd> acts;
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(kTargetCount), static_cast<Eigen::Index>(p));
        for (int epoch = 0; epoch < spec_.first_order_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (Eigen::Index start = 0; start < n; start += spec_.first_order_batch) {
                const Eigen::Index stop = std::min<Eigen::Index>(n, start + spec_.first_order_batch);
                std::fill(grad.begin(), grad.end(), 0.0);
                for (Eigen::Index i = start; i < stop; ++i) {
                    const Eigen::Index s = order[static_cast<std::size_t>(i)];
                    const Eigen::VectorXd out = forward(x_.col(s), &acts);
                    sample_jacobian(acts, jac);
                    const Eigen::VectorXd g = jac.transpose() * (out - y_.col(s));
                    for (std::size_t q = 0; q < p; ++q) grad[q] += 2.0 * g(static_cast<Eigen::Index>(q)) / static_cast<double>(stop - start);
                }
                ++step;
                const double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
                for (std::size_t q = 0; q < p; ++q) {
                    m1[q] = b1 * m1[q] + (1.0 - b1) * grad[q];
                    m2[q] = b2 * m2[q] + (1.0 - b2) * grad[q] * grad[q];
                    theta_[q] -= spec_.first_order_learning_rate * (m1[q] / c1) / (std::sqrt(m2[q] / c2) + 1e-8);
                }
            }
            epochs_run_ = epoch + 1;
        }
        final_mse_ = sse(theta_) / static_cast<double>(n * static_cast<Eigen::Index>(kTargetCount));
    }

    OneStepSpec spec_;
    std::vector<LayerOffsets> layers_;
    std::vector<double> theta_;
    Standardizer in_, out_;
    Eigen::MatrixXd x_, y_;  // standardized training data, cleared after training
    std::string trainer_;
    int epochs_run_ = 0;
    double final_mse_ = 0.0;
};

}  // namespace geocsi
