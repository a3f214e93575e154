#pragma once

// Path-existence classifier: a 1D convolutional network over the 15 features.
//
// Each conv layer: batch norm -> zero padding -> width-3 convolution -> ReLU.
// Then max pooling (window 2, stride 2; 15 -> 7), dropout, a fully connected
// layer to two logits and softmax. Parameters live in one flat vector so the
// optimizer and the finite-difference check treat every block the same way.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "geocsi/rng.hpp"
#include "geocsi/surrogate/dataset.hpp"
#include "geocsi/surrogate/metrics.hpp"

namespace geocsi {

enum class FocalMode {
    TrueClass,  // -alpha_y (1 - p_y)^gamma ln p_y
    AsWritten,  // summed over both classes regardless of the label
};

struct ClassifierSpec {
    int conv_layers = 5;
    int filters = 30;
    double dropout = 0.5;
    double gamma = 2.0;
    double alpha1 = 0.32;
    double learning_rate = 1e-4;
    int batch_size = 4096;
    int epochs = 50;
    double rmsprop_decay = 0.9;
    FocalMode loss = FocalMode::TrueClass;
    std::uint64_t seed = 0;

    double alpha0() const { return 1.0 - alpha1; }

    void validate() const {
        if (conv_layers < 1) throw std::invalid_argument("ClassifierSpec: at least one conv layer");
        if (filters < 1) throw std::invalid_argument("ClassifierSpec: filters must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("ClassifierSpec: dropout must be in [0,1)");
        if (!(gamma >= 0.0)) throw std::invalid_argument("ClassifierSpec: gamma must be non-negative");
        if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) throw std::invalid_argument("ClassifierSpec: alpha1 must be in [0,1]");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("ClassifierSpec: learning rate must be positive");
        if (batch_size < 1 || epochs < 0) throw std::invalid_argument("ClassifierSpec: bad batch size or epochs");
    }
};

class Classifier {
public:
    static constexpr int kWidth = static_cast<int>(kFeatureCount);
    static constexpr int kPooled = kWidth / 2;
    static constexpr double kBatchNormEps = 1e-5;
    static constexpr double kRunningMomentum = 0.9;

    Classifier() = default;
    explicit Classifier(const ClassifierSpec& spec) : spec_(spec) {
        spec_.validate();
        allocate();
    }

    const ClassifierSpec& spec() const { return spec_; }
    std::size_t parameter_count() const { return theta_.size(); }
    const std::vector<double>& loss_history() const { return loss_history_; }

    static Classifier train(std::span<const LabeledPath> data, const ClassifierSpec& spec) {
        if (data.empty()) throw std::invalid_argument("train_classifier: empty training set");
        const bool has0 = std::any_of(data.begin(), data.end(), [](const LabeledPath& s) { return s.label == 0; });
        const bool has1 = std::any_of(data.begin(), data.end(), [](const LabeledPath& s) { return s.label == 1; });
        if (!has0 || !has1) throw std::invalid_argument("train_classifier: training set contains a single class");
        Classifier m(spec);
        m.fit_input(data);
        m.initialize();

        const std::size_t n = data.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(spec.seed, "cnn-shuffle"));
        Rng dropout_rng(derive_seed(spec.seed, "cnn-dropout"));
        std::vector<double> grad(m.theta_.size()), mean_sq(m.theta_.size(), 0.0);
        const std::size_t batch = static_cast<std::size_t>(spec.batch_size);
        for (int epoch = 0; epoch < spec.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < n; start += batch) {
                const std::size_t stop = std::min(n, start + batch);
                std::vector<const LabeledPath*> rows;
                for (std::size_t i = start; i < stop; ++i) rows.push_back(&data[order[i]]);
                const Eigen::MatrixXd a0 = m.input_matrix(rows);
                std::vector<int> labels;
                for (auto* r : rows) labels.push_back(r->label);
                const Eigen::MatrixXd mask = m.dropout_mask(rows.size(), dropout_rng);
                const double loss = m.loss_and_gradient(a0, labels, &mask, grad, true);
                epoch_loss += loss * static_cast<double>(rows.size());
                const double rho = spec.rmsprop_decay;
                for (std::size_t p = 0; p < grad.size(); ++p) {
                    mean_sq[p] = rho * mean_sq[p] + (1.0 - rho) * grad[p] * grad[p];
                    m.theta_[p] -= spec.learning_rate * grad[p] / (std::sqrt(mean_sq[p]) + 1e-8);
                }
            }
            m.loss_history_.push_back(epoch_loss / static_cast<double>(n));
        }
        return m;
    }

    std::vector<std::array<double, 2>> probabilities(std::span<const FeatureVector> features) const {
        std::vector<std::array<double, 2>> out;
        out.reserve(features.size());
        constexpr std::size_t chunk = 1024;
        for (std::size_t start = 0; start < features.size(); start += chunk) {
            const std::size_t stop = std::min(features.size(), start + chunk);
            std::vector<const FeatureVector*> rows;
            for (std::size_t i = start; i < stop; ++i) rows.push_back(&features[i]);
            const Eigen::MatrixXd prob = forward(input_matrix_raw(rows), false, nullptr, nullptr);
            for (Eigen::Index c = 0; c < prob.cols(); ++c) out.push_back({prob(0, c), prob(1, c)});
        }
        return out;
    }

    std::array<double, 2> probabilities(const FeatureVector& f) const {
        return probabilities(std::span<const FeatureVector>(&f, 1)).front();
    }

    /// Class 1 when its probability exceeds class 0.
    std::vector<int> predict(std::span<const FeatureVector> features) const {
        std::vector<int> out;
        for (const auto& p : probabilities(features)) out.push_back(p[1] > p[0] ? 1 : 0);
        return out;
    }

    /// Mean batch loss in training mode with a fixed dropout mask; fills `grad`.
    double batch_loss(std::span<const LabeledPath> batch, std::uint64_t mask_seed, std::vector<double>* grad) {
        std::vector<const LabeledPath*> rows;
        std::vector<int> labels;
        for (const auto& s : batch) {
            rows.push_back(&s);
            labels.push_back(s.label);
        }
        Rng rng(mask_seed);
        const Eigen::MatrixXd mask = dropout_mask(rows.size(), rng);
        std::vector<double> scratch;
        return loss_and_gradient(input_matrix(rows), labels, &mask, grad ? *grad : scratch, false);
    }

    /// Largest norm-relative difference, over parameter blocks, between the
    /// analytic gradient and central differences. Initializes an untrained model.
    double gradient_check(std::span<const LabeledPath> batch, double h = 1e-6) {
        if (input_.mean.empty()) {
            fit_input(batch);
            initialize();
        }
        const std::uint64_t mask_seed = derive_seed(spec_.seed, "gradient-check");
        std::vector<double> analytic;
        batch_loss(batch, mask_seed, &analytic);
        std::vector<double> numeric(theta_.size());
        for (std::size_t p = 0; p < theta_.size(); ++p) {
            const double keep = theta_[p];
            theta_[p] = keep + h;
            const double up = batch_loss(batch, mask_seed, nullptr);
            theta_[p] = keep - h;
            const double down = batch_loss(batch, mask_seed, nullptr);
            theta_[p] = keep;
            numeric[p] = (up - down) / (2.0 * h);
        }
        double worst = 0.0;
        for (const auto& [begin, end] : blocks()) {
            double diff = 0.0, scale = 0.0;
            for (std::size_t p = begin; p < end; ++p) {
                diff += (analytic[p] - numeric[p]) * (analytic[p] - numeric[p]);
                scale += analytic[p] * analytic[p] + numeric[p] * numeric[p];
            }
            if (scale > 1e-24) worst = std::max(worst, std::sqrt(diff) / std::sqrt(scale));
        }
        return worst;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["type"] = "cnn-classifier";
        j["spec"] = {{"conv_layers", spec_.conv_layers}, {"filters", spec_.filters},
                     {"dropout", spec_.dropout},         {"gamma", spec_.gamma},
                     {"alpha1", spec_.alpha1},           {"learning_rate", spec_.learning_rate},
                     {"batch_size", spec_.batch_size},   {"epochs", spec_.epochs},
                     {"rmsprop_decay", spec_.rmsprop_decay},
                     {"loss", spec_.loss == FocalMode::TrueClass ? "true-class" : "as-written"},
                     {"seed", spec_.seed}};
        j["input_mean"] = input_.mean;
        j["input_scale"] = input_.scale;
        j["theta"] = theta_;
        j["running_mean"] = running_mean_;
        j["running_var"] = running_var_;
        j["loss_history"] = loss_history_;
        return j;
    }

    static Classifier from_json(const nlohmann::json& j) {
        if (j.at("type") != "cnn-classifier") throw std::invalid_argument("not a classifier model");
        const auto& s = j.at("spec");
        ClassifierSpec spec;
        spec.conv_layers = s.at("conv_layers");
        spec.filters = s.at("filters");
        spec.dropout = s.at("dropout");
        spec.gamma = s.at("gamma");
        spec.alpha1 = s.at("alpha1");
        spec.learning_rate = s.at("learning_rate");
        spec.batch_size = s.at("batch_size");
        spec.epochs = s.at("epochs");
        spec.rmsprop_decay = s.at("rmsprop_decay");
        spec.loss = s.at("loss") == "true-class" ? FocalMode::TrueClass : FocalMode::AsWritten;
        spec.seed = s.at("seed");
        Classifier m(spec);
        m.input_.mean = j.at("input_mean").get<std::vector<double>>();
        m.input_.scale = j.at("input_scale").get<std::vector<double>>();
        auto theta = j.at("theta").get<std::vector<double>>();
        if (theta.size() != m.theta_.size()) throw std::invalid_argument("classifier model: parameter count mismatch");
        m.theta_ = std::move(theta);
        m.running_mean_ = j.at("running_mean").get<std::vector<std::vector<double>>>();
        m.running_var_ = j.at("running_var").get<std::vector<std::vector<double>>>();
        m.loss_history_ = j.at("loss_history").get<std::vector<double>>();
        return m;
    }

private:
    struct ConvOffsets {
        std::size_t gamma, beta, w, b;
        int cin, cout;
    };

    struct LayerCache {
        Eigen::MatrixXd x_hat;
        Eigen::VectorXd inv_std;
        Eigen::VectorXd batch_mean, batch_var;
        Eigen::MatrixXd col;
        Eigen::MatrixXd z;
    };

    struct Cache {
        std::vector<LayerCache> layers;
        Eigen::MatrixXi pool_arg;
        Eigen::MatrixXd flat;
        Eigen::MatrixXd prob;
    };

    using Map = Eigen::Map<Eigen::MatrixXd>;
    using ConstMap = Eigen::Map<const Eigen::MatrixXd>;

    void allocate() {
        conv_.clear();
        std::size_t o = 0;
        for (int l = 0; l < spec_.conv_layers; ++l) {
            ConvOffsets c{};
            c.cin = l == 0 ? 1 : spec_.filters;
            c.cout = spec_.filters;
            c.gamma = o;
            o += static_cast<std::size_t>(c.cin);
            c.beta = o;
            o += static_cast<std::size_t>(c.cin);
            c.w = o;
            o += static_cast<std::size_t>(c.cout * 3 * c.cin);
            c.b = o;
            o += static_cast<std::size_t>(c.cout);
            conv_.push_back(c);
        }
        fc_w_ = o;
        o += static_cast<std::size_t>(2 * kPooled * spec_.filters);
        fc_b_ = o;
        o += 2;
        theta_.assign(o, 0.0);
        running_mean_.clear();
        running_var_.clear();
        for (const auto& c : conv_) {
            running_mean_.emplace_back(static_cast<std::size_t>(c.cin), 0.0);
            running_var_.emplace_back(static_cast<std::size_t>(c.cin), 1.0);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> blocks() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& c : conv_) {
            out.emplace_back(c.gamma, c.beta);
            out.emplace_back(c.beta, c.w);
            out.emplace_back(c.w, c.b);
            out.emplace_back(c.b, c.b + static_cast<std::size_t>(c.cout));
        }
        out.emplace_back(fc_w_, fc_b_);
        out.emplace_back(fc_b_, theta_.size());
        return out;
    }

    void fit_input(std::span<const LabeledPath> data) {
        std::vector<FeatureVector> rows;
        for (const auto& s : data) rows.push_back(s.features);
        input_ = Standardizer::fit(rows, kFeatureCount);
    }

    void initialize() {
        Rng rng(derive_seed(spec_.seed, "cnn-init"));
        for (const auto& c : conv_) {
            std::fill_n(theta_.begin() + static_cast<std::ptrdiff_t>(c.gamma), c.cin, 1.0);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            const double limit = std::sqrt(6.0 / (3.0 * c.cin));
            for (std::size_t p = c.w; p < c.b; ++p) theta_[p] = limit * u(rng);
            // Constant inputs (the single BS position) normalize to zero; a
            // small positive bias keeps their pre-activations off the ReLU kink.
            std::fill_n(theta_.begin() + static_cast<std::ptrdiff_t>(c.b), c.cout, 0.01);
        }
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double limit = std::sqrt(3.0 / (kPooled * spec_.filters));
        for (std::size_t p = fc_w_; p < fc_b_; ++p) theta_[p] = limit * u(rng);
    }

    template <class Row>
    Eigen::MatrixXd input_matrix_impl(const std::vector<const Row*>& rows, auto&& features_of) const {
        Eigen::MatrixXd a(1, static_cast<Eigen::Index>(rows.size()) * kWidth);
        for (std::size_t n = 0; n < rows.size(); ++n) {
            const FeatureVector& f = features_of(*rows[n]);
            for (int t = 0; t < kWidth; ++t)
                a(0, static_cast<Eigen::Index>(n) * kWidth + t) = input_.forward(static_cast<std::size_t>(t), f[static_cast<std::size_t>(t)]);
        }
        return a;
    }

    Eigen::MatrixXd input_matrix(const std::vector<const LabeledPath*>& rows) const {
        return input_matrix_impl(rows, [](const LabeledPath& s) -> const FeatureVector& { return s.features; });
    }

    Eigen::MatrixXd input_matrix_raw(const std::vector<const FeatureVector*>& rows) const {
        return input_matrix_impl(rows, [](const FeatureVector& f) -> const FeatureVector& { return f; });
    }

    Eigen::MatrixXd dropout_mask(std::size_t batch, Rng& rng) const {
        Eigen::MatrixXd mask(spec_.filters, static_cast<Eigen::Index>(batch) * kPooled);
        const double keep = 1.0 - spec_.dropout;
        std::bernoulli_distribution coin(keep);
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
            for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = coin(rng) ? 1.0 / keep : 0.0;
        return mask;
    }

    static Eigen::MatrixXd im2col(const Eigen::MatrixXd& y) {
        const Eigen::Index cin = y.rows(), m = y.cols();
        Eigen::MatrixXd col = Eigen::MatrixXd::Zero(3 * cin, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::Index t = j % kWidth;
            for (int k = 0; k < 3; ++k) {
                const Eigen::Index s = t + k - 1;
                if (s < 0 || s >= kWidth) continue;
                col.block(k * cin, j, cin, 1) = y.col(j + k - 1);
            }
        }
        return col;
    }

    static Eigen::MatrixXd col2im(const Eigen::MatrixXd& dcol, Eigen::Index cin) {
        const Eigen::Index m = dcol.cols();
        Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(cin, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::Index t = j % kWidth;
            for (int k = 0; k < 3; ++k) {
                const Eigen::Index s = t + k - 1;
                if (s < 0 || s >= kWidth) continue;
                dy.col(j + k - 1) += dcol.block(k * cin, j, cin, 1);
            }
        }
        return dy;
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& a0, bool training, const Eigen::MatrixXd* mask,
                            Cache* cache) const {
        Eigen::MatrixXd a = a0;
        const Eigen::Index n = a0.cols() / kWidth;
        if (cache) cache->layers.clear();
        for (std::size_t l = 0; l < conv_.size(); ++l) {
            const ConvOffsets& c = conv_[l];
            const double m = static_cast<double>(a.cols());
            Eigen::VectorXd mean(c.cin), var(c.cin);
            if (training) {
                mean = a.rowwise().mean();
                var = (a.colwise() - mean).array().square().rowwise().sum() / m;
            } else {
                for (int i = 0; i < c.cin; ++i) {
                    mean(i) = running_mean_[l][static_cast<std::size_t>(i)];
                    var(i) = running_var_[l][static_cast<std::size_t>(i)];
                }
            }
            const Eigen::VectorXd inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
            const Eigen::MatrixXd x_hat = ((a.colwise() - mean).array().colwise() * inv_std.array()).matrix();
            const ConstMap gamma(theta_.data() + c.gamma, c.cin, 1);
            const ConstMap beta(theta_.data() + c.beta, c.cin, 1);
            const Eigen::MatrixXd y =
                ((x_hat.array().colwise() * gamma.col(0).array()).colwise() + beta.col(0).array()).matrix();
            Eigen::MatrixXd col = im2col(y);
            const ConstMap w(theta_.data() + c.w, c.cout, 3 * c.cin);
            const ConstMap b(theta_.data() + c.b, c.cout, 1);
            Eigen::MatrixXd z = w * col;
            z.colwise() += b.col(0);
            a = z.cwiseMax(0.0);
            if (cache) cache->layers.push_back({x_hat, inv_std, mean, var, std::move(col), std::move(z)});
        }

        const int ch = spec_.filters;
        Eigen::MatrixXd flat(ch * kPooled, n);
        Eigen::MatrixXi arg(ch, n * kPooled);
        for (Eigen::Index s = 0; s < n; ++s)
            for (int i = 0; i < kPooled; ++i)
                for (int r = 0; r < ch; ++r) {
                    const double left = a(r, s * kWidth + 2 * i), right = a(r, s * kWidth + 2 * i + 1);
                    const bool pick_right = right > left;
                    arg(r, s * kPooled + i) = pick_right ? 1 : 0;
                    double v = pick_right ? right : left;
                    if (training && mask) v *= (*mask)(r, s * kPooled + i);
                    flat(r * kPooled + i, s) = v;
                }
        const ConstMap fw(theta_.data() + fc_w_, 2, ch * kPooled);
        const ConstMap fb(theta_.data() + fc_b_, 2, 1);
        Eigen::MatrixXd logits = fw * flat;
        logits.colwise() += fb.col(0);
        Eigen::MatrixXd prob(2, n);
        for (Eigen::Index s = 0; s < n; ++s) {
            const double top = std::max(logits(0, s), logits(1, s));
            const double e0 = std::exp(logits(0, s) - top), e1 = std::exp(logits(1, s) - top);
            prob(0, s) = e0 / (e0 + e1);
            prob(1, s) = e1 / (e0 + e1);
        }
        if (cache) {
            cache->pool_arg = std::move(arg);
            cache->flat = std::move(flat);
            cache->prob = prob;
        }
        return prob;
    }

    double sample_loss(double p0, double p1, int label) const {
        return spec_.loss == FocalMode::TrueClass ? focal_loss_true_class(p0, p1, label, spec_.gamma, spec_.alpha1)
                                                  : focal_loss(p0, p1, spec_.gamma, spec_.alpha1);
    }

    /// d/dp of -alpha (1-p)^gamma ln p.
    double focal_term_derivative(double p, double alpha) const {
        const double pc = std::max(p, kProbabilityFloor);
        double d = -alpha * std::pow(1.0 - pc, spec_.gamma) / pc;
        if (spec_.gamma > 0.0 && 1.0 - pc > 0.0)
            d += alpha * spec_.gamma * std::pow(1.0 - pc, spec_.gamma - 1.0) * std::log(pc);
        return d;
    }

    double loss_and_gradient(const Eigen::MatrixXd& a0, std::span<const int> labels, const Eigen::MatrixXd* mask,
                             std::vector<double>& grad, bool update_running) {
        Cache cache;
        const Eigen::MatrixXd prob = forward(a0, true, mask, &cache);
        if (update_running) {
            for (std::size_t l = 0; l < conv_.size(); ++l)
                for (Eigen::Index i = 0; i < cache.layers[l].batch_mean.size(); ++i) {
                    auto& rm = running_mean_[l][static_cast<std::size_t>(i)];
                    auto& rv = running_var_[l][static_cast<std::size_t>(i)];
                    rm = kRunningMomentum * rm + (1.0 - kRunningMomentum) * cache.layers[l].batch_mean(i);
                    rv = kRunningMomentum * rv + (1.0 - kRunningMomentum) * cache.layers[l].batch_var(i);
                }
        }
        const Eigen::Index n = prob.cols();
        double loss = 0.0;
        Eigen::MatrixXd dlogits(2, n);
        const double alpha[2] = {spec_.alpha0(), spec_.alpha1};
        for (Eigen::Index s = 0; s < n; ++s) {
            const int y = labels[static_cast<std::size_t>(s)];
            loss += sample_loss(prob(0, s), prob(1, s), y);
            double g[2] = {0.0, 0.0};
            if (spec_.loss == FocalMode::TrueClass) {
                g[y] = focal_term_derivative(prob(y, s), alpha[y]);
            } else {
                for (int v = 0; v < 2; ++v) g[v] = focal_term_derivative(prob(v, s), alpha[v]);
            }
            const double avg = g[0] * prob(0, s) + g[1] * prob(1, s);
            for (int j = 0; j < 2; ++j) dlogits(j, s) = prob(j, s) * (g[j] - avg) / static_cast<double>(n);
        }
        loss /= static_cast<double>(n);

        grad.assign(theta_.size(), 0.0);
        const int ch = spec_.filters;
        Map dfw(grad.data() + fc_w_, 2, ch * kPooled);
        Map dfb(grad.data() + fc_b_, 2, 1);
        dfw = dlogits * cache.flat.transpose();
        dfb = dlogits.rowwise().sum();
        const ConstMap fw(theta_.data() + fc_w_, 2, ch * kPooled);
        const Eigen::MatrixXd dflat = fw.transpose() * dlogits;

        Eigen::MatrixXd da = Eigen::MatrixXd::Zero(ch, n * kWidth);
        for (Eigen::Index s = 0; s < n; ++s)
            for (int i = 0; i < kPooled; ++i)
                for (int r = 0; r < ch; ++r) {
                    double d = dflat(r * kPooled + i, s);
                    if (mask) d *= (*mask)(r, s * kPooled + i);
                    da(r, s * kWidth + 2 * i + cache.pool_arg(r, s * kPooled + i)) += d;
                }

        for (std::size_t l = conv_.size(); l-- > 0;) {
            const ConvOffsets& c = conv_[l];
            const LayerCache& lc = cache.layers[l];
            const Eigen::MatrixXd dz = (lc.z.array() > 0.0).select(da, 0.0);
            Map dw(grad.data() + c.w, c.cout, 3 * c.cin);
            Map db(grad.data() + c.b, c.cout, 1);
            dw = dz * lc.col.transpose();
            db = dz.rowwise().sum();
            const ConstMap w(theta_.data() + c.w, c.cout, 3 * c.cin);
            const Eigen::MatrixXd dy = col2im(w.transpose() * dz, c.cin);
            Map dgamma(grad.data() + c.gamma, c.cin, 1);
            Map dbeta(grad.data() + c.beta, c.cin, 1);
            dgamma = dy.cwiseProduct(lc.x_hat).rowwise().sum();
            dbeta = dy.rowwise().sum();
            if (l == 0) break;
            const ConstMap gamma(theta_.data() + c.gamma, c.cin, 1);
            const Eigen::MatrixXd dxhat = (dy.array().colwise() * gamma.col(0).array()).matrix();
            const double m = static_cast<double>(dxhat.cols());
            const Eigen::VectorXd sum_d = dxhat.rowwise().sum();
            const Eigen::VectorXd sum_dx = dxhat.cwiseProduct(lc.x_hat).rowwise().sum();
            Eigen::MatrixXd dx = (m * dxhat).colwise() - sum_d;
            dx -= (lc.x_hat.array().colwise() * sum_dx.array()).matrix();
            da = (dx.array().colwise() * (lc.inv_std.array() / m)).matrix();
        }
        return loss;
    }

    ClassifierSpec spec_;
    Standardizer input_;
    std::vector<ConvOffsets> conv_;
    std::size_t fc_w_ = 0, fc_b_ = 0;
    std::vector<double> theta_;
    std::vector<std::vector<double>> running_mean_, running_var_;
    std::vector<double> loss_history_;
};

}  // namespace geocsi
