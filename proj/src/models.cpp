#include "mascots/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mascots/errors.hpp"

namespace mascots {

using nlohmann::json;

namespace {

int argmax_lowest(const std::vector<double>& values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::vector<double> softmax(std::vector<double> margins) {
    const double top = *std::max_element(margins.begin(), margins.end());
    double sum = 0.0;
    for (double& v : margins) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : margins) v /= sum;
    return margins;
}

// In-place Cholesky factorization of a symmetric positive definite matrix
// stored row-major; the lower triangle receives L.
void cholesky_factor(std::vector<double>& a, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k) {
                sum -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            }
            if (i == j) {
                if (sum <= 0.0) throw InternalError("ridge system lost positive definiteness");
                a[static_cast<std::size_t>(i) * n + j] = std::sqrt(sum);
            } else {
                a[static_cast<std::size_t>(i) * n + j] = sum / a[static_cast<std::size_t>(j) * n + j];
            }
        }
    }
}

std::vector<double> cholesky_solve(const std::vector<double>& l, int n, std::vector<double> b) {
    for (int i = 0; i < n; ++i) {  // forward: L y = b
        double sum = b[i];
        for (int k = 0; k < i; ++k) sum -= l[static_cast<std::size_t>(i) * n + k] * b[k];
        b[i] = sum / l[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {  // backward: L^T x = y
        double sum = b[i];
        for (int k = i + 1; k < n; ++k) sum -= l[static_cast<std::size_t>(k) * n + i] * b[k];
        b[i] = sum / l[static_cast<std::size_t>(i) * n + i];
    }
    return b;
}

}  // namespace

int BlackBox::predict(const TimeSeries& series) const {
    return argmax_lowest(predict_proba(series));
}

std::vector<int> BlackBox::predict_batch(const std::vector<TimeSeries>& queries) const {
    std::vector<int> out(queries.size());
    const int n = static_cast<int>(queries.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) out[i] = predict(queries[i]);
    return out;
}

std::vector<int> BlackBox::predict_batch_serial(const std::vector<TimeSeries>& queries) const {
    std::vector<int> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(predict(q));
    return out;
}

Knn1BlackBox Knn1BlackBox::fit(const Dataset& train) {
    train.validate();
    Knn1BlackBox model;
    model.channels_ = train.channels();
    model.length_ = train.length();
    model.num_classes_ = train.num_classes();
    model.train_labels_ = train.labels;
    model.train_values_.reserve(train.instances.size());
    for (const auto& ts : train.instances) model.train_values_.push_back(ts.values());
    return model;
}

std::vector<double> Knn1BlackBox::predict_proba(const TimeSeries& series) const {
    if (series.channels() != channels_ || series.length() != length_) {
        throw ShapeError("query shape does not match the training shape");
    }
    const auto& q = series.values();
    double best_dist = std::numeric_limits<double>::infinity();
    int best = 0;
    for (std::size_t i = 0; i < train_values_.size(); ++i) {
        const auto& row = train_values_[i];
        double dist = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k) {
            const double diff = row[k] - q[k];
            dist += diff * diff;
        }
        if (dist < best_dist) {  // strict: ties keep the lowest index
            best_dist = dist;
            best = static_cast<int>(i);
        }
    }
    constexpr double epsilon = 0.05;
    std::vector<double> proba(num_classes_, epsilon / (num_classes_ - 1));
    proba[train_labels_[best]] = 1.0 - epsilon;
    return proba;
}

json Knn1BlackBox::to_json() const {
    return {{"kind", kind()},
            {"channels", channels_},
            {"length", length_},
            {"classes", num_classes_},
            {"labels", train_labels_},
            {"instances", train_values_}};
}

Knn1BlackBox Knn1BlackBox::from_json(const json& doc) {
    Knn1BlackBox model;
    model.channels_ = doc.at("channels").get<int>();
    model.length_ = doc.at("length").get<int>();
    model.num_classes_ = doc.at("classes").get<int>();
    model.train_labels_ = doc.at("labels").get<std::vector<int>>();
    model.train_values_ = doc.at("instances").get<std::vector<std::vector<double>>>();
    if (model.train_labels_.size() != model.train_values_.size() || model.train_values_.empty()) {
        throw SchemaError("knn1 artifact has inconsistent training data");
    }
    return model;
}

RidgeBorfBlackBox RidgeBorfBlackBox::fit(const Dataset& train, const BorfTransform& transform,
                                         double ridge) {
    train.validate();
    if (!(ridge > 0.0)) throw ConfigError("ridge penalty must be positive");

    const int n = train.size();
    const long r = transform.vocab_size;
    const int c = train.num_classes();

    const BorfMatrix counts = transform_dataset(train, transform);

    // Column-standardized design matrix, stored transposed (feature-major)
    // so Gram entries are dots of contiguous rows.
    std::vector<double> col_mean(r, 0.0), col_std(r, 0.0);
    for (const auto& row : counts.rows) {
        for (const auto& [flat, count] : row.counts) col_mean[flat] += count;
    }
    for (long k = 0; k < r; ++k) col_mean[k] /= n;
    for (const auto& row : counts.rows) {
        for (const auto& [flat, count] : row.counts) {
            const double centered = count - col_mean[flat];
            col_std[flat] += centered * centered - col_mean[flat] * col_mean[flat];
        }
    }
    // add the contribution of zero entries: (0 - mean)^2 for every row
    for (long k = 0; k < r; ++k) {
        col_std[k] = std::sqrt(col_std[k] / n + col_mean[k] * col_mean[k]);
        if (col_std[k] < 1e-8) col_std[k] = 1.0;
    }

    std::vector<double> design(static_cast<std::size_t>(r) * n);
    for (int i = 0; i < n; ++i) {
        const auto dense = to_dense(counts.rows[i]);
        for (long k = 0; k < r; ++k) {
            design[static_cast<std::size_t>(k) * n + i] = (dense[k] - col_mean[k]) / col_std[k];
        }
    }

    // Normal equations scaled by 1/n so predictions are invariant to
    // duplicating the training set.
    std::vector<double> gram(static_cast<std::size_t>(r) * r, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (long p = 0; p < r; ++p) {
        for (long q = p; q < r; ++q) {
            double dot = 0.0;
            const double* a = design.data() + static_cast<std::size_t>(p) * n;
            const double* b = design.data() + static_cast<std::size_t>(q) * n;
            for (int i = 0; i < n; ++i) dot += a[i] * b[i];
            dot /= n;
            gram[static_cast<std::size_t>(p) * r + q] = dot;
            gram[static_cast<std::size_t>(q) * r + p] = dot;
        }
    }
    for (long p = 0; p < r; ++p) gram[static_cast<std::size_t>(p) * r + p] += ridge;
    cholesky_factor(gram, static_cast<int>(r));

    RidgeBorfBlackBox model;
    model.transform_ = transform;
    model.num_classes_ = c;
    model.weights_.assign(static_cast<std::size_t>(r) * c, 0.0);
    model.bias_.assign(c, 0.0);
    model.col_mean_ = std::move(col_mean);
    model.col_std_ = std::move(col_std);

    for (int cls = 0; cls < c; ++cls) {
        std::vector<double> target(n);
        double mean_target = 0.0;
        for (int i = 0; i < n; ++i) {
            target[i] = train.labels[i] == cls ? 1.0 : -1.0;
            mean_target += target[i];
        }
        mean_target /= n;

        std::vector<double> rhs(r, 0.0);
        for (long k = 0; k < r; ++k) {
            double dot = 0.0;
            const double* a = design.data() + static_cast<std::size_t>(k) * n;
            for (int i = 0; i < n; ++i) dot += a[i] * target[i];
            rhs[k] = dot / n;
        }
        const auto w = cholesky_solve(gram, static_cast<int>(r), std::move(rhs));
        for (long k = 0; k < r; ++k) model.weights_[static_cast<std::size_t>(k) * c + cls] = w[k];
        model.bias_[cls] = mean_target;  // columns are zero-mean
    }
    return model;
}

std::vector<double> RidgeBorfBlackBox::predict_proba(const TimeSeries& series) const {
    const BorfVector row = transform_one(series, transform_);
    std::vector<double> margins = bias_;
    // dot with standardized counts; zero counts still contribute -mean/std
    for (long k = 0; k < transform_.vocab_size; ++k) {
        const double standardized = (0.0 - col_mean_[k]) / col_std_[k];
        for (int cls = 0; cls < num_classes_; ++cls) {
            margins[cls] += weights_[static_cast<std::size_t>(k) * num_classes_ + cls] * standardized;
        }
    }
    for (const auto& [flat, count] : row.counts) {
        const double delta = static_cast<double>(count) / col_std_[flat];
        for (int cls = 0; cls < num_classes_; ++cls) {
            margins[cls] += weights_[static_cast<std::size_t>(flat) * num_classes_ + cls] * delta;
        }
    }
    return softmax(std::move(margins));
}

json RidgeBorfBlackBox::to_json() const {
    return {{"kind", kind()},
            {"transform", transform_.to_json()},
            {"classes", num_classes_},
            {"weights", weights_},
            {"bias", bias_},
            {"col_mean", col_mean_},
            {"col_std", col_std_}};
}

RidgeBorfBlackBox RidgeBorfBlackBox::from_json(const json& doc) {
    RidgeBorfBlackBox model;
    model.transform_ = BorfTransform::from_json(doc.at("transform"));
    model.num_classes_ = doc.at("classes").get<int>();
    model.weights_ = doc.at("weights").get<std::vector<double>>();
    model.bias_ = doc.at("bias").get<std::vector<double>>();
    model.col_mean_ = doc.at("col_mean").get<std::vector<double>>();
    model.col_std_ = doc.at("col_std").get<std::vector<double>>();
    const auto r = static_cast<std::size_t>(model.transform_.vocab_size);
    if (model.weights_.size() != r * model.num_classes_ || model.col_mean_.size() != r ||
        model.col_std_.size() != r) {
        throw SchemaError("ridge-borf artifact has inconsistent shapes");
    }
    return model;
}

std::unique_ptr<BlackBox> blackbox_from_json(const json& doc) {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "knn1") return std::make_unique<Knn1BlackBox>(Knn1BlackBox::from_json(doc));
    if (kind == "ridge-borf") {
        return std::make_unique<RidgeBorfBlackBox>(RidgeBorfBlackBox::from_json(doc));
    }
    throw SchemaError("unknown black-box kind '" + kind + "'");
}

std::vector<double> Surrogate::margins(const BorfVector& row) const {
    std::vector<double> out = bias;
    for (long k = 0; k < features; ++k) {
        const double mean = feature_means[k];
        if (mean == 0.0) continue;
        for (int cls = 0; cls < classes; ++cls) {
            out[cls] -= weights[static_cast<std::size_t>(k) * classes + cls] * mean;
        }
    }
    for (const auto& [flat, count] : row.counts) {
        for (int cls = 0; cls < classes; ++cls) {
            out[cls] += weights[static_cast<std::size_t>(flat) * classes + cls] * count;
        }
    }
    return out;
}

std::vector<double> Surrogate::predict_proba(const BorfVector& row) const {
    return softmax(margins(row));
}

int Surrogate::predict(const BorfVector& row) const {
    return argmax_lowest(margins(row));
}

json Surrogate::to_json() const {
    return {{"features", features},
            {"classes", classes},
            {"weights", weights},
            {"bias", bias},
            {"feature_means", feature_means}};
}

Surrogate Surrogate::from_json(const json& doc) {
    Surrogate model;
    model.features = doc.at("features").get<int>();
    model.classes = doc.at("classes").get<int>();
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<std::vector<double>>();
    model.feature_means = doc.at("feature_means").get<std::vector<double>>();
    if (model.weights.size() != static_cast<std::size_t>(model.features) * model.classes ||
        model.bias.size() != static_cast<std::size_t>(model.classes) ||
        model.feature_means.size() != static_cast<std::size_t>(model.features)) {
        throw SchemaError("surrogate artifact has inconsistent shapes");
    }
    return model;
}

namespace {

void check_targets(const BorfMatrix& counts, const std::vector<std::vector<double>>& targets) {
    if (counts.rows.empty()) throw EmptyDataset("no rows to fit the surrogate on");
    if (targets.size() != counts.rows.size()) {
        throw LengthMismatch("target rows do not match count rows");
    }
    for (const auto& row : targets) {
        double sum = 0.0;
        for (double p : row) sum += p;
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ShapeError("target probability row does not sum to 1");
        }
    }
}

}  // namespace

double surrogate_loss(const Surrogate& model, const BorfMatrix& counts,
                      const std::vector<std::vector<double>>& targets) {
    check_targets(counts, targets);
    const int n = counts.size();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto m = model.margins(counts.rows[i]);
        const double top = *std::max_element(m.begin(), m.end());
        double lse = 0.0;
        for (double v : m) lse += std::exp(v - top);
        lse = top + std::log(lse);
        for (int cls = 0; cls < model.classes; ++cls) {
            loss -= targets[i][cls] * (m[cls] - lse);
        }
    }
    return loss / n;
}

void surrogate_gradient(const Surrogate& model, const BorfMatrix& counts,
                        const std::vector<std::vector<double>>& targets,
                        std::vector<double>& grad_weights, std::vector<double>& grad_bias) {
    check_targets(counts, targets);
    const int n = counts.size();
    const int c = model.classes;
    grad_weights.assign(static_cast<std::size_t>(model.features) * c, 0.0);
    grad_bias.assign(c, 0.0);

    std::vector<double> residual_sum(c, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto proba = model.predict_proba(counts.rows[i]);
        std::vector<double> residual(c);
        for (int cls = 0; cls < c; ++cls) {
            residual[cls] = proba[cls] - targets[i][cls];
            residual_sum[cls] += residual[cls];
        }
        for (const auto& [flat, count] : counts.rows[i].counts) {
            for (int cls = 0; cls < c; ++cls) {
                grad_weights[static_cast<std::size_t>(flat) * c + cls] += count * residual[cls];
            }
        }
    }
    // centering term: -mean_k * sum_i residual
    for (long k = 0; k < model.features; ++k) {
        const double mean = model.feature_means[k];
        if (mean == 0.0) continue;
        for (int cls = 0; cls < c; ++cls) {
            grad_weights[static_cast<std::size_t>(k) * c + cls] -= mean * residual_sum[cls];
        }
    }
    for (auto& g : grad_weights) g /= n;
    for (int cls = 0; cls < c; ++cls) grad_bias[cls] = residual_sum[cls] / n;
}

Surrogate surrogate_fit(const BorfMatrix& counts, const std::vector<std::vector<double>>& targets,
                        const SurrogateFitOptions& options, std::vector<double>* loss_history) {
    check_targets(counts, targets);
    if (options.epochs < 1) throw ConfigError("surrogate epochs must be >= 1");
    if (!(options.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");

    const int n = counts.size();
    const int c = static_cast<int>(targets.front().size());

    Surrogate model;
    model.features = static_cast<int>(counts.vocab_size);
    model.classes = c;
    model.weights.assign(static_cast<std::size_t>(model.features) * c, 0.0);
    model.feature_means.assign(model.features, 0.0);
    for (const auto& row : counts.rows) {
        for (const auto& [flat, count] : row.counts) model.feature_means[flat] += count;
    }
    for (auto& mean : model.feature_means) mean /= n;

    model.bias.assign(c, 0.0);
    for (int cls = 0; cls < c; ++cls) {
        double prior = 0.0;
        for (int i = 0; i < n; ++i) prior += targets[i][cls];
        model.bias[cls] = std::log(std::max(prior / n, 1e-12));
    }

    std::vector<double> grad_w, grad_b;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const double loss = surrogate_loss(model, counts, targets);
        if (!std::isfinite(loss)) {
            throw NonFiniteLoss("training diverged at epoch " + std::to_string(epoch) +
                                "; lower the learning rate");
        }
        if (loss_history != nullptr) loss_history->push_back(loss);
        surrogate_gradient(model, counts, targets, grad_w, grad_b);
        for (std::size_t k = 0; k < model.weights.size(); ++k) {
            model.weights[k] -= options.learning_rate * grad_w[k];
        }
        for (int cls = 0; cls < c; ++cls) model.bias[cls] -= options.learning_rate * grad_b[cls];
    }
    const double final_loss = surrogate_loss(model, counts, targets);
    if (!std::isfinite(final_loss)) {
        throw NonFiniteLoss("training diverged; lower the learning rate");
    }
    if (loss_history != nullptr) loss_history->push_back(final_loss);
    return model;
}

double surrogate_fidelity(const Surrogate& model, const BorfMatrix& counts,
                          const std::vector<int>& blackbox_labels) {
    if (counts.rows.size() != blackbox_labels.size()) {
        throw LengthMismatch("count rows do not match label count");
    }
    if (counts.rows.empty()) throw EmptyDataset("no rows to score fidelity on");
    int agree = 0;
    for (std::size_t i = 0; i < counts.rows.size(); ++i) {
        if (model.predict(counts.rows[i]) == blackbox_labels[i]) ++agree;
    }
    return static_cast<double>(agree) / counts.rows.size();
}

AttributionMatrix attribute(const Surrogate& model, const BorfVector& row) {
    if (row.vocab_size != model.features) {
        throw ShapeError("pattern vector does not match the surrogate vocabulary");
    }
    AttributionMatrix phi;
    phi.features = model.features;
    phi.classes = model.classes;
    phi.phi.assign(static_cast<std::size_t>(model.features) * model.classes, 0.0);
    for (long k = 0; k < model.features; ++k) {
        const double mean = model.feature_means[k];
        if (mean == 0.0) continue;
        for (int cls = 0; cls < model.classes; ++cls) {
            phi.phi[static_cast<std::size_t>(k) * model.classes + cls] =
                -model.weights[static_cast<std::size_t>(k) * model.classes + cls] * mean;
        }
    }
    for (const auto& [flat, count] : row.counts) {
        for (int cls = 0; cls < model.classes; ++cls) {
            phi.phi[static_cast<std::size_t>(flat) * model.classes + cls] =
                model.weights[static_cast<std::size_t>(flat) * model.classes + cls] *
                (count - model.feature_means[flat]);
        }
    }
    return phi;
}

}  // namespace mascots
