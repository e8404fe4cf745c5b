#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mascots/borf.hpp"
#include "mascots/dataset.hpp"

namespace mascots {

/// Behavioral contract of the classifier being explained. predict() is the
/// argmax of predict_proba (ties resolve to the lowest class index), so the
/// two can never disagree.
class BlackBox {
public:
    virtual ~BlackBox() = default;

    virtual int num_classes() const = 0;
    virtual std::vector<double> predict_proba(const TimeSeries& series) const = 0;
    virtual std::string kind() const = 0;
    virtual nlohmann::json to_json() const = 0;

    int predict(const TimeSeries& series) const;

    /// Query-parallel batch prediction (OpenMP) and its plain-loop reference.
    std::vector<int> predict_batch(const std::vector<TimeSeries>& queries) const;
    std::vector<int> predict_batch_serial(const std::vector<TimeSeries>& queries) const;
};

/// 1-nearest-neighbour on flattened values with Euclidean distance;
/// probabilities are the predicted one-hot softened by epsilon = 0.05.
class Knn1BlackBox final : public BlackBox {
public:
    static Knn1BlackBox fit(const Dataset& train);

    int num_classes() const override { return num_classes_; }
    std::vector<double> predict_proba(const TimeSeries& series) const override;
    std::string kind() const override { return "knn1"; }
    nlohmann::json to_json() const override;
    static Knn1BlackBox from_json(const nlohmann::json& doc);

private:
    int channels_ = 0;
    int length_ = 0;
    int num_classes_ = 0;
    std::vector<std::vector<double>> train_values_;
    std::vector<int> train_labels_;
};

/// One-vs-rest ridge regression over standardized pattern counts; probe
/// probabilities are the softmax of the per-class margins.
class RidgeBorfBlackBox final : public BlackBox {
public:
    static RidgeBorfBlackBox fit(const Dataset& train, const BorfTransform& transform,
                                 double ridge);

    int num_classes() const override { return num_classes_; }
    std::vector<double> predict_proba(const TimeSeries& series) const override;
    std::string kind() const override { return "ridge-borf"; }
    nlohmann::json to_json() const override;
    static RidgeBorfBlackBox from_json(const nlohmann::json& doc);

private:
    BorfTransform transform_;
    int num_classes_ = 0;
    std::vector<double> weights_;   // vocab x classes, row-major
    std::vector<double> bias_;      // classes
    std::vector<double> col_mean_;  // vocab
    std::vector<double> col_std_;   // vocab
};

std::unique_ptr<BlackBox> blackbox_from_json(const nlohmann::json& doc);

/// Linear softmax surrogate over mean-centered pattern counts:
/// margin_c(z) = bias_c + sum_k weights[k,c] * (z_k - feature_means[k]).
struct Surrogate {
    int features = 0;
    int classes = 0;
    std::vector<double> weights;        // features x classes, row-major
    std::vector<double> bias;           // classes
    std::vector<double> feature_means;  // training column means of the counts

    std::vector<double> margins(const BorfVector& row) const;
    std::vector<double> predict_proba(const BorfVector& row) const;
    int predict(const BorfVector& row) const;

    nlohmann::json to_json() const;
    static Surrogate from_json(const nlohmann::json& doc);
};

struct SurrogateFitOptions {
    int epochs = 300;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;  // reserved; the zero-init fit is already deterministic
};

/// Full-batch gradient descent on cross-entropy against soft targets
/// (rows of `targets` must sum to 1). Weights start at zero, bias at the
/// log class priors. Throws NonFiniteLoss if training diverges.
Surrogate surrogate_fit(const BorfMatrix& counts,
                        const std::vector<std::vector<double>>& targets,
                        const SurrogateFitOptions& options,
                        std::vector<double>* loss_history = nullptr);

/// Cross-entropy of the surrogate on (counts, targets); forward pass only.
double surrogate_loss(const Surrogate& model, const BorfMatrix& counts,
                      const std::vector<std::vector<double>>& targets);

/// Analytic gradient of surrogate_loss with respect to weights and bias.
void surrogate_gradient(const Surrogate& model, const BorfMatrix& counts,
                        const std::vector<std::vector<double>>& targets,
                        std::vector<double>& grad_weights, std::vector<double>& grad_bias);

/// Fraction of rows where the surrogate's argmax matches the black-box label.
double surrogate_fidelity(const Surrogate& model, const BorfMatrix& counts,
                          const std::vector<int>& blackbox_labels);

/// Per-pattern, per-class contributions phi[k,c] = weights[k,c] *
/// (z_k - feature_means[k]); the exact additive decomposition of the margin
/// around the training-mean baseline.
struct AttributionMatrix {
    int features = 0;
    int classes = 0;
    std::vector<double> phi;  // features x classes, row-major

    double at(long feature, int cls) const {
        return phi[static_cast<std::size_t>(feature) * classes + cls];
    }
};

AttributionMatrix attribute(const Surrogate& model, const BorfVector& row);

}  // namespace mascots
