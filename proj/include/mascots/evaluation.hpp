#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mascots/dataset.hpp"
#include "mascots/engine.hpp"
#include "mascots/models.hpp"

namespace mascots {

/// Ensemble of random isolation trees over flattened series. Anomaly score
/// s(x) = 2^(-E[path length]/c(subsample)) lies in (0,1); larger is more
/// anomalous, and `threshold` separates nominal from outlier.
struct IsolationForest {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double split = 0.0;
        int left = -1;
        int right = -1;
        int size = 0;  // training rows that reached this node (leaves only)
    };
    struct Tree {
        std::vector<Node> nodes;  // nodes[0] is the root
    };

    std::vector<Tree> trees;
    int dimensions = 0;
    int subsample = 256;  // effective value after capping at n
    std::uint64_t seed = 0;
    double threshold = 0.5;

    double score(const TimeSeries& series) const;
    double score_flat(const std::vector<double>& point) const;
};

/// Fits `tree_count` trees, each on `subsample` rows (capped at n) drawn
/// with a per-tree seed mix_seed(seed, tree index). Tree-parallel (OpenMP)
/// and plain-loop versions agree bit-exactly.
IsolationForest iforest_fit(const Dataset& train, int tree_count = 100, int subsample = 256,
                            std::uint64_t seed = 0);
IsolationForest iforest_fit_serial(const Dataset& train, int tree_count = 100, int subsample = 256,
                                   std::uint64_t seed = 0);

/// Fraction of pairs whose black-box prediction differs.
double validity(const std::vector<TimeSeries>& originals,
                const std::vector<TimeSeries>& counterfactuals, const BlackBox& blackbox);

/// Mean over pairs of the Euclidean distance between the full value
/// matrices, divided by the number of entries per instance.
double proximity(const std::vector<TimeSeries>& originals,
                 const std::vector<TimeSeries>& counterfactuals);

/// Fraction of entries left exactly unchanged (bitwise untouched points
/// compare equal; no tolerance).
double sparsity(const std::vector<TimeSeries>& originals,
                const std::vector<TimeSeries>& counterfactuals);

/// Fraction of counterfactuals the forest scores below its threshold.
double plausibility(const std::vector<TimeSeries>& counterfactuals,
                    const IsolationForest& forest);

/// Single-pair versions used for per-instance reporting.
double instance_proximity(const TimeSeries& original, const TimeSeries& counterfactual);
double instance_sparsity(const TimeSeries& original, const TimeSeries& counterfactual);

struct PerInstanceMetrics {
    int index = 0;
    bool valid = false;
    int iterations = 0;
    double proximity = 0.0;
    double sparsity = 1.0;
    double anomaly_score = 0.0;
    bool plausible = true;
};

struct MetricsReport {
    int count = 0;
    int valid_count = 0;
    double validity = 0.0;
    double proximity = 0.0;
    double sparsity = 0.0;
    double plausibility = 0.0;
    double mean_iterations = 0.0;  // averaged over valid results only
    std::vector<PerInstanceMetrics> per_instance;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Recomputes every metric from scratch (validity by re-querying the
/// black-box, not by trusting the stored flags).
MetricsReport evaluate_run(const std::vector<CounterfactualResult>& results,
                           const BlackBox& blackbox, const IsolationForest& forest);

}  // namespace mascots
