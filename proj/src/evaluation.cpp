#include "mascots/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "mascots/errors.hpp"
#include "mascots/rng.hpp"

namespace mascots {

using nlohmann::json;

namespace {

// Expected path length of an unsuccessful BST search among n points; the
// normalizer c(.) of the isolation-forest score.
double average_path_length(int n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double harmonic = std::log(n - 1.0) + 0.5772156649015329;
    return 2.0 * harmonic - 2.0 * (n - 1.0) / n;
}

struct TreeBuilder {
    const std::vector<std::vector<double>>& points;
    int dimensions;
    int depth_cap;
    std::mt19937_64 rng;
    IsolationForest::Tree tree;

    int build(std::vector<int>& rows, int depth) {
        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (depth >= depth_cap || rows.size() <= 1) {
            tree.nodes[node_index].size = static_cast<int>(rows.size());
            return node_index;
        }

        // Pick a split feature with spread; give up after `dimensions` draws
        // (constant node) and close the leaf.
        int feature = -1;
        double lo = 0.0, hi = 0.0;
        for (int attempt = 0; attempt < dimensions; ++attempt) {
            const int f = static_cast<int>(bounded(rng, dimensions));
            lo = hi = points[rows.front()][f];
            for (int row : rows) {
                lo = std::min(lo, points[row][f]);
                hi = std::max(hi, points[row][f]);
            }
            if (hi > lo) {
                feature = f;
                break;
            }
        }
        if (feature < 0) {
            tree.nodes[node_index].size = static_cast<int>(rows.size());
            return node_index;
        }

        const double split = uniform(rng, lo, hi);
        std::vector<int> left_rows, right_rows;
        for (int row : rows) {
            (points[row][feature] < split ? left_rows : right_rows).push_back(row);
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[node_index].feature = feature;
        tree.nodes[node_index].split = split;
        const int left = build(left_rows, depth + 1);
        const int right = build(right_rows, depth + 1);
        tree.nodes[node_index].left = left;
        tree.nodes[node_index].right = right;
        return node_index;
    }
};

IsolationForest::Tree build_tree(const std::vector<std::vector<double>>& points, int dimensions,
                                 int subsample, int depth_cap, std::uint64_t tree_seed) {
    TreeBuilder builder{points, dimensions, depth_cap, std::mt19937_64(tree_seed), {}};

    // Subsample without replacement: partial Fisher-Yates over row indices.
    const int n = static_cast<int>(points.size());
    std::vector<int> indices(n);
    for (int i = 0; i < n; ++i) indices[i] = i;
    for (int i = 0; i < subsample; ++i) {
        std::swap(indices[i], indices[i + bounded(builder.rng, static_cast<std::uint64_t>(n - i))]);
    }
    std::vector<int> rows(indices.begin(), indices.begin() + subsample);

    builder.build(rows, 0);
    return std::move(builder.tree);
}

double tree_path_length(const IsolationForest::Tree& tree, const std::vector<double>& point) {
    int node = 0;
    int depth = 0;
    while (tree.nodes[node].feature >= 0) {
        const auto& n = tree.nodes[node];
        node = point[n.feature] < n.split ? n.left : n.right;
        ++depth;
    }
    return depth + average_path_length(tree.nodes[node].size);
}

IsolationForest iforest_prepare(const Dataset& train, int tree_count, int subsample,
                                std::uint64_t seed) {
    train.validate();
    if (train.size() < 2) throw EmptyDataset("isolation forest needs at least two rows");
    if (tree_count < 1) throw ConfigError("tree_count must be >= 1");
    if (subsample < 2) throw ConfigError("subsample must be >= 2");

    IsolationForest forest;
    forest.dimensions = train.channels() * train.length();
    forest.subsample = std::min(subsample, train.size());
    forest.seed = seed;
    forest.trees.resize(tree_count);
    return forest;
}

}  // namespace

IsolationForest iforest_fit(const Dataset& train, int tree_count, int subsample,
                            std::uint64_t seed) {
    IsolationForest forest = iforest_prepare(train, tree_count, subsample, seed);
    std::vector<std::vector<double>> points;
    points.reserve(train.instances.size());
    for (const auto& ts : train.instances) points.push_back(ts.values());
    const int depth_cap = static_cast<int>(std::ceil(std::log2(forest.subsample)));

#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < tree_count; ++t) {
        forest.trees[t] = build_tree(points, forest.dimensions, forest.subsample, depth_cap,
                                     mix_seed(seed, static_cast<std::uint64_t>(t)));
    }
    return forest;
}

IsolationForest iforest_fit_serial(const Dataset& train, int tree_count, int subsample,
                                   std::uint64_t seed) {
    IsolationForest forest = iforest_prepare(train, tree_count, subsample, seed);
    std::vector<std::vector<double>> points;
    points.reserve(train.instances.size());
    for (const auto& ts : train.instances) points.push_back(ts.values());
    const int depth_cap = static_cast<int>(std::ceil(std::log2(forest.subsample)));

    for (int t = 0; t < tree_count; ++t) {
        forest.trees[t] = build_tree(points, forest.dimensions, forest.subsample, depth_cap,
                                     mix_seed(seed, static_cast<std::uint64_t>(t)));
    }
    return forest;
}

double IsolationForest::score_flat(const std::vector<double>& point) const {
    if (static_cast<int>(point.size()) != dimensions) {
        throw ShapeError("scored point does not match the forest's dimensionality");
    }
    double total = 0.0;
    for (const auto& tree : trees) total += tree_path_length(tree, point);
    const double mean_path = total / trees.size();
    return std::exp2(-mean_path / average_path_length(subsample));
}

double IsolationForest::score(const TimeSeries& series) const {
    return score_flat(series.values());
}

namespace {

void check_pairs(const std::vector<TimeSeries>& a, const std::vector<TimeSeries>& b) {
    if (a.size() != b.size()) throw LengthMismatch("originals and counterfactuals differ in count");
    if (a.empty()) throw EmptyDataset("no pairs to score");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].channels() != b[i].channels() || a[i].length() != b[i].length()) {
            throw ShapeError("pair " + std::to_string(i) + " has mismatched shapes");
        }
    }
}

}  // namespace

double validity(const std::vector<TimeSeries>& originals,
                const std::vector<TimeSeries>& counterfactuals, const BlackBox& blackbox) {
    check_pairs(originals, counterfactuals);
    int flipped = 0;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        if (blackbox.predict(originals[i]) != blackbox.predict(counterfactuals[i])) ++flipped;
    }
    return static_cast<double>(flipped) / originals.size();
}

double instance_proximity(const TimeSeries& original, const TimeSeries& counterfactual) {
    double squared = 0.0;
    for (std::size_t k = 0; k < original.values().size(); ++k) {
        const double diff = original.values()[k] - counterfactual.values()[k];
        squared += diff * diff;
    }
    return std::sqrt(squared) / static_cast<double>(original.values().size());
}

double instance_sparsity(const TimeSeries& original, const TimeSeries& counterfactual) {
    long unchanged = 0;
    for (std::size_t k = 0; k < original.values().size(); ++k) {
        if (original.values()[k] == counterfactual.values()[k]) ++unchanged;
    }
    return static_cast<double>(unchanged) / static_cast<double>(original.values().size());
}

double proximity(const std::vector<TimeSeries>& originals,
                 const std::vector<TimeSeries>& counterfactuals) {
    check_pairs(originals, counterfactuals);
    double total = 0.0;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        total += instance_proximity(originals[i], counterfactuals[i]);
    }
    return total / originals.size();
}

double sparsity(const std::vector<TimeSeries>& originals,
                const std::vector<TimeSeries>& counterfactuals) {
    check_pairs(originals, counterfactuals);
    double total = 0.0;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        total += instance_sparsity(originals[i], counterfactuals[i]);
    }
    return total / originals.size();
}

double plausibility(const std::vector<TimeSeries>& counterfactuals,
                    const IsolationForest& forest) {
    if (counterfactuals.empty()) throw EmptyDataset("no counterfactuals to score");
    int nominal = 0;
    for (const auto& ts : counterfactuals) {
        if (forest.score(ts) < forest.threshold) ++nominal;
    }
    return static_cast<double>(nominal) / counterfactuals.size();
}

MetricsReport evaluate_run(const std::vector<CounterfactualResult>& results,
                           const BlackBox& blackbox, const IsolationForest& forest) {
    if (results.empty()) throw EmptyDataset("no explanation results to evaluate");

    MetricsReport report;
    report.count = static_cast<int>(results.size());
    long iteration_total = 0;
    for (int i = 0; i < report.count; ++i) {
        const auto& r = results[i];
        PerInstanceMetrics row;
        row.index = i;
        row.valid = blackbox.predict(r.original) != blackbox.predict(r.counterfactual);
        row.iterations = r.iterations;
        row.proximity = instance_proximity(r.original, r.counterfactual);
        row.sparsity = instance_sparsity(r.original, r.counterfactual);
        row.anomaly_score = forest.score(r.counterfactual);
        row.plausible = row.anomaly_score < forest.threshold;

        if (row.valid) {
            ++report.valid_count;
            iteration_total += r.iterations;
        }
        report.proximity += row.proximity;
        report.sparsity += row.sparsity;
        report.plausibility += row.plausible ? 1.0 : 0.0;
        report.per_instance.push_back(row);
    }
    report.validity = static_cast<double>(report.valid_count) / report.count;
    report.proximity /= report.count;
    report.sparsity /= report.count;
    report.plausibility /= report.count;
    report.mean_iterations =
        report.valid_count > 0 ? static_cast<double>(iteration_total) / report.valid_count : 0.0;
    return report;
}

json MetricsReport::to_json() const {
    json rows = json::array();
    for (const auto& row : per_instance) {
        rows.push_back({{"index", row.index},
                        {"valid", row.valid},
                        {"iterations", row.iterations},
                        {"proximity", row.proximity},
                        {"sparsity", row.sparsity},
                        {"anomaly_score", row.anomaly_score},
                        {"plausible", row.plausible}});
    }
    return {{"format_version", 1},
            {"kind", "metrics"},
            {"count", count},
            {"valid_count", valid_count},
            {"validity", validity},
            {"proximity", proximity},
            {"sparsity", sparsity},
            {"plausibility", plausibility},
            {"mean_iterations", mean_iterations},
            {"per_instance", std::move(rows)}};
}

std::string MetricsReport::to_table() const {
    std::ostringstream out;
    out << std::right << std::fixed;
    out << std::setw(5) << "idx" << std::setw(7) << "valid" << std::setw(7) << "iters"
        << std::setw(12) << "proximity" << std::setw(10) << "sparsity" << std::setw(9) << "score"
        << std::setw(11) << "plausible" << '\n';
    for (const auto& row : per_instance) {
        out << std::setw(5) << row.index << std::setw(7) << (row.valid ? "yes" : "no")
            << std::setw(7) << row.iterations << std::setw(12) << std::setprecision(5)
            << row.proximity << std::setw(10) << std::setprecision(4) << row.sparsity
            << std::setw(9) << std::setprecision(4) << row.anomaly_score << std::setw(11)
            << (row.plausible ? "yes" : "no") << '\n';
    }
    out << '\n';
    out << "validity        " << std::setprecision(4) << validity << "  (" << valid_count << "/"
        << count << ")\n";
    out << "proximity       " << std::setprecision(6) << proximity << '\n';
    out << "sparsity        " << std::setprecision(4) << sparsity << '\n';
    out << "plausibility    " << std::setprecision(4) << plausibility << '\n';
    out << "mean_iterations " << std::setprecision(3) << mean_iterations
        << "  (over valid results)\n";
    return out.str();
}

}  // namespace mascots
