#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mascots/errors.hpp"
#include "mascots/evaluation.hpp"
#include "mascots/models.hpp"
#include "mascots/rng.hpp"
#include "mascots/synth.hpp"

using namespace mascots;

namespace {

/// Thresholds on the first value; deterministic and easy to reason about.
struct FirstValueBlackBox final : BlackBox {
    double threshold = 0.5;
    int num_classes() const override { return 2; }
    std::vector<double> predict_proba(const TimeSeries& series) const override {
        const bool high = series.at(0, 0) > threshold;
        return high ? std::vector<double>{0.1, 0.9} : std::vector<double>{0.9, 0.1};
    }
    std::string kind() const override { return "first-value"; }
    nlohmann::json to_json() const override { return {{"kind", kind()}}; }
};

TimeSeries random_series(std::mt19937_64& rng, int channels, int length) {
    std::vector<double> values(static_cast<std::size_t>(channels) * length);
    for (auto& v : values) v = uniform(rng, -4.0, 4.0);
    return TimeSeries(channels, length, std::move(values));
}

Dataset gaussian_points(int count, std::uint64_t seed, int dimensions = 1) {
    std::mt19937_64 rng(seed);
    Dataset data;
    data.class_names = {"a", "b"};
    for (int i = 0; i < count; ++i) {
        std::vector<double> values(dimensions);
        for (auto& v : values) v = gaussian(rng);
        data.instances.emplace_back(1, dimensions, std::move(values));
        data.labels.push_back(i % 2);
    }
    return data;
}

}  // namespace

TEST_CASE("proximity and sparsity on hand-checked pairs") {
    const TimeSeries a(1, 4, {1, 2, 3, 4});
    TimeSeries b = a;

    CHECK(proximity({a}, {b}) == 0.0);
    CHECK(sparsity({a}, {b}) == 1.0);

    b.at(0, 2) += 3.0;
    b.at(0, 3) += 4.0;
    // ||diff|| = 5 over 4 entries
    CHECK(proximity({a}, {b}) == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(sparsity({a}, {b}) == doctest::Approx(0.5).epsilon(1e-12));

    TimeSeries c = a;
    c.at(0, 0) = std::nextafter(c.at(0, 0), 2.0);  // one-ulp change still counts as changed
    CHECK(sparsity({a}, {c}) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("pair metrics match a brute-force recomputation") {
    std::mt19937_64 rng(91);
    for (int trial = 0; trial < 100; ++trial) {
        const int channels = 1 + static_cast<int>(bounded(rng, 3));
        const int length = 2 + static_cast<int>(bounded(rng, 15));
        const int pairs = 1 + static_cast<int>(bounded(rng, 10));

        std::vector<TimeSeries> originals, counterfactuals;
        for (int i = 0; i < pairs; ++i) {
            originals.push_back(random_series(rng, channels, length));
            TimeSeries cf = originals.back();
            for (auto& v : cf.values()) {
                if (bounded(rng, 3) == 0) v += uniform(rng, -1.0, 1.0);
            }
            counterfactuals.push_back(std::move(cf));
        }

        double expected_proximity = 0.0;
        double expected_sparsity = 0.0;
        for (int i = 0; i < pairs; ++i) {
            double squared = 0.0;
            int unchanged = 0;
            const auto& x = originals[i].values();
            const auto& y = counterfactuals[i].values();
            for (std::size_t k = 0; k < x.size(); ++k) {
                squared += (x[k] - y[k]) * (x[k] - y[k]);
                if (x[k] == y[k]) ++unchanged;
            }
            expected_proximity += std::sqrt(squared) / static_cast<double>(x.size());
            expected_sparsity += unchanged / static_cast<double>(x.size());
        }
        expected_proximity /= pairs;
        expected_sparsity /= pairs;

        CHECK(proximity(originals, counterfactuals) ==
              doctest::Approx(expected_proximity).epsilon(1e-12));
        CHECK(sparsity(originals, counterfactuals) ==
              doctest::Approx(expected_sparsity).epsilon(1e-12));
        CHECK(instance_proximity(originals[0], counterfactuals[0]) ==
              doctest::Approx(std::sqrt([&] {
                  double s = 0.0;
                  for (std::size_t k = 0; k < originals[0].values().size(); ++k) {
                      const double d =
                          originals[0].values()[k] - counterfactuals[0].values()[k];
                      s += d * d;
                  }
                  return s;
              }()) / originals[0].values().size())
                  .epsilon(1e-12));
    }
}

TEST_CASE("validity re-queries the black-box") {
    const FirstValueBlackBox blackbox;
    const TimeSeries low(1, 2, {0.0, 0.0});
    const TimeSeries high(1, 2, {1.0, 0.0});

    CHECK(validity({low, low}, {high, low}, blackbox) == doctest::Approx(0.5));
    CHECK(validity({low}, {low}, blackbox) == 0.0);
    CHECK(validity({low, high}, {high, low}, blackbox) == 1.0);
}

TEST_CASE("pair metrics reject malformed input") {
    const TimeSeries a(1, 4, {1, 2, 3, 4});
    const TimeSeries b(1, 3, {1, 2, 3});
    const FirstValueBlackBox blackbox;
    CHECK_THROWS_AS(proximity({a}, {a, a}), LengthMismatch);
    CHECK_THROWS_AS(proximity({a}, {b}), ShapeError);
    CHECK_THROWS_AS(sparsity({}, {}), EmptyDataset);
    CHECK_THROWS_AS(validity({a}, {b}, blackbox), ShapeError);
}

TEST_CASE("isolation forest: deterministic and parallel-equal") {
    const Dataset train = gaussian_points(200, 31);
    const auto forest_a = iforest_fit(train, 50, 64, 9);
    const auto forest_b = iforest_fit(train, 50, 64, 9);
    const auto forest_serial = iforest_fit_serial(train, 50, 64, 9);

    std::mt19937_64 rng(100);
    for (int i = 0; i < 25; ++i) {
        const std::vector<double> point{uniform(rng, -5.0, 5.0)};
        const double s = forest_a.score_flat(point);
        CHECK(s == forest_b.score_flat(point));
        CHECK(s == forest_serial.score_flat(point));
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
}

TEST_CASE("isolation forest: training-order invariant when every row is used") {
    Dataset train = gaussian_points(120, 77);
    Dataset shuffled = train;
    std::mt19937_64 rng(5);
    std::vector<int> order(static_cast<std::size_t>(train.size()));
    for (int i = 0; i < train.size(); ++i) order[i] = i;
    shuffle(order, rng);
    for (int i = 0; i < train.size(); ++i) {
        shuffled.instances[i] = train.instances[order[i]];
        shuffled.labels[i] = train.labels[order[i]];
    }

    // subsample >= n means every tree sees the whole multiset of points
    const auto forest = iforest_fit(train, 40, 200, 3);
    const auto forest_shuffled = iforest_fit(shuffled, 40, 200, 3);
    for (double x : {-3.0, -1.0, 0.0, 0.5, 2.5}) {
        CHECK(forest.score_flat({x}) == doctest::Approx(forest_shuffled.score_flat({x})));
    }
}

TEST_CASE("isolation forest: inliers score low, far outliers high") {
    const int dims = 16;
    int separated = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset train = gaussian_points(500, 1000 + seed, dims);
        const auto forest = iforest_fit(train, 100, 256, seed);
        const double nominal = forest.score_flat(std::vector<double>(dims, 0.0));
        const double outlier = forest.score_flat(std::vector<double>(dims, 100.0));
        if (nominal < 0.5 && outlier > 0.6) ++separated;
    }
    CHECK(separated >= 19);
}

TEST_CASE("isolation forest: in-sample points are mostly plausible") {
    const Dataset train = gaussian_points(500, 4242, 16);
    const auto forest = iforest_fit(train, 100, 256, 8);
    CHECK(plausibility(train.instances, forest) >= 0.9);
}

TEST_CASE("isolation forest: constant training data isolates nothing") {
    Dataset train;
    train.class_names = {"a", "b"};
    for (int i = 0; i < 50; ++i) {
        train.instances.emplace_back(1, 3, std::vector<double>{1e6, 1e6, 1e6});
        train.labels.push_back(i % 2);
    }
    const auto forest = iforest_fit(train, 20, 64, 1);
    // every tree is a single constant leaf of full size: path length equals
    // the normalizer, so the score is exactly 2^-1... for the training point
    const double s = forest.score_flat({1e6, 1e6, 1e6});
    CHECK(s == doctest::Approx(0.5));
}

TEST_CASE("isolation forest: input validation") {
    const Dataset train = gaussian_points(10, 2);
    CHECK_THROWS_AS(iforest_fit(train, 0, 8, 1), ConfigError);
    CHECK_THROWS_AS(iforest_fit(train, 5, 1, 1), ConfigError);
    CHECK_THROWS_AS(iforest_fit(Dataset{}, 5, 8, 1), EmptyDataset);
    const auto forest = iforest_fit(train, 5, 8, 1);
    CHECK_THROWS_AS(forest.score_flat({1.0, 2.0}), ShapeError);
}

TEST_CASE("plausibility moves monotonically with the threshold") {
    const Dataset train = gaussian_points(300, 55);
    auto forest = iforest_fit(train, 80, 128, 6);
    std::vector<TimeSeries> queries;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 40; ++i) {
        queries.emplace_back(1, 1, std::vector<double>{uniform(rng, -6.0, 6.0)});
    }
    double previous = -1.0;
    for (double threshold : {0.3, 0.4, 0.5, 0.6, 0.7}) {
        forest.threshold = threshold;
        const double p = plausibility(queries, forest);
        CHECK(p >= previous);
        previous = p;
    }
}

namespace {

CounterfactualResult make_result(const TimeSeries& original, const TimeSeries& counterfactual,
                                 int iterations, const BlackBox& blackbox) {
    CounterfactualResult r;
    r.original = original;
    r.counterfactual = counterfactual;
    r.original_class = blackbox.predict(original);
    r.final_class = blackbox.predict(counterfactual);
    r.valid = r.final_class != r.original_class;
    r.iterations = iterations;
    for (int i = 0; i < iterations; ++i) {
        SwapRecord rec;
        rec.iteration = i + 1;
        r.trace.push_back(rec);
    }
    return r;
}

}  // namespace

TEST_CASE("evaluate_run aggregates per-instance metrics") {
    const FirstValueBlackBox blackbox;
    const Dataset train = gaussian_points(200, 12);
    const auto forest = iforest_fit(train, 60, 128, 4);

    const TimeSeries low(1, 1, {0.0});
    const TimeSeries high(1, 1, {1.0});
    TimeSeries nudged = low;
    nudged.at(0, 0) = 0.2;  // still class 0: an invalid counterfactual

    const std::vector<CounterfactualResult> results{
        make_result(low, high, 3, blackbox),
        make_result(low, nudged, 5, blackbox),
        make_result(high, low, 1, blackbox),
    };

    const auto report = evaluate_run(results, blackbox, forest);
    CHECK(report.count == 3);
    CHECK(report.valid_count == 2);
    CHECK(report.validity == doctest::Approx(2.0 / 3.0));
    CHECK(report.mean_iterations == doctest::Approx(2.0));  // (3+1)/2 over valid only
    CHECK(report.proximity ==
          doctest::Approx(proximity({low, low, high}, {high, nudged, low})).epsilon(1e-12));
    CHECK(report.sparsity ==
          doctest::Approx(sparsity({low, low, high}, {high, nudged, low})).epsilon(1e-12));

    REQUIRE(report.per_instance.size() == 3);
    CHECK(report.per_instance[0].valid);
    CHECK_FALSE(report.per_instance[1].valid);
    CHECK(report.per_instance[1].iterations == 5);
    CHECK(report.per_instance[2].anomaly_score ==
          doctest::Approx(forest.score(low)).epsilon(1e-12));

    const auto doc = report.to_json();
    CHECK(doc.at("validity").get<double>() == doctest::Approx(report.validity));
    CHECK(doc.at("per_instance").size() == 3);
    const std::string table = report.to_table();
    CHECK(table.find("validity") != std::string::npos);
    CHECK(table.find("plausibility") != std::string::npos);

    CHECK_THROWS_AS(evaluate_run({}, blackbox, forest), EmptyDataset);
}

TEST_CASE("a single valid result gives validity one and its own iteration count") {
    const FirstValueBlackBox blackbox;
    const Dataset train = gaussian_points(100, 3);
    const auto forest = iforest_fit(train, 30, 64, 2);
    const TimeSeries low(1, 1, {0.0});
    const TimeSeries high(1, 1, {2.0});
    const auto report = evaluate_run({make_result(low, high, 4, blackbox)}, blackbox, forest);
    CHECK(report.validity == 1.0);
    CHECK(report.valid_count == 1);
    CHECK(report.mean_iterations == 4.0);
}

TEST_CASE("plausibility of real counterfactual-sized series") {
    // plausibility machinery on series-shaped data rather than single points
    const Dataset train = make_cbf(60, 64, 17);
    const auto forest = iforest_fit(train, 100, 256, 5);
    CHECK(forest.dimensions == 64);
    // structured data spreads more than an N(0,I) cloud; this is a sanity
    // floor, not a calibration claim
    CHECK(plausibility(train.instances, forest) >= 0.7);

    std::vector<TimeSeries> far;
    for (int i = 0; i < 10; ++i) {
        far.emplace_back(1, 64, std::vector<double>(64, 500.0));
    }
    CHECK(plausibility(far, forest) == 0.0);
}
