#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "mascots/borf.hpp"
#include "mascots/engine.hpp"
#include "mascots/errors.hpp"
#include "mascots/models.hpp"
#include "mascots/rng.hpp"
#include "mascots/synth.hpp"

using namespace mascots;

namespace {

SaxConfig make_config(int window, int word_length, int alphabet, int stride, int dilation = 1) {
    SaxConfig c;
    c.window = window;
    c.word_length = word_length;
    c.alphabet = alphabet;
    c.stride = stride;
    c.dilation = dilation;
    return c;
}

Word make_word(std::vector<int> symbols, int config_id = 0) {
    Word w;
    w.symbols = std::move(symbols);
    w.config_id = config_id;
    return w;
}

/// Always answers the same class; lets tests pin down the no-flip path.
struct ConstantBlackBox final : BlackBox {
    int classes;
    explicit ConstantBlackBox(int c) : classes(c) {}
    int num_classes() const override { return classes; }
    std::vector<double> predict_proba(const TimeSeries&) const override {
        std::vector<double> p(classes, 0.0);
        p[0] = 1.0;
        return p;
    }
    std::string kind() const override { return "constant"; }
    nlohmann::json to_json() const override { return {{"kind", kind()}}; }
};

bool bitwise_equal(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

TEST_CASE("pattern swap: hand-checked shift") {
    const TimeSeries x(1, 4, {1, 1, 3, 3});
    const SaxConfig config = make_config(4, 2, 3, 2);
    const Breakpoints bp = gaussian_breakpoints(3);

    const auto delta =
        pattern_swap(x, 0, 0, make_word({0, 2}), make_word({2, 0}), config, bp);
    REQUIRE(delta.size() == 4);
    CHECK(delta[0] == doctest::Approx(1.9674).epsilon(1e-3));
    CHECK(delta[1] == doctest::Approx(1.9674).epsilon(1e-3));
    CHECK(delta[2] == doctest::Approx(-1.9674).epsilon(1e-3));
    CHECK(delta[3] == doctest::Approx(-1.9674).epsilon(1e-3));

    // the shifted window re-encodes, under the original mean and std, as the target
    const WindowStats original = window_stats(std::vector<double>{1, 1, 3, 3}, config);
    std::vector<double> shifted(4);
    for (int i = 0; i < 4; ++i) {
        shifted[i] = (x.at(0, i) + delta[i] - original.mean) / original.std;
    }
    const auto segments = paa(shifted, 2);
    CHECK(sax_symbol(segments[0], bp) == 2);
    CHECK(sax_symbol(segments[1], bp) == 0);
}

TEST_CASE("pattern swap: agreeing segments stay untouched") {
    const TimeSeries x(1, 4, {1, 1, 3, 3});
    const SaxConfig config = make_config(4, 2, 3, 2);
    const Breakpoints bp = gaussian_breakpoints(3);

    SUBCASE("identical words are a no-op") {
        const auto delta = pattern_swap(x, 0, 0, make_word({0, 2}), make_word({0, 2}), config, bp);
        CHECK(delta == std::vector<double>{0, 0, 0, 0});
    }
    SUBCASE("only differing segments move") {
        const auto delta = pattern_swap(x, 0, 0, make_word({0, 2}), make_word({0, 0}), config, bp);
        CHECK(delta[0] == 0.0);
        CHECK(delta[1] == 0.0);
        CHECK(delta[2] != 0.0);
        CHECK(delta[2] == delta[3]);
    }
}

TEST_CASE("pattern swap: bounds and length checks") {
    const TimeSeries x(1, 6, {0, 1, 2, 3, 4, 5});
    const SaxConfig config = make_config(4, 2, 3, 1);
    const Breakpoints bp = gaussian_breakpoints(3);
    CHECK_THROWS_AS(pattern_swap(x, 0, 3, make_word({0, 1}), make_word({1, 0}), config, bp),
                    OutOfBounds);
    CHECK_THROWS_AS(pattern_swap(x, 1, 0, make_word({0, 1}), make_word({1, 0}), config, bp),
                    OutOfBounds);
    CHECK_THROWS_AS(pattern_swap(x, 0, 0, make_word({0}), make_word({1, 0}), config, bp),
                    LengthError);
}

TEST_CASE("re-encoding guarantee on random windows") {
    std::mt19937_64 rng(2024);
    const Breakpoints bp = gaussian_breakpoints(3);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int window_size = std::vector<int>{8, 16, 32}[bounded(rng, 3)];
        const int word_length = bounded(rng, 2) == 0 ? 2 : 4;
        const SaxConfig config = make_config(window_size, word_length, 3, 1);

        std::vector<double> values(window_size);
        if (bounded(rng, 10) == 0) {
            values.assign(window_size, uniform(rng, -2.0, 2.0));  // flat window edge case
        } else {
            for (auto& v : values) v = uniform(rng, -3.0, 3.0);
        }
        const TimeSeries x(1, window_size, values);
        const WindowStats stats = window_stats(values, config);
        const Word support = sax_encode(stats, bp, config);

        Word oppose = support;
        while (oppose.symbols == support.symbols) {
            for (auto& s : oppose.symbols) s = static_cast<int>(bounded(rng, 3));
        }

        const auto delta = pattern_swap(x, 0, 0, support, oppose, config, bp);
        std::vector<double> standardized(window_size);
        for (int i = 0; i < window_size; ++i) {
            standardized[i] = (values[i] + delta[i] - stats.mean) / stats.std;
        }
        const auto segments = paa(standardized, word_length);
        for (int seg = 0; seg < word_length; ++seg) {
            REQUIRE(sax_symbol(segments[seg], bp) == oppose.symbols[seg]);
        }
        ++checked;
    }
    CHECK(checked == 1000);
}

namespace {

// Fixture around a two-window series: flat pattern ids under the single
// w=4, l=2, |A|=3 configuration run 0..8 on channel 0.
struct PerturbationFixture {
    BorfTransform transform = BorfTransform::build({make_config(4, 2, 3, 2)}, 1);
    TimeSeries x{1, 6, {0, 0, 1, 1, 0, 0}};
    BorfVector z;
    AttributionMatrix phi;
    std::vector<std::uint8_t> presence;

    PerturbationFixture() {
        z = transform_one(x, transform);  // contains words (0,2)->2 and (2,0)->6
        phi.features = static_cast<int>(transform.vocab_size);
        phi.classes = 2;
        phi.phi.assign(phi.features * 2, 0.0);
        presence.assign(transform.vocab_size, 1);
    }
    double& phi_at(long flat, int cls) { return phi.phi[flat * 2 + cls]; }
};

}  // namespace

TEST_CASE("perturbation picks the attribution argmax among contained words") {
    PerturbationFixture f;
    f.phi_at(2, 0) = 0.9;
    f.phi_at(6, 0) = 0.1;
    f.phi_at(3, 0) = 5.0;  // not contained: z_3 = 0, must be ignored
    std::mt19937_64 rng(1);
    const auto p = get_perturbation(f.x, 0, f.z, f.phi, 0.0, f.presence, f.transform, rng);
    CHECK(p.record.support_index == 2);
    CHECK(p.record.support_word.symbols == std::vector<int>{0, 2});
    CHECK(p.record.channel == 0);
    CHECK(p.record.start == 0);
}

TEST_CASE("perturbation minimizes attribution plus lambda times symbol distance") {
    PerturbationFixture f;
    f.phi_at(2, 0) = 0.9;   // support: word (0,2)
    f.phi_at(6, 0) = -0.5;  // word (2,0), L1 distance 4 from support
    f.phi_at(1, 0) = -0.4;  // word (0,1), L1 distance 1

    std::mt19937_64 rng(1);
    SUBCASE("lambda 0 ignores distance") {
        const auto p = get_perturbation(f.x, 0, f.z, f.phi, 0.0, f.presence, f.transform, rng);
        CHECK(p.record.oppose_index == 6);
        CHECK(p.record.objective_value == doctest::Approx(-0.5));
    }
    SUBCASE("a strong enough lambda prefers the nearer word") {
        const auto p = get_perturbation(f.x, 0, f.z, f.phi, 0.2, f.presence, f.transform, rng);
        CHECK(p.record.oppose_index == 1);
        CHECK(p.record.oppose_word.symbols == std::vector<int>{0, 1});
        CHECK(p.record.objective_value == doctest::Approx(-0.4 + 0.2 * 1));
    }
    SUBCASE("ties resolve to the lowest flat index") {
        PerturbationFixture g;
        g.phi_at(2, 0) = 0.9;
        std::mt19937_64 r(1);
        const auto p = get_perturbation(g.x, 0, g.z, g.phi, 0.0, g.presence, g.transform, r);
        CHECK(p.record.oppose_index == 0);  // all candidates at objective 0
    }
}

TEST_CASE("lambda monotonicity of the chosen symbol distance") {
    std::mt19937_64 rng(555);
    PerturbationFixture f;
    auto l1 = [](const Word& a, const Word& b) {
        int d = 0;
        for (std::size_t i = 0; i < a.symbols.size(); ++i) d += std::abs(a.symbols[i] - b.symbols[i]);
        return d;
    };
    for (int trial = 0; trial < 100; ++trial) {
        PerturbationFixture g;
        for (long k = 0; k < g.transform.vocab_size; ++k) {
            g.phi_at(k, 0) = uniform(rng, -1.0, 1.0);
        }
        std::mt19937_64 r1(7), r2(7);
        const auto loose = get_perturbation(g.x, 0, g.z, g.phi, 0.0, g.presence, g.transform, r1);
        const auto tight = get_perturbation(g.x, 0, g.z, g.phi, 0.1, g.presence, g.transform, r2);
        CHECK(l1(tight.record.support_word, tight.record.oppose_word) <=
              l1(loose.record.support_word, loose.record.oppose_word));
    }
    (void)f;
}

TEST_CASE("perturbation error paths") {
    PerturbationFixture f;
    std::mt19937_64 rng(1);

    SUBCASE("empty pattern vector") {
        BorfVector empty;
        empty.vocab_size = f.transform.vocab_size;
        CHECK_THROWS_AS(
            get_perturbation(f.x, 0, empty, f.phi, 0.0, f.presence, f.transform, rng),
            NoContainedPattern);
    }
    SUBCASE("no admissible replacement") {
        std::vector<std::uint8_t> none(f.transform.vocab_size, 0);
        f.phi_at(2, 0) = 1.0;
        CHECK_THROWS_AS(get_perturbation(f.x, 0, f.z, f.phi, 0.0, none, f.transform, rng),
                        NoSwapAvailable);
    }
    SUBCASE("support word itself being present is not enough") {
        std::vector<std::uint8_t> only_support(f.transform.vocab_size, 0);
        only_support[2] = 1;
        f.phi_at(2, 0) = 1.0;
        CHECK_THROWS_AS(
            get_perturbation(f.x, 0, f.z, f.phi, 0.0, only_support, f.transform, rng),
            NoSwapAvailable);
    }
    SUBCASE("presence mask of the wrong size") {
        std::vector<std::uint8_t> tiny(3, 1);
        CHECK_THROWS_AS(get_perturbation(f.x, 0, f.z, f.phi, 0.0, tiny, f.transform, rng),
                        ShapeError);
    }
}

TEST_CASE("perturbation matrix is zero outside the swapped window") {
    PerturbationFixture f;
    f.phi_at(2, 0) = 0.9;
    f.phi_at(6, 0) = -0.5;
    std::mt19937_64 rng(1);
    const auto p = get_perturbation(f.x, 0, f.z, f.phi, 0.0, f.presence, f.transform, rng);
    REQUIRE(p.delta.channels() == 1);
    REQUIRE(p.delta.length() == 6);
    for (int t = 0; t < 6; ++t) {
        const bool inside = t >= p.record.start && t < p.record.start + 4;
        if (!inside) CHECK(p.delta.at(0, t) == 0.0);
    }
}

namespace {

// Small end-to-end rig: cylinder/bell/funnel data, 1-NN black-box, and a
// surrogate trained on the black-box's probabilities.
struct EngineRig {
    Dataset train = make_cbf(24, 32, 7);
    BorfTransform transform = BorfTransform::build(auto_configure(1, 32), 1);
    Knn1BlackBox blackbox = Knn1BlackBox::fit(train);
    Surrogate surrogate;
    std::vector<std::uint8_t> presence;

    EngineRig() {
        const BorfMatrix counts = transform_dataset(train, transform);
        std::vector<std::vector<double>> targets;
        for (const auto& ts : train.instances) targets.push_back(blackbox.predict_proba(ts));
        SurrogateFitOptions options;
        options.epochs = 150;
        options.learning_rate = 0.3;
        surrogate = surrogate_fit(counts, targets, options);
        presence = column_presence(counts);
    }
};

}  // namespace

TEST_CASE("explain respects the iteration budget and validity contract") {
    EngineRig rig;
    EngineConfig config;
    config.lambda = 0.1;
    config.max_iterations = 20;
    config.seed = 5;

    const auto result = explain(rig.train.instances[0], rig.blackbox, rig.surrogate,
                                rig.transform, rig.presence, config);
    CHECK(result.iterations == static_cast<int>(result.trace.size()));
    CHECK(result.iterations <= 20);
    CHECK(result.original_class == rig.blackbox.predict(result.original));
    CHECK(result.final_class == rig.blackbox.predict(result.counterfactual));
    CHECK(result.valid == (result.final_class != result.original_class));
    for (int i = 0; i < result.iterations; ++i) {
        CHECK(result.trace[i].iteration == i + 1);
    }
}

TEST_CASE("a constant black-box never flips and uses the full budget") {
    EngineRig rig;
    const ConstantBlackBox constant(3);
    EngineConfig config;
    config.max_iterations = 1;
    config.seed = 9;
    const auto result = explain(rig.train.instances[1], constant, rig.surrogate, rig.transform,
                                rig.presence, config);
    CHECK_FALSE(result.valid);
    CHECK(result.iterations == 1);  // the one allowed swap was applied and didn't flip

    EngineConfig zero;
    zero.max_iterations = 0;
    CHECK_THROWS_AS(explain(rig.train.instances[1], constant, rig.surrogate, rig.transform,
                            rig.presence, zero),
                    ConfigError);
}

TEST_CASE("an empty training vocabulary yields an invalid result with a note") {
    EngineRig rig;
    const std::vector<std::uint8_t> none(rig.transform.vocab_size, 0);
    EngineConfig config;
    config.seed = 3;
    const auto result = explain(rig.train.instances[2], rig.blackbox, rig.surrogate,
                                rig.transform, none, config);
    CHECK_FALSE(result.valid);
    CHECK(result.iterations == 0);
    CHECK_FALSE(result.note.empty());
}

TEST_CASE("explain is deterministic in the seed") {
    EngineRig rig;
    EngineConfig config;
    config.lambda = 0.1;
    config.max_iterations = 10;
    config.seed = 42;

    const auto a = explain(rig.train.instances[3], rig.blackbox, rig.surrogate, rig.transform,
                           rig.presence, config);
    const auto b = explain(rig.train.instances[3], rig.blackbox, rig.surrogate, rig.transform,
                           rig.presence, config);
    CHECK(a.counterfactual.values() == b.counterfactual.values());
    CHECK(result_to_json(a).dump() == result_to_json(b).dump());

    config.seed = 43;  // a different seed is allowed to differ (alignment choice)
    const auto c = explain(rig.train.instances[3], rig.blackbox, rig.surrogate, rig.transform,
                           rig.presence, config);
    CHECK(c.iterations <= 10);
}

TEST_CASE("the trace replays exactly and everything else is bit-identical") {
    EngineRig rig;
    EngineConfig config;
    config.lambda = 0.1;
    config.max_iterations = 15;
    config.seed = 11;

    for (int idx : {0, 1, 2, 5, 8}) {
        const auto result = explain(rig.train.instances[idx], rig.blackbox, rig.surrogate,
                                    rig.transform, rig.presence, config);
        TimeSeries replay = result.original;
        std::set<std::pair<int, int>> touched;
        for (const auto& record : result.trace) {
            for (std::size_t i = 0; i < record.delta.size(); ++i) {
                if (record.delta[i] == 0.0) continue;
                const int t = record.start + static_cast<int>(i) * record.dilation;
                replay.at(record.channel, t) += record.delta[i];
                touched.insert({record.channel, t});
            }
        }
        for (int j = 0; j < replay.channels(); ++j) {
            for (int t = 0; t < replay.length(); ++t) {
                CAPTURE(idx);
                CAPTURE(t);
                // replaying the trace reconstructs the counterfactual bit for bit
                REQUIRE(bitwise_equal(replay.at(j, t), result.counterfactual.at(j, t)));
                if (!touched.count({j, t})) {
                    REQUIRE(bitwise_equal(result.original.at(j, t),
                                          result.counterfactual.at(j, t)));
                }
            }
        }
    }
}

TEST_CASE("batch explanation matches its serial reference") {
    EngineRig rig;
    EngineConfig config;
    config.lambda = 0.1;
    config.max_iterations = 8;
    config.seed = 21;
    const std::vector<TimeSeries> queries(rig.train.instances.begin(),
                                          rig.train.instances.begin() + 6);
    const auto parallel = explain_batch(queries, rig.blackbox, rig.surrogate, rig.transform,
                                        rig.presence, config, 2);
    const auto serial = explain_batch_serial(queries, rig.blackbox, rig.surrogate, rig.transform,
                                             rig.presence, config);
    REQUIRE(parallel.size() == serial.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(parallel[i].counterfactual.values() == serial[i].counterfactual.values());
        CHECK(parallel[i].iterations == serial[i].iterations);
        CHECK(parallel[i].seed == serial[i].seed);
    }
}

namespace {

CounterfactualResult rendering_fixture() {
    CounterfactualResult result;
    result.original = TimeSeries(1, 64, std::vector<double>(64, 0.0));
    result.counterfactual = result.original;
    result.original_class = 0;
    result.final_class = 1;
    result.valid = true;
    result.lambda = 0.1;
    result.seed = 4;

    SwapRecord first;
    first.iteration = 1;
    first.config_id = 0;
    first.alphabet = 3;
    first.dilation = 1;
    first.channel = 0;
    first.start = 10;
    first.delta.assign(16, 0.5);
    first.support_word = make_word({0, 0, 1, 2});
    first.oppose_word = make_word({2, 2, 1, 0});
    first.support_index = 5;
    first.oppose_index = 75;
    result.trace.push_back(first);
    result.iterations = 1;
    return result;
}

}  // namespace

TEST_CASE("rendered text follows the replacement template") {
    CounterfactualResult result = rendering_fixture();
    const std::vector<std::string> names{"abnormal", "normal"};

    const std::string text = render_text(result, names);
    CHECK(text.find("To change the prediction of the black-box model from class abnormal to "
                    "class normal") != std::string::npos);
    CHECK(text.find("indexes 10–25 must be replaced with [2,2,1,0]") != std::string::npos);
    CHECK(text.find("(high, high, medium, low)") != std::string::npos);
    CHECK(text.find("followed by") == std::string::npos);

    SwapRecord second = result.trace.front();
    second.iteration = 2;
    second.start = 40;
    second.oppose_word = make_word({0, 1, 1, 2});
    result.trace.push_back(second);
    result.iterations = 2;
    const std::string two = render_text(result, names);
    CHECK(two.find("followed by replacing the pattern at channel 0, indexes 40–55 with "
                   "[0,1,1,2]") != std::string::npos);
}

TEST_CASE("rendering falls back to numeric labels and flags invalid runs") {
    CounterfactualResult result = rendering_fixture();
    result.valid = false;
    result.final_class = 0;
    const std::string text = render_text(result, {});
    CHECK(text.find("did not change from class 0") != std::string::npos);
    CHECK(text.find("replaced with [2,2,1,0]") != std::string::npos);

    CounterfactualResult empty;
    empty.original = result.original;
    empty.counterfactual = result.original;
    CHECK_THROWS_AS(render_text(empty, {}), EmptyTrace);
}

TEST_CASE("explanation json round trips exactly") {
    EngineRig rig;
    EngineConfig config;
    config.lambda = 0.1;
    config.max_iterations = 12;
    config.seed = 77;
    const auto result = explain(rig.train.instances[4], rig.blackbox, rig.surrogate,
                                rig.transform, rig.presence, config);

    const auto doc = result_to_json(result);
    const auto back = result_from_json(doc);
    CHECK(back.original.values() == result.original.values());
    CHECK(back.counterfactual.values() == result.counterfactual.values());
    CHECK(back.original_class == result.original_class);
    CHECK(back.final_class == result.final_class);
    CHECK(back.valid == result.valid);
    CHECK(back.iterations == result.iterations);
    CHECK(back.seed == result.seed);
    CHECK(back.lambda == result.lambda);
    REQUIRE(back.trace.size() == result.trace.size());
    for (std::size_t i = 0; i < back.trace.size(); ++i) {
        CHECK(back.trace[i].support_word == result.trace[i].support_word);
        CHECK(back.trace[i].oppose_word == result.trace[i].oppose_word);
        CHECK(back.trace[i].delta == result.trace[i].delta);
        CHECK(back.trace[i].objective_value == result.trace[i].objective_value);
    }
    CHECK(result_to_json(back).dump() == doc.dump());

    auto bad = doc;
    bad["format_version"] = 999;
    CHECK_THROWS_AS(result_from_json(bad), SchemaError);
    auto inconsistent = doc;
    inconsistent["iterations"] = result.iterations + 1;
    CHECK_THROWS_AS(result_from_json(inconsistent), SchemaError);
}

TEST_CASE("plot json carries both series and the swap spans") {
    CounterfactualResult result = rendering_fixture();
    result.counterfactual.at(0, 12) += 1.5;
    const auto doc = render_plot_json(result);
    CHECK(doc.at("format_version") == 1);
    CHECK(doc.at("valid") == true);
    REQUIRE(doc.at("original").size() == 1);
    CHECK(doc.at("original")[0].size() == 64);
    CHECK(doc.at("counterfactual")[0].size() == 64);
    REQUIRE(doc.at("spans").size() == 1);
    CHECK(doc.at("spans")[0].at("start") == 10);
    CHECK(doc.at("spans")[0].at("end") == 25);
    CHECK(doc.at("metrics").at("sparsity").get<double>() == doctest::Approx(63.0 / 64.0));
    CHECK(doc.at("metrics").at("proximity").get<double>() == doctest::Approx(1.5 / 64.0));

    result.valid = false;
    CHECK(render_plot_json(result).at("valid") == false);
}
