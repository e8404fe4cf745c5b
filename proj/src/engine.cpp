#include "mascots/engine.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mascots/errors.hpp"
#include "mascots/logging.hpp"
#include "mascots/rng.hpp"

namespace mascots {

using nlohmann::json;

namespace {

int l1_distance(const Word& a, const Word& b) {
    int dist = 0;
    for (std::size_t i = 0; i < a.symbols.size(); ++i) {
        dist += std::abs(a.symbols[i] - b.symbols[i]);
    }
    return dist;
}

json series_to_json(const TimeSeries& series) {
    return {{"id", series.id()},
            {"channels", series.channels()},
            {"length", series.length()},
            {"values", series.values()}};
}

TimeSeries series_from_json(const json& doc) {
    return {doc.at("channels").get<int>(), doc.at("length").get<int>(),
            doc.at("values").get<std::vector<double>>(), doc.value("id", std::string{})};
}

json word_to_json(const Word& word) {
    return {{"symbols", word.symbols}, {"config_id", word.config_id}};
}

Word word_from_json(const json& doc) {
    Word word;
    word.symbols = doc.at("symbols").get<std::vector<int>>();
    word.config_id = doc.at("config_id").get<int>();
    return word;
}

}  // namespace

std::vector<double> pattern_swap(const TimeSeries& x, int channel, int start, const Word& support,
                                 const Word& oppose, const SaxConfig& config,
                                 const Breakpoints& breakpoints) {
    if (static_cast<int>(support.symbols.size()) != config.word_length ||
        static_cast<int>(oppose.symbols.size()) != config.word_length) {
        throw LengthError("swap words do not match the configuration's word length");
    }
    if (channel < 0 || channel >= x.channels()) {
        throw OutOfBounds("swap channel " + std::to_string(channel) + " outside the series");
    }
    if (start < 0 || start + config.effective_span() > x.length()) {
        throw OutOfBounds("swap window at " + std::to_string(start) + " spills past the series end");
    }

    std::vector<double> window(config.window);
    for (int i = 0; i < config.window; ++i) {
        window[i] = x.at(channel, start + i * config.dilation);
    }
    const WindowStats stats = window_stats(window, config);

    const int block = config.window / config.word_length;
    std::vector<double> delta(config.window, 0.0);
    for (int seg = 0; seg < config.word_length; ++seg) {
        if (oppose.symbols[seg] == support.symbols[seg]) continue;
        const double shift = (breakpoints.centers[oppose.symbols[seg]] - stats.paa[seg]) * stats.std;
        for (int i = seg * block; i < (seg + 1) * block; ++i) delta[i] = shift;
    }
    return delta;
}

Perturbation get_perturbation(const TimeSeries& x, int predicted_class, const BorfVector& z,
                              const AttributionMatrix& phi, double lambda,
                              const std::vector<std::uint8_t>& vocab_presence,
                              const BorfTransform& transform, std::mt19937_64& rng) {
    if (static_cast<long>(vocab_presence.size()) != transform.vocab_size) {
        throw ShapeError("presence mask does not match the vocabulary");
    }

    // Most supporting contained pattern; map iteration is ascending, so the
    // strict > keeps the lowest flat index on ties.
    long support = -1;
    double support_phi = -std::numeric_limits<double>::infinity();
    for (const auto& [flat, count] : z.counts) {
        if (count <= 0) continue;
        const double value = phi.at(flat, predicted_class);
        if (value > support_phi) {
            support_phi = value;
            support = flat;
        }
    }
    if (support < 0) throw NoContainedPattern("the series contains no patterns to swap");

    const auto decoded = transform.decode(support);
    const SaxConfig& config = transform.configs[decoded.word.config_id];
    const Breakpoints& breakpoints = transform.breakpoints[decoded.word.config_id];

    // Cheapest opposing pattern among training words of the same
    // configuration and channel.
    const long channel_base = static_cast<long>(decoded.channel) * transform.words_per_channel;
    const long range_start = channel_base + transform.offsets[decoded.word.config_id];
    const long range_end =
        static_cast<std::size_t>(decoded.word.config_id) + 1 < transform.offsets.size()
            ? channel_base + transform.offsets[decoded.word.config_id + 1]
            : channel_base + transform.words_per_channel;

    long oppose = -1;
    Word oppose_word;
    double best_objective = std::numeric_limits<double>::infinity();
    for (long flat = range_start; flat < range_end; ++flat) {
        if (flat == support || !vocab_presence[flat]) continue;
        const Word candidate = transform.decode(flat).word;
        const double objective =
            phi.at(flat, predicted_class) + lambda * l1_distance(decoded.word, candidate);
        if (objective < best_objective) {
            best_objective = objective;
            oppose = flat;
            oppose_word = candidate;
        }
    }
    if (oppose < 0) {
        throw NoSwapAvailable("no training pattern shares the supporting pattern's configuration");
    }

    const auto& alignments = z.occurrences.at(support);
    const Alignment& where = alignments[bounded(rng, alignments.size())];

    Perturbation out;
    out.record.config_id = decoded.word.config_id;
    out.record.alphabet = config.alphabet;
    out.record.dilation = config.dilation;
    out.record.support_index = support;
    out.record.support_word = decoded.word;
    out.record.oppose_index = oppose;
    out.record.oppose_word = oppose_word;
    out.record.channel = where.channel;
    out.record.start = where.start;
    out.record.objective_value = best_objective;
    out.record.delta =
        pattern_swap(x, where.channel, where.start, decoded.word, oppose_word, config, breakpoints);

    out.delta = TimeSeries(x.channels(), x.length(),
                           std::vector<double>(x.values().size(), 0.0));
    for (int i = 0; i < config.window; ++i) {
        out.delta.at(where.channel, where.start + i * config.dilation) = out.record.delta[i];
    }
    return out;
}

CounterfactualResult explain(const TimeSeries& x, const BlackBox& blackbox,
                             const Surrogate& surrogate, const BorfTransform& transform,
                             const std::vector<std::uint8_t>& vocab_presence,
                             const EngineConfig& config) {
    if (config.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (config.lambda < 0.0) throw ConfigError("lambda must be >= 0");
    x.require_finite();

    CounterfactualResult result;
    result.original = x;
    result.counterfactual = x;
    result.seed = config.seed;
    result.lambda = config.lambda;
    result.original_class = blackbox.predict(x);

    std::mt19937_64 rng(config.seed);
    while (static_cast<int>(result.trace.size()) < config.max_iterations) {
        if (blackbox.predict(result.counterfactual) != result.original_class) break;
        const BorfVector z = transform_one(result.counterfactual, transform);
        if (z.counts.empty()) {
            result.note = "the series is too short for every configured window";
            break;
        }
        const AttributionMatrix phi = attribute(surrogate, z);
        SwapRecord record;
        try {
            Perturbation perturbation =
                get_perturbation(result.counterfactual, result.original_class, z, phi,
                                 config.lambda, vocab_presence, transform, rng);
            record = std::move(perturbation.record);
        } catch (const NoSwapAvailable& e) {
            result.note = e.what();
            break;
        } catch (const NoContainedPattern& e) {
            result.note = e.what();
            break;
        }
        record.iteration = static_cast<int>(result.trace.size()) + 1;
        for (std::size_t i = 0; i < record.delta.size(); ++i) {
            if (record.delta[i] == 0.0) continue;  // leave agreeing segments bit-identical
            result.counterfactual.at(record.channel,
                                     record.start + static_cast<int>(i) * record.dilation) +=
                record.delta[i];
        }
        result.trace.push_back(std::move(record));
    }

    result.final_class = blackbox.predict(result.counterfactual);
    result.valid = result.final_class != result.original_class;
    result.iterations = static_cast<int>(result.trace.size());
    log::debug("explain: class " + std::to_string(result.original_class) + " -> " +
               std::to_string(result.final_class) + " in " + std::to_string(result.iterations) +
               " iterations (valid=" + (result.valid ? std::string("yes") : std::string("no")) +
               ")");
    return result;
}

std::vector<CounterfactualResult> explain_batch(const std::vector<TimeSeries>& queries,
                                                const BlackBox& blackbox,
                                                const Surrogate& surrogate,
                                                const BorfTransform& transform,
                                                const std::vector<std::uint8_t>& vocab_presence,
                                                const EngineConfig& config, int jobs) {
    const int n = static_cast<int>(queries.size());
    std::vector<CounterfactualResult> out(n);
#ifdef _OPENMP
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#else
    (void)jobs;
#endif
    for (int i = 0; i < n; ++i) {
        EngineConfig per_instance = config;
        per_instance.seed = mix_seed(config.seed, static_cast<std::uint64_t>(i));
        out[i] = explain(queries[i], blackbox, surrogate, transform, vocab_presence, per_instance);
    }
    return out;
}

std::vector<CounterfactualResult> explain_batch_serial(
    const std::vector<TimeSeries>& queries, const BlackBox& blackbox, const Surrogate& surrogate,
    const BorfTransform& transform, const std::vector<std::uint8_t>& vocab_presence,
    const EngineConfig& config) {
    std::vector<CounterfactualResult> out;
    out.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        EngineConfig per_instance = config;
        per_instance.seed = mix_seed(config.seed, i);
        out.push_back(
            explain(queries[i], blackbox, surrogate, transform, vocab_presence, per_instance));
    }
    return out;
}

namespace {

std::string class_display(int label, const std::vector<std::string>& class_names) {
    if (label >= 0 && label < static_cast<int>(class_names.size())) return class_names[label];
    return std::to_string(label);
}

std::string symbols_display(const SwapRecord& record) {
    std::string out = "[";
    for (std::size_t i = 0; i < record.oppose_word.symbols.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(record.oppose_word.symbols[i]);
    }
    out += ']';
    if (record.alphabet == 3) {
        static const char* level[] = {"low", "medium", "high"};
        out += " (";
        for (std::size_t i = 0; i < record.oppose_word.symbols.size(); ++i) {
            if (i > 0) out += ", ";
            out += level[record.oppose_word.symbols[i]];
        }
        out += ')';
    }
    return out;
}

std::string span_display(const SwapRecord& record) {
    const int last = record.start + (static_cast<int>(record.delta.size()) - 1) * record.dilation;
    return "channel " + std::to_string(record.channel) + ", indexes " +
           std::to_string(record.start) + "–" + std::to_string(last);
}

}  // namespace

std::string render_text(const CounterfactualResult& result,
                        const std::vector<std::string>& class_names) {
    if (result.trace.empty()) throw EmptyTrace("nothing to render: the trace has no swaps");

    std::string text;
    const SwapRecord& first = result.trace.front();
    if (result.valid) {
        text = "To change the prediction of the black-box model from class " +
               class_display(result.original_class, class_names) + " to class " +
               class_display(result.final_class, class_names) + ", the pattern at " +
               span_display(first) + " must be replaced with " + symbols_display(first);
    } else {
        text = "The prediction of the black-box model did not change from class " +
               class_display(result.original_class, class_names) + " within " +
               std::to_string(result.iterations) + " iterations; the attempted swaps were: the pattern at " +
               span_display(first) + " replaced with " + symbols_display(first);
    }
    for (std::size_t i = 1; i < result.trace.size(); ++i) {
        const SwapRecord& record = result.trace[i];
        text += ", followed by replacing the pattern at " + span_display(record) + " with " +
                symbols_display(record);
    }
    text += '.';
    if (!result.note.empty()) text += " (" + result.note + ")";
    return text;
}

json SwapRecord::to_json() const {
    return {{"iteration", iteration},
            {"config_id", config_id},
            {"alphabet", alphabet},
            {"dilation", dilation},
            {"support_index", support_index},
            {"support_word", word_to_json(support_word)},
            {"oppose_index", oppose_index},
            {"oppose_word", word_to_json(oppose_word)},
            {"channel", channel},
            {"start", start},
            {"delta", delta},
            {"objective_value", objective_value}};
}

SwapRecord SwapRecord::from_json(const json& doc) {
    SwapRecord record;
    record.iteration = doc.at("iteration").get<int>();
    record.config_id = doc.at("config_id").get<int>();
    record.alphabet = doc.at("alphabet").get<int>();
    record.dilation = doc.at("dilation").get<int>();
    record.support_index = doc.at("support_index").get<long>();
    record.support_word = word_from_json(doc.at("support_word"));
    record.oppose_index = doc.at("oppose_index").get<long>();
    record.oppose_word = word_from_json(doc.at("oppose_word"));
    record.channel = doc.at("channel").get<int>();
    record.start = doc.at("start").get<int>();
    record.delta = doc.at("delta").get<std::vector<double>>();
    record.objective_value = doc.at("objective_value").get<double>();
    return record;
}

json result_to_json(const CounterfactualResult& result) {
    json trace = json::array();
    for (const auto& record : result.trace) trace.push_back(record.to_json());
    return {{"format_version", 1},
            {"kind", "explanation"},
            {"original", series_to_json(result.original)},
            {"counterfactual", series_to_json(result.counterfactual)},
            {"original_class", result.original_class},
            {"final_class", result.final_class},
            {"valid", result.valid},
            {"iterations", result.iterations},
            {"seed", result.seed},
            {"lambda", result.lambda},
            {"note", result.note},
            {"trace", std::move(trace)}};
}

CounterfactualResult result_from_json(const json& doc) {
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1) {
        throw SchemaError("unsupported explanation format version");
    }
    CounterfactualResult result;
    try {
        result.original = series_from_json(doc.at("original"));
        result.counterfactual = series_from_json(doc.at("counterfactual"));
        result.original_class = doc.at("original_class").get<int>();
        result.final_class = doc.at("final_class").get<int>();
        result.valid = doc.at("valid").get<bool>();
        result.iterations = doc.at("iterations").get<int>();
        result.seed = doc.at("seed").get<std::uint64_t>();
        result.lambda = doc.at("lambda").get<double>();
        result.note = doc.value("note", std::string{});
        for (const auto& record : doc.at("trace")) {
            result.trace.push_back(SwapRecord::from_json(record));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed explanation document: ") + e.what());
    }
    if (static_cast<int>(result.trace.size()) != result.iterations) {
        throw SchemaError("explanation trace length disagrees with its iteration count");
    }
    return result;
}

json render_plot_json(const CounterfactualResult& result) {
    const TimeSeries& a = result.original;
    const TimeSeries& b = result.counterfactual;

    json original = json::array();
    json counterfactual = json::array();
    for (int j = 0; j < a.channels(); ++j) {
        const auto span_a = a.channel(j);
        const auto span_b = b.channel(j);
        original.push_back(std::vector<double>(span_a.begin(), span_a.end()));
        counterfactual.push_back(std::vector<double>(span_b.begin(), span_b.end()));
    }

    json spans = json::array();
    for (const auto& record : result.trace) {
        spans.push_back(
            {{"iteration", record.iteration},
             {"channel", record.channel},
             {"start", record.start},
             {"end", record.start + (static_cast<int>(record.delta.size()) - 1) * record.dilation},
             {"config_id", record.config_id}});
    }

    double squared = 0.0;
    long unchanged = 0;
    const long total = static_cast<long>(a.values().size());
    for (long i = 0; i < total; ++i) {
        const double diff = a.values()[i] - b.values()[i];
        squared += diff * diff;
        if (diff == 0.0) ++unchanged;
    }

    return {{"format_version", 1},
            {"kind", "explanation-plot"},
            {"valid", result.valid},
            {"original_class", result.original_class},
            {"final_class", result.final_class},
            {"iterations", result.iterations},
            {"seed", result.seed},
            {"lambda", result.lambda},
            {"note", result.note},
            {"channels", a.channels()},
            {"length", a.length()},
            {"original", std::move(original)},
            {"counterfactual", std::move(counterfactual)},
            {"spans", std::move(spans)},
            {"metrics",
             {{"proximity", std::sqrt(squared) / total},
              {"sparsity", static_cast<double>(unchanged) / total}}}};
}

}  // namespace mascots
