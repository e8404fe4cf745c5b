#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mascots/borf.hpp"
#include "mascots/models.hpp"

namespace mascots {

/// One accepted perturbation: the pattern supporting the current prediction
/// (support_*) was replaced by the pattern opposing it most cheaply
/// (oppose_*) at one randomly chosen occurrence.
struct SwapRecord {
    int iteration = 0;  // 1-based position in the trace
    int config_id = 0;
    int alphabet = 0;        // copied from the config so records render standalone
    int dilation = 1;        // likewise; point i of delta lands at start + i*dilation
    long support_index = 0;  // flat vocabulary index of the replaced pattern
    Word support_word;
    long oppose_index = 0;  // flat vocabulary index of the replacement
    Word oppose_word;
    int channel = 0;
    int start = 0;
    std::vector<double> delta;     // per-point shift, window length entries
    double objective_value = 0.0;  // attribution + lambda * symbol distance

    nlohmann::json to_json() const;
    static SwapRecord from_json(const nlohmann::json& doc);
};

struct CounterfactualResult {
    TimeSeries original;
    TimeSeries counterfactual;
    int original_class = 0;
    int final_class = 0;
    bool valid = false;
    std::vector<SwapRecord> trace;
    int iterations = 0;  // == trace.size()
    std::uint64_t seed = 0;
    double lambda = 0.0;
    std::string note;  // nonempty when the search stopped early (no swap left)
};

struct EngineConfig {
    double lambda = 0.1;
    int max_iterations = 20;
    std::uint64_t seed = 0;
};

struct Perturbation {
    TimeSeries delta;  // same shape as the input, zero outside the swap
    SwapRecord record;
};

/// Picks the contained pattern most supporting `predicted_class` (ties to
/// the lowest flat index), then the cheapest opposing pattern among
/// training-vocabulary words of the same configuration and channel
/// (minimizing attribution + lambda * L1 symbol distance), and one uniformly
/// random occurrence of the supporting pattern.
/// Throws NoContainedPattern when z is all zero and NoSwapAvailable when the
/// candidate pool is empty.
Perturbation get_perturbation(const TimeSeries& x, int predicted_class, const BorfVector& z,
                              const AttributionMatrix& phi, double lambda,
                              const std::vector<std::uint8_t>& vocab_presence,
                              const BorfTransform& transform, std::mt19937_64& rng);

/// Per-point shifts that make the window at (channel, start) re-encode as
/// `oppose` under the ORIGINAL window's mean and scale. Segments whose
/// symbols already agree get an exact zero shift. Returns window-length
/// values, one per sampled point (piecewise constant over segments).
std::vector<double> pattern_swap(const TimeSeries& x, int channel, int start, const Word& support,
                                 const Word& oppose, const SaxConfig& config,
                                 const Breakpoints& breakpoints);

/// The counterfactual search loop: transform, attribute, swap, repeat until
/// the black-box prediction changes or `max_iterations` swaps were applied.
/// Runs out of candidate swaps -> invalid result with an explanatory note.
/// Deterministic for a fixed config.seed.
CounterfactualResult explain(const TimeSeries& x, const BlackBox& blackbox,
                             const Surrogate& surrogate, const BorfTransform& transform,
                             const std::vector<std::uint8_t>& vocab_presence,
                             const EngineConfig& config);

/// Explains queries[i] with seed mix_seed(config.seed, i); instances are
/// independent, so the parallel and serial versions agree bit-exactly.
std::vector<CounterfactualResult> explain_batch(const std::vector<TimeSeries>& queries,
                                                const BlackBox& blackbox,
                                                const Surrogate& surrogate,
                                                const BorfTransform& transform,
                                                const std::vector<std::uint8_t>& vocab_presence,
                                                const EngineConfig& config, int jobs = 0);
std::vector<CounterfactualResult> explain_batch_serial(const std::vector<TimeSeries>& queries,
                                                       const BlackBox& blackbox,
                                                       const Surrogate& surrogate,
                                                       const BorfTransform& transform,
                                                       const std::vector<std::uint8_t>& vocab_presence,
                                                       const EngineConfig& config);

/// One sentence per swap: "...the pattern at channel j, indexes a–b must be
/// replaced with [symbols]", chained with "followed by"; alphabet-3 symbols
/// are additionally verbalized as low/medium/high. Throws EmptyTrace.
std::string render_text(const CounterfactualResult& result,
                        const std::vector<std::string>& class_names);

/// Overlay document for plotting: both series, the perturbed spans per
/// iteration, and this instance's proximity/sparsity. Versioned schema.
nlohmann::json render_plot_json(const CounterfactualResult& result);

/// Versioned explanation schema; round-trips bit-exactly.
nlohmann::json result_to_json(const CounterfactualResult& result);
CounterfactualResult result_from_json(const nlohmann::json& doc);

}  // namespace mascots
