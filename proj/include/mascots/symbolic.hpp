#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mascots/dataset.hpp"

namespace mascots {

/// One symbolic discretization scheme: a sliding window of `window` points
/// (optionally strided and dilated) reduced to `word_length` segment means
/// and quantized into `alphabet` equiprobable symbols.
struct SaxConfig {
    int window = 0;
    int word_length = 0;
    int alphabet = 0;
    int stride = 1;
    int dilation = 1;
    int config_id = 0;

    /// Points covered on the raw series: (window-1)*dilation + 1.
    int effective_span() const { return (window - 1) * dilation + 1; }

    /// Throws ConfigError / InvalidAlphabet on invalid parameter combinations
    /// (word_length must divide window, alphabet >= 2, stride/dilation >= 1).
    void validate() const;

    bool operator==(const SaxConfig&) const = default;
};

/// A symbolic word: word_length symbols, each in [0, alphabet).
struct Word {
    std::vector<int> symbols;
    int config_id = 0;

    bool operator==(const Word&) const = default;
};

/// Gaussian quantile cuts and per-bin central values for one alphabet size.
/// cuts[i] = Phi^-1((i+1)/|A|); centers[a] = Phi^-1((2a+1)/(2|A|)).
struct Breakpoints {
    std::vector<double> cuts;     // |A|-1 strictly increasing values
    std::vector<double> centers;  // |A| strictly increasing values

    int alphabet() const { return static_cast<int>(centers.size()); }
};

/// Standardization statistics of one window plus its PAA representation.
/// `paa` holds segment means of the *standardized* window.
struct WindowStats {
    double mean = 0.0;
    double std = 1.0;  // population std; flat-window guard replaces <1e-8 by 1
    std::vector<double> paa;
};

/// Inverse CDF of the standard normal distribution, accurate to ~1e-15
/// (rational initial guess refined with Newton steps on erfc).
double inverse_normal_cdf(double p);

Breakpoints gaussian_breakpoints(int alphabet);

/// Piecewise aggregate approximation: means of word_length equal segments.
std::vector<double> paa(std::span<const double> values, int word_length);

WindowStats window_stats(std::span<const double> window, const SaxConfig& config);

/// Bin index for one standardized value: the number of cuts <= value,
/// so a value exactly on a cut lands in the upper bin.
int sax_symbol(double value, const Breakpoints& breakpoints);

Word sax_encode(const WindowStats& stats, const Breakpoints& breakpoints,
                const SaxConfig& config);

/// All (start index, window values) pairs for one channel under `config`.
/// Starts advance by `stride` while start + effective_span <= length;
/// window values are taken every `dilation` points.
std::vector<std::pair<int, std::vector<double>>> extract_windows(
    const TimeSeries& series, int channel, const SaxConfig& config);

/// Cumulative hash-range offset of each config (prefix sums of |A|^l).
std::vector<long> config_offsets(const std::vector<SaxConfig>& configs);

/// Total number of distinct words across all configs (per channel).
long vocabulary_size(const std::vector<SaxConfig>& configs);

/// Positional base-|A| code plus the owning config's offset. Bijective:
/// distinct configs occupy disjoint ranges and unhash_word inverts exactly.
long hash_word(const Word& word, const std::vector<SaxConfig>& configs);

Word unhash_word(long hash, const std::vector<SaxConfig>& configs);

}  // namespace mascots
