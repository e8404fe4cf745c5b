#include "mascots/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mascots/errors.hpp"

namespace mascots {

namespace {

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / 1.4142135623730950488);
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / 2.5066282746310005024;
}

}  // namespace

void SaxConfig::validate() const {
    if (alphabet < 2) {
        throw InvalidAlphabet("alphabet size must be >= 2, got " + std::to_string(alphabet));
    }
    if (window < 1 || word_length < 1) {
        throw ConfigError("window and word_length must be positive");
    }
    if (word_length > window || window % word_length != 0) {
        throw ConfigError("word_length " + std::to_string(word_length) +
                          " must divide window " + std::to_string(window));
    }
    if (stride < 1 || dilation < 1) {
        throw ConfigError("stride and dilation must be >= 1");
    }
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("inverse_normal_cdf requires p in (0,1)");
    }
    if (p == 0.5) return 0.0;
    // Reduce to the lower tail, where erfc keeps full relative precision
    // (evaluating the CDF near 1 would cap x accuracy at ~1e-11). 1 - p is
    // exact for p >= 0.5, and the reduction makes quantile pairs symmetric
    // bit for bit.
    if (p > 0.5) return -inverse_normal_cdf(1.0 - p);

    // Abramowitz & Stegun 26.2.23 rational approximation as the start point.
    const double t = std::sqrt(-2.0 * std::log(p));
    double x = -(t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                         (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308))));

    // Newton refinement against the erfc-based CDF; three steps take the
    // ~4e-4 seed error down to machine precision.
    for (int i = 0; i < 3; ++i) {
        const double err = normal_cdf(x) - p;
        x -= err / normal_pdf(x);
    }
    return x;
}

Breakpoints gaussian_breakpoints(int alphabet) {
    if (alphabet < 2) {
        throw InvalidAlphabet("alphabet size must be >= 2, got " + std::to_string(alphabet));
    }
    Breakpoints bp;
    bp.cuts.reserve(alphabet - 1);
    bp.centers.reserve(alphabet);
    for (int i = 0; i + 1 < alphabet; ++i) {
        bp.cuts.push_back(inverse_normal_cdf(static_cast<double>(i + 1) / alphabet));
    }
    for (int a = 0; a < alphabet; ++a) {
        bp.centers.push_back(inverse_normal_cdf((2.0 * a + 1.0) / (2.0 * alphabet)));
    }
    return bp;
}

std::vector<double> paa(std::span<const double> values, int word_length) {
    const int w = static_cast<int>(values.size());
    if (word_length < 1 || w % word_length != 0) {
        throw LengthError("word length " + std::to_string(word_length) +
                          " must divide window length " + std::to_string(w));
    }
    const int segment = w / word_length;
    std::vector<double> out(word_length);
    for (int i = 0; i < word_length; ++i) {
        double sum = 0.0;
        for (int k = 0; k < segment; ++k) sum += values[static_cast<std::size_t>(i) * segment + k];
        out[i] = sum / segment;
    }
    return out;
}

WindowStats window_stats(std::span<const double> window, const SaxConfig& config) {
    const int w = static_cast<int>(window.size());
    if (w != config.window) {
        throw LengthError("window has " + std::to_string(w) + " points, config expects " +
                          std::to_string(config.window));
    }
    double sum = 0.0;
    for (double v : window) sum += v;
    const double mean = sum / w;
    double sq = 0.0;
    for (double v : window) sq += (v - mean) * (v - mean);
    double std_dev = std::sqrt(sq / w);  // population std
    if (std_dev < 1e-8) std_dev = 1.0;   // flat-window guard

    WindowStats stats;
    stats.mean = mean;
    stats.std = std_dev;
    std::vector<double> standardized(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) standardized[i] = (window[i] - mean) / std_dev;
    stats.paa = paa(standardized, config.word_length);
    return stats;
}

int sax_symbol(double value, const Breakpoints& breakpoints) {
    const auto& cuts = breakpoints.cuts;
    return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), value,
                                             [](double v, double cut) { return v < cut; }) -
                            cuts.begin());
}

Word sax_encode(const WindowStats& stats, const Breakpoints& breakpoints,
                const SaxConfig& config) {
    if (static_cast<int>(stats.paa.size()) != config.word_length) {
        throw LengthError("paa length does not match config word length");
    }
    Word word;
    word.config_id = config.config_id;
    word.symbols.reserve(stats.paa.size());
    for (double v : stats.paa) word.symbols.push_back(sax_symbol(v, breakpoints));
    return word;
}

std::vector<std::pair<int, std::vector<double>>> extract_windows(
    const TimeSeries& series, int channel, const SaxConfig& config) {
    const int m = series.length();
    const int span = config.effective_span();
    if (span > m) {
        throw WindowTooLarge("window span " + std::to_string(span) +
                             " exceeds series length " + std::to_string(m));
    }
    std::vector<std::pair<int, std::vector<double>>> out;
    for (int start = 0; start + span <= m; start += config.stride) {
        std::vector<double> values(config.window);
        for (int i = 0; i < config.window; ++i) {
            values[i] = series.at(channel, start + i * config.dilation);
        }
        out.emplace_back(start, std::move(values));
    }
    return out;
}

namespace {

long words_in(const SaxConfig& c) {
    long n = 1;
    for (int i = 0; i < c.word_length; ++i) n *= c.alphabet;
    return n;
}

}  // namespace

std::vector<long> config_offsets(const std::vector<SaxConfig>& configs) {
    std::vector<long> offsets(configs.size());
    long acc = 0;
    for (std::size_t q = 0; q < configs.size(); ++q) {
        offsets[q] = acc;
        acc += words_in(configs[q]);
    }
    return offsets;
}

long vocabulary_size(const std::vector<SaxConfig>& configs) {
    long acc = 0;
    for (const auto& c : configs) acc += words_in(c);
    return acc;
}

long hash_word(const Word& word, const std::vector<SaxConfig>& configs) {
    if (word.config_id < 0 || word.config_id >= static_cast<int>(configs.size())) {
        throw UnknownHash("word references unknown config " + std::to_string(word.config_id));
    }
    const SaxConfig& config = configs[word.config_id];
    if (static_cast<int>(word.symbols.size()) != config.word_length) {
        throw LengthError("word length does not match its config");
    }
    long code = 0;
    for (int s : word.symbols) {
        if (s < 0 || s >= config.alphabet) {
            throw UnknownHash("symbol " + std::to_string(s) + " outside alphabet");
        }
        code = code * config.alphabet + s;
    }
    return config_offsets(configs)[word.config_id] + code;
}

Word unhash_word(long hash, const std::vector<SaxConfig>& configs) {
    const auto offsets = config_offsets(configs);
    for (std::size_t q = configs.size(); q-- > 0;) {
        if (hash >= offsets[q]) {
            const SaxConfig& config = configs[q];
            long code = hash - offsets[q];
            if (code >= words_in(config)) break;  // in the gap past the last config
            Word word;
            word.config_id = static_cast<int>(q);
            word.symbols.assign(config.word_length, 0);
            for (int i = config.word_length - 1; i >= 0; --i) {
                word.symbols[i] = static_cast<int>(code % config.alphabet);
                code /= config.alphabet;
            }
            return word;
        }
    }
    throw UnknownHash("hash " + std::to_string(hash) + " is outside every config range");
}

}  // namespace mascots
