#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "mascots/dataset.hpp"
#include "mascots/symbolic.hpp"

namespace mascots {

/// One (channel, window start) placement of a pattern.
struct Alignment {
    int channel = 0;
    int start = 0;

    bool operator==(const Alignment&) const = default;
};

/// The full multi-configuration symbolic vocabulary. Flat pattern indices
/// run channel-major: flat = channel * words_per_channel + config hash.
struct BorfTransform {
    std::vector<SaxConfig> configs;
    std::vector<Breakpoints> breakpoints;  // parallel to configs
    std::vector<long> offsets;             // hash-range start per config
    long words_per_channel = 0;
    int channel_count = 0;
    long vocab_size = 0;  // channel_count * words_per_channel

    static BorfTransform build(std::vector<SaxConfig> configs, int channels);

    long flat_index(int channel, long word_hash) const {
        return static_cast<long>(channel) * words_per_channel + word_hash;
    }

    struct Decoded {
        int channel = 0;
        Word word;
    };
    /// Inverts flat_index + hash_word; throws UnknownHash outside [0, vocab_size).
    Decoded decode(long flat) const;

    nlohmann::json to_json() const;
    static BorfTransform from_json(const nlohmann::json& doc);
};

/// Sparse pattern counts of one series plus where each pattern occurred.
/// std::map keeps key iteration in ascending flat order, which the engine
/// relies on for deterministic tie-breaking.
struct BorfVector {
    std::map<long, int> counts;
    std::map<long, std::vector<Alignment>> occurrences;
    long vocab_size = 0;

    int count(long flat) const {
        auto it = counts.find(flat);
        return it == counts.end() ? 0 : it->second;
    }
};

struct BorfMatrix {
    std::vector<BorfVector> rows;
    long vocab_size = 0;

    int size() const { return static_cast<int>(rows.size()); }
};

/// The window grid used throughout: windows are powers of two from 8 up to
/// the largest not exceeding the series length, word lengths 2 and 4,
/// alphabet 3, stride window/word_length, dilation 1.
std::vector<SaxConfig> auto_configure(int channels, int length);

BorfVector transform_one(const TimeSeries& series, const BorfTransform& transform);

/// Row-parallel transform (OpenMP) and the plain-loop reference.
BorfMatrix transform_dataset(const Dataset& data, const BorfTransform& transform);
BorfMatrix transform_dataset_serial(const Dataset& data, const BorfTransform& transform);

/// Mask over flat indices: 1 where any row has a positive count.
std::vector<std::uint8_t> column_presence(const BorfMatrix& matrix);

/// Dense copy of one row's counts (length vocab_size).
std::vector<double> to_dense(const BorfVector& row);

}  // namespace mascots
