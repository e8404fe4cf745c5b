#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mascots {

/// A single multichannel series: `channels x length` values stored
/// channel-major. Immutable in spirit; the engine mutates its own copies.
class TimeSeries {
public:
    TimeSeries() = default;
    TimeSeries(int channels, int length, std::vector<double> values,
               std::string id = {});

    int channels() const { return channels_; }
    int length() const { return length_; }
    const std::string& id() const { return id_; }

    double at(int channel, int t) const {
        return values_[static_cast<std::size_t>(channel) * length_ + t];
    }
    double& at(int channel, int t) {
        return values_[static_cast<std::size_t>(channel) * length_ + t];
    }
    std::span<const double> channel(int j) const {
        return {values_.data() + static_cast<std::size_t>(j) * length_,
                static_cast<std::size_t>(length_)};
    }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    /// Throws ShapeError if any value is NaN or infinite.
    void require_finite() const;

private:
    int channels_ = 0;
    int length_ = 0;
    std::vector<double> values_;
    std::string id_;
};

/// A labelled collection of same-shaped series. `class_names[label]` is the
/// display string the label index was mapped from.
struct Dataset {
    std::vector<TimeSeries> instances;
    std::vector<int> labels;
    std::vector<std::string> class_names;

    int size() const { return static_cast<int>(instances.size()); }
    int channels() const { return instances.empty() ? 0 : instances.front().channels(); }
    int length() const { return instances.empty() ? 0 : instances.front().length(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    /// Checks the shape/label invariants; throws ShapeError or EmptyDataset.
    void validate() const;
};

/// Parses the sktime `.ts` text format (subset: `@problemName`,
/// `@univariate` / `@dimensions`, `@classLabel`, `@seriesLength`, `@data`;
/// `#` comment lines). Channels are `:`-separated, values `,`-separated,
/// class label after the final `:`. When `@classLabel` declares label names
/// the mapping follows the declared order, otherwise labels are indexed by
/// first appearance in the data section. Missing values ('?') are rejected.
Dataset load_ts(const std::string& path);

/// Wide CSV, one instance per row: channels*length value cells followed by
/// one label cell. Values are reshaped channel-major.
Dataset load_csv(const std::string& path, int channels = 1);

/// Versioned JSON persistence; round-trips values bit-exactly.
void save_dataset_json(const Dataset& data, const std::string& path);
Dataset load_dataset_json(const std::string& path);

/// Loads by extension: .ts, .csv (with `channels`), .json.
Dataset load_dataset(const std::string& path, int channels = 1);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
    bool stratified = true;
};

/// Deterministic split: stratified (largest-remainder per-class allocation)
/// when every class has at least two members, otherwise a plain shuffle with
/// `stratified` reported false. Both sides are always non-empty.
TrainTestSplit train_test_split(const Dataset& data, double test_fraction,
                                std::uint64_t seed);

/// In-place per-channel z-normalization of every instance (opt-in; the
/// symbolic transform standardizes per window regardless).
void normalize_per_channel(Dataset& data);
void normalize_per_channel(TimeSeries& series);

}  // namespace mascots
