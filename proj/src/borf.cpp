#include "mascots/borf.hpp"

#include <string>

#include "mascots/errors.hpp"

namespace mascots {

using nlohmann::json;

BorfTransform BorfTransform::build(std::vector<SaxConfig> configs, int channels) {
    if (configs.empty()) throw ConfigError("transform needs at least one configuration");
    if (channels < 1) throw ShapeError("transform needs at least one channel");
    for (std::size_t q = 0; q < configs.size(); ++q) {
        configs[q].config_id = static_cast<int>(q);
        configs[q].validate();
    }
    BorfTransform t;
    t.offsets = config_offsets(configs);
    t.words_per_channel = vocabulary_size(configs);
    t.channel_count = channels;
    t.vocab_size = t.words_per_channel * channels;
    t.breakpoints.reserve(configs.size());
    for (const auto& c : configs) t.breakpoints.push_back(gaussian_breakpoints(c.alphabet));
    t.configs = std::move(configs);
    return t;
}

BorfTransform::Decoded BorfTransform::decode(long flat) const {
    if (flat < 0 || flat >= vocab_size) {
        throw UnknownHash("flat index " + std::to_string(flat) + " outside vocabulary");
    }
    Decoded out;
    out.channel = static_cast<int>(flat / words_per_channel);
    out.word = unhash_word(flat % words_per_channel, configs);
    return out;
}

json BorfTransform::to_json() const {
    json doc;
    doc["channels"] = channel_count;
    json configs_json = json::array();
    for (const auto& c : configs) {
        configs_json.push_back({{"window", c.window},
                                {"word_length", c.word_length},
                                {"alphabet", c.alphabet},
                                {"stride", c.stride},
                                {"dilation", c.dilation}});
    }
    doc["configs"] = std::move(configs_json);
    doc["vocab_size"] = vocab_size;
    return doc;
}

BorfTransform BorfTransform::from_json(const json& doc) {
    std::vector<SaxConfig> configs;
    for (const auto& c : doc.at("configs")) {
        SaxConfig config;
        config.window = c.at("window").get<int>();
        config.word_length = c.at("word_length").get<int>();
        config.alphabet = c.at("alphabet").get<int>();
        config.stride = c.at("stride").get<int>();
        config.dilation = c.at("dilation").get<int>();
        configs.push_back(config);
    }
    auto t = build(std::move(configs), doc.at("channels").get<int>());
    if (doc.contains("vocab_size") && doc["vocab_size"].get<long>() != t.vocab_size) {
        throw SchemaError("transform vocab_size does not match its configurations");
    }
    return t;
}

std::vector<SaxConfig> auto_configure(int channels, int length) {
    (void)channels;  // the grid is shared by all channels
    if (length < 8) {
        throw SeriesTooShort("series length " + std::to_string(length) +
                             " is below the minimum window of 8");
    }
    std::vector<SaxConfig> configs;
    for (int window = 8; window <= length; window *= 2) {
        for (int word_length : {2, 4}) {
            SaxConfig c;
            c.window = window;
            c.word_length = word_length;
            c.alphabet = 3;
            c.stride = window / word_length;
            c.dilation = 1;
            c.config_id = static_cast<int>(configs.size());
            configs.push_back(c);
        }
    }
    return configs;
}

BorfVector transform_one(const TimeSeries& series, const BorfTransform& transform) {
    if (series.channels() != transform.channel_count) {
        throw ShapeError("series has " + std::to_string(series.channels()) +
                         " channels, transform expects " +
                         std::to_string(transform.channel_count));
    }
    BorfVector row;
    row.vocab_size = transform.vocab_size;
    for (int j = 0; j < series.channels(); ++j) {
        for (std::size_t q = 0; q < transform.configs.size(); ++q) {
            const SaxConfig& config = transform.configs[q];
            const Breakpoints& bp = transform.breakpoints[q];
            for (const auto& [start, values] : extract_windows(series, j, config)) {
                const Word word = sax_encode(window_stats(values, config), bp, config);
                const long flat = transform.flat_index(j, hash_word(word, transform.configs));
                row.counts[flat] += 1;
                row.occurrences[flat].push_back({j, start});
            }
        }
    }
    return row;
}

BorfMatrix transform_dataset(const Dataset& data, const BorfTransform& transform) {
    BorfMatrix matrix;
    matrix.vocab_size = transform.vocab_size;
    matrix.rows.resize(data.size());
    const int n = data.size();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        matrix.rows[i] = transform_one(data.instances[i], transform);
    }
    return matrix;
}

BorfMatrix transform_dataset_serial(const Dataset& data, const BorfTransform& transform) {
    BorfMatrix matrix;
    matrix.vocab_size = transform.vocab_size;
    matrix.rows.reserve(data.instances.size());
    for (const auto& ts : data.instances) matrix.rows.push_back(transform_one(ts, transform));
    return matrix;
}

std::vector<std::uint8_t> column_presence(const BorfMatrix& matrix) {
    std::vector<std::uint8_t> present(matrix.vocab_size, 0);
    for (const auto& row : matrix.rows) {
        for (const auto& [flat, count] : row.counts) {
            if (count > 0) present[flat] = 1;
        }
    }
    return present;
}

std::vector<double> to_dense(const BorfVector& row) {
    std::vector<double> dense(row.vocab_size, 0.0);
    for (const auto& [flat, count] : row.counts) dense[flat] = count;
    return dense;
}

}  // namespace mascots
