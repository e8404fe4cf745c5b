#include "mascots/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mascots/errors.hpp"
#include "mascots/logging.hpp"
#include "mascots/rng.hpp"

namespace mascots {

using nlohmann::json;

TimeSeries::TimeSeries(int channels, int length, std::vector<double> values, std::string id)
    : channels_(channels), length_(length), values_(std::move(values)), id_(std::move(id)) {
    if (channels_ < 1 || length_ < 1) {
        throw ShapeError("series must have at least one channel and one point");
    }
    if (values_.size() != static_cast<std::size_t>(channels_) * length_) {
        throw ShapeError("value buffer size does not match channels x length");
    }
}

void TimeSeries::require_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw ShapeError("series '" + id_ + "' contains a non-finite value");
        }
    }
}

void Dataset::validate() const {
    if (instances.empty()) throw EmptyDataset("dataset has no instances");
    if (labels.size() != instances.size()) {
        throw ShapeError("labels length does not match instance count");
    }
    if (num_classes() < 2) throw ShapeError("dataset must have at least 2 classes");
    const int d = instances.front().channels();
    const int m = instances.front().length();
    for (const auto& ts : instances) {
        if (ts.channels() != d || ts.length() != m) {
            throw ShapeError("all instances must share the same shape");
        }
    }
    for (int label : labels) {
        if (label < 0 || label >= num_classes()) {
            throw ShapeError("label index " + std::to_string(label) + " out of range");
        }
    }
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> parts;
    std::size_t begin = 0;
    for (;;) {
        std::size_t pos = s.find(delim, begin);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(begin));
            return parts;
        }
        parts.push_back(s.substr(begin, pos - begin));
        begin = pos + 1;
    }
}

double parse_value(const std::string& cell, int line_no) {
    const std::string t = trim(cell);
    if (t == "?" || t.empty()) {
        throw ParseError("missing value on line " + std::to_string(line_no));
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ParseError("cannot parse number '" + t + "' on line " + std::to_string(line_no));
    }
    if (!std::isfinite(value)) {
        throw ParseError("non-finite value on line " + std::to_string(line_no));
    }
    return value;
}

bool iequals(const std::string& a, const std::string& b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(),
                      [](char x, char y) { return std::tolower(x) == std::tolower(y); });
}

struct LabelMapper {
    std::vector<std::string> names;
    std::map<std::string, int> index;
    bool declared = false;  // names came from a @classLabel header

    void declare(const std::vector<std::string>& declared_names) {
        declared = true;
        for (const auto& name : declared_names) add(name);
    }

    int add(const std::string& name) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        const int id = static_cast<int>(names.size());
        names.push_back(name);
        index.emplace(name, id);
        return id;
    }

    int map(const std::string& name, int line_no) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        if (declared) {
            throw ParseError("label '" + name + "' on line " + std::to_string(line_no) +
                             " is not in the declared class list");
        }
        return add(name);
    }
};

void finish(Dataset& data) {
    data.validate();
    for (const auto& ts : data.instances) ts.require_finite();
}

}  // namespace

Dataset load_ts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    Dataset data;
    LabelMapper mapper;
    int declared_dims = 0;
    bool univariate_declared = false;
    bool in_data = false;
    int line_no = 0;
    int instance_no = 0;

    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;

        if (!in_data && line.front() == '@') {
            std::istringstream hdr(line);
            std::string keyword;
            hdr >> keyword;
            if (iequals(keyword, "@data")) {
                in_data = true;
            } else if (iequals(keyword, "@univariate")) {
                std::string flag;
                hdr >> flag;
                univariate_declared = iequals(flag, "true");
            } else if (iequals(keyword, "@dimension") || iequals(keyword, "@dimensions")) {
                hdr >> declared_dims;
            } else if (iequals(keyword, "@classLabel")) {
                std::string flag;
                hdr >> flag;
                if (!iequals(flag, "true")) {
                    throw ParseError("'" + path + "': @classLabel false (unlabelled data) is unsupported");
                }
                std::vector<std::string> names;
                std::string name;
                while (hdr >> name) names.push_back(name);
                if (!names.empty()) mapper.declare(names);
            } else if (iequals(keyword, "@timeStamps")) {
                std::string flag;
                hdr >> flag;
                if (iequals(flag, "true")) {
                    throw ParseError("'" + path + "': timestamped series are unsupported");
                }
            }
            // other directives (@problemName, @seriesLength, ...) are informational
            continue;
        }

        // data row: channel:channel:...:label
        auto parts = split(line, ':');
        if (parts.size() < 2) {
            throw ParseError("line " + std::to_string(line_no) + " has no ':'-separated label");
        }
        const std::string label = trim(parts.back());
        parts.pop_back();

        const int d = static_cast<int>(parts.size());
        if (univariate_declared && d != 1) {
            throw ShapeError("line " + std::to_string(line_no) +
                             ": univariate file with " + std::to_string(d) + " channels");
        }
        if (declared_dims > 0 && d != declared_dims) {
            throw ShapeError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(declared_dims) + " channels, got " + std::to_string(d));
        }

        std::vector<double> values;
        int m = -1;
        for (const auto& chan : parts) {
            const auto cells = split(chan, ',');
            if (m < 0) {
                m = static_cast<int>(cells.size());
            } else if (static_cast<int>(cells.size()) != m) {
                throw ShapeError("line " + std::to_string(line_no) + " has ragged channels (" +
                                 std::to_string(m) + " vs " + std::to_string(cells.size()) + ")");
            }
            for (const auto& cell : cells) values.push_back(parse_value(cell, line_no));
        }

        data.instances.emplace_back(d, m, std::move(values), std::to_string(instance_no));
        data.labels.push_back(mapper.map(label, line_no));
        ++instance_no;
    }

    data.class_names = mapper.names;
    finish(data);
    return data;
}

Dataset load_csv(const std::string& path, int channels) {
    if (channels < 1) throw ShapeError("channel count must be >= 1");
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    Dataset data;
    LabelMapper mapper;
    std::string line;
    int line_no = 0;
    int instance_no = 0;
    int expected_cols = -1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() < 2) {
            throw ParseError("line " + std::to_string(line_no) + " has no value columns");
        }
        if (expected_cols < 0) {
            expected_cols = static_cast<int>(cells.size());
            if ((expected_cols - 1) % channels != 0) {
                throw ShapeError("value column count " + std::to_string(expected_cols - 1) +
                                 " is not divisible by " + std::to_string(channels) + " channels");
            }
        } else if (static_cast<int>(cells.size()) != expected_cols) {
            throw ShapeError("line " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " columns, expected " +
                             std::to_string(expected_cols));
        }
        const std::string label = trim(cells.back());
        std::vector<double> values;
        values.reserve(cells.size() - 1);
        for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
            values.push_back(parse_value(cells[i], line_no));
        }
        const int m = static_cast<int>(values.size()) / channels;
        data.instances.emplace_back(channels, m, std::move(values), std::to_string(instance_no));
        data.labels.push_back(mapper.map(label, line_no));
        ++instance_no;
    }
    data.class_names = mapper.names;
    finish(data);
    return data;
}

void save_dataset_json(const Dataset& data, const std::string& path) {
    json doc;
    doc["format_version"] = 1;
    doc["kind"] = "dataset";
    doc["class_names"] = data.class_names;
    doc["labels"] = data.labels;
    json instances = json::array();
    for (const auto& ts : data.instances) {
        instances.push_back({{"id", ts.id()},
                             {"channels", ts.channels()},
                             {"length", ts.length()},
                             {"values", ts.values()}});
    }
    doc["instances"] = std::move(instances);
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
}

Dataset load_dataset_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1) {
        throw SchemaError("'" + path + "': unsupported dataset format version");
    }
    Dataset data;
    try {
        data.class_names = doc.at("class_names").get<std::vector<std::string>>();
        data.labels = doc.at("labels").get<std::vector<int>>();
        for (const auto& inst : doc.at("instances")) {
            data.instances.emplace_back(inst.at("channels").get<int>(),
                                        inst.at("length").get<int>(),
                                        inst.at("values").get<std::vector<double>>(),
                                        inst.at("id").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    finish(data);
    return data;
}

Dataset load_dataset(const std::string& path, int channels) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".ts") return load_ts(path);
    if (ext == ".csv") return load_csv(path, channels);
    if (ext == ".json") return load_dataset_json(path);
    throw ParseError("unrecognized dataset extension '" + ext + "' (expected .ts/.csv/.json)");
}

namespace {

Dataset subset(const Dataset& data, const std::vector<int>& indices) {
    Dataset out;
    out.class_names = data.class_names;
    out.instances.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (int i : indices) {
        out.instances.push_back(data.instances[i]);
        out.labels.push_back(data.labels[i]);
    }
    return out;
}

}  // namespace

TrainTestSplit train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    data.validate();
    const int n = data.size();
    if (n < 2) throw EmptyDataset("cannot split " + std::to_string(n) + " instance(s)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test fraction must be in (0,1)");
    }

    const int c = data.num_classes();
    std::vector<std::vector<int>> by_class(c);
    for (int i = 0; i < n; ++i) by_class[data.labels[i]].push_back(i);

    int test_total = static_cast<int>(std::llround(test_fraction * n));
    test_total = std::clamp(test_total, 1, n - 1);

    bool stratified = true;
    for (const auto& members : by_class) {
        if (members.size() < 2) stratified = false;
    }

    std::mt19937_64 rng(seed);
    std::vector<int> test_indices;

    if (stratified) {
        // Largest-remainder allocation of test seats across classes.
        std::vector<int> base(c);
        std::vector<std::pair<double, int>> remainders;
        int assigned = 0;
        for (int k = 0; k < c; ++k) {
            const double quota = static_cast<double>(by_class[k].size()) * test_total / n;
            base[k] = static_cast<int>(quota);
            assigned += base[k];
            remainders.emplace_back(quota - base[k], k);
        }
        std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int s = 0; s < test_total - assigned; ++s) base[remainders[s].second] += 1;

        for (int k = 0; k < c; ++k) {
            auto members = by_class[k];
            shuffle(members, rng);
            const int take = std::min<int>(base[k], static_cast<int>(members.size()));
            test_indices.insert(test_indices.end(), members.begin(), members.begin() + take);
        }
    } else {
        log::warn("a class has fewer than 2 members; falling back to unstratified split");
        std::vector<int> all(n);
        for (int i = 0; i < n; ++i) all[i] = i;
        shuffle(all, rng);
        test_indices.assign(all.begin(), all.begin() + test_total);
    }

    std::sort(test_indices.begin(), test_indices.end());
    std::vector<bool> in_test(n, false);
    for (int i : test_indices) in_test[i] = true;
    std::vector<int> train_indices;
    for (int i = 0; i < n; ++i) {
        if (!in_test[i]) train_indices.push_back(i);
    }

    TrainTestSplit result;
    result.train = subset(data, train_indices);
    result.test = subset(data, test_indices);
    result.stratified = stratified;
    return result;
}

void normalize_per_channel(TimeSeries& series) {
    const int m = series.length();
    for (int j = 0; j < series.channels(); ++j) {
        double sum = 0.0;
        for (int t = 0; t < m; ++t) sum += series.at(j, t);
        const double mean = sum / m;
        double sq = 0.0;
        for (int t = 0; t < m; ++t) sq += (series.at(j, t) - mean) * (series.at(j, t) - mean);
        double std_dev = std::sqrt(sq / m);
        if (std_dev < 1e-8) std_dev = 1.0;
        for (int t = 0; t < m; ++t) series.at(j, t) = (series.at(j, t) - mean) / std_dev;
    }
}

void normalize_per_channel(Dataset& data) {
    for (auto& ts : data.instances) normalize_per_channel(ts);
}

}  // namespace mascots
