#include "mascots/synth.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "mascots/errors.hpp"
#include "mascots/rng.hpp"

namespace mascots {

Dataset make_cbf(int count, int length, std::uint64_t seed) {
    if (count < 1) throw ConfigError("instance count must be >= 1");
    if (length < 16) throw ConfigError("cylinder/bell/funnel needs length >= 16");

    const int start_lo = length / 8;        // 16 at length 128
    const int start_hi = length / 4;        // 32
    const int width_lo = length / 4;        // 32
    const int width_hi = (3 * length) / 4;  // 96
    const int end_cap = length - length / 16;

    Dataset data;
    data.class_names = {"cylinder", "bell", "funnel"};
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        const int cls = i % 3;
        const double amplitude = 6.0 + gaussian(rng);
        const int a = start_lo + static_cast<int>(bounded(rng, start_hi - start_lo + 1));
        const int width = width_lo + static_cast<int>(bounded(rng, width_hi - width_lo + 1));
        const int b = std::max(a + 2, std::min(a + width, end_cap));

        std::vector<double> values(length);
        for (int t = 0; t < length; ++t) {
            double shape = 0.0;
            if (t >= a && t < b) {
                const double progress = static_cast<double>(t - a) / (b - a);
                if (cls == 0) shape = 1.0;                    // cylinder: plateau
                else if (cls == 1) shape = progress;          // bell: ramp up
                else shape = 1.0 - progress;                  // funnel: ramp down
            }
            values[t] = amplitude * shape + gaussian(rng);
        }
        data.instances.emplace_back(1, length, std::move(values), "cbf-" + std::to_string(i));
        data.labels.push_back(cls);
    }
    data.validate();
    return data;
}

}  // namespace mascots
