#pragma once

#include <cstdint>

#include "mascots/dataset.hpp"

namespace mascots {

/// Classic cylinder/bell/funnel generator: a noisy plateau, ramp-up, or
/// ramp-down of random position, width, and amplitude on a standard-normal
/// background. Classes are assigned round-robin (0=cylinder, 1=bell,
/// 2=funnel); instance i draws from an independent stream mix_seed(seed, i),
/// so prefixes of a larger dataset are stable. Region bounds scale with
/// `length` (the classic values at length 128). Requires length >= 16.
Dataset make_cbf(int count, int length, std::uint64_t seed);

}  // namespace mascots
